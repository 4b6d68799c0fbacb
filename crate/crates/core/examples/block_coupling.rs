//! Block coupling of a two-state softmax chain in an AR(1) environment.
//!
//! Prints the disagreement frequency at each block boundary next to
//! `(1 - eta_min)^s`.

use exomix::doeblin::{eta_min, mre_disagreement, softmax_family, Initialization};
use exomix::process::CovariateProcessSpec;
use exomix::rng::RngStream;

fn main() -> exomix::Result<()> {
    let theta = vec![vec![vec![0.0], vec![1.5]], vec![vec![0.5], vec![-1.0]]];
    let family = softmax_family(&theta, None)?;
    let env = CovariateProcessSpec::GaussianAr1Clipped {
        phi: 0.5,
        sigma: 1.0,
        bound: 1.0,
        dim: 1,
    };
    let eta = eta_min(&family, &env.support_grid(101)?)?;
    let (r, horizon) = (10, 30);
    let init = Initialization::default_burn_in(&family);
    let d = mre_disagreement(&family, &env, r, horizon, 0, init, 20_000, &RngStream::new(7, 0))?;

    println!("eta_min = {eta:.4}, mean realized eta = {:.4}", d.mean_eta);
    println!("{:>3} {:>9} {:>9} {:>9}", "s", "p_hat", "se", "bound");
    for (s, (p, se)) in d.p_hat.iter().zip(&d.se).enumerate() {
        println!("{s:>3} {p:>9.5} {se:>9.5} {:>9.5}", (1.0 - eta).powi(s as i32));
    }
    Ok(())
}
