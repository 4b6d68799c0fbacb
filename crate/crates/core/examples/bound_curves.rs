//! Optimized restart bound on the mixing coefficients of Y for a finite
//! Markov environment, next to the exact coefficients of the environment.

use exomix::bounds::{thm1_bound_optimized, LagConvention};
use exomix::matrix::StochasticMatrix;
use exomix::mixing::alpha_markov_exact;
use exomix::process::{alpha_envelope, CovariateProcessSpec};

fn main() -> exomix::Result<()> {
    let transition = StochasticMatrix::from_rows(vec![vec![0.6, 0.4], vec![0.4, 0.6]])?;
    let env = CovariateProcessSpec::FiniteMarkov {
        states: vec![vec![0.0], vec![1.0]],
        transition: transition.clone(),
        stationary: None,
    };
    let pi = env.markov_stationary()?;
    let alpha = alpha_envelope(&env)?;
    let rho = 0.15;

    println!("{:>4} {:>12} {:>12} {:>4}", "n", "alpha_X(n)", "bound", "r");
    for n in (3..=30).step_by(3) {
        let ax = alpha_markov_exact(&pi, &transition, n)?;
        match thm1_bound_optimized(n, 1, rho, &alpha, LagConvention::default(), 1000)? {
            Some((b, r)) => println!("{n:>4} {ax:>12.3e} {:>12.4e} {r:>4}", b.value),
            None => println!("{n:>4} {ax:>12.3e} {:>12} {:>4}", "-", "-"),
        }
    }
    Ok(())
}
