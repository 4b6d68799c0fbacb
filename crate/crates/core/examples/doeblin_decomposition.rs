//! Split a transition matrix into its maximal minorizing part and a residual.

use exomix::doeblin::doeblin_decompose;
use exomix::matrix::StochasticMatrix;

fn main() -> exomix::Result<()> {
    let p = StochasticMatrix::from_rows(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.2, 0.2, 0.6]])?;
    let parts = doeblin_decompose(&p)?;
    println!("eta = {:.4}", parts.eta);
    if let Some(nu) = &parts.nu {
        println!("nu  = {nu:.4?}");
    }
    if let Some(r) = &parts.residual {
        for row in r.rows() {
            println!("R   {row:.4?}");
        }
    }
    let err = (0..3)
        .flat_map(|x| (0..3).map(move |y| (x, y)))
        .map(|(x, y)| (parts.reconstruct(x, y) - p.get(x, y)).abs())
        .fold(0.0, f64::max);
    println!("max reconstruction error {err:.1e}");
    Ok(())
}
