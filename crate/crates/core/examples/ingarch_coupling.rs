//! Truncated-restart coupling for a Poisson INGARCH(1,1) with a covariate.
//!
//! Compares the simulated mean gap `E|Y_t - Y'_t|` with the omega curve.

use exomix::bounds::omega;
use exomix::contraction::{derived_decay, simulate_truncated_coupled, ContractionKind, ContractionModelSpec};
use exomix::process::{CovariateProcessSpec, EnvironmentSpec, ExogeneityMode, Marginal, NoiseSpec};
use exomix::rng::RngStream;

fn main() -> exomix::Result<()> {
    let spec = ContractionModelSpec {
        model: ContractionKind::IngarchIdentity,
        beta: 0.3,
        kappa: 0.4,
        delta: vec![0.1],
        truncation_depth: None,
        environment: EnvironmentSpec {
            covariates: CovariateProcessSpec::Iid {
                marginal: Marginal::Uniform {
                    low: 0.0,
                    high: 1.0,
                    dim: 1,
                },
            },
            noise: NoiseSpec::Uniform01 { dim: 1 },
            exogeneity: ExogeneityMode::Strict,
        },
    };
    let decay = derived_decay(&spec)?;
    println!("contraction sum a_i = {:.3}", decay.a_sum);

    let r = 20;
    let curve = simulate_truncated_coupled(&spec, r, r + 15, 20_000, &RngStream::new(11, 0))?;
    println!("{:>3} {:>9} {:>9} {:>9}", "s", "delta", "se", "omega");
    for (k, &t) in curve.times.iter().enumerate() {
        let w = omega(&decay.a, &decay.b, t, r, 50)?;
        println!(
            "{:>3} {:>9.5} {:>9.5} {:>9.5}",
            t - r,
            curve.delta_hat[k],
            curve.se[k],
            w
        );
    }
    Ok(())
}
