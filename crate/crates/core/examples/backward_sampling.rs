//! Coupling from the past for a binary logistic model with a uniform covariate,
//! checked against a long forward run.

use exomix::maps::{
    backward_sample, coalescence_lower_bound, estimate_rho, forward_run, LinearIndex, MapModelKind, MapModelSpec,
    MultinomialProbs,
};
use exomix::process::{CovariateProcessSpec, EnvironmentSpec, ExogeneityMode, Marginal, NoiseSpec};
use exomix::rng::RngStream;

fn main() -> exomix::Result<()> {
    let spec = MapModelSpec {
        n_states: 2,
        lag: 1,
        model: MapModelKind::Multinomial {
            probs: MultinomialProbs::Logistic {
                scores: vec![
                    LinearIndex::constant(0.0),
                    LinearIndex {
                        intercept: 0.3,
                        lags: vec![vec![0.0, 0.8]],
                        covariates: vec![1.0],
                    },
                ],
            },
        },
        environment: EnvironmentSpec {
            covariates: CovariateProcessSpec::Iid {
                marginal: Marginal::Uniform {
                    low: -1.0,
                    high: 1.0,
                    dim: 1,
                },
            },
            noise: NoiseSpec::Uniform01 { dim: 1 },
            exogeneity: ExogeneityMode::Strict,
        },
    };

    let rho = estimate_rho(&spec, 1, 50_000, &RngStream::new(1, 0))?;
    println!(
        "1 - rho_hat = {:.4} (se {:.4}), constructive lower bound {:.4}",
        rho.coalescence_prob(),
        rho.standard_error,
        coalescence_lower_bound(&spec)?
    );

    let n = 20_000;
    let root = RngStream::new(2, 0);
    let mut back = [0usize; 2];
    let mut max_depth = 0;
    for i in 0..n {
        let s = backward_sample(&spec, 10_000, &root.substream(i))?;
        back[s.state] += 1;
        max_depth = max_depth.max(s.depth);
    }
    let fwd = forward_run(&spec, 1000, n as usize, &RngStream::new(3, 0))?;
    let ones = fwd.iter().filter(|&&y| y == 1).count();
    println!(
        "P(Y = 1): backward {:.4}, forward {:.4}",
        back[1] as f64 / n as f64,
        ones as f64 / n as f64
    );
    println!("deepest backward window: {max_depth}");
    Ok(())
}
