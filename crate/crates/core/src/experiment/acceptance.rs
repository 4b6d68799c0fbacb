//! Catalog checks that do not fit a single experiment kind.

use std::path::Path;

use rayon::prelude::*;

use super::catalog::{self, CATALOG};
use super::config::ExperimentKind;
use super::report::{Outcome, Table, Verdict};
use super::runners::{self, Z};
use super::{parse_config, run_text, RunError};
use crate::contraction::verify_mean_lipschitz;
use crate::doeblin::doeblin_decompose;
use crate::error::Result;
use crate::maps::{backward_sample, forward_run, LinearIndex, MapModelKind, MapModelSpec, MultinomialProbs};
use crate::matrix::StochasticMatrix;
use crate::mixing::{alpha_exact, tv_distance, JointDistribution};
use crate::process::{CovariateProcessSpec, EnvironmentSpec, ExogeneityMode, Marginal, NoiseSpec};
use crate::rng::RngStream;

pub fn run(id: &str, rng: &RngStream, out_dir: &Path) -> std::result::Result<Outcome, RunError> {
    let out = match id {
        "doeblin-reconstruction" => doeblin_reconstruction(1000, rng)?,
        "coalescence-positivity" => coalescence_positivity(100_000, rng)?,
        "backward-forward" => backward_forward(100_000, rng)?,
        "poisson-lipschitz" => poisson_lipschitz()?,
        "contraction-shape" => contraction_shape(rng)?,
        "alpha-exact-sanity" => alpha_exact_sanity(1000, rng)?,
        "determinism" => determinism(out_dir)?,
        other => {
            return match catalog::find(other) {
                Some(entry) => Err(RunError::Invalid {
                    line: None,
                    message: format!(
                        "catalog entry {other:?} is a {} config, not an acceptance check",
                        entry.kind()
                    ),
                }),
                None => Err(RunError::UnknownExperiment(other.to_string())),
            }
        }
    };
    Ok(out)
}

fn random_stochastic(n: usize, g: &mut RngStream) -> Result<StochasticMatrix> {
    let rows = (0..n)
        .map(|_| {
            // About a third of the entries are zeroed to exercise sparse columns.
            let mut row: Vec<f64> = (0..n)
                .map(|_| if g.uniform() < 0.33 { 0.0 } else { g.uniform_open() })
                .collect();
            if row.iter().all(|v| *v == 0.0) {
                row[g.index(n)] = 1.0;
            }
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect();
    StochasticMatrix::from_rows(rows)
}

pub fn doeblin_reconstruction(count: usize, rng: &RngStream) -> Result<Outcome> {
    let mut g = rng.substream(0);
    let n = 5;
    let mut table = Table::new("doeblin", &["matrix", "eta", "reconstruction_error", "best_random_eta"]);
    let mut worst_err: f64 = 0.0;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut counterexample_ok = true;
    for i in 0..count {
        let p = random_stochastic(n, &mut g)?;
        let parts = doeblin_decompose(&p)?;
        let mut err: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                err = err.max((parts.reconstruct(x, y) - p.get(x, y)).abs());
            }
        }
        worst_err = worst_err.max(err);
        // A slightly larger constant with the optimal nu must break the minorization.
        let col_min: Vec<f64> = (0..n)
            .map(|y| (0..n).map(|x| p.get(x, y)).fold(1.0, f64::min))
            .collect();
        let nu = parts.nu.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
        let bigger = parts.eta * (1.0 + 1e-9) + 1e-12;
        counterexample_ok &= (0..n).any(|y| bigger * nu[y] > col_min[y]);
        // No random nu admits a larger constant.
        let mut best: f64 = 0.0;
        for _ in 0..10 {
            let w: Vec<f64> = (0..n).map(|_| g.uniform_open()).collect();
            let s: f64 = w.iter().sum();
            let feasible = (0..n).map(|y| col_min[y] / (w[y] / s)).fold(f64::INFINITY, f64::min);
            best = best.max(feasible);
        }
        worst_gap = worst_gap.max(best - parts.eta);
        table.push(vec![i as f64, parts.eta, err, best]);
    }
    let mut out = Outcome::default();
    out.tables.push(table);
    out.verdicts.push(Verdict::new(
        "reconstruction",
        worst_err <= 1e-12,
        format!("max reconstruction error {worst_err:.3e} over {count} matrices"),
    ));
    out.verdicts.push(Verdict::new(
        "maximality",
        counterexample_ok && worst_gap <= 1e-12,
        format!("enlarged constants always violate the minorization; best random-nu constant exceeds eta by {worst_gap:.3e}"),
    ));
    Ok(out)
}

fn uniform_env(noise: NoiseSpec) -> EnvironmentSpec {
    EnvironmentSpec {
        covariates: CovariateProcessSpec::Iid {
            marginal: Marginal::Uniform {
                low: -1.0,
                high: 1.0,
                dim: 1,
            },
        },
        noise,
        exogeneity: ExogeneityMode::Strict,
    }
}

fn index(intercept: f64, lag_effects: Vec<f64>, beta: f64) -> LinearIndex {
    LinearIndex {
        intercept,
        lags: vec![lag_effects],
        covariates: vec![beta],
    }
}

/// One multinomial, one ordinal and one multiple-choice model with full-support noise.
pub fn positivity_models() -> Vec<(&'static str, MapModelSpec)> {
    vec![
        (
            "multinomial",
            MapModelSpec {
                n_states: 3,
                lag: 1,
                model: MapModelKind::Multinomial {
                    probs: MultinomialProbs::Logistic {
                        scores: vec![
                            LinearIndex::constant(0.0),
                            index(0.2, vec![0.0, 0.8, -0.3], 0.5),
                            index(-0.4, vec![0.3, 0.0, 1.0], -0.7),
                        ],
                    },
                },
                environment: uniform_env(NoiseSpec::Uniform01 { dim: 1 }),
            },
        ),
        (
            "ordinal",
            MapModelSpec {
                n_states: 3,
                lag: 1,
                model: MapModelKind::Ordinal {
                    g: index(0.0, vec![-0.5, 0.0, 0.5], 0.8),
                    thresholds: vec![-0.6, 0.6],
                },
                environment: uniform_env(NoiseSpec::GaussianVector { dim: 1 }),
            },
        ),
        (
            "multiple_choice",
            MapModelSpec {
                n_states: 3,
                lag: 1,
                model: MapModelKind::MultipleChoice {
                    g: vec![
                        LinearIndex::constant(0.0),
                        index(0.3, vec![0.0, 0.6, 0.0], 0.5),
                        index(-0.2, vec![0.0, 0.0, 0.9], -0.4),
                    ],
                },
                environment: uniform_env(NoiseSpec::GumbelVector { dim: 3 }),
            },
        ),
    ]
}

pub fn coalescence_positivity(replicates: usize, rng: &RngStream) -> Result<Outcome> {
    let mut out = Outcome::default();
    for (i, (name, spec)) in positivity_models().into_iter().enumerate() {
        let (o, ..) = runners::coalescence_check(&spec, replicates, &rng.substream(i as u64))?;
        out.absorb(name, o);
    }
    Ok(out)
}

fn histogram(states: impl Iterator<Item = usize>, n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n];
    let mut total = 0.0;
    for s in states {
        h[s] += 1.0;
        total += 1.0;
    }
    h.iter().map(|c| c / total).collect()
}

fn backward_histogram(spec: &MapModelSpec, samples: usize, rng: &RngStream) -> Result<Vec<f64>> {
    let states = (0..samples as u64)
        .into_par_iter()
        .map(|i| Ok(backward_sample(spec, 10_000, &rng.substream(i))?.state))
        .collect::<Result<Vec<usize>>>()?;
    Ok(histogram(states.into_iter(), spec.n_states))
}

pub fn backward_forward_model() -> MapModelSpec {
    MapModelSpec {
        n_states: 2,
        lag: 1,
        model: MapModelKind::Multinomial {
            probs: MultinomialProbs::Logistic {
                scores: vec![LinearIndex::constant(0.0), index(0.3, vec![0.0, 0.8], 1.0)],
            },
        },
        environment: uniform_env(NoiseSpec::Uniform01 { dim: 1 }),
    }
}

pub fn backward_forward(samples: usize, rng: &RngStream) -> Result<Outcome> {
    let spec = backward_forward_model();
    let back = backward_histogram(&spec, samples, &rng.substream(0))?;
    let fwd = histogram(forward_run(&spec, 1000, samples, &rng.substream(1))?.into_iter(), 2);
    let tv = tv_distance(&back, &fwd)?.value();

    let free = MapModelSpec {
        n_states: 2,
        lag: 1,
        model: MapModelKind::Multinomial {
            probs: MultinomialProbs::Table {
                rows: vec![vec![0.7, 0.3], vec![0.3, 0.7]],
            },
        },
        environment: EnvironmentSpec {
            covariates: CovariateProcessSpec::Iid {
                marginal: Marginal::Discrete {
                    values: vec![vec![0.0]],
                    probs: vec![1.0],
                },
            },
            noise: NoiseSpec::Uniform01 { dim: 1 },
            exogeneity: ExogeneityMode::Strict,
        },
    };
    let free_hist = backward_histogram(&free, samples, &rng.substream(2))?;
    let se = (0.25 / samples as f64).sqrt();
    let dev = (free_hist[0] - 0.5).abs();

    let mut out = Outcome::default();
    let mut table = Table::new(
        "histograms",
        &["state", "backward", "forward", "covariate_free_backward"],
    );
    for k in 0..2 {
        table.push(vec![k as f64, back[k], fwd[k], free_hist[k]]);
    }
    out.tables.push(table);
    out.verdicts.push(Verdict::new(
        "backward_forward_tv",
        tv < 0.02,
        format!("TV(backward, forward) = {tv:.5}"),
    ));
    out.verdicts.push(Verdict::new(
        "covariate_free_stationary",
        dev <= Z * se,
        format!("|p_hat(0) - 0.5| = {dev:.5} vs 3 se = {:.5}", Z * se),
    ));
    Ok(out)
}

pub fn poisson_lipschitz() -> Result<Outcome> {
    let mut table = Table::new("poisson", &["lambda", "lambda_prime", "mean_abs_diff", "abs_mean_diff"]);
    let mut worst: f64 = 0.0;
    for i in 1..=20u32 {
        let l = 0.5 * i as f64;
        let lp = 0.5 * ((7 * i) % 20 + 1) as f64;
        let (exact, gap) = verify_mean_lipschitz(l, lp)?;
        worst = worst.max((exact - gap).abs());
        table.push(vec![l, lp, exact, gap]);
    }
    let mut out = Outcome::default();
    out.tables.push(table);
    out.verdicts.push(Verdict::new(
        "mean_lipschitz",
        worst <= 1e-10,
        format!("max |E|diff| - |lambda - lambda'|| = {worst:.3e} over 20 pairs"),
    ));
    Ok(out)
}

pub const CONTRACTION_CONFIGS: [(&str, &str); 2] = [
    (
        "ingarch_identity",
        include_str!("../../configs/contraction-ingarch-identity.toml"),
    ),
    ("binary", include_str!("../../configs/contraction-binary.toml")),
];

pub fn contraction_shape(rng: &RngStream) -> std::result::Result<Outcome, RunError> {
    let mut out = Outcome::default();
    for (i, (name, text)) in CONTRACTION_CONFIGS.iter().enumerate() {
        let cfg = parse_config(text)?;
        let ExperimentKind::ContractionCoupling(c) = &cfg.experiment else {
            unreachable!("shipped contraction config has another kind");
        };
        let o = runners::contraction_coupling(c, &rng.substream(i as u64))?;
        out.absorb(name, o);
    }
    Ok(out)
}

pub fn alpha_exact_sanity(count: usize, rng: &RngStream) -> Result<Outcome> {
    // Dyadic marginals keep every product exact in floating point.
    let prod = JointDistribution::product(&[0.25, 0.75], &[0.5, 0.25, 0.25])?;
    let a_prod = alpha_exact(&prod)?;
    let corr = JointDistribution::from_rows(vec![vec![0.5, 0.0], vec![0.0, 0.5]])?;
    let a_corr = alpha_exact(&corr)?;
    let mut g = rng.substream(0);
    let mut max_alpha: f64 = 0.0;
    let mut max_product: f64 = 0.0;
    for _ in 0..count {
        let r = 2 + g.index(5);
        let c = 2 + g.index(5);
        let w: Vec<f64> = (0..r * c).map(|_| g.uniform_open()).collect();
        let s: f64 = w.iter().sum();
        let j = JointDistribution::new(r, c, w.iter().map(|v| v / s).collect())?;
        max_alpha = max_alpha.max(alpha_exact(&j)?);
        let mu: Vec<f64> = (0..r).map(|_| g.uniform_open()).collect();
        let nu: Vec<f64> = (0..c).map(|_| g.uniform_open()).collect();
        let (sm, sn) = (mu.iter().sum::<f64>(), nu.iter().sum::<f64>());
        let mu: Vec<f64> = mu.iter().map(|v| v / sm).collect();
        let nu: Vec<f64> = nu.iter().map(|v| v / sn).collect();
        max_product = max_product.max(alpha_exact(&JointDistribution::product(&mu, &nu)?)?);
    }
    let mut out = Outcome::default();
    out.verdicts.push(Verdict::new(
        "product_zero",
        a_prod == 0.0,
        format!("alpha = {a_prod:e}"),
    ));
    out.verdicts.push(Verdict::new(
        "correlated_binary",
        a_corr == 0.25,
        format!("alpha = {a_corr}"),
    ));
    out.verdicts.push(Verdict::new(
        "universal_quarter",
        max_alpha <= 0.25,
        format!("max alpha over {count} random joints = {max_alpha:.6}"),
    ));
    out.note("max_alpha_random_products", max_product);
    Ok(out)
}

/// Runs every other catalog entry twice and compares CSV bytes.
pub fn determinism(out_dir: &Path) -> std::result::Result<Outcome, RunError> {
    let mut table = Table::new("determinism", &["criterion", "csv_files", "identical"]);
    let mut mismatched = Vec::new();
    for entry in CATALOG.iter().filter(|e| e.id != "determinism") {
        let a = out_dir.join("first").join(entry.id);
        let b = out_dir.join("second").join(entry.id);
        run_text(entry.config, Some(&a))?;
        run_text(entry.config, Some(&b))?;
        let (files, same) = compare_csv_dirs(&a, &b)?;
        if !same {
            mismatched.push(entry.id);
        }
        table.push(vec![entry.criterion as f64, files as f64, same as u8 as f64]);
    }
    let mut out = Outcome::default();
    out.tables.push(table);
    out.verdicts.push(Verdict::new(
        "byte_identical_csv",
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "every CSV matched byte for byte".to_string()
        } else {
            format!("CSV bytes differ for {}", mismatched.join(", "))
        },
    ));
    Ok(out)
}

/// Number of CSV files in `a` and whether `b` holds byte-identical copies of exactly those.
pub fn compare_csv_dirs(a: &Path, b: &Path) -> std::result::Result<(usize, bool), RunError> {
    let list = |d: &Path| -> std::result::Result<Vec<String>, RunError> {
        let mut names: Vec<String> = std::fs::read_dir(d)
            .map_err(|e| RunError::io(d, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        names.sort();
        Ok(names)
    };
    let (na, nb) = (list(a)?, list(b)?);
    if na != nb {
        return Ok((na.len(), false));
    }
    for name in &na {
        let read = |d: &Path| std::fs::read(d.join(name)).map_err(|e| RunError::io(&d.join(name), e));
        if read(a)? != read(b)? {
            return Ok((na.len(), false));
        }
    }
    Ok((na.len(), true))
}
