//! Infinite-memory models driven by a contracting intensity.
//!
//! The intensity follows `lambda_t = beta lambda_{t-1} + kappa Y_{t-1} + delta . X_{t-1}`,
//! which is the series `sum_{i>=1} beta^(i-1) (kappa Y_{t-i} + delta . X_{t-i})`.
//! The response is `1{U > 1 - F(lambda)}` for binary models, a Poisson
//! quantile for INGARCH, and `log(1 + count)` with intensity `exp(lambda)`
//! for log-INGARCH.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::decay::DecaySequence;
use crate::error::{Error, Result};
use crate::process::{EnvironmentSampler, EnvironmentSpec, NoiseSpec};
use crate::rng::RngStream;

/// Distribution function of a binary model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Logistic,
    Gaussian,
}

impl Link {
    pub fn cdf(self, v: f64) -> f64 {
        match self {
            Self::Logistic => 1.0 / (1.0 + (-v).exp()),
            Self::Gaussian => Normal::new(0.0, 1.0).expect("standard normal").cdf(v),
        }
    }

    /// Lipschitz constant of the distribution function.
    pub fn lipschitz(self) -> f64 {
        match self {
            Self::Logistic => 0.25,
            Self::Gaussian => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContractionKind {
    Binary { link: Link },
    IngarchIdentity,
    IngarchLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionModelSpec {
    pub model: ContractionKind,
    pub beta: f64,
    pub kappa: f64,
    pub delta: Vec<f64>,
    /// Terms kept by [`lambda_eval`]; defaults to [`default_truncation_depth`].
    #[serde(default)]
    pub truncation_depth: Option<usize>,
    pub environment: EnvironmentSpec,
}

/// Smallest depth with `|beta|^depth <= 1e-12`.
pub fn default_truncation_depth(beta: f64) -> usize {
    let b = beta.abs();
    if b == 0.0 {
        return 1;
    }
    ((1e-12f64).ln() / b.ln()).ceil().max(1.0) as usize
}

impl ContractionModelSpec {
    /// `L_F` for binary models, one for INGARCH.
    pub fn lipschitz(&self) -> f64 {
        match self.model {
            ContractionKind::Binary { link } => link.lipschitz(),
            _ => 1.0,
        }
    }

    pub fn truncation_depth(&self) -> usize {
        self.truncation_depth
            .unwrap_or_else(|| default_truncation_depth(self.beta))
    }

    /// Euclidean norm of `delta`.
    pub fn delta_norm(&self) -> f64 {
        self.delta.iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        if self.delta.len() != self.environment.covariates.dim() {
            return Err(Error::Dimension(format!(
                "delta has {} entries for covariates of dimension {}",
                self.delta.len(),
                self.environment.covariates.dim()
            )));
        }
        if !matches!(self.environment.noise, NoiseSpec::Uniform01 { .. }) {
            return Err(Error::InvalidParameter(
                "contraction models need uniform01 noise".into(),
            ));
        }
        if self.truncation_depth == Some(0) {
            return Err(Error::InvalidParameter("truncation_depth must be >= 1".into()));
        }
        let contraction = self.beta.abs() + self.kappa.abs() * self.lipschitz();
        if !(contraction < 1.0) {
            let rule = match self.model {
                ContractionKind::Binary { .. } => "|beta| + |kappa| L_F < 1",
                _ => "|beta| + |kappa| < 1",
            };
            return Err(Error::InvalidParameter(format!(
                "contraction condition {rule} fails: value {contraction}"
            )));
        }
        if matches!(self.model, ContractionKind::IngarchIdentity)
            && (self.beta < 0.0 || self.kappa < 0.0 || self.delta.iter().any(|d| *d < 0.0))
        {
            return Err(Error::InvalidParameter(
                "identity INGARCH needs nonnegative beta, kappa and delta".into(),
            ));
        }
        Ok(())
    }

    /// Contraction factor of the observation-driven recursion.
    pub fn contraction(&self) -> f64 {
        self.beta.abs() + self.kappa.abs() * self.lipschitz()
    }

    /// Steps from a fixed start after which the start's influence is below 1e-12.
    pub fn default_burn_in(&self) -> usize {
        let c = self.contraction();
        if c == 0.0 {
            return 1;
        }
        ((1e-12f64).ln() / c.ln()).ceil().max(1.0) as usize
    }
}

/// The sequences `a_i = L |kappa| |beta|^(i-1)` and `b_j = L |delta| |beta|^(j-1)`
/// (both zero at index 0) and `sum a_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedDecay {
    pub a: DecaySequence,
    pub b: DecaySequence,
    pub a_sum: f64,
}

pub fn derived_decay(spec: &ContractionModelSpec) -> Result<DerivedDecay> {
    spec.validate()?;
    let l = spec.lipschitz();
    let beta = spec.beta.abs();
    let a = DecaySequence::geometric_from_one(l * spec.kappa.abs(), beta)?;
    let b = DecaySequence::geometric_from_one(l * spec.delta_norm(), beta)?;
    let a_sum = a.total()?;
    if !(a_sum < 1.0) {
        return Err(Error::InvalidParameter(format!("sum of a_i is {a_sum} >= 1")));
    }
    Ok(DerivedDecay { a, b, a_sum })
}

/// Truncated series from the most recent values `y_hist[0] = y_{t-1}`,
/// `x_hist[0] = x_{t-1}`; missing history counts as zero.
pub fn lambda_eval(spec: &ContractionModelSpec, y_hist: &[f64], x_hist: &[Vec<f64>]) -> f64 {
    let depth = spec.truncation_depth();
    let mut acc = 0.0;
    let mut w = 1.0;
    for i in 0..depth {
        let y = y_hist.get(i).copied().unwrap_or(0.0);
        let xd = x_hist
            .get(i)
            .map_or(0.0, |x| x.iter().zip(&spec.delta).map(|(a, b)| a * b).sum());
        acc += w * (spec.kappa * y + xd);
        w *= spec.beta;
    }
    acc
}

/// `1` iff `u > 1 - F(lambda)`.
pub fn binary_step(lambda: f64, u: f64, link: Link) -> u8 {
    (u > 1.0 - link.cdf(lambda)) as u8
}

/// Smallest `k` with `P(N <= k) >= u` for `N ~ Poisson(lambda)`.
pub fn poisson_inv_cdf(lambda: f64, u: f64) -> Result<u64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Poisson mean must be positive, got {lambda}"
        )));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!("u must lie in [0, 1], got {u}")));
    }
    // Below the start, the neglected mass is far under double precision.
    let start = if lambda < 500.0 {
        0
    } else {
        (lambda - 40.0 * lambda.sqrt() - 40.0).max(0.0).floor() as u64
    };
    let mut k = start;
    let mut pmf = ((k as f64) * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)).exp();
    let mut cdf = pmf;
    while cdf < u {
        k += 1;
        pmf *= lambda / k as f64;
        let next = cdf + pmf;
        if next == cdf && k as f64 > lambda {
            // Saturated above the mode: u is within rounding of 1.
            break;
        }
        cdf = next;
    }
    Ok(k)
}

/// `P(N <= k)` accumulated in ascending order.
fn poisson_cdf_table(lambda: f64, kmax: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax as usize + 1);
    let mut pmf = (-lambda).exp();
    let mut cdf = 0.0;
    for k in 0..=kmax {
        if k > 0 {
            pmf *= lambda / k as f64;
        }
        cdf += pmf;
        out.push(cdf.min(1.0));
    }
    out
}

/// Recursion state `(lambda_{t-1}, Y_{t-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContractionState {
    pub lambda: f64,
    pub y: f64,
}

/// Output of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub y: f64,
    pub lambda: f64,
    /// Poisson count behind `y` for INGARCH models.
    pub count: Option<u64>,
}

/// `lambda_t` from the previous state and `X_{t-1}`, then `Y_t` from the uniform `u`.
pub fn step(spec: &ContractionModelSpec, prev: &ContractionState, x_prev: &[f64], u: f64) -> Result<StepOutput> {
    let xd: f64 = x_prev.iter().zip(&spec.delta).map(|(a, b)| a * b).sum();
    let lambda = spec.beta * prev.lambda + spec.kappa * prev.y + xd;
    Ok(match spec.model {
        ContractionKind::Binary { link } => StepOutput {
            y: binary_step(lambda, u, link) as f64,
            lambda,
            count: None,
        },
        ContractionKind::IngarchIdentity => {
            if lambda < 0.0 {
                return Err(Error::InvalidParameter(format!("negative intensity {lambda}")));
            }
            let count = if lambda == 0.0 { 0 } else { poisson_inv_cdf(lambda, u)? };
            StepOutput {
                y: count as f64,
                lambda,
                count: Some(count),
            }
        }
        ContractionKind::IngarchLog => {
            let count = poisson_inv_cdf(lambda.exp(), u)?;
            StepOutput {
                y: (count as f64).ln_1p(),
                lambda,
                count: Some(count),
            }
        }
    })
}

/// Mean distance and disagreement frequency of the truncated coupling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingDecayCurve {
    pub restart: usize,
    /// `t = restart + s` for `s = 1, 2, ...`.
    pub times: Vec<usize>,
    /// Mean of `|Y_t - Y'_t|` (the discrete metric for binary models).
    pub delta_hat: Vec<f64>,
    pub disagree_hat: Vec<f64>,
    /// Standard error of `delta_hat`.
    pub se: Vec<f64>,
    pub replicates: usize,
}

/// Replicates per work unit; fixed so results do not depend on the thread count.
const CHUNK: usize = 1024;

/// `Y` runs from a burn-in; `Y'` is zero up to `r` with `lambda'_r = 0`, sees
/// covariates only from `X_r` on, and shares every uniform after `r` with `Y`.
pub fn simulate_truncated_coupled(
    spec: &ContractionModelSpec,
    r: usize,
    horizon: usize,
    replicates: usize,
    rng: &RngStream,
) -> Result<CouplingDecayCurve> {
    spec.validate()?;
    if !(0 < r && r < horizon) {
        return Err(Error::InvalidParameter(format!(
            "restart index must satisfy 0 < r < horizon, got r = {r}, horizon = {horizon}"
        )));
    }
    if replicates == 0 {
        return Err(Error::InvalidParameter("replicates must be >= 1".into()));
    }
    let len = horizon - r;
    let burn = spec.default_burn_in();
    let chunks = replicates.div_ceil(CHUNK);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sums = vec![[0.0f64; 3]; len];
            for i in c * CHUNK..((c + 1) * CHUNK).min(replicates) {
                let (delta, differ) = coupled_replicate(spec, r, horizon, burn, &rng.substream(i as u64))?;
                for s in 0..len {
                    sums[s][0] += delta[s];
                    sums[s][1] += delta[s] * delta[s];
                    sums[s][2] += differ[s] as u8 as f64;
                }
            }
            Ok(sums)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![[0.0f64; 3]; len];
    for sums in partial {
        for (t, s) in total.iter_mut().zip(sums) {
            for k in 0..3 {
                t[k] += s[k];
            }
        }
    }
    let n = replicates as f64;
    let delta_hat: Vec<f64> = total.iter().map(|s| s[0] / n).collect();
    let se = total
        .iter()
        .zip(&delta_hat)
        .map(|(s, m)| {
            if replicates < 2 {
                return 0.0;
            }
            let var = ((s[1] - n * m * m) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(CouplingDecayCurve {
        restart: r,
        times: (r + 1..=horizon).collect(),
        delta_hat,
        disagree_hat: total.iter().map(|s| s[2] / n).collect(),
        se,
        replicates,
    })
}

fn coupled_replicate(
    spec: &ContractionModelSpec,
    r: usize,
    horizon: usize,
    burn: usize,
    rng: &RngStream,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut env = EnvironmentSampler::new(&spec.environment, rng)?;
    let mut state = ContractionState::default();
    // X_{t-1} for the step to time t; times run from -burn.
    let mut x_prev = env.next_step().x.value;
    for _ in 0..burn + r {
        let e = env.next_step();
        let out = step(spec, &state, &x_prev, e.eps[0])?;
        state = ContractionState {
            lambda: out.lambda,
            y: out.y,
        };
        x_prev = e.x.value;
    }
    // Now state is (lambda_r, Y_r) and x_prev is X_r.
    let mut prime = ContractionState::default();
    let mut delta = Vec::with_capacity(horizon - r);
    let mut differ = Vec::with_capacity(horizon - r);
    for _ in r + 1..=horizon {
        let e = env.next_step();
        let out = step(spec, &state, &x_prev, e.eps[0])?;
        let out_p = step(spec, &prime, &x_prev, e.eps[0])?;
        state = ContractionState {
            lambda: out.lambda,
            y: out.y,
        };
        prime = ContractionState {
            lambda: out_p.lambda,
            y: out_p.y,
        };
        delta.push((out.y - out_p.y).abs());
        differ.push(out.y != out_p.y);
        x_prev = e.x.value;
    }
    Ok((delta, differ))
}

/// Exact `E|Q_lambda(U) - Q_lambda'(U)|` under the comonotone coupling,
/// `sum_k |F_lambda(k) - F_lambda'(k)|`, with the series stopped once the
/// remaining tail is below 1e-12; returned with the bound `|lambda - lambda'|`.
pub fn verify_mean_lipschitz(lambda: f64, lambda_prime: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda_prime > 0.0) {
        return Err(Error::InvalidParameter("both means must be positive".into()));
    }
    let hi = lambda.max(lambda_prime);
    let kmax = (hi + 40.0 * hi.sqrt() + 60.0).ceil() as u64;
    let a = poisson_cdf_table(lambda, kmax);
    let b = poisson_cdf_table(lambda_prime, kmax);
    let exact = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    Ok((exact, (lambda - lambda_prime).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{CovariateProcessSpec, ExogeneityMode, Marginal};

    fn env(values: Vec<Vec<f64>>, probs: Vec<f64>) -> EnvironmentSpec {
        EnvironmentSpec {
            covariates: CovariateProcessSpec::Iid {
                marginal: Marginal::Discrete { values, probs },
            },
            noise: NoiseSpec::Uniform01 { dim: 1 },
            exogeneity: ExogeneityMode::Strict,
        }
    }

    fn spec(model: ContractionKind, beta: f64, kappa: f64, delta: f64) -> ContractionModelSpec {
        ContractionModelSpec {
            model,
            beta,
            kappa,
            delta: vec![delta],
            truncation_depth: Some(10),
            environment: env(vec![vec![1.0], vec![2.0]], vec![0.5, 0.5]),
        }
    }

    #[test]
    fn lambda_examples() {
        let s = spec(ContractionKind::IngarchIdentity, 0.5, 0.0, 0.0);
        assert_eq!(lambda_eval(&s, &[3.0, 4.0], &[vec![1.0]]), 0.0);
        let s = spec(ContractionKind::IngarchIdentity, 0.0, 0.4, 0.1);
        assert!((lambda_eval(&s, &[3.0, 4.0], &[vec![2.0], vec![5.0]]) - (1.2 + 0.2)).abs() < 1e-15);
        let s = ContractionModelSpec {
            kappa: 1.0,
            delta: vec![0.0],
            model: ContractionKind::Binary { link: Link::Logistic },
            ..spec(ContractionKind::IngarchIdentity, 0.5, 0.0, 0.0)
        };
        let v = lambda_eval(&s, &[1.0; 20], &[]);
        assert!((v - 2.0 * (1.0 - 2f64.powi(-10))).abs() < 1e-15);
    }

    #[test]
    fn binary_examples() {
        assert_eq!(binary_step(0.0, 0.6, Link::Logistic), 1);
        assert_eq!(binary_step(0.0, 0.4, Link::Logistic), 0);
        assert_eq!(binary_step(5.0, 0.0, Link::Logistic), 0);
        assert!((Link::Logistic.cdf(3f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(binary_step(3f64.ln(), 0.3, Link::Logistic), 1);
        assert!((Link::Gaussian.cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn poisson_examples() {
        assert_eq!(poisson_inv_cdf(1.0, 0.3).unwrap(), 0);
        assert_eq!(poisson_inv_cdf(1.0, 0.5).unwrap(), 1);
        assert_eq!(poisson_inv_cdf(1.0, 0.2).unwrap(), 0);
        assert_eq!(poisson_inv_cdf(1.0, 0.9).unwrap(), 2);
        assert_eq!(poisson_inv_cdf(2.5, 0.0).unwrap(), 0);
        assert!(poisson_inv_cdf(0.0, 0.5).is_err());
        assert!(poisson_inv_cdf(-1.0, 0.5).is_err());
        // Median of a large Poisson sits near lambda.
        let k = poisson_inv_cdf(10_000.0, 0.5).unwrap();
        assert!((k as f64 - 10_000.0).abs() < 2.0);
        assert!(poisson_inv_cdf(50.0, 1.0).unwrap() > 50);
    }

    #[test]
    fn step_examples() {
        let s = spec(ContractionKind::IngarchLog, 0.0, 0.0, 0.0);
        let out = step(&s, &ContractionState::default(), &[1.0], 0.3).unwrap();
        assert_eq!(out.count, Some(0));
        assert_eq!(out.y, 0.0);
        let out = step(&s, &ContractionState::default(), &[1.0], 0.9).unwrap();
        assert_eq!(out.y, (out.count.unwrap() as f64).ln_1p());

        // No feedback: iid Poisson(2) through a constant covariate.
        let s = ContractionModelSpec {
            environment: env(vec![vec![1.0]], vec![1.0]),
            ..spec(ContractionKind::IngarchIdentity, 0.0, 0.0, 2.0)
        };
        let root = RngStream::new(1, 0);
        let mut rng = root.substream(0);
        let n = 50_000;
        let mean: f64 = (0..n)
            .map(|_| step(&s, &ContractionState::default(), &[1.0], rng.uniform()).unwrap().y)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn recursion_matches_series() {
        for model in [
            ContractionKind::Binary { link: Link::Gaussian },
            ContractionKind::IngarchIdentity,
        ] {
            let mut s = spec(model, 0.6, 0.3, 0.2);
            s.truncation_depth = Some(200);
            let mut rng = RngStream::new(2, 0);
            let mut state = ContractionState::default();
            let mut ys = Vec::new();
            let mut xs = Vec::new();
            for _ in 0..60 {
                let x = vec![rng.uniform() * 2.0];
                let out = step(&s, &state, &x, rng.uniform()).unwrap();
                // lambda_t uses Y_{t-1}, ... and X_{t-1}, ...
                xs.insert(0, x);
                let direct = lambda_eval(&s, &ys, &xs);
                assert!((out.lambda - direct).abs() < 1e-12);
                ys.insert(0, out.y);
                state = ContractionState {
                    lambda: out.lambda,
                    y: out.y,
                };
            }
        }
    }

    #[test]
    fn one_step_contraction_binary() {
        let s = spec(ContractionKind::Binary { link: Link::Logistic }, 0.5, 0.3, 0.1);
        let d = derived_decay(&s).unwrap();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..200 {
            let base: Vec<f64> = (0..12).map(|_| (rng.uniform() < 0.5) as u8 as f64).collect();
            let xs: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.uniform()]).collect();
            for i in 0..12 {
                let mut other = base.clone();
                other[i] = 1.0 - other[i];
                let q = Link::Logistic.cdf(lambda_eval(&s, &base, &xs));
                let q2 = Link::Logistic.cdf(lambda_eval(&s, &other, &xs));
                assert!((q - q2).abs() <= d.a.at(i + 1).unwrap() + 1e-15);
            }
        }
    }

    #[test]
    fn derived_sequences() {
        let s = spec(ContractionKind::IngarchIdentity, 0.3, 0.4, 0.1);
        let d = derived_decay(&s).unwrap();
        assert_eq!(d.a.at(0).unwrap(), 0.0);
        assert!((d.a.at(1).unwrap() - 0.4).abs() < 1e-15);
        assert!((d.a.at(3).unwrap() - 0.4 * 0.09).abs() < 1e-15);
        assert!((d.b.at(2).unwrap() - 0.03).abs() < 1e-15);
        assert!((d.a_sum - 0.4 / 0.7).abs() < 1e-15);
        let bad = spec(ContractionKind::IngarchIdentity, 0.6, 0.5, 0.1);
        assert!(bad.validate().is_err());
        let b = spec(ContractionKind::Binary { link: Link::Logistic }, 0.5, 0.3, 0.1);
        assert!((derived_decay(&b).unwrap().a.at(1).unwrap() - 0.075).abs() < 1e-15);
    }

    #[test]
    fn trivial_couplings_agree() {
        let s = spec(ContractionKind::IngarchIdentity, 0.0, 0.0, 0.0);
        // Zero intensity everywhere: both paths are identically zero.
        let c = simulate_truncated_coupled(&s, 5, 15, 200, &RngStream::new(4, 0)).unwrap();
        assert!(c.delta_hat.iter().all(|v| *v == 0.0));
        let s = spec(ContractionKind::Binary { link: Link::Logistic }, 0.7, 0.0, 0.0);
        let c = simulate_truncated_coupled(&s, 5, 15, 200, &RngStream::new(4, 0)).unwrap();
        assert!(c.delta_hat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn coupling_curve_decreases() {
        let s = spec(ContractionKind::IngarchIdentity, 0.3, 0.4, 0.1);
        let c = simulate_truncated_coupled(&s, 10, 25, 4000, &RngStream::new(5, 0)).unwrap();
        assert!(c.delta_hat[0] > 0.0);
        for w in c.delta_hat.windows(2).zip(c.se.windows(2)) {
            let ((a, b), (sa, sb)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
            assert!(b <= a + 3.0 * (sa * sa + sb * sb).sqrt());
        }
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(verify_mean_lipschitz(2.0, 2.0).unwrap().0, 0.0);
        let (e, b) = verify_mean_lipschitz(1.0, 2.0).unwrap();
        assert!((e - 1.0).abs() < 1e-10 && b == 1.0);
        let (e, _) = verify_mean_lipschitz(0.5, 0.7).unwrap();
        assert!((e - 0.2).abs() < 1e-10);
    }

    #[test]
    fn default_depth() {
        assert_eq!(default_truncation_depth(0.0), 1);
        assert_eq!(default_truncation_depth(0.5), 40);
        assert!(0.3f64.powi(default_truncation_depth(0.3) as i32) <= 1e-12);
    }
}
