//! Stationary covariate and noise generators.
//!
//! An environment is a covariate process `(X_t)` paired with a noise process
//! `(eps_t)`. Under strict exogeneity the two are drawn from independent
//! streams. Under sequential exogeneity `eps_t` is fresh at time `t` and the
//! innovation of `X_t` reuses the uniform behind `eps_t[0]` with probability
//! `dependence`, so `X_t` may depend on `eps_t` while `eps_t` stays
//! independent of everything before `t`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::decay::{DecaySequence, Tail};
use crate::error::{Error, Result};
use crate::matrix::StochasticMatrix;
use crate::mixing::{alpha_markov_exact, tv_distance};
use crate::rng::{sample_categorical, RngStream};

/// States `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    size: usize,
}

impl StateSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("state space must be nonempty".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn states(&self) -> std::ops::Range<usize> {
        0..self.size
    }

    pub fn contains(&self, y: usize) -> bool {
        y < self.size
    }
}

/// One-dimensional marginal laws for iid covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Marginal {
    /// Finitely many vector values with the given probabilities.
    Discrete { values: Vec<Vec<f64>>, probs: Vec<f64> },
    /// Independent uniform coordinates on `[low, high]`.
    Uniform { low: f64, high: f64, dim: usize },
    /// Independent normal coordinates.
    Gaussian { mean: f64, sd: f64, dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateProcessSpec {
    Iid {
        marginal: Marginal,
    },
    /// A stationary finite chain; `states[i]` is the covariate value of label `i`.
    FiniteMarkov {
        states: Vec<Vec<f64>>,
        transition: StochasticMatrix,
        #[serde(default)]
        stationary: Option<Vec<f64>>,
    },
    /// Independent AR(1) coordinates `x = phi x + sigma z`, started from the
    /// stationary normal law and reported clipped to `[-bound, bound]`.
    GaussianAr1Clipped {
        phi: f64,
        sigma: f64,
        bound: f64,
        dim: usize,
    },
}

impl CovariateProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Iid { marginal } => match marginal {
                Marginal::Discrete { values, probs } => {
                    if values.is_empty() || values.len() != probs.len() {
                        return Err(Error::Dimension(format!(
                            "{} discrete values with {} probabilities",
                            values.len(),
                            probs.len()
                        )));
                    }
                    check_same_dim(values)?;
                    check_probability_vector(probs, "discrete marginal")
                }
                Marginal::Uniform { low, high, dim } => {
                    if !(low < high) || *dim == 0 {
                        return Err(Error::InvalidParameter(format!(
                            "uniform marginal needs low < high and dim >= 1, got [{low}, {high}], dim {dim}"
                        )));
                    }
                    Ok(())
                }
                Marginal::Gaussian { sd, dim, .. } => {
                    if !(*sd > 0.0) || *dim == 0 {
                        return Err(Error::InvalidParameter(format!(
                            "gaussian marginal needs sd > 0 and dim >= 1, got sd {sd}, dim {dim}"
                        )));
                    }
                    Ok(())
                }
            },
            Self::FiniteMarkov {
                states,
                transition,
                stationary,
            } => {
                if states.len() != transition.n() {
                    return Err(Error::Dimension(format!(
                        "{} state values for a {}-state transition matrix",
                        states.len(),
                        transition.n()
                    )));
                }
                check_same_dim(states)?;
                if let Some(pi) = stationary {
                    check_probability_vector(pi, "stationary law")?;
                    if pi.len() != transition.n() || !transition.is_stationary(pi, 1e-10) {
                        return Err(Error::Precondition(
                            "supplied stationary law is not invariant for the transition".into(),
                        ));
                    }
                }
                Ok(())
            }
            Self::GaussianAr1Clipped { phi, sigma, bound, dim } => {
                if !(phi.abs() < 1.0) {
                    return Err(Error::InvalidParameter(format!("AR(1) needs |phi| < 1, got {phi}")));
                }
                if !(*sigma > 0.0) || !(*bound > 0.0) || *dim == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "AR(1) needs sigma > 0, bound > 0, dim >= 1; got {sigma}, {bound}, {dim}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Iid { marginal } => match marginal {
                Marginal::Discrete { values, .. } => values[0].len(),
                Marginal::Uniform { dim, .. } | Marginal::Gaussian { dim, .. } => *dim,
            },
            Self::FiniteMarkov { states, .. } => states[0].len(),
            Self::GaussianAr1Clipped { dim, .. } => *dim,
        }
    }

    /// Stationary law of a finite chain (supplied or solved).
    pub fn markov_stationary(&self) -> Result<Vec<f64>> {
        match self {
            Self::FiniteMarkov {
                transition, stationary, ..
            } => match stationary {
                Some(pi) => Ok(pi.clone()),
                None => transition.stationary(),
            },
            _ => Err(Error::Unsupported("not a finite Markov covariate".into())),
        }
    }

    /// Values, transition and stationary law of a finite-support covariate
    /// process; iid discrete laws become chains with identical rows.
    pub fn as_finite_chain(&self) -> Result<(Vec<Vec<f64>>, StochasticMatrix, Vec<f64>)> {
        match self {
            Self::Iid {
                marginal: Marginal::Discrete { values, probs },
            } => Ok((values.clone(), StochasticMatrix::constant_rows(probs)?, probs.clone())),
            Self::FiniteMarkov { states, transition, .. } => {
                Ok((states.clone(), transition.clone(), self.markov_stationary()?))
            }
            _ => Err(Error::Unsupported("covariate process has no finite support".into())),
        }
    }

    /// A finite set of covariate values covering the support.
    ///
    /// Exact for discrete laws and finite chains. For continuous laws it is a
    /// product grid with `points` values per coordinate over the (clipped or
    /// 4-sd) range, which only approximates an infimum over the support.
    pub fn support_grid(&self, points: usize) -> Result<Vec<Vec<f64>>> {
        let points = points.max(2);
        let grid_1d = |lo: f64, hi: f64| -> Vec<f64> {
            (0..points)
                .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
                .collect()
        };
        let product = |axis: Vec<f64>, dim: usize| -> Result<Vec<Vec<f64>>> {
            let total = axis.len().checked_pow(dim as u32).filter(|&t| t <= 1 << 20);
            let total = total.ok_or_else(|| {
                Error::InvalidParameter(format!("support grid of {points}^{dim} points is too large"))
            })?;
            Ok((0..total)
                .map(|mut k| {
                    (0..dim)
                        .map(|_| {
                            let v = axis[k % axis.len()];
                            k /= axis.len();
                            v
                        })
                        .collect()
                })
                .collect())
        };
        match self {
            Self::Iid { marginal } => match marginal {
                Marginal::Discrete { values, probs } => Ok(values
                    .iter()
                    .zip(probs)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(v, _)| v.clone())
                    .collect()),
                Marginal::Uniform { low, high, dim } => product(grid_1d(*low, *high), *dim),
                Marginal::Gaussian { mean, sd, dim } => product(grid_1d(mean - 4.0 * sd, mean + 4.0 * sd), *dim),
            },
            Self::FiniteMarkov { states, .. } => {
                let pi = self.markov_stationary()?;
                Ok(states
                    .iter()
                    .zip(&pi)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(v, _)| v.clone())
                    .collect())
            }
            Self::GaussianAr1Clipped { bound, dim, .. } => product(grid_1d(-bound, *bound), *dim),
        }
    }
}

fn check_same_dim(values: &[Vec<f64>]) -> Result<()> {
    let d = values[0].len();
    if d == 0 || values.iter().any(|v| v.len() != d) {
        return Err(Error::Dimension(
            "covariate values must share a positive dimension".into(),
        ));
    }
    Ok(())
}

fn check_probability_vector(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("{name} is not a probability vector")));
    }
    Ok(())
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

fn normal_quantile(u: f64) -> f64 {
    std_normal().inverse_cdf(u)
}

/// Noise laws for `eps_t`. Every coordinate is an inverse-CDF transform of
/// its own uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Uniform01 {
        #[serde(default = "one")]
        dim: usize,
    },
    GaussianVector {
        dim: usize,
    },
    GumbelVector {
        dim: usize,
    },
    /// Piecewise-linear quantile function through `quantiles[k]` at level
    /// `k / (len - 1)`.
    CustomCdf {
        quantiles: Vec<f64>,
        #[serde(default = "one")]
        dim: usize,
    },
}

fn one() -> usize {
    1
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::InvalidParameter("noise dimension must be >= 1".into()));
        }
        if let Self::CustomCdf { quantiles, .. } = self {
            if quantiles.len() < 2 || quantiles.windows(2).any(|w| !(w[0] <= w[1])) {
                return Err(Error::InvalidParameter(
                    "custom quantile table needs >= 2 nondecreasing entries".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Uniform01 { dim }
            | Self::GaussianVector { dim }
            | Self::GumbelVector { dim }
            | Self::CustomCdf { dim, .. } => *dim,
        }
    }

    /// Quantile transform of one coordinate.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Uniform01 { .. } => u,
            Self::GaussianVector { .. } => normal_quantile(u),
            Self::GumbelVector { .. } => -(-u.ln()).ln(),
            Self::CustomCdf { quantiles, .. } => {
                let k = quantiles.len() - 1;
                let pos = u * k as f64;
                let i = (pos.floor() as usize).min(k - 1);
                let w = pos - i as f64;
                quantiles[i] * (1.0 - w) + quantiles[i + 1] * w
            }
        }
    }

    /// Distribution function of one coordinate.
    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            Self::Uniform01 { .. } => v.clamp(0.0, 1.0),
            Self::GaussianVector { .. } => std_normal().cdf(v),
            Self::GumbelVector { .. } => (-(-v).exp()).exp(),
            Self::CustomCdf { quantiles, .. } => {
                let k = quantiles.len() - 1;
                if v < quantiles[0] {
                    return 0.0;
                }
                if v >= quantiles[k] {
                    return 1.0;
                }
                // Last knot at or below v; flat stretches resolve to their right end.
                let i = quantiles.partition_point(|q| *q <= v) - 1;
                let (a, b) = (quantiles[i], quantiles[i + 1]);
                let w = if b > a { (v - a) / (b - a) } else { 1.0 };
                (i as f64 + w) / k as f64
            }
        }
    }

    /// Draws `eps` and returns it with the uniform behind its first coordinate.
    pub fn sample(&self, rng: &mut RngStream) -> (Vec<f64>, f64) {
        let open = !matches!(self, Self::Uniform01 { .. } | Self::CustomCdf { .. });
        let mut first = 0.0;
        let eps = (0..self.dim())
            .map(|i| {
                let u = if open { rng.uniform_open() } else { rng.uniform() };
                if i == 0 {
                    first = u;
                }
                self.quantile(u)
            })
            .collect();
        (eps, first)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ExogeneityMode {
    #[default]
    Strict,
    /// `dependence` is the probability that the innovation of `X_t` reuses
    /// the uniform behind `eps_t[0]`.
    Sequential { dependence: f64 },
}

impl ExogeneityMode {
    pub fn validate(&self) -> Result<()> {
        if let Self::Sequential { dependence } = self {
            if !(0.0..=1.0).contains(dependence) {
                return Err(Error::InvalidParameter(format!(
                    "dependence must lie in [0, 1], got {dependence}"
                )));
            }
        }
        Ok(())
    }
}

/// One covariate value with its chain label (finite chains) and its raw
/// value (pre-clip for AR(1); equal to `value` otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateDraw {
    pub value: Vec<f64>,
    pub label: Option<usize>,
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariatePath {
    pub values: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub raw: Vec<Vec<f64>>,
}

impl CovariatePath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn from_draws(draws: Vec<CovariateDraw>) -> Self {
        let labels = draws.iter().map(|d| d.label).collect::<Option<Vec<usize>>>();
        let raw = draws.iter().map(|d| d.raw.clone()).collect();
        Self {
            values: draws.into_iter().map(|d| d.value).collect(),
            labels,
            raw,
        }
    }
}

#[derive(Debug, Clone)]
enum CovState {
    None,
    Label(usize),
    Raw(Vec<f64>),
}

/// Forward sampler of a stationary covariate process.
///
/// `start` draws the state just before the first emitted value from the
/// stationary law; every emitted value is one transition from the previous
/// state, so a shared uniform enters every draw in the same way.
#[derive(Debug, Clone)]
pub struct CovariateSampler {
    spec: CovariateProcessSpec,
    stationary: Option<Vec<f64>>,
    state: CovState,
}

impl CovariateSampler {
    pub fn new(spec: &CovariateProcessSpec) -> Result<Self> {
        spec.validate()?;
        let stationary = match spec {
            CovariateProcessSpec::FiniteMarkov { .. } => Some(spec.markov_stationary()?),
            _ => None,
        };
        Ok(Self {
            spec: spec.clone(),
            stationary,
            state: CovState::None,
        })
    }

    pub fn spec(&self) -> &CovariateProcessSpec {
        &self.spec
    }

    pub fn start(&mut self, rng: &mut RngStream) {
        self.state = match &self.spec {
            CovariateProcessSpec::Iid { .. } => CovState::None,
            CovariateProcessSpec::FiniteMarkov { .. } => {
                CovState::Label(rng.categorical(self.stationary.as_ref().expect("stationary")))
            }
            CovariateProcessSpec::GaussianAr1Clipped { phi, sigma, dim, .. } => {
                let sd = sigma / (1.0 - phi * phi).sqrt();
                CovState::Raw((0..*dim).map(|_| sd * normal_quantile(rng.uniform_open())).collect())
            }
        };
    }

    /// Starts from a given chain label or raw AR(1) value.
    pub fn start_at(&mut self, draw: &CovariateDraw) {
        self.state = match &self.spec {
            CovariateProcessSpec::Iid { .. } => CovState::None,
            CovariateProcessSpec::FiniteMarkov { .. } => {
                CovState::Label(draw.label.expect("finite chain draws carry labels"))
            }
            CovariateProcessSpec::GaussianAr1Clipped { .. } => CovState::Raw(draw.raw.clone()),
        };
    }

    /// Next value; `shared` replaces the innovation uniform of the first coordinate.
    pub fn next(&mut self, rng: &mut RngStream, shared: Option<f64>) -> CovariateDraw {
        if matches!(self.state, CovState::None) && !matches!(self.spec, CovariateProcessSpec::Iid { .. }) {
            self.start(rng);
        }
        match &self.spec {
            CovariateProcessSpec::Iid { marginal } => {
                let value: Vec<f64> = match marginal {
                    Marginal::Discrete { values, probs } => {
                        let u = shared.unwrap_or_else(|| rng.uniform());
                        values[sample_categorical(probs, u)].clone()
                    }
                    Marginal::Uniform { low, high, dim } => (0..*dim)
                        .map(|i| {
                            let u = match (i, shared) {
                                (0, Some(u)) => u,
                                _ => rng.uniform(),
                            };
                            low + (high - low) * u
                        })
                        .collect(),
                    Marginal::Gaussian { mean, sd, dim } => (0..*dim)
                        .map(|i| {
                            let u = match (i, shared) {
                                (0, Some(u)) if u > 0.0 && u < 1.0 => u,
                                _ => rng.uniform_open(),
                            };
                            mean + sd * normal_quantile(u)
                        })
                        .collect(),
                };
                CovariateDraw {
                    raw: value.clone(),
                    value,
                    label: None,
                }
            }
            CovariateProcessSpec::FiniteMarkov { states, transition, .. } => {
                let CovState::Label(prev) = self.state else {
                    unreachable!()
                };
                let u = shared.unwrap_or_else(|| rng.uniform());
                let next = sample_categorical(transition.row(prev), u);
                self.state = CovState::Label(next);
                CovariateDraw {
                    value: states[next].clone(),
                    raw: states[next].clone(),
                    label: Some(next),
                }
            }
            CovariateProcessSpec::GaussianAr1Clipped { phi, sigma, bound, .. } => {
                let CovState::Raw(prev) = &self.state else {
                    unreachable!()
                };
                let raw: Vec<f64> = prev
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let u = match (i, shared) {
                            (0, Some(u)) if u > 0.0 && u < 1.0 => u,
                            _ => rng.uniform_open(),
                        };
                        phi * x + sigma * normal_quantile(u)
                    })
                    .collect();
                let value = raw.iter().map(|x| x.clamp(-bound, *bound)).collect();
                self.state = CovState::Raw(raw.clone());
                CovariateDraw {
                    value,
                    label: None,
                    raw,
                }
            }
        }
    }
}

/// A stationary covariate path of length `horizon`.
pub fn gen_covariates(spec: &CovariateProcessSpec, horizon: usize, rng: &mut RngStream) -> Result<CovariatePath> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let mut sampler = CovariateSampler::new(spec)?;
    sampler.start(rng);
    let draws = (0..horizon).map(|_| sampler.next(rng, None)).collect();
    Ok(CovariatePath::from_draws(draws))
}

/// Covariates, noise and the exogeneity link between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub covariates: CovariateProcessSpec,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub exogeneity: ExogeneityMode,
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        self.covariates.validate()?;
        self.noise.validate()?;
        self.exogeneity.validate()
    }
}

/// `(X_t, eps_t)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub x: CovariateDraw,
    pub eps: Vec<f64>,
}

/// Forward generator of the joint environment.
#[derive(Debug, Clone)]
pub struct EnvironmentSampler {
    spec: EnvironmentSpec,
    covariates: CovariateSampler,
    x_rng: RngStream,
    eps_rng: RngStream,
}

impl EnvironmentSampler {
    /// Strict mode draws covariates and noise from two child streams of `rng`;
    /// sequential mode uses a single child stream.
    pub fn new(spec: &EnvironmentSpec, rng: &RngStream) -> Result<Self> {
        spec.validate()?;
        let mut x_rng = rng.substream(0);
        let eps_rng = rng.substream(1);
        let mut covariates = CovariateSampler::new(&spec.covariates)?;
        covariates.start(&mut x_rng);
        Ok(Self {
            spec: spec.clone(),
            covariates,
            x_rng,
            eps_rng,
        })
    }

    /// Continues from a given covariate value instead of a stationary start.
    pub fn resume_from(spec: &EnvironmentSpec, last: &CovariateDraw, rng: &RngStream) -> Result<Self> {
        let mut s = Self::new(spec, rng)?;
        s.covariates.start_at(last);
        Ok(s)
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn next_step(&mut self) -> EnvStep {
        match self.spec.exogeneity {
            ExogeneityMode::Strict => {
                let (eps, _) = self.spec.noise.sample(&mut self.eps_rng);
                let x = self.covariates.next(&mut self.x_rng, None);
                EnvStep { x, eps }
            }
            ExogeneityMode::Sequential { dependence } => {
                let (eps, u) = self.spec.noise.sample(&mut self.x_rng);
                let shared = (self.x_rng.uniform() < dependence).then_some(u);
                let x = self.covariates.next(&mut self.x_rng, shared);
                EnvStep { x, eps }
            }
        }
    }
}

/// A path of the joint environment of length `horizon`.
pub fn gen_environment(spec: &EnvironmentSpec, horizon: usize, rng: &RngStream) -> Result<Vec<EnvStep>> {
    let mut s = EnvironmentSampler::new(spec, rng)?;
    Ok((0..horizon).map(|_| s.next_step()).collect())
}

/// How an environment is extended into the past.
#[derive(Debug, Clone)]
enum Backward {
    /// Steps are iid in time (iid covariates, any mode).
    Iid,
    /// Strict mode, finite chain: run the time-reversed chain.
    ReversedChain(StochasticMatrix),
    /// Strict mode, AR(1): the stationary Gaussian AR(1) is reversible.
    ReversedAr,
    /// Anything else: a forward stationary tape of fixed length.
    Tape,
}

/// An environment indexed by every integer time, generated lazily in both
/// directions from time 0 and cached, so repeated queries of the same time
/// return the same realization.
#[derive(Debug, Clone)]
pub struct TwoSidedEnvironment {
    spec: EnvironmentSpec,
    backward: Backward,
    /// times 0, -1, -2, ...
    past: Vec<EnvStep>,
    /// times 1, 2, ...
    future: Vec<EnvStep>,
    past_rng: RngStream,
    future_rng: RngStream,
    forward: Option<EnvironmentSampler>,
    backward_sampler: Option<EnvironmentSampler>,
    tape_depth: usize,
}

impl TwoSidedEnvironment {
    /// `tape_depth` caps how far into the past a non-reversible environment
    /// can be queried.
    pub fn new(spec: &EnvironmentSpec, tape_depth: usize, rng: &RngStream) -> Result<Self> {
        spec.validate()?;
        let strict = matches!(spec.exogeneity, ExogeneityMode::Strict);
        let backward = match &spec.covariates {
            CovariateProcessSpec::Iid { .. } => Backward::Iid,
            CovariateProcessSpec::FiniteMarkov { transition, .. } if strict => {
                let pi = spec.covariates.markov_stationary()?;
                Backward::ReversedChain(reversed_chain(transition, &pi)?)
            }
            CovariateProcessSpec::GaussianAr1Clipped { .. } if strict => Backward::ReversedAr,
            _ => Backward::Tape,
        };
        let mut env = Self {
            spec: spec.clone(),
            backward,
            past: Vec::new(),
            future: Vec::new(),
            past_rng: rng.substream(10),
            future_rng: rng.substream(11),
            forward: None,
            backward_sampler: None,
            tape_depth,
        };
        if matches!(env.backward, Backward::Iid) {
            env.backward_sampler = Some(EnvironmentSampler::new(spec, &rng.substream(13))?);
        }
        if matches!(env.backward, Backward::Tape) {
            let mut s = EnvironmentSampler::new(spec, &rng.substream(12))?;
            let mut tape: Vec<EnvStep> = (0..=tape_depth).map(|_| s.next_step()).collect();
            tape.reverse();
            env.past = tape;
            env.forward = Some(s);
        } else {
            let mut s = EnvironmentSampler::new(spec, &rng.substream(12))?;
            env.past.push(s.next_step());
        }
        Ok(env)
    }

    /// Whether `t` can be produced.
    pub fn reachable(&self, t: i64) -> bool {
        t >= 0 || !matches!(self.backward, Backward::Tape) || (-t) as usize <= self.tape_depth
    }

    pub fn at(&mut self, t: i64) -> Result<&EnvStep> {
        if t <= 0 {
            let k = (-t) as usize;
            while self.past.len() <= k {
                let step = self.extend_past()?;
                self.past.push(step);
            }
            Ok(&self.past[k])
        } else {
            let k = t as usize - 1;
            while self.future.len() <= k {
                let step = self.extend_future()?;
                self.future.push(step);
            }
            Ok(&self.future[k])
        }
    }

    fn extend_past(&mut self) -> Result<EnvStep> {
        let earliest = self.past.last().expect("time 0 exists").clone();
        let (eps, _) = self.spec.noise.sample(&mut self.past_rng);
        let x = match &self.backward {
            Backward::Iid => {
                // Pairs (X_t, eps_t) are iid in time.
                let s = self.backward_sampler.as_mut().expect("iid backward sampler");
                return Ok(s.next_step());
            }
            Backward::ReversedChain(rev) => {
                let CovariateProcessSpec::FiniteMarkov { states, .. } = &self.spec.covariates else {
                    unreachable!()
                };
                let label = self.past_rng.categorical(rev.row(earliest.x.label.expect("label")));
                CovariateDraw {
                    value: states[label].clone(),
                    label: Some(label),
                    raw: states[label].clone(),
                }
            }
            Backward::ReversedAr => {
                let CovariateProcessSpec::GaussianAr1Clipped { phi, sigma, bound, .. } = &self.spec.covariates else {
                    unreachable!()
                };
                let raw: Vec<f64> = earliest
                    .x
                    .raw
                    .iter()
                    .map(|x| phi * x + sigma * normal_quantile(self.past_rng.uniform_open()))
                    .collect();
                CovariateDraw {
                    value: raw.iter().map(|x| x.clamp(-bound, *bound)).collect(),
                    label: None,
                    raw,
                }
            }
            Backward::Tape => {
                return Err(Error::Precondition(format!(
                    "environment tape of depth {} exhausted",
                    self.tape_depth
                )))
            }
        };
        Ok(EnvStep { x, eps })
    }

    fn extend_future(&mut self) -> Result<EnvStep> {
        if self.forward.is_none() {
            let last = self.future.last().unwrap_or(&self.past[0]).x.clone();
            self.forward = Some(EnvironmentSampler::resume_from(&self.spec, &last, &self.future_rng)?);
        }
        Ok(self.forward.as_mut().expect("forward sampler").next_step())
    }
}

/// `Q(i, j) = pi(j) P(j, i) / pi(i)`; rows of zero-mass states are uniform.
pub fn reversed_chain(p: &StochasticMatrix, pi: &[f64]) -> Result<StochasticMatrix> {
    let n = p.n();
    let rows = (0..n)
        .map(|i| {
            if pi[i] <= 0.0 {
                return vec![1.0 / n as f64; n];
            }
            let row: Vec<f64> = (0..n).map(|j| pi[j] * p.get(j, i) / pi[i]).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();
    StochasticMatrix::from_rows(rows)
}

/// Most lags tabulated exactly by [`alpha_envelope`] before the geometric tail.
pub const ENVELOPE_EXACT_LAGS: usize = 64;

/// The exact table stops at the first lag whose value is below this; past
/// it the enumeration returns rounding noise rather than the coefficient.
pub const ENVELOPE_EXACT_FLOOR: f64 = 1e-10;

/// Upper bound on the mixing coefficients of the covariate process.
///
/// For a finite chain the values at lags `0..=n_max` are the exact
/// coefficients between `X_0` and `X_n`, with `n_max` the first lag below
/// [`ENVELOPE_EXACT_FLOOR`] or [`ENVELOPE_EXACT_LAGS`]. By the Markov property
/// these equal the coefficients between the whole past and the whole future,
/// so no information is lost. Beyond the table the tail is
/// `d * q^(n - n_max - k)` with `d = max_a TV(P^n_max(a, .), pi)` and `q`
/// the `k`-th root of a Dobrushin coefficient of `P^k` below one.
pub fn alpha_envelope(spec: &CovariateProcessSpec) -> Result<DecaySequence> {
    spec.validate()?;
    match spec {
        CovariateProcessSpec::Iid { .. } => Ok(DecaySequence::zeros()),
        CovariateProcessSpec::FiniteMarkov { transition, .. } => {
            let pi = spec.markov_stationary()?;
            let mut values = Vec::with_capacity(ENVELOPE_EXACT_LAGS + 1);
            for n in 0..=ENVELOPE_EXACT_LAGS {
                let a = alpha_markov_exact(&pi, transition, n)?.clamp(0.0, 0.25);
                values.push(a);
                if n > 0 && a < ENVELOPE_EXACT_FLOOR {
                    break;
                }
            }
            let pn = transition.pow(values.len() - 1);
            let mut d: f64 = 0.0;
            for a in 0..transition.n() {
                d = d.max(tv_distance(pn.row(a), &pi)?.value());
            }
            let tail = match contraction_rate(transition) {
                _ if d == 0.0 => Tail::Zero,
                Some((q, k)) => Tail::Geometric {
                    first: (d * q.powi(1 - k as i32)).min(0.25),
                    ratio: q,
                },
                None => Tail::Geometric {
                    first: 0.25,
                    ratio: 1.0,
                },
            };
            if values[1..].iter().all(|v| *v == 0.0) && d == 0.0 {
                values.truncate(1);
            }
            DecaySequence::new(values, tail)
        }
        CovariateProcessSpec::GaussianAr1Clipped { .. } => Err(Error::Unsupported(
            "no closed-form mixing envelope for the clipped AR(1); supply a sequence".into(),
        )),
    }
}

/// `(q, k)` with `q = dobrushin(P^k)^(1/k) < 1` for the smallest such `k <= 64`.
fn contraction_rate(p: &StochasticMatrix) -> Option<(f64, usize)> {
    let mut pk = p.clone();
    for k in 1..=64 {
        let d = pk.dobrushin();
        if d < 1.0 - 1e-12 {
            return Some((d.powf(1.0 / k as f64), k));
        }
        pk = pk.mul(p).ok()?;
    }
    None
}
