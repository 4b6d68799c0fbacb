//! Iterated random maps on a finite set.
//!
//! A categorical model `Y_t = f(Y_{t-1}, ..., Y_{t-p}, X_{t-1}, eps_t)` is
//! turned into a random map on lag vectors in `E^p`. Composing maps over a
//! window and checking for a single-point image gives coalescence
//! estimates, perfect sampling and same-map couplings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doeblin::{lag_index, lag_vector, BlockDisagreement, CoupledPath, Initialization};
use crate::error::{Error, Result};
use crate::process::{EnvStep, EnvironmentSampler, EnvironmentSpec, NoiseSpec, TwoSidedEnvironment};
use crate::rng::RngStream;

/// A function `E -> E` stored as its table of images.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RandomMapRealization {
    table: Vec<usize>,
}

impl RandomMapRealization {
    /// Panics if an image leaves `0..table.len()`.
    pub fn from_table(table: Vec<usize>) -> Self {
        let n = table.len();
        assert!(table.iter().all(|&v| v < n), "map image outside the state space");
        Self { table }
    }

    pub fn try_from_table(table: Vec<usize>) -> Result<Self> {
        let n = table.len();
        if n == 0 || table.iter().any(|&v| v >= n) {
            return Err(Error::InvalidParameter("map table must send 0..n into 0..n".into()));
        }
        Ok(Self { table })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            table: (0..n).collect(),
        }
    }

    pub fn constant(n: usize, value: usize) -> Self {
        Self::from_table(vec![value; n])
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.table.len()
    }

    pub fn apply(&self, y: usize) -> usize {
        self.table[y]
    }

    /// Number of distinct images.
    pub fn image_count(&self) -> usize {
        let mut seen = vec![false; self.table.len()];
        let mut count = 0;
        for &v in &self.table {
            if !seen[v] {
                seen[v] = true;
                count += 1;
            }
        }
        count
    }

    /// The common image when the map is constant.
    pub fn constant_value(&self) -> Option<usize> {
        let first = self.table[0];
        self.table.iter().all(|&v| v == first).then_some(first)
    }

    /// `later ∘ self`: apply `self` first.
    pub fn then(&self, later: &RandomMapRealization) -> RandomMapRealization {
        Self {
            table: self.table.iter().map(|&y| later.table[y]).collect(),
        }
    }
}

/// Composition with the earliest map applied first.
pub fn compose(maps: &[RandomMapRealization]) -> Result<RandomMapRealization> {
    let first = maps
        .first()
        .ok_or_else(|| Error::InvalidParameter("cannot compose an empty sequence".into()))?;
    if maps.iter().any(|m| m.n() != first.n()) {
        return Err(Error::Dimension("maps act on different state spaces".into()));
    }
    Ok(maps[1..].iter().fold(first.clone(), |acc, m| acc.then(m)))
}

/// Composes `map_at(0) ∘ map_at(-1) ∘ ... ∘ map_at(1 - n)` for growing `n`
/// until the result is constant. Returns the constant and the depth `n`.
///
/// `map_at` is queried once per time, newest first, so callers must return
/// the same realization if they cache.
pub fn coalesce_from_past<F>(n_states: usize, max_depth: usize, mut map_at: F) -> Result<(usize, usize)>
where
    F: FnMut(i64) -> Result<RandomMapRealization>,
{
    if max_depth == 0 {
        return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
    }
    let mut composed = RandomMapRealization::identity(n_states);
    for depth in 1..=max_depth {
        let earliest = map_at(1 - depth as i64)?;
        composed = earliest.then(&composed);
        if let Some(v) = composed.constant_value() {
            return Ok((v, depth));
        }
    }
    Err(Error::NoCoalescence { max_depth })
}

/// `intercept + sum_i lags[i][y_{i+1}] + covariates . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearIndex {
    #[serde(default)]
    pub intercept: f64,
    /// `lags[i][k]` is the effect of `Y_{t-1-i} = k`; missing entries are zero.
    #[serde(default)]
    pub lags: Vec<Vec<f64>>,
    #[serde(default)]
    pub covariates: Vec<f64>,
}

impl LinearIndex {
    pub fn constant(c: f64) -> Self {
        Self {
            intercept: c,
            lags: Vec::new(),
            covariates: Vec::new(),
        }
    }

    pub fn eval(&self, lags: &[usize], x: &[f64]) -> f64 {
        let mut v = self.intercept;
        for (effects, &y) in self.lags.iter().zip(lags) {
            v += effects.get(y).copied().unwrap_or(0.0);
        }
        v + self.covariates.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    fn validate(&self, n: usize, p: usize, d: usize) -> Result<()> {
        if self.lags.len() > p || self.lags.iter().any(|l| l.len() > n) {
            return Err(Error::Dimension(format!("lag effects exceed {p} lags of {n} states")));
        }
        if self.covariates.len() > d {
            return Err(Error::Dimension(format!(
                "{} covariate coefficients for dimension {d}",
                self.covariates.len()
            )));
        }
        Ok(())
    }
}

/// Next-state probabilities `(H_0, ..., H_{N-1})` of a multinomial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum MultinomialProbs {
    /// `H_k` proportional to `exp(scores[k])`.
    Logistic { scores: Vec<LinearIndex> },
    /// One row per lag vector, indexed by `lag_index`; covariates are ignored.
    Table { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapModelKind {
    /// Inverse CDF of `H` at the uniform `eps[0]`.
    Multinomial { probs: MultinomialProbs },
    /// `Y = k` iff `c_k < g + eps[0] <= c_{k+1}` with `c_0 = -inf`, `c_N = inf`.
    Ordinal { g: LinearIndex, thresholds: Vec<f64> },
    /// `Y = argmax_k (g_k + eps[k])`, lowest index on ties.
    MultipleChoice { g: Vec<LinearIndex> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapModelSpec {
    pub n_states: usize,
    #[serde(default = "one")]
    pub lag: usize,
    pub model: MapModelKind,
    pub environment: EnvironmentSpec,
}

fn one() -> usize {
    1
}

/// Largest embedded state space handled.
pub const MAX_EMBEDDED_STATES: usize = 4096;

impl MapModelSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_states;
        let p = self.lag;
        if n == 0 || p == 0 {
            return Err(Error::InvalidParameter("n_states and lag must be >= 1".into()));
        }
        let big = self.embedded_states()?;
        self.environment.validate()?;
        let d = self.environment.covariates.dim();
        match &self.model {
            MapModelKind::Multinomial { probs } => {
                if !matches!(self.environment.noise, NoiseSpec::Uniform01 { .. }) {
                    return Err(Error::InvalidParameter("multinomial maps need uniform01 noise".into()));
                }
                match probs {
                    MultinomialProbs::Logistic { scores } => {
                        if scores.len() != n {
                            return Err(Error::Dimension(format!("{} scores for {n} states", scores.len())));
                        }
                        for s in scores {
                            s.validate(n, p, d)?;
                        }
                    }
                    MultinomialProbs::Table { rows } => {
                        if rows.len() != big || rows.iter().any(|r| r.len() != n) {
                            return Err(Error::Dimension(format!(
                                "probability table must have {big} rows of {n} entries"
                            )));
                        }
                        for (i, r) in rows.iter().enumerate() {
                            if r.iter().any(|v| !(*v > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                                return Err(Error::ZeroProbability(format!(
                                    "row {i} is not a positive probability vector"
                                )));
                            }
                        }
                    }
                }
            }
            MapModelKind::Ordinal { g, thresholds } => {
                g.validate(n, p, d)?;
                if thresholds.len() + 1 != n || thresholds.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidParameter(format!(
                        "ordinal model needs {} strictly increasing thresholds",
                        n - 1
                    )));
                }
            }
            MapModelKind::MultipleChoice { g } => {
                if g.len() != n {
                    return Err(Error::Dimension(format!("{} utilities for {n} states", g.len())));
                }
                for gi in g {
                    gi.validate(n, p, d)?;
                }
                if self.environment.noise.dim() != n {
                    return Err(Error::Dimension(format!(
                        "multiple choice needs noise of dimension {n}, got {}",
                        self.environment.noise.dim()
                    )));
                }
            }
        }
        Ok(())
    }

    /// `N^p`.
    pub fn embedded_states(&self) -> Result<usize> {
        self.n_states
            .checked_pow(self.lag as u32)
            .filter(|&v| v <= MAX_EMBEDDED_STATES)
            .ok_or(Error::AlphabetTooLarge {
                size: usize::MAX,
                limit: MAX_EMBEDDED_STATES,
            })
    }

    /// Next-state probabilities of a multinomial model.
    pub fn multinomial_probs(&self, lags: &[usize], x: &[f64]) -> Result<Vec<f64>> {
        let MapModelKind::Multinomial { probs } = &self.model else {
            return Err(Error::Unsupported("not a multinomial model".into()));
        };
        let h = match probs {
            MultinomialProbs::Logistic { scores } => {
                let s: Vec<f64> = scores.iter().map(|g| g.eval(lags, x)).collect();
                let top = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = s.iter().map(|v| (v - top).exp()).collect();
                let z: f64 = w.iter().sum();
                w.into_iter().map(|v| v / z).collect::<Vec<_>>()
            }
            MultinomialProbs::Table { rows } => rows[lag_index(lags, self.n_states)].clone(),
        };
        if h.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::ZeroProbability(format!("H = {h:?} at lags {lags:?}")));
        }
        Ok(h)
    }

    /// `f(lags, x, eps)`.
    pub fn next_state(&self, lags: &[usize], x: &[f64], eps: &[f64]) -> Result<usize> {
        Ok(match &self.model {
            MapModelKind::Multinomial { .. } => {
                let h = self.multinomial_probs(lags, x)?;
                inverse_cdf_le(&h, eps[0])
            }
            MapModelKind::Ordinal { g, thresholds } => {
                let v = g.eval(lags, x) + eps[0];
                thresholds.iter().filter(|&&c| c < v).count()
            }
            MapModelKind::MultipleChoice { g } => {
                let mut best = 0;
                let mut best_v = f64::NEG_INFINITY;
                for (k, gk) in g.iter().enumerate() {
                    let v = gk.eval(lags, x) + eps[k];
                    if v > best_v {
                        best_v = v;
                        best = k;
                    }
                }
                best
            }
        })
    }
}

/// Smallest `i` with `eps <= H_0 + ... + H_i`; rounding mass goes to the last state.
fn inverse_cdf_le(h: &[f64], eps: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in h.iter().enumerate() {
        acc += p;
        if eps <= acc {
            return i;
        }
    }
    h.len() - 1
}

/// The map `F(y_1, ..., y_p) = (f(y, x, eps), y_1, ..., y_{p-1})` on `E^p`.
pub fn realize_map(spec: &MapModelSpec, x: &[f64], eps: &[f64]) -> Result<RandomMapRealization> {
    let n = spec.n_states;
    let p = spec.lag;
    let big = spec.embedded_states()?;
    if x.len() != spec.environment.covariates.dim() || eps.len() != spec.environment.noise.dim() {
        return Err(Error::Dimension(
            "covariate or noise draw has the wrong dimension".into(),
        ));
    }
    let mut table = Vec::with_capacity(big);
    let mut shifted = vec![0; p];
    for s in 0..big {
        let lags = lag_vector(s, n, p);
        shifted[0] = spec.next_state(&lags, x, eps)?;
        shifted[1..].copy_from_slice(&lags[..p - 1]);
        table.push(lag_index(&shifted, n));
    }
    Ok(RandomMapRealization { table })
}

/// The map at time `t`, built from `X_{t-1}` and `eps_t`.
pub fn map_at(spec: &MapModelSpec, env: &mut TwoSidedEnvironment, t: i64) -> Result<RandomMapRealization> {
    let x = env.at(t - 1)?.x.value.clone();
    let eps = env.at(t)?.eps.clone();
    realize_map(spec, &x, &eps)
}

/// Monte Carlo estimate of `rho = 1 - P(#F_1^m(E) = 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoalescenceReport {
    pub m: usize,
    pub rho_hat: f64,
    pub replicates: usize,
    pub standard_error: f64,
}

impl CoalescenceReport {
    pub fn coalescence_prob(&self) -> f64 {
        1.0 - self.rho_hat
    }

    /// Whether `rho_hat` is below one by more than `z` standard errors, or
    /// any coalescence was seen when the standard error vanishes.
    pub fn excludes_one(&self, z: f64) -> bool {
        self.rho_hat < 1.0 && 1.0 - self.rho_hat > z * self.standard_error
    }
}

/// Draws stationary blocks `(X_0, eps_1), ..., (X_{m-1}, eps_m)` and counts
/// how often the composed map is constant. Replicate `i` uses `rng.substream(i)`.
pub fn estimate_rho(spec: &MapModelSpec, m: usize, replicates: usize, rng: &RngStream) -> Result<CoalescenceReport> {
    spec.validate()?;
    if m == 0 || replicates == 0 {
        return Err(Error::InvalidParameter("m and replicates must be >= 1".into()));
    }
    let hits = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = EnvironmentSampler::new(&spec.environment, &rng.substream(i))?;
            let steps: Vec<EnvStep> = (0..=m).map(|_| env.next_step()).collect();
            let maps = (1..=m)
                .map(|t| realize_map(spec, &steps[t - 1].x.value, &steps[t].eps))
                .collect::<Result<Vec<_>>>()?;
            Ok((compose(&maps)?.image_count() == 1) as u64)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    let rho_hat = 1.0 - hits as f64 / replicates as f64;
    Ok(CoalescenceReport {
        m,
        rho_hat,
        replicates,
        standard_error: (rho_hat * (1.0 - rho_hat) / replicates as f64).sqrt(),
    })
}

/// Points per covariate axis when an infimum over a continuous support is
/// approximated on a grid.
pub const SUPPORT_GRID_POINTS: usize = 101;

/// Lower bound on `1 - rho` at `m = p` from the constructive arguments:
/// a noise event forcing one common state at every step, whatever the lags
/// and covariate. Per step:
///
/// * multinomial: `max(inf H_0, inf H_{N-1})`;
/// * ordinal: `max(P(eps > c_{N-1} - inf g), P(eps <= c_1 - sup g))`;
/// * multiple choice: `max_k P(eps_k - max_{i != k} eps_i > sup_{i != k} sup g_i - inf g_k)`.
///
/// Independent noise across the `p` steps gives the `p`-th power. Infima
/// over covariates use `support_grid`, exact for discrete supports.
pub fn coalescence_lower_bound(spec: &MapModelSpec) -> Result<f64> {
    spec.validate()?;
    let n = spec.n_states;
    let p = spec.lag;
    let big = spec.embedded_states()?;
    let grid = spec.environment.covariates.support_grid(SUPPORT_GRID_POINTS)?;
    let lag_vectors: Vec<Vec<usize>> = (0..big).map(|s| lag_vector(s, n, p)).collect();
    let range = |g: &LinearIndex| -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for lags in &lag_vectors {
            for x in &grid {
                let v = g.eval(lags, x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    };
    let noise = &spec.environment.noise;
    let per_step = match &spec.model {
        MapModelKind::Multinomial { .. } => {
            let mut inf_first = f64::INFINITY;
            let mut inf_last = f64::INFINITY;
            for lags in &lag_vectors {
                for x in &grid {
                    let h = spec.multinomial_probs(lags, x)?;
                    inf_first = inf_first.min(h[0]);
                    inf_last = inf_last.min(h[n - 1]);
                }
            }
            inf_first.max(inf_last)
        }
        MapModelKind::Ordinal { g, thresholds } => {
            let (lo, hi) = range(g);
            let top = 1.0 - noise.cdf(thresholds[n - 2] - lo);
            let bottom = noise.cdf(thresholds[0] - hi);
            top.max(bottom)
        }
        MapModelKind::MultipleChoice { g } => {
            let ranges: Vec<(f64, f64)> = g.iter().map(range).collect();
            (0..n)
                .map(|k| {
                    let sup_others = (0..n)
                        .filter(|&i| i != k)
                        .map(|i| ranges[i].1)
                        .fold(f64::NEG_INFINITY, f64::max);
                    win_probability(noise, n, sup_others - ranges[k].0)
                })
                .fold(0.0, f64::max)
        }
    };
    Ok(per_step.powi(p as i32))
}

/// Midpoint nodes for the win-probability integral.
const WIN_QUADRATURE_NODES: usize = 20_000;

/// `P(eps_k - max_{i != k} eps_i > gap)` for iid coordinates:
/// `int_0^1 F(Q(u) - gap)^(n-1) du`.
fn win_probability(noise: &NoiseSpec, n: usize, gap: f64) -> f64 {
    if n == 1 {
        return 1.0;
    }
    if let NoiseSpec::GumbelVector { .. } = noise {
        // The max of n-1 Gumbels is Gumbel shifted by ln(n-1), and a
        // difference of Gumbels is logistic.
        return 1.0 / (1.0 + (n - 1) as f64 * gap.exp());
    }
    let h = 1.0 / WIN_QUADRATURE_NODES as f64;
    (0..WIN_QUADRATURE_NODES)
        .map(|i| {
            let u = (i as f64 + 0.5) * h;
            noise.cdf(noise.quantile(u) - gap).powi(n as i32 - 1)
        })
        .sum::<f64>()
        * h
}

/// An exact stationary draw at time 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackwardSample {
    /// Lag vector `(Y_0, ..., Y_{1-p})` as an index in `E^p`.
    pub embedded: usize,
    /// `Y_0`.
    pub state: usize,
    /// Window length at which the composition became constant.
    pub depth: usize,
}

/// Coupling from the past: the window grows into the past over one fixed
/// environment realization until the composed map is constant.
pub fn backward_sample(spec: &MapModelSpec, max_depth: usize, rng: &RngStream) -> Result<BackwardSample> {
    spec.validate()?;
    let mut env = TwoSidedEnvironment::new(&spec.environment, max_depth + 1, rng)?;
    backward_sample_in(spec, &mut env, max_depth)
}

fn backward_sample_in(spec: &MapModelSpec, env: &mut TwoSidedEnvironment, max_depth: usize) -> Result<BackwardSample> {
    let big = spec.embedded_states()?;
    let (embedded, depth) = coalesce_from_past(big, max_depth, |t| map_at(spec, env, t))?;
    Ok(BackwardSample {
        embedded,
        state: embedded % spec.n_states,
        depth,
    })
}

/// `Y_t` of a long forward run, for comparison with backward samples.
pub fn forward_run(spec: &MapModelSpec, burn_in: usize, len: usize, rng: &RngStream) -> Result<Vec<usize>> {
    spec.validate()?;
    let mut env = EnvironmentSampler::new(&spec.environment, rng)?;
    let mut state = 0;
    let mut prev = env.next_step();
    let mut out = Vec::with_capacity(len);
    for t in 0..burn_in + len {
        let step = env.next_step();
        state = realize_map(spec, &prev.x.value, &step.eps)?.apply(state);
        prev = step;
        if t >= burn_in {
            out.push(state % spec.n_states);
        }
    }
    Ok(out)
}

/// A coupled path together with the maps that drove it.
#[derive(Debug, Clone)]
pub struct TracedCoupling {
    pub path: CoupledPath,
    /// `maps[k]` drove both paths from `r + k` to `r + k + 1`.
    pub maps: Vec<RandomMapRealization>,
}

/// `Y` and `Y'` driven by the same maps; `Y'` restarts at `r` from the lag
/// vector `(y0, ..., y0)`.
pub fn simulate_maps_coupled(
    spec: &MapModelSpec,
    r: usize,
    horizon: usize,
    y0: usize,
    init: Initialization,
    rng: &RngStream,
) -> Result<CoupledPath> {
    Ok(simulate_maps_coupled_traced(spec, r, horizon, y0, init, rng)?.path)
}

pub fn simulate_maps_coupled_traced(
    spec: &MapModelSpec,
    r: usize,
    horizon: usize,
    y0: usize,
    init: Initialization,
    rng: &RngStream,
) -> Result<TracedCoupling> {
    spec.validate()?;
    let n = spec.n_states;
    if !(0 < r && r < horizon) {
        return Err(Error::InvalidParameter(format!(
            "restart index must satisfy 0 < r < horizon, got r = {r}, horizon = {horizon}"
        )));
    }
    if y0 >= n {
        return Err(Error::InvalidParameter(format!("restart state {y0} outside 0..{n}")));
    }
    let depth = match init {
        Initialization::BurnIn { steps } => steps,
        Initialization::Perfect { max_depth } => max_depth,
    };
    let mut env = TwoSidedEnvironment::new(&spec.environment, depth + 1, &rng.substream(0))?;
    let start = match init {
        Initialization::Perfect { max_depth } => backward_sample_in(spec, &mut env, max_depth)?.embedded,
        Initialization::BurnIn { steps } => {
            let mut s = rng.substream(1).index(spec.embedded_states()?);
            for t in (1 - steps as i64)..=0 {
                s = map_at(spec, &mut env, t)?.apply(s);
            }
            s
        }
    };
    let mut y_embedded = vec![start];
    for t in 1..=r {
        let next = map_at(spec, &mut env, t as i64)?.apply(y_embedded[t - 1]);
        y_embedded.push(next);
    }
    let mut yp = lag_index(&vec![y0; spec.lag], n);
    let mut yp_embedded = vec![yp];
    let mut maps = Vec::with_capacity(horizon - r);
    for t in r + 1..=horizon {
        let f = map_at(spec, &mut env, t as i64)?;
        y_embedded.push(f.apply(y_embedded[t - 1]));
        yp = f.apply(yp);
        yp_embedded.push(yp);
        maps.push(f);
    }
    let y: Vec<usize> = y_embedded.iter().map(|s| s % n).collect();
    let y_prime: Vec<usize> = yp_embedded.iter().map(|s| s % n).collect();
    let disagreement: Vec<bool> = y_prime.iter().enumerate().map(|(k, &b)| y[r + k] != b).collect();
    let coalescence_time = yp_embedded
        .iter()
        .enumerate()
        .find(|(k, &b)| y_embedded[r + k] == b)
        .map(|(k, _)| r + k);
    Ok(TracedCoupling {
        path: CoupledPath {
            y,
            y_prime,
            restart_index: r,
            block_len: 1,
            disagreement,
            coalescence_time,
            eta_blocks: Vec::new(),
        },
        maps,
    })
}

/// Disagreement frequencies `P(Y_{r+s} != Y'_{r+s})` across replicates.
pub fn maps_disagreement(
    spec: &MapModelSpec,
    r: usize,
    horizon: usize,
    y0: usize,
    init: Initialization,
    replicates: usize,
    rng: &RngStream,
) -> Result<BlockDisagreement> {
    let len = horizon.saturating_sub(r) + 1;
    let counts = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_maps_coupled(spec, r, horizon, y0, init, &rng.substream(i))?;
            Ok(path.disagreement.iter().map(|&d| d as u64).collect::<Vec<u64>>())
        })
        .try_reduce(
            || vec![0u64; len],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;
    let nr = replicates as f64;
    let p_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / nr).collect();
    let se = p_hat.iter().map(|p| (p * (1.0 - p) / nr).sqrt()).collect();
    Ok(BlockDisagreement {
        restart_index: r,
        block_len: 1,
        p_hat,
        se,
        mean_eta: f64::NAN,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::StochasticMatrix;
    use crate::process::{CovariateProcessSpec, ExogeneityMode, Marginal};

    fn constant_env() -> EnvironmentSpec {
        EnvironmentSpec {
            covariates: CovariateProcessSpec::Iid {
                marginal: Marginal::Discrete {
                    values: vec![vec![0.0]],
                    probs: vec![1.0],
                },
            },
            noise: NoiseSpec::Uniform01 { dim: 1 },
            exogeneity: ExogeneityMode::Strict,
        }
    }

    fn two_state_multinomial() -> MapModelSpec {
        MapModelSpec {
            n_states: 2,
            lag: 1,
            model: MapModelKind::Multinomial {
                probs: MultinomialProbs::Table {
                    rows: vec![vec![0.7, 0.3], vec![0.3, 0.7]],
                },
            },
            environment: constant_env(),
        }
    }

    #[test]
    fn constructor_examples() {
        let mut spec = two_state_multinomial();
        spec.model = MapModelKind::Multinomial {
            probs: MultinomialProbs::Table {
                rows: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            },
        };
        let f = realize_map(&spec, &[0.0], &[0.3]).unwrap();
        assert_eq!(f.table(), &[0, 0]);
        assert_eq!(f.image_count(), 1);

        let ordinal = MapModelSpec {
            n_states: 3,
            lag: 1,
            model: MapModelKind::Ordinal {
                g: LinearIndex::constant(0.0),
                thresholds: vec![0.0, 1.0],
            },
            environment: EnvironmentSpec {
                noise: NoiseSpec::GaussianVector { dim: 1 },
                ..constant_env()
            },
        };
        assert_eq!(realize_map(&ordinal, &[0.0], &[2.0]).unwrap().table(), &[2, 2, 2]);
        assert_eq!(realize_map(&ordinal, &[0.0], &[1.0]).unwrap().table(), &[1, 1, 1]);

        let choice = MapModelSpec {
            n_states: 3,
            lag: 1,
            model: MapModelKind::MultipleChoice {
                g: vec![LinearIndex::constant(0.0); 3],
            },
            environment: EnvironmentSpec {
                noise: NoiseSpec::GumbelVector { dim: 3 },
                ..constant_env()
            },
        };
        assert_eq!(
            realize_map(&choice, &[0.0], &[0.1, 0.9, 0.5]).unwrap().table(),
            &[1, 1, 1]
        );
        assert_eq!(
            realize_map(&choice, &[0.0], &[0.5, 0.5, 0.1]).unwrap().table(),
            &[0, 0, 0]
        );
    }

    #[test]
    fn compose_examples() {
        let swap = RandomMapRealization::from_table(vec![1, 0]);
        assert_eq!(compose(std::slice::from_ref(&swap)).unwrap(), swap);
        assert_eq!(compose(&[swap.clone(), swap.clone()]).unwrap().table(), &[0, 1]);
        let c = RandomMapRealization::constant(2, 1);
        assert_eq!(compose(&[swap.clone(), c.clone()]).unwrap(), c);
        let f = RandomMapRealization::from_table(vec![0, 0, 2]);
        let g = RandomMapRealization::from_table(vec![1, 2, 0]);
        // earliest first: g(f(y))
        assert_eq!(compose(&[f, g]).unwrap().table(), &[1, 1, 0]);
        assert!(compose(&[]).is_err());
    }

    #[test]
    fn multinomial_inverse_cdf_is_exact() {
        // The partition of [0, 1] induced by the map sends each state a mass H_k.
        let h = [0.2, 0.5, 0.3];
        let cuts = [0.0, 0.2, 0.7, 1.0];
        for k in 0..3 {
            // Interval (cuts[k], cuts[k+1]] maps to k.
            let mid = 0.5 * (cuts[k] + cuts[k + 1]);
            assert_eq!(inverse_cdf_le(&h, mid), k);
            assert_eq!(inverse_cdf_le(&h, cuts[k + 1]), k);
            assert!((cuts[k + 1] - cuts[k] - h[k]).abs() < 1e-15);
        }
        assert_eq!(inverse_cdf_le(&h, 0.0), 0);
    }

    #[test]
    fn ordinal_maps_are_monotone_in_g() {
        let mut rng = RngStream::new(3, 3);
        let thresholds = [-1.0, 0.0, 0.5, 2.0];
        for _ in 0..500 {
            let g = rng.uniform() * 4.0 - 2.0;
            let delta = rng.uniform();
            let eps = rng.uniform() * 2.0 - 1.0;
            let state = |g: f64| thresholds.iter().filter(|&&c| c < g + eps).count();
            assert!(state(g + delta) >= state(g));
        }
    }

    #[test]
    fn rho_examples() {
        let mut spec = two_state_multinomial();
        spec.model = MapModelKind::Multinomial {
            probs: MultinomialProbs::Table {
                rows: vec![vec![0.4, 0.6], vec![0.4, 0.6]],
            },
        };
        let rep = estimate_rho(&spec, 1, 1000, &RngStream::new(1, 0)).unwrap();
        assert_eq!(rep.rho_hat, 0.0);

        // Noise-free ordinal with a lag effect that permutes states.
        let perm = MapModelSpec {
            n_states: 2,
            lag: 1,
            model: MapModelKind::Ordinal {
                g: LinearIndex {
                    intercept: 0.0,
                    lags: vec![vec![1.0, -1.0]],
                    covariates: vec![],
                },
                thresholds: vec![0.0],
            },
            environment: EnvironmentSpec {
                noise: NoiseSpec::CustomCdf {
                    quantiles: vec![0.0, 0.0],
                    dim: 1,
                },
                ..constant_env()
            },
        };
        for m in [1, 3, 10] {
            assert_eq!(estimate_rho(&perm, m, 200, &RngStream::new(2, 0)).unwrap().rho_hat, 1.0);
        }
        assert!(matches!(
            backward_sample(&perm, 50, &RngStream::new(0, 0)),
            Err(Error::NoCoalescence { max_depth: 50 })
        ));
    }

    #[test]
    fn constant_model_backward_depth_one() {
        let mut spec = two_state_multinomial();
        spec.model = MapModelKind::Multinomial {
            probs: MultinomialProbs::Table {
                rows: vec![vec![0.25, 0.75], vec![0.25, 0.75]],
            },
        };
        let root = RngStream::new(4, 0);
        let mut ones = 0;
        for i in 0..4000 {
            let s = backward_sample(&spec, 10, &root.substream(i)).unwrap();
            assert_eq!(s.depth, 1);
            ones += s.state;
        }
        assert!((ones as f64 / 4000.0 - 0.75).abs() < 0.03);
    }

    #[test]
    fn backward_samples_match_stationary_law() {
        let spec = two_state_multinomial();
        let root = RngStream::new(5, 0);
        let n = 20_000;
        let ones: usize = (0..n)
            .map(|i| backward_sample(&spec, 1000, &root.substream(i)).unwrap().state)
            .sum();
        let p1 = ones as f64 / n as f64;
        assert!((p1 - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 1e-3);
        // Induced chain check.
        let p = StochasticMatrix::from_rows(vec![vec![0.7, 0.3], vec![0.3, 0.7]]).unwrap();
        assert_eq!(p.stationary().unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn coupled_paths_share_maps() {
        let spec = two_state_multinomial();
        let traced = simulate_maps_coupled_traced(
            &spec,
            5,
            30,
            1,
            Initialization::Perfect { max_depth: 500 },
            &RngStream::new(6, 0),
        )
        .unwrap();
        let path = &traced.path;
        for (k, f) in traced.maps.iter().enumerate() {
            assert_eq!(f.apply(path.y[5 + k]), path.y[6 + k]);
            assert_eq!(f.apply(path.y_prime[k]), path.y_prime[k + 1]);
        }
        let mut merged = false;
        for &d in &path.disagreement {
            if merged {
                assert!(!d);
            }
            merged |= !d;
        }
    }

    #[test]
    fn same_start_never_disagrees() {
        let spec = two_state_multinomial();
        let rng = RngStream::new(7, 0);
        let init = Initialization::Perfect { max_depth: 500 };
        let probe = simulate_maps_coupled(&spec, 4, 20, 0, init, &rng).unwrap();
        let path = simulate_maps_coupled(&spec, 4, 20, probe.y[4], init, &rng).unwrap();
        assert!(path.disagreement.iter().all(|d| !d));
    }

    #[test]
    fn lower_bounds() {
        // Multinomial: inf H_0 = 0.3, inf H_1 = 0.3.
        assert!((coalescence_lower_bound(&two_state_multinomial()).unwrap() - 0.3).abs() < 1e-12);
        // Gumbel closed form agrees with quadrature.
        let gum = NoiseSpec::GumbelVector { dim: 3 };
        let closed = win_probability(&gum, 3, 0.4);
        let h = 1.0 / 200_000.0;
        let numeric: f64 = (0..200_000)
            .map(|i| {
                let u = (i as f64 + 0.5) * h;
                gum.cdf(gum.quantile(u) - 0.4).powi(2)
            })
            .sum::<f64>()
            * h;
        assert!((closed - numeric).abs() < 1e-6);
    }

    #[test]
    fn cftp_coalesces_on_cached_environment() {
        let spec = two_state_multinomial();
        let mut env = TwoSidedEnvironment::new(&spec.environment, 10, &RngStream::new(8, 0)).unwrap();
        let a = backward_sample_in(&spec, &mut env, 1000).unwrap();
        let b = backward_sample_in(&spec, &mut env, 1000).unwrap();
        assert_eq!(a, b);
    }
}
