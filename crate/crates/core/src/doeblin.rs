//! Markov chains in random environments.
//!
//! A [`KernelFamily`] maps a covariate value to a transition matrix. The
//! response moves by `Y_t ~ P_{X_{t-1}}(Y_{t-1}, .)`. Over a block of `m`
//! covariates the `m`-step product is split as `eta nu + (1 - eta) R`, and
//! the block coupling uses that split to merge two copies of the chain.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{coalesce_from_past, RandomMapRealization};
use crate::matrix::StochasticMatrix;
use crate::process::{
    CovariateProcessSpec, EnvironmentSampler, EnvironmentSpec, ExogeneityMode, NoiseSpec, TwoSidedEnvironment,
};
use crate::rng::{sample_categorical, RngStream};

/// Below this, `1 - eta` is treated as zero.
pub const ETA_ONE_TOL: f64 = 1e-12;
/// Below this, `eta` is treated as zero.
pub const ETA_ZERO_TOL: f64 = 1e-15;

type Evaluator = dyn Fn(&[f64]) -> StochasticMatrix + Send + Sync;

/// Covariate-indexed transition matrices on `0..n_states`.
#[derive(Clone)]
pub struct KernelFamily {
    n_states: usize,
    dim: usize,
    block_len: usize,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFamily")
            .field("n_states", &self.n_states)
            .field("dim", &self.dim)
            .field("block_len", &self.block_len)
            .finish()
    }
}

impl KernelFamily {
    /// `eval` must return an `n_states`-state matrix for every input of length `dim`.
    pub fn new<F>(n_states: usize, dim: usize, block_len: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> StochasticMatrix + Send + Sync + 'static,
    {
        if n_states == 0 || block_len == 0 {
            return Err(Error::InvalidParameter(
                "kernel family needs n_states >= 1 and block_len >= 1".into(),
            ));
        }
        Ok(Self {
            n_states,
            dim,
            block_len,
            eval: Arc::new(eval),
        })
    }

    /// The same matrix for every covariate value.
    pub fn constant(p: StochasticMatrix, dim: usize) -> Self {
        let n = p.n();
        Self {
            n_states: n,
            dim,
            block_len: 1,
            eval: Arc::new(move |_| p.clone()),
        }
    }

    pub fn with_block_len(mut self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("block length must be >= 1".into()));
        }
        self.block_len = m;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn kernel(&self, x: &[f64]) -> Result<StochasticMatrix> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!(
                "covariate of dimension {} for a family of dimension {}",
                x.len(),
                self.dim
            )));
        }
        let p = (self.eval)(x);
        if p.n() != self.n_states {
            return Err(Error::Dimension(format!(
                "evaluator returned a {}-state matrix, expected {}",
                p.n(),
                self.n_states
            )));
        }
        Ok(p)
    }
}

/// Coefficients of a softmax family; `theta[i][j]` is the vector for the
/// transition `i -> j`, and `supports[i]` lists the reachable `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxSpec {
    pub theta: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub supports: Option<Vec<Vec<usize>>>,
}

/// `P_x(i, j) = exp(theta_ij . x) / sum_{l in J_i} exp(theta_il . x)` on `J_i`.
pub fn softmax_family(theta: &[Vec<Vec<f64>>], supports: Option<&[Vec<usize>]>) -> Result<KernelFamily> {
    let n = theta.len();
    if n == 0 || theta.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("theta must be an N x N array of vectors".into()));
    }
    let d = theta[0][0].len();
    if theta.iter().flatten().any(|v| v.len() != d) {
        return Err(Error::Dimension("theta vectors must share one dimension".into()));
    }
    let supports: Vec<Vec<usize>> = match supports {
        Some(s) => {
            if s.len() != n {
                return Err(Error::Dimension(format!("{} supports for {n} states", s.len())));
            }
            for (i, j) in s.iter().enumerate() {
                if j.is_empty() {
                    return Err(Error::InvalidParameter(format!("support of state {i} is empty")));
                }
                if j.iter().any(|&k| k >= n) {
                    return Err(Error::InvalidParameter(format!(
                        "support of state {i} leaves the state space"
                    )));
                }
            }
            s.to_vec()
        }
        None => vec![(0..n).collect(); n],
    };
    let theta = theta.to_vec();
    KernelFamily::new(n, d, 1, move |x| {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            let scores: Vec<f64> = supports[i]
                .iter()
                .map(|&j| theta[i][j].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
            let z: f64 = w.iter().sum();
            for (&j, wj) in supports[i].iter().zip(&w) {
                data[i * n + j] = wj / z;
            }
        }
        StochasticMatrix::from_flat(n, data).expect("softmax rows are stochastic")
    })
}

/// Smallest `k` such that every entry of the `k`-th power of the support
/// pattern is positive, if the pattern is regular.
pub fn support_regularity(supports: &[Vec<usize>]) -> Option<usize> {
    let n = supports.len();
    let adj: Vec<Vec<bool>> = supports
        .iter()
        .map(|s| (0..n).map(|j| s.contains(&j)).collect())
        .collect();
    let mut reach = adj.clone();
    // Wielandt: a primitive pattern is positive by power (n-1)^2 + 1.
    for k in 1..=((n - 1) * (n - 1) + 1) {
        if reach.iter().flatten().all(|&b| b) {
            return Some(k);
        }
        reach = (0..n)
            .map(|i| (0..n).map(|j| (0..n).any(|l| reach[i][l] && adj[l][j])).collect())
            .collect();
    }
    None
}

/// `P_{z_0} P_{z_1} ... P_{z_{m-1}}`.
pub fn m_step_product(family: &KernelFamily, z: &[Vec<f64>]) -> Result<StochasticMatrix> {
    if z.len() != family.block_len {
        return Err(Error::Dimension(format!(
            "covariate block of length {} for block length {}",
            z.len(),
            family.block_len
        )));
    }
    let mut acc = family.kernel(&z[0])?;
    for x in &z[1..] {
        acc = acc.mul(&family.kernel(x)?)?;
    }
    Ok(acc)
}

/// `pi = eta nu + (1 - eta) R` with `eta` maximal.
///
/// `nu` is `None` when `eta = 0`; `residual` is `None` when `eta = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoeblinParts {
    pub eta: f64,
    pub nu: Option<Vec<f64>>,
    pub residual: Option<StochasticMatrix>,
}

impl DoeblinParts {
    /// `eta nu(y) + (1 - eta) R(x, y)`.
    pub fn reconstruct(&self, x: usize, y: usize) -> f64 {
        let a = self.nu.as_ref().map_or(0.0, |nu| self.eta * nu[y]);
        let b = self.residual.as_ref().map_or(0.0, |r| (1.0 - self.eta) * r.get(x, y));
        a + b
    }
}

pub fn doeblin_decompose(pi: &StochasticMatrix) -> Result<DoeblinParts> {
    let n = pi.n();
    let colmin: Vec<f64> = (0..n)
        .map(|y| (0..n).map(|x| pi.get(x, y)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut eta: f64 = colmin.iter().sum();
    if eta < ETA_ZERO_TOL {
        return Ok(DoeblinParts {
            eta: 0.0,
            nu: None,
            residual: Some(pi.clone()),
        });
    }
    let nu: Vec<f64> = colmin.iter().map(|c| c / eta).collect();
    if 1.0 - eta < ETA_ONE_TOL {
        eta = 1.0;
        return Ok(DoeblinParts {
            eta,
            nu: Some(nu),
            residual: None,
        });
    }
    let mut data = vec![0.0; n * n];
    for x in 0..n {
        let row = &mut data[x * n..(x + 1) * n];
        for y in 0..n {
            row[y] = ((pi.get(x, y) - colmin[y]) / (1.0 - eta)).max(0.0);
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(DoeblinParts {
        eta,
        nu: Some(nu),
        residual: Some(StochasticMatrix::from_flat(n, data)?),
    })
}

/// Law of the interior states `(Y_1, ..., Y_{m-1})` of a block given
/// `Y_0 = y0` and `Y_m = ym`.
#[derive(Debug, Clone)]
pub struct Bridge {
    kernels: Vec<StochasticMatrix>,
    /// `to_end[k][y] = P(Y_m = ym | Y_k = y)` for `k = 1..m`.
    to_end: Vec<Vec<f64>>,
    y0: usize,
    ym: usize,
}

pub fn bridge_law(family: &KernelFamily, z: &[Vec<f64>], y0: usize, ym: usize) -> Result<Bridge> {
    let kernels = z.iter().map(|x| family.kernel(x)).collect::<Result<Vec<_>>>()?;
    Bridge::new(kernels, y0, ym)
}

impl Bridge {
    pub fn new(kernels: Vec<StochasticMatrix>, y0: usize, ym: usize) -> Result<Self> {
        let m = kernels.len();
        if m == 0 {
            return Err(Error::InvalidParameter("bridge needs at least one kernel".into()));
        }
        let n = kernels[0].n();
        if y0 >= n || ym >= n {
            return Err(Error::InvalidParameter(
                "bridge endpoint outside the state space".into(),
            ));
        }
        let mut to_end = vec![vec![0.0; n]; m + 1];
        to_end[m][ym] = 1.0;
        for k in (0..m).rev() {
            to_end[k] = kernels[k].right_apply(&to_end[k + 1]);
        }
        if !(to_end[0][y0] > 0.0) {
            return Err(Error::ZeroProbability(format!(
                "endpoint {ym} is unreachable from {y0} in this block"
            )));
        }
        Ok(Self {
            kernels,
            to_end,
            y0,
            ym,
        })
    }

    pub fn len(&self) -> usize {
        self.kernels.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn step_law(&self, k: usize, prev: usize) -> Vec<f64> {
        let row = self.kernels[k - 1].row(prev);
        let w: Vec<f64> = row.iter().zip(&self.to_end[k]).map(|(p, b)| p * b).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.len());
        let mut prev = self.y0;
        for k in 1..self.kernels.len() {
            prev = rng.categorical(&self.step_law(k, prev));
            path.push(prev);
        }
        path
    }

    pub fn probability(&self, interior: &[usize]) -> f64 {
        if interior.len() != self.len() {
            return 0.0;
        }
        let mut p = 1.0;
        let mut prev = self.y0;
        for (k, &y) in interior.iter().enumerate() {
            p *= self.kernels[k].get(prev, y);
            prev = y;
        }
        p * self.kernels[self.len()].get(prev, self.ym) / self.to_end[0][self.y0]
    }

    /// Every interior path with positive probability.
    pub fn enumerate(&self) -> Vec<(Vec<usize>, f64)> {
        let n = self.kernels[0].n();
        let len = self.len();
        let total = n.pow(len as u32);
        (0..total)
            .map(|mut code| {
                (0..len)
                    .map(|_| {
                        let y = code % n;
                        code /= n;
                        y
                    })
                    .collect::<Vec<_>>()
            })
            .map(|path| {
                let p = self.probability(&path);
                (path, p)
            })
            .filter(|(_, p)| *p > 0.0)
            .collect()
    }
}

/// Index of the lag vector `(y_1, ..., y_p)` in `E^p`: `sum y_i N^(i-1)`.
pub fn lag_index(lags: &[usize], n: usize) -> usize {
    lags.iter().rev().fold(0, |acc, &y| acc * n + y)
}

/// Inverse of [`lag_index`].
pub fn lag_vector(index: usize, n: usize, p: usize) -> Vec<usize> {
    let mut k = index;
    (0..p)
        .map(|_| {
            let y = k % n;
            k /= n;
            y
        })
        .collect()
}

/// Embeds a `p`-lag chain with law `q(lags, x)` for the next state into a
/// first-order family on `E^p`, with block length `p`.
pub fn lag_embedding<F>(n: usize, p: usize, dim: usize, q: F) -> Result<KernelFamily>
where
    F: Fn(&[usize], &[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    if p == 0 {
        return Err(Error::InvalidParameter("lag order must be >= 1".into()));
    }
    let big = n
        .checked_pow(p as u32)
        .filter(|&v| v <= 4096)
        .ok_or(Error::AlphabetTooLarge {
            size: usize::MAX,
            limit: 4096,
        })?;
    KernelFamily::new(big, dim, p, move |x| {
        let mut data = vec![0.0; big * big];
        for s in 0..big {
            let lags = lag_vector(s, n, p);
            let next = q(&lags, x);
            for (y, &w) in next.iter().enumerate() {
                let mut shifted = Vec::with_capacity(p);
                shifted.push(y);
                shifted.extend_from_slice(&lags[..p - 1]);
                data[s * big + lag_index(&shifted, n)] += w;
            }
        }
        StochasticMatrix::from_flat(big, data).expect("lag embedding rows are stochastic")
    })
}

/// Smallest Doeblin constant of the `m`-step product over blocks drawn from `grid`.
///
/// With `m > 1` every block in `grid^m` is visited.
pub fn eta_min(family: &KernelFamily, grid: &[Vec<f64>]) -> Result<f64> {
    let m = family.block_len;
    let g = grid.len();
    if g == 0 {
        return Err(Error::InvalidParameter("empty covariate grid".into()));
    }
    let total = g
        .checked_pow(m as u32)
        .filter(|&t| t <= 1_000_000)
        .ok_or(Error::AlphabetTooLarge {
            size: usize::MAX,
            limit: 1_000_000,
        })?;
    let kernels = grid.iter().map(|x| family.kernel(x)).collect::<Result<Vec<_>>>()?;
    (0..total)
        .into_par_iter()
        .map(|mut code| {
            let mut acc = kernels[code % g].clone();
            code /= g;
            for _ in 1..m {
                acc = acc.mul(&kernels[code % g])?;
                code /= g;
            }
            Ok(doeblin_decompose(&acc)?.eta)
        })
        .try_reduce(|| 1.0, |a, b| Ok(a.min(b)))
}

/// Joint law of the block endpoints `(Y_end, Y'_end)` under the coupling,
/// as an `N x N` table.
pub fn block_coupling_law(pi: &StochasticMatrix, parts: &DoeblinParts, y: usize, y_prime: usize) -> Vec<f64> {
    let n = pi.n();
    let mut law = vec![0.0; n * n];
    if y == y_prime {
        for w in 0..n {
            law[w * n + w] = pi.get(y, w);
        }
        return law;
    }
    if let Some(nu) = &parts.nu {
        for w in 0..n {
            law[w * n + w] += parts.eta * nu[w];
        }
    }
    if let Some(r) = &parts.residual {
        for w in 0..n {
            for v in 0..n {
                law[w * n + v] += (1.0 - parts.eta) * r.get(y, w) * r.get(y_prime, v);
            }
        }
    }
    law
}

/// How the pre-restart path is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Initialization {
    /// Start uniformly at random `steps` before time 0.
    BurnIn { steps: usize },
    /// Exact stationary draw at time 0 by coupling from the past.
    Perfect { max_depth: usize },
}

impl Initialization {
    pub fn default_burn_in(family: &KernelFamily) -> Self {
        Self::BurnIn {
            steps: 10 * family.n_states() * family.block_len(),
        }
    }
}

/// Two trajectories driven by a common environment, the second restarted
/// from a fixed state at `restart_index`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledPath {
    /// `y[t]` for `t = 0..=horizon`.
    pub y: Vec<usize>,
    /// `y_prime[k]` is `Y'_{restart_index + k}`.
    pub y_prime: Vec<usize>,
    pub restart_index: usize,
    pub block_len: usize,
    /// `disagreement[k] = (Y_{r+k} != Y'_{r+k})`.
    pub disagreement: Vec<bool>,
    /// First block boundary `t >= r` with `Y_t = Y'_t`.
    pub coalescence_time: Option<usize>,
    /// Doeblin constant of each realized block.
    pub eta_blocks: Vec<f64>,
}

impl CoupledPath {
    /// Disagreement at the block boundary `r + s m`.
    pub fn disagree_at_block(&self, s: usize) -> Option<bool> {
        self.disagreement.get(s * self.block_len).copied()
    }

    pub fn n_blocks(&self) -> usize {
        (self.disagreement.len() - 1) / self.block_len
    }
}

/// Covariates plus a uniform noise coordinate used for the pre-restart moves.
fn mre_environment(env: &CovariateProcessSpec) -> EnvironmentSpec {
    EnvironmentSpec {
        covariates: env.clone(),
        noise: NoiseSpec::Uniform01 { dim: 1 },
        exogeneity: ExogeneityMode::Strict,
    }
}

/// One draw of the block coupling, following the proof construction.
pub fn simulate_mre_coupled(
    family: &KernelFamily,
    env: &CovariateProcessSpec,
    r: usize,
    horizon: usize,
    y0: usize,
    init: Initialization,
    rng: &RngStream,
) -> Result<CoupledPath> {
    let n = family.n_states();
    let m = family.block_len();
    if !(0 < r && r < horizon) {
        return Err(Error::InvalidParameter(format!(
            "restart index must satisfy 0 < r < horizon, got r = {r}, horizon = {horizon}"
        )));
    }
    if y0 >= n {
        return Err(Error::InvalidParameter(format!("restart state {y0} outside 0..{n}")));
    }
    if env.dim() != family.dim() {
        return Err(Error::Dimension(format!(
            "environment of dimension {} for a family of dimension {}",
            env.dim(),
            family.dim()
        )));
    }
    let depth = match init {
        Initialization::BurnIn { steps } => steps,
        Initialization::Perfect { max_depth } => max_depth,
    };
    let mut environment = TwoSidedEnvironment::new(&mre_environment(env), depth + 1, &rng.substream(0))?;
    let mut coupling_rng = rng.substream(1);

    // Y_0.
    let start = match init {
        Initialization::BurnIn { steps } => {
            let mut y = rng.substream(2).index(n);
            for t in (1 - steps as i64)..=0 {
                let step = environment.at(t)?.clone();
                let prev_x = environment.at(t - 1)?.x.value.clone();
                y = sample_categorical(family.kernel(&prev_x)?.row(y), step.eps[0]);
            }
            y
        }
        Initialization::Perfect { max_depth } => {
            if n > 8 {
                return Err(Error::Unsupported(format!(
                    "perfect initialization is offered for at most 8 states, got {n}"
                )));
            }
            let (y, _) = coalesce_from_past(n, max_depth, |t| {
                let u = environment.at(t)?.eps[0];
                let x = environment.at(t - 1)?.x.value.clone();
                let p = family.kernel(&x)?;
                Ok(RandomMapRealization::from_table(
                    (0..n).map(|y| sample_categorical(p.row(y), u)).collect(),
                ))
            })?;
            y
        }
    };

    let mut y = Vec::with_capacity(horizon + 1);
    y.push(start);
    for t in 1..=r {
        let x = environment.at(t as i64 - 1)?.x.value.clone();
        let u = environment.at(t as i64)?.eps[0];
        let prev = *y.last().expect("nonempty");
        y.push(sample_categorical(family.kernel(&x)?.row(prev), u));
    }

    let mut y_prime = vec![y0];
    let mut eta_blocks = Vec::new();
    let mut t = r;
    while t + m <= horizon {
        let z = (0..m)
            .map(|k| Ok(environment.at((t + k) as i64)?.x.value.clone()))
            .collect::<Result<Vec<_>>>()?;
        let kernels = z.iter().map(|x| family.kernel(x)).collect::<Result<Vec<_>>>()?;
        let mut pi = kernels[0].clone();
        for k in &kernels[1..] {
            pi = pi.mul(k)?;
        }
        let parts = doeblin_decompose(&pi)?;
        eta_blocks.push(parts.eta);
        let (a, b) = (y[t], *y_prime.last().expect("nonempty"));
        let (end_a, end_b) = if a == b {
            let w = coupling_rng.categorical(pi.row(a));
            (w, w)
        } else if parts.eta > 0.0 && coupling_rng.uniform() < parts.eta {
            let w = coupling_rng.categorical(parts.nu.as_ref().expect("nu exists when eta > 0"));
            (w, w)
        } else {
            let res = parts.residual.as_ref().expect("residual exists when eta < 1");
            (
                coupling_rng.categorical(res.row(a)),
                coupling_rng.categorical(res.row(b)),
            )
        };
        if m > 1 {
            let bridge_a = Bridge::new(kernels.clone(), a, end_a)?;
            let interior_a = bridge_a.sample(&mut coupling_rng);
            let interior_b = if a == b && end_a == end_b {
                interior_a.clone()
            } else {
                Bridge::new(kernels, b, end_b)?.sample(&mut coupling_rng)
            };
            y.extend(interior_a);
            y_prime.extend(interior_b);
        }
        y.push(end_a);
        y_prime.push(end_b);
        t += m;
    }
    // Leftover steps after the last full block move one kernel at a time.
    while t < horizon {
        let p = family.kernel(&environment.at(t as i64)?.x.value.clone())?;
        let (a, b) = (y[t], *y_prime.last().expect("nonempty"));
        let u = coupling_rng.uniform();
        y.push(sample_categorical(p.row(a), u));
        if a == b {
            y_prime.push(*y.last().expect("nonempty"));
        } else {
            y_prime.push(coupling_rng.categorical(p.row(b)));
        }
        t += 1;
    }

    let disagreement: Vec<bool> = y_prime.iter().enumerate().map(|(k, &b)| y[r + k] != b).collect();
    let coalescence_time = (0..disagreement.len())
        .step_by(m)
        .find(|&k| !disagreement[k])
        .map(|k| r + k);
    Ok(CoupledPath {
        y,
        y_prime,
        restart_index: r,
        block_len: m,
        disagreement,
        coalescence_time,
        eta_blocks,
    })
}

/// `E eta_Z` over stationary blocks `Z = (X_0, ..., X_{m-1})` of a
/// finite-support environment, by enumerating every block.
pub fn mean_eta(family: &KernelFamily, env: &CovariateProcessSpec) -> Result<f64> {
    let (values, p, pi) = env.as_finite_chain()?;
    let m = family.block_len();
    let k = values.len();
    let total = k
        .checked_pow(m as u32)
        .filter(|&t| t <= 1_000_000)
        .ok_or(Error::AlphabetTooLarge {
            size: usize::MAX,
            limit: 1_000_000,
        })?;
    let kernels = values.iter().map(|x| family.kernel(x)).collect::<Result<Vec<_>>>()?;
    (0..total)
        .into_par_iter()
        .map(|code| {
            let labels: Vec<usize> = (0..m).map(|i| code / k.pow(i as u32) % k).collect();
            let mut weight = pi[labels[0]];
            for w in labels.windows(2) {
                weight *= p.get(w[0], w[1]);
            }
            if weight == 0.0 {
                return Ok(0.0);
            }
            let mut acc = kernels[labels[0]].clone();
            for &l in &labels[1..] {
                acc = acc.mul(&kernels[l])?;
            }
            Ok(weight * doeblin_decompose(&acc)?.eta)
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.iter().sum())
}

/// A stationary-start forward path: `x[t]` and `y[t]` for `t = 0..=horizon`,
/// after `burn_in` unrecorded steps from a uniform state.
pub fn simulate_mre(
    family: &KernelFamily,
    env: &CovariateProcessSpec,
    horizon: usize,
    burn_in: usize,
    rng: &RngStream,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if env.dim() != family.dim() {
        return Err(Error::Dimension(format!(
            "environment of dimension {} for a family of dimension {}",
            env.dim(),
            family.dim()
        )));
    }
    let mut sampler = EnvironmentSampler::new(&mre_environment(env), &rng.substream(0))?;
    let mut y = rng.substream(1).index(family.n_states());
    let mut prev = sampler.next_step();
    let mut xs = Vec::with_capacity(horizon + 1);
    let mut ys = Vec::with_capacity(horizon + 1);
    for t in 0..=burn_in + horizon {
        if t > 0 {
            let step = sampler.next_step();
            y = sample_categorical(family.kernel(&prev.x.value)?.row(y), step.eps[0]);
            prev = step;
        }
        if t >= burn_in {
            xs.push(prev.x.value.clone());
            ys.push(y);
        }
    }
    Ok((xs, ys))
}

/// Disagreement frequencies at block boundaries across replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockDisagreement {
    pub restart_index: usize,
    pub block_len: usize,
    /// `p_hat[s]` estimates `P(Y_{r+sm} != Y'_{r+sm})`.
    pub p_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub mean_eta: f64,
    pub replicates: usize,
}

/// Runs `replicates` independent couplings on substreams of `rng`.
///
/// Replicate `i` uses `rng.substream(i)`; the result does not depend on the
/// number of threads.
#[allow(clippy::too_many_arguments)]
pub fn mre_disagreement(
    family: &KernelFamily,
    env: &CovariateProcessSpec,
    r: usize,
    horizon: usize,
    y0: usize,
    init: Initialization,
    replicates: usize,
    rng: &RngStream,
) -> Result<BlockDisagreement> {
    let m = family.block_len();
    let blocks = (horizon - r.min(horizon)) / m + 1;
    let per_rep = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_mre_coupled(family, env, r, horizon, y0, init, &rng.substream(i))?;
            let flags: Vec<bool> = (0..blocks)
                .map(|s| path.disagree_at_block(s).unwrap_or(false))
                .collect();
            Ok((flags, path.eta_blocks.iter().sum::<f64>(), path.eta_blocks.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u64; blocks];
    let mut eta_sum = 0.0;
    let mut eta_n = 0usize;
    for (flags, es, en) in &per_rep {
        for (c, &f) in counts.iter_mut().zip(flags) {
            *c += f as u64;
        }
        eta_sum += es;
        eta_n += en;
    }
    let n = replicates as f64;
    let p_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let se = p_hat.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    Ok(BlockDisagreement {
        restart_index: r,
        block_len: m,
        p_hat,
        se,
        mean_eta: if eta_n > 0 { eta_sum / eta_n as f64 } else { 0.0 },
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::Marginal;

    fn two_state() -> StochasticMatrix {
        StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn switch_family() -> KernelFamily {
        KernelFamily::new(2, 1, 1, |x: &[f64]| {
            if x[0] > 0.5 {
                StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.1, 0.9]]).unwrap()
            } else {
                StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
            }
        })
        .unwrap()
    }

    #[test]
    fn mean_eta_iid_is_weighted_average() {
        let fam = switch_family();
        let env = CovariateProcessSpec::Iid {
            marginal: Marginal::Discrete {
                values: vec![vec![0.0], vec![1.0]],
                probs: vec![0.3, 0.7],
            },
        };
        // eta = sum_j min_i P(i, j): 0.2 + 0.1 and 0.1 + 0.5
        let got = mean_eta(&fam, &env).unwrap();
        assert!(close(got, 0.3 * 0.3 + 0.7 * 0.6), "{got}");
    }

    #[test]
    fn mean_eta_markov_blocks_enumerated() {
        let fam = switch_family().with_block_len(2).unwrap();
        let p = StochasticMatrix::from_rows(vec![vec![0.6, 0.4], vec![0.1, 0.9]]).unwrap();
        let pi = p.stationary().unwrap();
        let env = CovariateProcessSpec::FiniteMarkov {
            states: vec![vec![0.0], vec![1.0]],
            transition: p.clone(),
            stationary: None,
        };
        let mut want = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let z = vec![vec![a as f64], vec![b as f64]];
                let eta = doeblin_decompose(&m_step_product(&fam, &z).unwrap()).unwrap().eta;
                want += pi[a] * p.get(a, b) * eta;
            }
        }
        assert!(close(mean_eta(&fam, &env).unwrap(), want));
    }

    #[test]
    fn simulate_mre_shapes_and_determinism() {
        let fam = switch_family();
        let env = CovariateProcessSpec::Iid {
            marginal: Marginal::Discrete {
                values: vec![vec![0.0], vec![1.0]],
                probs: vec![0.5, 0.5],
            },
        };
        let rng = RngStream::new(3, 0);
        let (xs, ys) = simulate_mre(&fam, &env, 50, 10, &rng).unwrap();
        assert_eq!(xs.len(), 51);
        assert_eq!(ys.len(), 51);
        assert!(ys.iter().all(|&y| y < 2));
        assert_eq!(simulate_mre(&fam, &env, 50, 10, &rng).unwrap(), (xs, ys));
    }

    #[test]
    fn softmax_examples() {
        let zero = vec![vec![vec![0.0]; 3]; 3];
        let f = softmax_family(&zero, None).unwrap();
        let p = f.kernel(&[1.7]).unwrap();
        assert!((0..3).all(|i| (0..3).all(|j| close(p.get(i, j), 1.0 / 3.0))));

        let theta = vec![vec![vec![1.0], vec![0.0]], vec![vec![0.0], vec![0.0]]];
        let f = softmax_family(&theta, None).unwrap();
        let p = f.kernel(&[0.0]).unwrap();
        assert!(close(p.get(0, 0), 0.5) && close(p.get(1, 1), 0.5));
        let p = f.kernel(&[3f64.ln()]).unwrap();
        assert!(close(p.get(0, 0), 0.75) && close(p.get(0, 1), 0.25));

        let supports = vec![vec![1], vec![]];
        assert!(softmax_family(&theta, Some(&supports)).is_err());
    }

    #[test]
    fn softmax_respects_supports() {
        let theta = vec![vec![vec![0.3]; 3]; 3];
        let supports = vec![vec![1], vec![0, 2], vec![0, 1, 2]];
        let f = softmax_family(&theta, Some(&supports)).unwrap();
        let p = f.kernel(&[0.4]).unwrap();
        assert_eq!(p.get(0, 1), 1.0);
        assert_eq!(p.get(1, 1), 0.0);
        assert_eq!(support_regularity(&supports), Some(3));
        assert_eq!(support_regularity(&[vec![1], vec![0]]), None);
    }

    #[test]
    fn product_examples() {
        let p2 = StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.3, 0.7]]).unwrap();
        let id = StochasticMatrix::identity(2);
        let (a, b) = (id.clone(), p2.clone());
        let fam = KernelFamily::new(2, 1, 2, move |x| if x[0] < 0.5 { a.clone() } else { b.clone() }).unwrap();
        let prod = m_step_product(&fam, &[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(prod, p2);
        assert!(m_step_product(&fam, &[vec![0.0]]).is_err());
        let one = KernelFamily::constant(p2.clone(), 1);
        assert_eq!(m_step_product(&one, &[vec![0.0]]).unwrap(), p2);
    }

    #[test]
    fn decompose_examples() {
        let half = StochasticMatrix::uniform(2);
        let d = doeblin_decompose(&half).unwrap();
        assert_eq!(d.eta, 1.0);
        assert_eq!(d.nu, Some(vec![0.5, 0.5]));
        assert!(d.residual.is_none());

        let d = doeblin_decompose(&StochasticMatrix::identity(3)).unwrap();
        assert_eq!(d.eta, 0.0);
        assert!(d.nu.is_none());

        let d = doeblin_decompose(&two_state()).unwrap();
        assert!(close(d.eta, 0.3));
        let nu = d.nu.clone().unwrap();
        assert!(close(nu[0], 2.0 / 3.0) && close(nu[1], 1.0 / 3.0));
        // (0.9 - 0.2) / 0.7 = 1 and (0.8 - 0.1) / 0.7 = 1: the residual is the identity.
        let r = d.residual.clone().unwrap();
        assert!(close(r.get(0, 0), 1.0) && close(r.get(0, 1), 0.0));
        assert!(close(r.get(1, 0), 0.0) && close(r.get(1, 1), 1.0));
        for x in 0..2 {
            for y in 0..2 {
                assert!(close(d.reconstruct(x, y), two_state().get(x, y)));
            }
        }
    }

    #[test]
    fn bridge_examples() {
        let u = StochasticMatrix::uniform(3);
        let b = Bridge::new(vec![u.clone(), u.clone()], 0, 2).unwrap();
        for y in 0..3 {
            assert!(close(b.probability(&[y]), 1.0 / 3.0));
        }
        let b = Bridge::new(vec![StochasticMatrix::identity(3), u.clone()], 1, 2).unwrap();
        assert!(close(b.probability(&[1]), 1.0));
        let b = Bridge::new(vec![two_state(), StochasticMatrix::uniform(2)], 0, 0).unwrap();
        assert!(close(b.probability(&[0]), 0.9));
        let e = Bridge::new(vec![StochasticMatrix::identity(2)], 0, 1);
        assert!(matches!(e, Err(Error::ZeroProbability(_))));
    }

    #[test]
    fn bridge_reproduces_joint_law() {
        let mut rng = RngStream::new(9, 0);
        for _ in 0..20 {
            let n = 2 + rng.index(3);
            let m = 2 + rng.index(2);
            let kernels: Vec<StochasticMatrix> = (0..m)
                .map(|_| {
                    let rows = (0..n)
                        .map(|_| {
                            let w: Vec<f64> = (0..n).map(|_| rng.uniform() + 0.01).collect();
                            let s: f64 = w.iter().sum();
                            w.into_iter().map(|v| v / s).collect()
                        })
                        .collect();
                    StochasticMatrix::from_rows(rows).unwrap()
                })
                .collect();
            let mut prod = kernels[0].clone();
            for k in &kernels[1..] {
                prod = prod.mul(k).unwrap();
            }
            for y0 in 0..n {
                for ym in 0..n {
                    let b = Bridge::new(kernels.clone(), y0, ym).unwrap();
                    let mut total = 0.0;
                    for (path, p) in b.enumerate() {
                        // Direct path probability.
                        let mut direct = 1.0;
                        let mut prev = y0;
                        for (k, &y) in path.iter().enumerate() {
                            direct *= kernels[k].get(prev, y);
                            prev = y;
                        }
                        direct *= kernels[m - 1].get(prev, ym);
                        assert!((p * prod.get(y0, ym) - direct).abs() < 1e-12);
                        total += p;
                    }
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn lag_embedding_shifts() {
        let fam = lag_embedding(
            2,
            2,
            1,
            |lags, _| if lags[0] == 1 { vec![0.0, 1.0] } else { vec![0.5, 0.5] },
        )
        .unwrap();
        assert_eq!(fam.n_states(), 4);
        assert_eq!(fam.block_len(), 2);
        let p = fam.kernel(&[0.0]).unwrap();
        // (y1, y2) = (1, 0) -> (1, 1)
        assert_eq!(p.get(lag_index(&[1, 0], 2), lag_index(&[1, 1], 2)), 1.0);
        assert_eq!(lag_vector(lag_index(&[1, 0, 1], 2), 2, 3), vec![1, 0, 1]);
    }

    fn markov_env() -> CovariateProcessSpec {
        CovariateProcessSpec::FiniteMarkov {
            states: vec![vec![-1.0], vec![1.0]],
            transition: StochasticMatrix::from_rows(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap(),
            stationary: None,
        }
    }

    #[test]
    fn full_minorization_coalesces_immediately() {
        let fam = KernelFamily::constant(StochasticMatrix::constant_rows(&[0.2, 0.8]).unwrap(), 1);
        let root = RngStream::new(10, 0);
        for i in 0..200 {
            let path = simulate_mre_coupled(
                &fam,
                &markov_env(),
                5,
                20,
                0,
                Initialization::BurnIn { steps: 5 },
                &root.substream(i),
            )
            .unwrap();
            assert_eq!(path.disagree_at_block(1), Some(false));
            assert!(path.coalescence_time.unwrap() <= 6);
        }
    }

    #[test]
    fn identical_start_never_disagrees() {
        // Deterministic rotation: Y_t = Y_{t-1} + 1 mod 3, so Y_r = (Y_0 + r) mod 3.
        let rot =
            StochasticMatrix::from_rows(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let fam = KernelFamily::constant(rot, 1);
        let root = RngStream::new(11, 0);
        for i in 0..50 {
            let rng = root.substream(i);
            let probe =
                simulate_mre_coupled(&fam, &markov_env(), 4, 12, 0, Initialization::BurnIn { steps: 3 }, &rng).unwrap();
            let yr = probe.y[4];
            let path = simulate_mre_coupled(
                &fam,
                &markov_env(),
                4,
                12,
                yr,
                Initialization::BurnIn { steps: 3 },
                &rng,
            )
            .unwrap();
            assert!(path.disagreement.iter().all(|d| !d));
        }
    }

    #[test]
    fn coupling_is_sticky_and_marginally_faithful() {
        let theta = vec![vec![vec![1.0], vec![-0.5]], vec![vec![0.2], vec![0.8]]];
        let fam = softmax_family(&theta, None).unwrap();
        for x in [-1.0, 1.0] {
            let p = fam.kernel(&[x]).unwrap();
            let parts = doeblin_decompose(&p).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    let law = block_coupling_law(&p, &parts, a, b);
                    for w in 0..2 {
                        let first: f64 = (0..2).map(|v| law[w * 2 + v]).sum();
                        let second: f64 = (0..2).map(|v| law[v * 2 + w]).sum();
                        assert!((first - p.get(a, w)).abs() < 1e-15);
                        assert!((second - p.get(b, w)).abs() < 1e-15);
                    }
                }
            }
        }
        let root = RngStream::new(12, 0);
        for i in 0..200 {
            let path = simulate_mre_coupled(
                &fam,
                &markov_env(),
                3,
                40,
                1,
                Initialization::default_burn_in(&fam),
                &root.substream(i),
            )
            .unwrap();
            let mut merged = false;
            for d in &path.disagreement {
                if merged {
                    assert!(!d);
                }
                merged |= !d;
            }
        }
    }

    #[test]
    fn perfect_initialization_runs() {
        let theta = vec![vec![vec![1.0], vec![-0.5]], vec![vec![0.2], vec![0.8]]];
        let fam = softmax_family(&theta, None).unwrap();
        let env = CovariateProcessSpec::Iid {
            marginal: Marginal::Uniform {
                low: -1.0,
                high: 1.0,
                dim: 1,
            },
        };
        let path = simulate_mre_coupled(
            &fam,
            &env,
            2,
            10,
            0,
            Initialization::Perfect { max_depth: 500 },
            &RngStream::new(1, 1),
        )
        .unwrap();
        assert_eq!(path.y.len(), 11);
    }

    #[test]
    fn block_length_two_paths() {
        let theta = vec![vec![vec![1.0], vec![-0.5]], vec![vec![0.2], vec![0.8]]];
        let fam = softmax_family(&theta, None).unwrap().with_block_len(2).unwrap();
        let path = simulate_mre_coupled(
            &fam,
            &markov_env(),
            3,
            12,
            0,
            Initialization::default_burn_in(&fam),
            &RngStream::new(2, 2),
        )
        .unwrap();
        assert_eq!(path.y.len(), 13);
        assert_eq!(path.y_prime.len(), 10);
        assert_eq!(path.eta_blocks.len(), 4);
        assert!(simulate_mre_coupled(
            &fam,
            &markov_env(),
            0,
            12,
            0,
            Initialization::default_burn_in(&fam),
            &RngStream::new(2, 2)
        )
        .is_err());
    }

    #[test]
    fn eta_min_over_grid() {
        let theta = vec![vec![vec![1.0], vec![0.0]], vec![vec![0.0], vec![1.0]]];
        let fam = softmax_family(&theta, None).unwrap();
        let grid: Vec<Vec<f64>> = (0..=20).map(|i| vec![-1.0 + 0.1 * i as f64]).collect();
        let e = eta_min(&fam, &grid).unwrap();
        // Worst case at |x| = 1: rows (e/(e+1), 1/(e+1)) and its mirror.
        let expected = 2.0 / (1.0 + 1f64.exp());
        assert!((e - expected).abs() < 1e-12);
    }
}
