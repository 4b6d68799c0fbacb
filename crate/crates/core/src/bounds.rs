//! Mixing bounds for the coupling theorems and the sequences they use.
//!
//! Every infinite sum is returned as a partial sum plus a certified upper
//! bound on the remainder. Remainders come from closed-form integrals of
//! explicit majorants, so `partial + remainder` is always an upper bound.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::decay::{DecaySequence, Tail};
use crate::error::{Error, Result};
use crate::matrix::StochasticMatrix;
use crate::mixing::alpha_markov_exact;

/// Offset of the mixing lag `(j - 1) m + offset` inside the block infimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagConvention {
    /// `(j - 1) m + 1`, the default for the Markov-environment bound.
    #[default]
    PlusOne,
    /// `(j - 1) m`, used by the bound for random-map models.
    Zero,
    /// `(j - 1) m - 1`.
    MinusOne,
}

impl LagConvention {
    pub fn offset(self) -> i64 {
        match self {
            Self::PlusOne => 1,
            Self::Zero => 0,
            Self::MinusOne => -1,
        }
    }

    fn lag(self, j: usize, m: usize) -> i64 {
        (j as i64 - 1) * m as i64 + self.offset()
    }
}

/// A bound split into its leading mixing term, a partial sum and a
/// certified bound on the remainder of the sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub leading: f64,
    pub partial: f64,
    pub tail_remainder: f64,
}

impl BoundValue {
    fn new(leading: f64, partial: f64, tail_remainder: f64) -> Self {
        Self {
            value: leading + partial + tail_remainder,
            leading,
            partial,
            tail_remainder,
        }
    }
}

/// Inputs shared by the block-coupling bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub rho: f64,
    pub alpha: DecaySequence,
    /// Multiplier of `alpha / (1 - rho)` inside the infimum.
    #[serde(default = "default_factor")]
    pub factor: f64,
    /// Lag convention; the theorem-specific default applies when absent.
    #[serde(default)]
    pub lag: Option<LagConvention>,
}

fn default_factor() -> f64 {
    4.0
}

impl BoundInputs {
    pub fn new(n: usize, r: usize, m: usize, rho: f64, alpha: DecaySequence) -> Self {
        Self {
            n,
            r,
            m,
            rho,
            alpha,
            factor: 4.0,
            lag: None,
        }
    }

    pub fn with_lag(mut self, lag: LagConvention) -> Self {
        self.lag = Some(lag);
        self
    }

    pub fn with_factor(mut self, factor: f64) -> Self {
        self.factor = factor;
        self
    }

    fn check(&self) -> Result<()> {
        check_restart(self.n, self.r)?;
        check_rho(self.rho)?;
        if self.m == 0 {
            return Err(Error::InvalidParameter("block length m must be >= 1".into()));
        }
        if !(self.factor >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "factor must be >= 0, got {}",
                self.factor
            )));
        }
        let s = block_count(self.n, self.r, self.m);
        if s < 2 {
            return Err(Error::Precondition(format!(
                "s_n(r) = floor((n - r) / m) = {s} must be >= 2 (n = {}, r = {}, m = {})",
                self.n, self.r, self.m
            )));
        }
        Ok(())
    }
}

fn check_restart(n: usize, r: usize) -> Result<()> {
    if !(1 <= r && r < n) {
        return Err(Error::InvalidParameter(format!(
            "restart index must satisfy 1 ≤ r ≤ n−1, got r = {r}, n = {n}"
        )));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    Ok(())
}

/// `s_t(r) = floor((t - r) / m)`.
pub fn block_count(t: usize, r: usize, m: usize) -> usize {
    t.saturating_sub(r) / m
}

/// `inf_{1 <= j <= s-1} { rho^floor(s/j) + factor alpha(lag(j)) / (1 - rho) }`.
pub fn block_infimum(
    rho: f64,
    alpha: &DecaySequence,
    s: usize,
    m: usize,
    factor: f64,
    lag: LagConvention,
) -> Result<f64> {
    if s < 2 {
        return Err(Error::InvalidParameter(format!("s must be >= 2, got {s}")));
    }
    check_rho(rho)?;
    let weights = lag_weights(rho, alpha, s, m, factor, lag)?;
    Ok(infimum_from_weights(rho, &weights, s))
}

fn lag_weights(
    rho: f64,
    alpha: &DecaySequence,
    s_max: usize,
    m: usize,
    factor: f64,
    lag: LagConvention,
) -> Result<Vec<f64>> {
    // weights[j] for j in 1..s_max; index 0 unused.
    let mut w = vec![0.0; s_max.max(1)];
    for (j, slot) in w.iter_mut().enumerate().skip(1) {
        *slot = factor * alpha.at_signed(lag.lag(j, m))? / (1.0 - rho);
    }
    Ok(w)
}

fn infimum_from_weights(rho: f64, weights: &[f64], s: usize) -> f64 {
    (1..s)
        .map(|j| rho.powi((s / j) as i32) + weights[j])
        .fold(f64::INFINITY, f64::min)
}

/// The bound for products of a stationary `[0, 1]`-valued process:
/// `inf_{1 <= j <= s-1} { rho^floor(s/j) + factor alpha(j) / (1 - rho) }`.
pub fn lemma_ult_bound(rho: f64, alpha: &DecaySequence, s: usize, factor: f64) -> Result<f64> {
    block_infimum(rho, alpha, s, 1, factor, LagConvention::PlusOne)
}

/// A stationary two-state Markov chain with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaChain {
    pub values: [f64; 2],
    pub transition: StochasticMatrix,
    pub stationary: Vec<f64>,
}

impl KappaChain {
    pub fn new(values: [f64; 2], transition: StochasticMatrix) -> Result<Self> {
        if transition.n() != 2 {
            return Err(Error::Dimension("kappa chain needs a 2x2 transition".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(format!(
                "kappa values {values:?} must lie in [0, 1]"
            )));
        }
        let stationary = transition.stationary()?;
        Ok(Self {
            values,
            transition,
            stationary,
        })
    }

    /// `E kappa_1`.
    pub fn rho(&self) -> f64 {
        self.stationary.iter().zip(&self.values).map(|(p, v)| p * v).sum()
    }

    /// Mixing coefficient of the value process at lag `j`.
    pub fn alpha(&self, j: usize) -> Result<f64> {
        if self.values[0] == self.values[1] {
            return Ok(0.0);
        }
        alpha_markov_exact(&self.stationary, &self.transition, j)
    }

    /// Mixing coefficients at lags `0..=max_lag`, followed by zeros.
    ///
    /// Only lags up to `max_lag` are ever read by [`lemma_ult_bound`] with `s <= max_lag + 1`.
    pub fn alpha_sequence(&self, max_lag: usize) -> Result<DecaySequence> {
        let values = (0..=max_lag).map(|j| self.alpha(j)).collect::<Result<Vec<_>>>()?;
        DecaySequence::finite(values)
    }
}

/// Exact `E(kappa_1 ... kappa_s)` as `pi D (P D)^(s-1) 1` with `D = diag(values)`.
pub fn lemma_ult_oracle(chain: &KappaChain, s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be >= 1".into()));
    }
    let v = chain.values;
    let mut row = [chain.stationary[0] * v[0], chain.stationary[1] * v[1]];
    for _ in 1..s {
        let mut next = [0.0; 2];
        for (a, ra) in row.iter().enumerate() {
            for (b, nb) in next.iter_mut().enumerate() {
                *nb += ra * chain.transition.get(a, b) * v[b];
            }
        }
        row = next;
    }
    Ok(row[0] + row[1])
}

/// `C a^((t v 0)/p) + sum_{j >= 0} a^(j/p) v_((t-j) v 0)` with `a = sum_{i=1}^p a_i`.
pub fn lemma_ult3_bound(c: f64, a: &DecaySequence, v: &DecaySequence, t: i64, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be >= 1".into()));
    }
    let a_sum = a.tail_sum(1)?;
    if !(a_sum < 1.0) {
        return Err(Error::InvalidParameter(format!("sum of a_i is {a_sum} >= 1")));
    }
    let table = v.table();
    if table.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Precondition("v must be non-increasing".into()));
    }
    let ap: f64 = (1..=p).map(|i| a.get(i).unwrap_or(0.0)).sum();
    let root = ap.powf(1.0 / p as f64);
    let tt = t.max(0) as usize;
    let mut acc = c * ap.powf(tt as f64 / p as f64);
    let mut w = 1.0;
    for j in 0..tt {
        acc += w * v.at(tt - j)?;
        w *= root;
    }
    // From j = t on the index is clamped at zero.
    acc += v.at(0)? * w / (1.0 - root);
    Ok(acc)
}

/// `b*_0 = b_0` and `b*_n = P(T_n = 0)` for the renewal chain with
/// `Q(i, i+1) = 1 - b_i`, `Q(i, 0) = b_i`, started at 0.
pub fn bstar_sequence(b: &DecaySequence, n_max: usize) -> Result<DecaySequence> {
    DecaySequence::tabulated(bstar_values(b, n_max)?)
}

fn bstar_values(b: &DecaySequence, n_max: usize) -> Result<Vec<f64>> {
    let bs = (0..=n_max).map(|i| b.at(i)).collect::<Result<Vec<_>>>()?;
    if let Some(i) = bs.iter().position(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidParameter(format!("b_{i} = {} is outside [0, 1]", bs[i])));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(bs[0]);
    let mut dist = vec![0.0; n_max + 2];
    dist[0] = 1.0;
    for n in 1..=n_max {
        let mut next = vec![0.0; n_max + 2];
        for i in 0..n {
            let d = dist[i];
            if d == 0.0 {
                continue;
            }
            next[0] += d * bs[i];
            next[i + 1] += d * (1.0 - bs[i]);
        }
        dist = next;
        out.push(dist[0]);
    }
    Ok(out)
}

/// Upper bound on `sum_{n >= 0} b*_n`.
///
/// The expected number of returns is `F / (1 - F)` with `F = 1 - prod_i (1 - b_i)`;
/// the product is bounded below by `prod_{i<K} (1 - b_i) (1 - sum_{i>=K} b_i)`.
pub fn bstar_total_upper(b: &DecaySequence) -> Result<f64> {
    let k = b.table().len().max(10_000);
    let mut prod = 1.0;
    for i in 0..k {
        let bi = b.at(i)?;
        if !(0.0..=1.0).contains(&bi) {
            return Err(Error::InvalidParameter(format!("b_{i} = {bi} is outside [0, 1]")));
        }
        prod *= 1.0 - bi;
    }
    let escape = prod * (1.0 - b.tail_sum(k)?);
    if !(escape > 0.0) {
        return Err(Error::NotSummable(
            "the renewal chain returns to 0 with probability one, so b* is not summable".into(),
        ));
    }
    let f = 1.0 - escape;
    Ok(b.at(0)? + f / escape)
}

/// `(u * v)_n = sum_{j=0}^n u_j v_{n-j}` for `n < len`.
pub fn convolve(u: &[f64], v: &[f64], len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| (0..=n).filter_map(|j| Some(u.get(j)? * v.get(n - j)?)).sum())
        .collect()
}

/// Rounding allowance added to remainders computed by subtraction.
fn rounding_slack(total: f64, terms: usize) -> f64 {
    4.0 * f64::EPSILON * (total.abs() + 1.0) * (terms as f64 + 1.0)
}

/// `4 alpha_X(r) + 2 sum_{t >= n-r-1} b*_t + 4 |X_0|_1 sum_{t >= n-r} S_t
///  + 4 |X_0|_1 sum_{t >= n-r-1} (b* * S)_t`.
pub fn thm2_bound(
    alpha_x: &DecaySequence,
    b: &DecaySequence,
    s: &DecaySequence,
    x_l1: f64,
    n: usize,
    r: usize,
    cap: usize,
) -> Result<BoundValue> {
    if !(1 < r && r < n) {
        return Err(Error::InvalidParameter(format!(
            "restart index must satisfy 1 < r < n, got r = {r}, n = {n}"
        )));
    }
    if !(x_l1 >= 0.0) {
        return Err(Error::InvalidParameter(format!("|X_0|_1 must be >= 0, got {x_l1}")));
    }
    if cap < n {
        return Err(Error::InvalidParameter(format!("cap {cap} must be >= n = {n}")));
    }
    let first = n - r - 1;
    let bstar = bstar_values(b, cap)?;
    let bstar = &bstar[..cap];
    let b_total = bstar_total_upper(b)?;
    let b_done: f64 = bstar.iter().sum();
    let b_rem = (b_total - b_done).max(0.0) + rounding_slack(b_total, cap);
    let b_part: f64 = bstar[first..].iter().sum();

    let s_total = s.total()?;
    let s_vals = (0..cap).map(|i| s.at(i)).collect::<Result<Vec<_>>>()?;
    let s_rem = s.tail_sum(cap)?;
    let s_part: f64 = s_vals[first + 1..].iter().sum();

    let conv = convolve(bstar, &s_vals, cap);
    let conv_total = b_total * s_total;
    let conv_done: f64 = conv.iter().sum();
    let conv_rem = (conv_total - conv_done).max(0.0) + rounding_slack(conv_total, cap);
    let conv_part: f64 = conv[first..].iter().sum();

    let partial = 2.0 * b_part + 4.0 * x_l1 * (s_part + conv_part);
    let remainder = 2.0 * b_rem + 4.0 * x_l1 * (s_rem + conv_rem);
    Ok(BoundValue::new(4.0 * alpha_x.at(r)?, partial, remainder))
}

/// Integral of `theta^sqrt(x)` over `[u0^2, inf)`.
fn sqrt_exp_integral(theta: f64, u0: f64) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    let l = -theta.ln();
    2.0 * (-l * u0).exp() * (u0 / l + 1.0 / (l * l))
}

/// Upper incomplete gamma function `Gamma(a, y)`.
fn upper_gamma(a: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return ln_gamma(a).exp();
    }
    gamma_ur(a, y) * ln_gamma(a).exp()
}

/// Partial values and a certified remainder for `sum_{s >= 2} g(s)`, where
/// `g` is [`block_infimum`].
#[derive(Debug, Clone)]
struct InfimumSeries {
    /// `g(s)` for `s < tail_start` (entries below 2 unused).
    values: Vec<f64>,
    /// `suffix[s] = sum_{s <= s' < tail_start} g(s')`.
    suffix: Vec<f64>,
    tail_start: usize,
    remainder: f64,
}

impl InfimumSeries {
    fn new(rho: f64, alpha: &DecaySequence, m: usize, factor: f64, lag: LagConvention, s_cap: usize) -> Result<Self> {
        let (tail_start, remainder) = infimum_tail(rho, alpha, m, factor, lag, s_cap.max(2))?;
        let weights = lag_weights(rho, alpha, tail_start, m, factor, lag)?;
        let mut values = vec![0.0; tail_start];
        for (s, v) in values.iter_mut().enumerate().skip(2) {
            *v = infimum_from_weights(rho, &weights, s);
        }
        let mut suffix = vec![0.0; tail_start + 1];
        for s in (0..tail_start).rev() {
            suffix[s] = suffix[s + 1] + values[s];
        }
        Ok(Self {
            values,
            suffix,
            tail_start,
            remainder,
        })
    }

    /// `sum_{t >= n} g(s_t(r))` as `(partial, remainder)`; needs `s_n(r) < tail_start`.
    fn time_sum(&self, n: usize, r: usize, m: usize) -> (f64, f64) {
        let s0 = block_count(n, r, m);
        debug_assert!(s0 >= 2 && s0 < self.tail_start);
        // Times t >= n sharing the block index of n.
        let first_block = (m - (n - r) % m) as f64;
        let partial = first_block * self.values[s0] + m as f64 * self.suffix[s0 + 1];
        (partial, m as f64 * self.remainder)
    }
}

/// Smallest admissible start `S >= s_start` and a certified bound on `sum_{s >= S} g(s)`.
///
/// Uses `j = ceil(sqrt s)` for alphas with a geometric majorant and
/// `j = ceil(s^l)` with `l gamma > 1` for power tails.
fn infimum_tail(
    rho: f64,
    alpha: &DecaySequence,
    m: usize,
    factor: f64,
    lag: LagConvention,
    s_start: usize,
) -> Result<(usize, f64)> {
    let off = lag.offset() as f64;
    let mf = m as f64;
    let c = factor / (1.0 - rho);
    if alpha.tail() == Tail::Zero {
        // alpha(lag(j)) = 0 once lag(j) passes the support, so fix j there.
        let support = alpha.table().iter().rposition(|v| *v > 0.0).map_or(0, |i| i + 1) as i64;
        let mut j = 1usize;
        while lag.lag(j, m) < support {
            j += 1;
        }
        let s = s_start.max(j + 1);
        let t1 = if rho > 0.0 {
            j as f64 * rho.powi((s / j) as i32) / (1.0 - rho)
        } else {
            0.0
        };
        return Ok((s, t1));
    }
    if let Some((a, q)) = alpha.geometric_majorant() {
        let s = s_start.max(9);
        let u0 = ((s - 1) as f64).sqrt();
        // rho^floor(s/j) <= rho^(sqrt(s) - 2) and alpha(lag) <= a q^((sqrt(s) - 1) m + off).
        let t1 = if rho > 0.0 {
            sqrt_exp_integral(rho, u0) / (rho * rho)
        } else {
            0.0
        };
        let t2 = if a > 0.0 && q > 0.0 {
            c * a * q.powf(off - mf) * sqrt_exp_integral(q.powf(mf), u0)
        } else {
            0.0
        };
        return Ok((s, t1 + t2));
    }
    match alpha.tail() {
        Tail::Power { scale, exponent } => {
            if scale > 0.0 && exponent <= 1.0 {
                return Err(Error::NotSummable(format!(
                    "alpha has power tail with exponent {exponent} <= 1"
                )));
            }
            let len = alpha.table().len() as f64;
            let ell = (1.0 / exponent + 1.0) / 2.0;
            let beta = 1.0 - ell;
            let mut s = s_start.max(4);
            loop {
                let sf = s as f64;
                let se = sf.powf(ell);
                if se >= 3.0 && se - 2.0 >= len && sf - se >= 2.0 && (sf - 1.0).powf(beta) >= 2.0 {
                    break;
                }
                s += 1;
            }
            let sf = s as f64;
            let t1 = if rho > 0.0 {
                let l = -rho.ln();
                let shape = 1.0 / beta;
                upper_gamma(shape, l * (sf - 1.0).powf(beta)) / (beta * l.powf(shape)) / (rho * rho)
            } else {
                0.0
            };
            let kappa = ell * exponent;
            let t2 = c * scale * 3f64.powf(exponent) * (sf.powf(-kappa) + sf.powf(1.0 - kappa) / (kappa - 1.0));
            Ok((s, t1 + t2))
        }
        Tail::Geometric { .. } => Err(Error::NotSummable("alpha has a geometric tail with ratio >= 1".into())),
        _ => Err(Error::Precondition(
            "alpha needs an analytic tail (zero, geometric or power) to certify the remainder".into(),
        )),
    }
}

/// `4 alpha_X(r) + 2 sum_{t >= n} inf_j { rho^floor(s_t(r)/j) + 4 alpha_X(lag(j)) / (1 - rho) }`.
///
/// The default lag is `(j - 1) m + 1`; terms are summed up to `horizon_cap`
/// and the rest is certified.
pub fn thm1_bound(inputs: &BoundInputs, horizon_cap: usize) -> Result<BoundValue> {
    inputs.check()?;
    let lag = inputs.lag.unwrap_or(LagConvention::PlusOne);
    let series = series_for(inputs, lag, horizon_cap)?;
    let (partial, rem) = series.time_sum(inputs.n, inputs.r, inputs.m);
    Ok(BoundValue::new(
        4.0 * inputs.alpha.at(inputs.r)?,
        2.0 * partial,
        2.0 * rem,
    ))
}

/// `alpha_zeta(r + 1) + 2 sum_{t >= n} inf_j { ... alpha_zeta((j - 1) m) ... }`.
pub fn thm3_bound(inputs: &BoundInputs, horizon_cap: usize) -> Result<BoundValue> {
    inputs.check()?;
    let lag = inputs.lag.unwrap_or(LagConvention::Zero);
    let series = series_for(inputs, lag, horizon_cap)?;
    let (partial, rem) = series.time_sum(inputs.n, inputs.r, inputs.m);
    Ok(BoundValue::new(
        inputs.alpha.at(inputs.r + 1)?,
        2.0 * partial,
        2.0 * rem,
    ))
}

fn series_for(inputs: &BoundInputs, lag: LagConvention, horizon_cap: usize) -> Result<InfimumSeries> {
    let s_cap =
        block_count(horizon_cap.max(inputs.n), inputs.r, inputs.m).max(block_count(inputs.n, inputs.r, inputs.m) + 1);
    InfimumSeries::new(inputs.rho, &inputs.alpha, inputs.m, inputs.factor, lag, s_cap)
}

/// [`thm1_bound`] minimized over the admissible restart indices.
///
/// Returns `None` when no `r` gives `s_n(r) >= 2`.
pub fn thm1_bound_optimized(
    n: usize,
    m: usize,
    rho: f64,
    alpha: &DecaySequence,
    lag: LagConvention,
    horizon_cap: usize,
) -> Result<Option<(BoundValue, usize)>> {
    check_rho(rho)?;
    if m == 0 {
        return Err(Error::InvalidParameter("block length m must be >= 1".into()));
    }
    if n < 2 * m + 1 {
        return Ok(None);
    }
    let s_cap = block_count(horizon_cap.max(n), 0, m) + 1;
    let series = InfimumSeries::new(rho, alpha, m, 4.0, lag, s_cap)?;
    let mut best: Option<(BoundValue, usize)> = None;
    for r in 1..n {
        if block_count(n, r, m) < 2 {
            break;
        }
        let (partial, rem) = series.time_sum(n, r, m);
        let v = BoundValue::new(4.0 * alpha.at(r)?, 2.0 * partial, 2.0 * rem);
        if best.as_ref().is_none_or(|(b, _)| v.value < b.value) {
            best = Some((v, r));
        }
    }
    Ok(best)
}

/// Deterministic-minorization form: `4 alpha_X(r) + 2 sum_{t >= n} (1 - eta)^s_t(r)`, in closed form.
pub fn thm1_bound_deterministic(n: usize, r: usize, m: usize, eta: f64, alpha: &DecaySequence) -> Result<BoundValue> {
    check_restart(n, r)?;
    if m == 0 {
        return Err(Error::InvalidParameter("block length m must be >= 1".into()));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::NotSummable(format!(
            "eta must lie in (0, 1] for a summable bound, got {eta}"
        )));
    }
    let theta = 1.0 - eta;
    let s0 = block_count(n, r, m) as i32;
    let first_block = (m - (n - r) % m) as f64;
    let sum = first_block * theta.powi(s0) + m as f64 * theta.powi(s0 + 1) / (1.0 - theta);
    Ok(BoundValue::new(4.0 * alpha.at(r)?, 2.0 * sum, 0.0))
}

/// Precomputed tails `S_{p+1}` and `T_s` for repeated [`omega`] evaluations.
#[derive(Debug, Clone)]
struct OmegaTable {
    a_sum: f64,
    /// `s_tail[p] = sum_{i >= p+1} a_i` for `p <= p_max`.
    s_tail: Vec<f64>,
    /// `t_tail[s] = sum_{j >= s} b_j` for `s <= max_gap + 1`.
    t_tail: Vec<f64>,
    p_max: usize,
}

impl OmegaTable {
    fn new(a: &DecaySequence, b: &DecaySequence, p_max: usize, max_gap: usize) -> Result<Self> {
        if p_max == 0 {
            return Err(Error::InvalidParameter("p_max must be >= 1".into()));
        }
        let a_sum = a.tail_sum(1)?;
        if !(a_sum < 1.0) {
            return Err(Error::InvalidParameter(format!("sum of a_i is {a_sum} >= 1")));
        }
        let s_tail = (0..=p_max).map(|p| a.tail_sum(p + 1)).collect::<Result<Vec<_>>>()?;
        let top = max_gap + 1;
        let mut t_tail = vec![0.0; top + 1];
        t_tail[top] = b.tail_sum(top)?;
        for s in (0..top).rev() {
            t_tail[s] = t_tail[s + 1] + b.at(s)?;
        }
        Ok(Self {
            a_sum,
            s_tail,
            t_tail,
            p_max,
        })
    }

    fn eval(&self, gap: usize) -> f64 {
        let a = self.a_sum;
        (1..=self.p_max)
            .map(|p| {
                let pf = p as f64;
                let root = a.powf(1.0 / pf);
                let mut conv = 0.0;
                let mut w = 1.0;
                for j in 0..=gap + 1 {
                    conv += w * self.t_tail[gap + 1 - j];
                    w *= root;
                }
                a.powf(gap as f64 / pf) + self.s_tail[p] + conv
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `min_{1 <= p <= p_max} { a^((t-r)/p) + S_{p+1} + sum_{j=0}^{t-r+1} a^(j/p) T_{t-r+1-j} }`
/// with `a = sum_{i >= 1} a_i`, `S_{p+1} = sum_{i >= p+1} a_i` and `T_s = sum_{j >= s} b_j`.
pub fn omega(a: &DecaySequence, b: &DecaySequence, t: usize, r: usize, p_max: usize) -> Result<f64> {
    if t <= r {
        return Err(Error::InvalidParameter(format!(
            "omega needs t > r, got t = {t}, r = {r}"
        )));
    }
    Ok(OmegaTable::new(a, b, p_max, t - r)?.eval(t - r))
}

/// Response kind for [`cor_mixing_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Binary,
    IngarchIdentity,
    IngarchLog,
}

/// Settings for [`cor_mixing_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorSettings {
    /// The unspecified constant in front of the sum.
    pub l: f64,
    /// Moment exponent; the log model uses `omega^(K/(K+1))`.
    pub k: f64,
    pub p_max: usize,
    pub horizon_cap: usize,
}

impl Default for CorSettings {
    fn default() -> Self {
        Self {
            l: 1.0,
            k: 4.0,
            p_max: 50,
            horizon_cap: 1000,
        }
    }
}

/// `alpha_zeta(r + 1) + L sum_{t >= n} omega_{n,t,r}^e`, with `e = 1` for
/// binary and identity models and `e = K / (K + 1)` for the log model.
pub fn cor_mixing_bound(
    kind: ResponseKind,
    alpha_zeta: &DecaySequence,
    a: &DecaySequence,
    b: &DecaySequence,
    n: usize,
    r: usize,
    settings: &CorSettings,
) -> Result<BoundValue> {
    if !(1 < r && r < n) {
        return Err(Error::InvalidParameter(format!(
            "restart index must satisfy 1 < r < n, got r = {r}, n = {n}"
        )));
    }
    if !(settings.l >= 0.0) {
        return Err(Error::InvalidParameter(format!("L must be >= 0, got {}", settings.l)));
    }
    let e = match kind {
        ResponseKind::IngarchLog => {
            if !(settings.k >= 1.0) {
                return Err(Error::InvalidParameter(format!("K must be >= 1, got {}", settings.k)));
            }
            settings.k / (settings.k + 1.0)
        }
        _ => 1.0,
    };
    let (a_maj, qa) = a
        .geometric_majorant()
        .ok_or_else(|| Error::Unsupported("omega remainder needs a geometric majorant for a".into()))?;
    let (b_maj, qb) = b
        .geometric_majorant()
        .ok_or_else(|| Error::Unsupported("omega remainder needs a geometric majorant for b".into()))?;
    let a_sum = a.tail_sum(1)?;
    // With p = ceil(c sqrt d) and c = sqrt(l_a / l_q), every piece of omega_d is
    // at most a multiple of (d + 2) exp(-sqrt(l_a l_q) sqrt d) once d >= c^2.
    const RATE_CAP: f64 = 50.0;
    let l_a = if a_sum > 0.0 {
        (-a_sum.ln()).min(RATE_CAP)
    } else {
        RATE_CAP
    };
    let mut l_q = RATE_CAP;
    if a_maj > 0.0 {
        l_q = l_q.min(-qa.ln());
    }
    if b_maj > 0.0 {
        l_q = l_q.min(-qb.ln());
    }
    let c_ratio = (l_a / l_q).sqrt();
    let k0 = (l_a / (c_ratio * c_ratio)).exp();
    let c_const = if a_sum > 0.0 { k0 } else { 0.0 } + a_maj * qa / (1.0 - qa) + b_maj / (1.0 - qb) * k0.max(1.0);
    let lambda = e * (l_a * l_q).sqrt();

    let mut d0 = settings.horizon_cap.max(n) - r;
    if c_const > 0.0 {
        loop {
            let x = (d0 - 1) as f64;
            if x >= 1.0 && x >= c_ratio * c_ratio && x >= 1.0 / (lambda * lambda) && 2.0 * x.sqrt() < lambda * (x + 2.0)
            {
                break;
            }
            d0 += 1;
        }
    }
    let table = OmegaTable::new(a, b, settings.p_max, d0)?;
    let partial: f64 = (n - r..d0).map(|d| table.eval(d).powf(e)).sum();
    let remainder = if c_const > 0.0 {
        // Integral of (x + 2) exp(-lambda sqrt x) from d0 - 1.
        let y = lambda * ((d0 - 1) as f64).sqrt();
        let g4 = (-y).exp() * (y * y * y + 3.0 * y * y + 6.0 * y + 6.0);
        let g2 = (-y).exp() * (y + 1.0);
        c_const.powf(e) * (2.0 * g4 / lambda.powi(4) + 4.0 * g2 / (lambda * lambda))
    } else {
        0.0
    };
    Ok(BoundValue::new(
        alpha_zeta.at(r + 1)?,
        settings.l * partial,
        settings.l * remainder,
    ))
}

/// Decay class of the environment's mixing coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateKind {
    /// `alpha(n) ~ n^(-kappa)`; `ell` defaults to the midpoint of `(1/kappa, 1)`.
    Power {
        kappa: f64,
        ell: Option<f64>,
    },
    Geometric,
}

/// Margin below which a power schedule is flagged degenerate.
pub const SCHEDULE_MARGIN: f64 = 0.05;

/// `r = floor(n/2)` and `j = ceil(s^ell)` per block count `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSchedule {
    pub r: usize,
    pub ell: f64,
    /// `ell kappa` for power decay.
    pub kappa_prime: Option<f64>,
    /// `ell kappa - 1` or `1 - ell` is below [`SCHEDULE_MARGIN`].
    pub degenerate: bool,
}

impl RateSchedule {
    /// `ceil(s^ell)` clamped to `1..=s-1`.
    pub fn j(&self, s: usize) -> usize {
        let j = (s as f64).powf(self.ell).ceil() as usize;
        j.clamp(1, s.saturating_sub(1).max(1))
    }
}

pub fn rate_schedule(kind: RateKind, n: usize) -> Result<RateSchedule> {
    let r = n / 2;
    match kind {
        RateKind::Geometric => Ok(RateSchedule {
            r,
            ell: 0.5,
            kappa_prime: None,
            degenerate: false,
        }),
        RateKind::Power { kappa, ell } => {
            if !(kappa > 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "power schedule needs kappa > 1, got {kappa}"
                )));
            }
            let ell = match ell {
                Some(l) => {
                    if !(l > 0.0 && l < 1.0 && l * kappa > 1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "ell = {l} must lie in (0, 1) with ell kappa > 1 (kappa = {kappa})"
                        )));
                    }
                    l
                }
                None => (1.0 / kappa + 1.0) / 2.0,
            };
            let kp = ell * kappa;
            Ok(RateSchedule {
                r,
                ell,
                kappa_prime: Some(kp),
                degenerate: kp - 1.0 < SCHEDULE_MARGIN || 1.0 - ell < SCHEDULE_MARGIN,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn lemma_ult_examples() {
        let z = DecaySequence::zeros();
        assert!(close(lemma_ult_bound(0.5, &z, 6, 1.0).unwrap(), 0.5f64.powi(6), 1e-15));
        assert_eq!(lemma_ult_bound(0.0, &z, 6, 4.0).unwrap(), 0.0);
        let decade = DecaySequence::geometric(1.0, 0.1).unwrap();
        // j = 1: 0.0625 + 0.2; j = 2: 0.25 + 0.02; j = 3: 0.5 + 0.002.
        assert!(close(lemma_ult_bound(0.5, &decade, 4, 1.0).unwrap(), 0.2625, 1e-14));
        assert!(lemma_ult_bound(0.5, &z, 1, 1.0).is_err());
    }

    #[test]
    fn lemma_ult_oracle_examples() {
        let iid = KappaChain::new(
            [0.2, 0.8],
            StochasticMatrix::from_rows(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap(),
        )
        .unwrap();
        let rho = iid.rho();
        assert!(close(lemma_ult_oracle(&iid, 5).unwrap(), rho.powi(5), 1e-14));
        let one = KappaChain::new([1.0, 1.0], StochasticMatrix::uniform(2)).unwrap();
        assert!(close(lemma_ult_oracle(&one, 7).unwrap(), 1.0, 1e-14));
        // Path enumeration for s = 3.
        let p = [[0.9, 0.1], [0.2, 0.8]];
        let ch = KappaChain::new(
            [0.2, 0.8],
            StochasticMatrix::from_rows(p.iter().map(|r| r.to_vec()).collect()).unwrap(),
        )
        .unwrap();
        let pi = [2.0 / 3.0, 1.0 / 3.0];
        let v = [0.2, 0.8];
        let mut want = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    want += pi[a] * p[a][b] * p[b][c] * v[a] * v[b] * v[c];
                }
            }
        }
        assert!(close(lemma_ult_oracle(&ch, 3).unwrap(), want, 1e-14));
    }

    #[test]
    fn lemma_ult3_examples() {
        let a = DecaySequence::finite(vec![0.0, 0.3, 0.2]).unwrap();
        let zero = DecaySequence::zeros();
        let b = lemma_ult3_bound(2.0, &a, &zero, 6, 2).unwrap();
        assert!(close(b, 2.0 * 0.5f64.powf(3.0), 1e-14));
        let v = DecaySequence::geometric(1.0, 0.9).unwrap();
        let b0 = lemma_ult3_bound(2.0, &a, &v, 0, 2).unwrap();
        assert!(close(b0, 2.0 + 1.0 / (1.0 - 0.5f64.sqrt()), 1e-14));

        // Iterate the recursion with equality from u_{t <= 0} = C.
        let c = 2.0;
        let mut u = vec![c, c];
        for t in 1..=50i64 {
            let next = 0.3 * u[u.len() - 1] + 0.2 * u[u.len() - 2] + 0.9f64.powi(t as i32);
            u.push(next);
            assert!(next <= lemma_ult3_bound(c, &a, &v, t, 2).unwrap() + 1e-12);
        }
        let heavy = DecaySequence::finite(vec![0.0, 0.6, 0.5]).unwrap();
        assert!(lemma_ult3_bound(1.0, &heavy, &v, 3, 2).is_err());
    }

    /// `u_n` from the renewal equation with first-return law
    /// `f_k = b_{k-1} prod_{i<k-1} (1 - b_i)`.
    fn renewal_oracle(b: &[f64], n_max: usize) -> Vec<f64> {
        let mut f = vec![0.0; n_max + 1];
        let mut survive = 1.0;
        for k in 1..=n_max {
            f[k] = survive * b[k - 1];
            survive *= 1.0 - b[k - 1];
        }
        let mut u = vec![0.0; n_max + 1];
        u[0] = 1.0;
        for n in 1..=n_max {
            u[n] = (1..=n).map(|k| f[k] * u[n - k]).sum();
        }
        u[0] = b[0];
        u
    }

    #[test]
    fn bstar_examples() {
        let c = DecaySequence::constant(0.3).unwrap();
        let s = bstar_sequence(&c, 20).unwrap();
        assert!(s.table().iter().all(|v| (v - 0.3).abs() < 1e-15));
        let one = DecaySequence::finite(vec![1.0]).unwrap();
        assert!(bstar_sequence(&one, 10).unwrap().table().iter().all(|v| *v == 1.0));
        let g = DecaySequence::geometric(0.5, 0.5).unwrap();
        let s = bstar_sequence(&g, 2).unwrap();
        assert!(close(s.table()[1], 0.5, 1e-15));
        assert!(close(s.table()[2], 0.375, 1e-15));
        let bs: Vec<f64> = (0..=60).map(|i| g.at(i).unwrap()).collect();
        let oracle = renewal_oracle(&bs, 60);
        let got = bstar_sequence(&g, 60).unwrap();
        for (x, y) in got.table().iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(bstar_sequence(&DecaySequence::finite(vec![1.5]).unwrap(), 3).is_err());
    }

    #[test]
    fn bstar_total_matches_long_sum() {
        let g = DecaySequence::geometric(0.5, 0.5).unwrap();
        let total = bstar_total_upper(&g).unwrap();
        let long: f64 = bstar_sequence(&g, 3000).unwrap().table().iter().sum();
        assert!(total >= long - 1e-12 && total - long < 1e-9);
    }

    #[test]
    fn thm2_examples() {
        let alpha = DecaySequence::geometric(0.2, 0.5).unwrap();
        let z = DecaySequence::zeros();
        let v = thm2_bound(&alpha, &z, &z, 1.0, 20, 10, 40).unwrap();
        assert!(close(v.value, 4.0 * 0.2 * 0.5f64.powi(10), 1e-12));
        let c = DecaySequence::constant(0.3).unwrap();
        assert!(matches!(
            thm2_bound(&alpha, &c, &z, 0.0, 20, 10, 40),
            Err(Error::NotSummable(_))
        ));

        // b_i = 0.5^(i+1), e_j = 0.3^j so S_t = 0.3^t / 0.7.
        let b = DecaySequence::geometric(0.5, 0.5).unwrap();
        let s = DecaySequence::geometric(1.0 / 0.7, 0.3).unwrap();
        let v = thm2_bound(&alpha, &b, &s, 1.0, 20, 10, 200).unwrap();
        assert!(v.tail_remainder < 1e-8);
        // Direct summation at a far larger cap.
        let cap = 10_000;
        let bs = renewal_oracle(&(0..=cap).map(|i| b.at(i).unwrap()).collect::<Vec<_>>(), cap);
        let sv: Vec<f64> = (0..=cap).map(|i| s.at(i).unwrap()).collect();
        let conv = convolve(&bs, &sv, cap);
        let direct = 4.0 * alpha.at(10).unwrap()
            + 2.0 * bs[9..cap].iter().sum::<f64>()
            + 4.0 * sv[10..cap].iter().sum::<f64>()
            + 4.0 * conv[9..].iter().sum::<f64>();
        assert!(v.value >= direct - 1e-12);
        assert!(v.value - direct < 1e-8);
    }

    #[test]
    fn thm1_zero_alpha_matches_geometric_sum() {
        let z = DecaySequence::zeros();
        for (m, rho, n, r) in [(1, 0.5, 20, 10), (2, 0.6, 31, 10), (3, 0.3, 40, 7)] {
            let v = thm1_bound(&BoundInputs::new(n, r, m, rho, z.clone()), 2000).unwrap();
            // With alpha = 0 the infimum is rho^s at j = 1.
            let direct: f64 = (n..200_000).map(|t| rho.powi(block_count(t, r, m) as i32)).sum::<f64>() * 2.0;
            assert!(v.value >= direct - 1e-12, "{v:?} vs {direct}");
            assert!(v.value - direct < 1e-9);
        }
        let v = thm1_bound(&BoundInputs::new(20, 10, 1, 0.0, z.clone()), 100).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn thm1_deterministic_matches_termwise() {
        let alpha = DecaySequence::geometric(0.1, 0.5).unwrap();
        for m in 1..4 {
            let v = thm1_bound_deterministic(25, 9, m, 0.3, &alpha).unwrap();
            let direct: f64 = 4.0 * alpha.at(9).unwrap()
                + 2.0
                    * (25..5000)
                        .map(|t| 0.7f64.powi(block_count(t, 9, m) as i32))
                        .sum::<f64>();
            assert!(close(v.value, direct, 1e-12));
        }
    }

    #[test]
    fn thm3_minimal_window() {
        // n = r + m + 1 with m = 1: s_t = t - r >= 2 and the infimum is rho^s.
        let z = DecaySequence::zeros();
        let v = thm3_bound(&BoundInputs::new(12, 10, 1, 0.5, z.clone()), 500).unwrap();
        let direct = 2.0 * (2..200).map(|s| 0.5f64.powi(s)).sum::<f64>();
        assert!(v.value >= direct - 1e-14 && v.value - direct < 1e-12);
        assert!(close(v.value, 1.0, 1e-12));
        let err = thm3_bound(&BoundInputs::new(13, 10, 2, 0.5, z.clone()), 10).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert_eq!(thm3_bound(&BoundInputs::new(13, 10, 1, 0.0, z), 50).unwrap().value, 0.0);
    }

    #[test]
    fn thm1_remainders_are_upper_bounds() {
        let geo = DecaySequence::geometric(0.2, 0.7).unwrap();
        let pow = DecaySequence::power(0.25, 0.2, 2.5).unwrap();
        for alpha in [geo, pow] {
            let small = thm1_bound(&BoundInputs::new(30, 15, 1, 0.6, alpha.clone()), 60).unwrap();
            let big = thm1_bound(&BoundInputs::new(30, 15, 1, 0.6, alpha.clone()), 3000).unwrap();
            assert!(small.value >= big.partial + small.leading - 1e-12);
            assert!(big.value <= small.value + 1e-12);
        }
        let heavy = DecaySequence::power(0.25, 0.2, 0.9).unwrap();
        assert!(matches!(
            thm1_bound(&BoundInputs::new(30, 15, 1, 0.6, heavy), 100),
            Err(Error::NotSummable(_))
        ));
        let tab = DecaySequence::tabulated(vec![0.1, 0.05]).unwrap();
        assert!(thm1_bound(&BoundInputs::new(30, 15, 1, 0.6, tab), 100).is_err());
        assert!(
            thm1_bound(&BoundInputs::new(30, 30, 1, 0.6, DecaySequence::zeros()), 100)
                .unwrap_err()
                .to_string()
                .contains("1 ≤ r ≤ n−1")
        );
    }

    #[test]
    fn thm1_optimized_picks_minimum() {
        let alpha = DecaySequence::geometric(0.1, 0.6).unwrap();
        let (best, r) = thm1_bound_optimized(14, 1, 0.5, &alpha, LagConvention::PlusOne, 500)
            .unwrap()
            .unwrap();
        for rr in 1..=12 {
            // Same tail start as the optimized series.
            let v = thm1_bound(&BoundInputs::new(14, rr, 1, 0.5, alpha.clone()), 501 + rr).unwrap();
            assert!(best.value <= v.value + 1e-9);
            if rr == r {
                assert!(close(v.value, best.value, 1e-9));
            }
        }
        assert!(thm1_bound_optimized(2, 1, 0.5, &alpha, LagConvention::PlusOne, 500)
            .unwrap()
            .is_none());
    }

    /// Exhaustive minimum over `p` written out without the table.
    fn omega_direct(a: &[f64], b: impl Fn(usize) -> f64, d: usize, p_max: usize) -> f64 {
        let a_sum: f64 = a.iter().skip(1).sum();
        let tail_b = |s: usize| (s..s + 2000).map(&b).sum::<f64>();
        let mut best = f64::INFINITY;
        for p in 1..=p_max {
            let s_p: f64 = a.iter().skip(p + 1).sum();
            let mut v = a_sum.powf(d as f64 / p as f64) + s_p;
            for j in 0..=d + 1 {
                v += a_sum.powf(j as f64 / p as f64) * tail_b(d + 1 - j);
            }
            best = best.min(v);
        }
        best
    }

    #[test]
    fn omega_examples() {
        let a = DecaySequence::finite(vec![0.0, 0.5]).unwrap();
        let z = DecaySequence::zeros();
        assert!(close(omega(&a, &z, 13, 10, 8).unwrap(), 0.125, 1e-15));
        let b = DecaySequence::geometric_from_one(0.25, 0.5).unwrap();
        let got = omega(&a, &b, 13, 10, 8).unwrap();
        let want = omega_direct(
            &[0.0, 0.5],
            |j| if j == 0 { 0.0 } else { 0.25 * 0.5f64.powi(j as i32 - 1) },
            3,
            8,
        );
        assert!(close(got, want, 1e-12));
        let a = DecaySequence::geometric_from_one(0.3, 0.5).unwrap();
        let mut last = f64::INFINITY;
        for d in 1..=100 {
            let w = omega(&a, &b, 10 + d, 10, 30).unwrap();
            assert!(w <= last + 1e-15);
            last = w;
        }
        assert!(last < 1e-2 * omega(&a, &b, 11, 10, 30).unwrap());
        assert!(omega(&DecaySequence::finite(vec![0.0, 1.2]).unwrap(), &b, 13, 10, 8).is_err());
    }

    #[test]
    fn cor_bound_examples() {
        let z = DecaySequence::zeros();
        let s = CorSettings::default();
        let v = cor_mixing_bound(ResponseKind::Binary, &z, &z, &z, 30, 15, &s).unwrap();
        assert_eq!(v.value, 0.0);

        // Binary logistic with beta = 0.5, kappa = 0.3, delta = 0.1.
        let a = DecaySequence::geometric_from_one(0.25 * 0.3, 0.5).unwrap();
        let b = DecaySequence::geometric_from_one(0.25 * 0.1, 0.5).unwrap();
        let alpha = DecaySequence::geometric(0.1, 0.5).unwrap();
        let v = cor_mixing_bound(ResponseKind::Binary, &alpha, &a, &b, 30, 15, &s).unwrap();
        let direct: f64 = alpha.at(16).unwrap() + (30..1500).map(|t| omega(&a, &b, t, 15, 50).unwrap()).sum::<f64>();
        assert!(v.value >= direct - 1e-12);
        assert!(v.value - direct < 1e-6 * direct);
        assert!(v.tail_remainder < 1e-6 * v.value);

        let id = cor_mixing_bound(ResponseKind::IngarchIdentity, &alpha, &a, &b, 30, 15, &s).unwrap();
        let log = cor_mixing_bound(
            ResponseKind::IngarchLog,
            &alpha,
            &a,
            &b,
            30,
            15,
            &CorSettings { k: 1e6, ..s },
        )
        .unwrap();
        assert!(close(log.value, id.value, 1e-5));
        let log4 = cor_mixing_bound(ResponseKind::IngarchLog, &alpha, &a, &b, 30, 15, &s).unwrap();
        assert!(log4.value > id.value);
    }

    #[test]
    fn schedule_examples() {
        let g = rate_schedule(RateKind::Geometric, 100).unwrap();
        assert_eq!(g.r, 50);
        assert_eq!(g.j(16), 4);
        assert_eq!(g.j(17), 5);
        let p = rate_schedule(
            RateKind::Power {
                kappa: 3.0,
                ell: Some(0.5),
            },
            100,
        )
        .unwrap();
        assert!(!p.degenerate && close(p.kappa_prime.unwrap(), 1.5, 1e-15));
        let d = rate_schedule(RateKind::Power { kappa: 1.01, ell: None }, 100).unwrap();
        assert!(d.degenerate && d.ell < 1.0 && d.ell * 1.01 > 1.0);
        assert!(rate_schedule(RateKind::Power { kappa: 1.0, ell: None }, 100).is_err());
        assert!(rate_schedule(
            RateKind::Power {
                kappa: 3.0,
                ell: Some(0.2)
            },
            100
        )
        .is_err());
    }
}
