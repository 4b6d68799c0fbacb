//! Strong-mixing coefficients on finite alphabets.
//!
//! `alpha_exact` evaluates `sup |P(A x B) - P(A)P(B)|` over all pairs of
//! events of a finite joint law. Every coefficient computed here is the
//! restriction to the supplied coordinates (finite windows, finite
//! partitions), which is a lower bound on the coefficient of the full
//! past/future sigma-fields.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::StochasticMatrix;
use crate::rng::RngStream;

/// Largest alphabet (on the smaller side) that `alpha_exact` will enumerate.
pub const MAX_ENUMERATION_ALPHABET: usize = 20;

/// Replicates required by [`alpha_empirical`].
pub const MIN_EMPIRICAL_REPLICATES: usize = 1000;

/// A probability table `p(a, b)` on a product of two finite alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    p: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: usize, cols: usize, p: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || p.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "joint table of {} entries does not match {rows}x{cols}",
                p.len()
            )));
        }
        if p.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("joint table has a negative entry".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("joint table sums to {s}")));
        }
        Ok(Self { rows, cols, p })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged joint table".into()));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    /// Normalized counts.
    pub fn from_counts(rows: usize, cols: usize, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter("no observations".into()));
        }
        Self::new(rows, cols, counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    /// Product law `mu(a) nu(b)`.
    pub fn product(mu: &[f64], nu: &[f64]) -> Result<Self> {
        let p = mu.iter().flat_map(|&a| nu.iter().map(move |&b| a * b)).collect();
        Self::new(mu.len(), nu.len(), p)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.p[a * self.cols + b]
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|a| self.p[a * self.cols..(a + 1) * self.cols].iter().sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|b| (0..self.rows).map(|a| self.get(a, b)).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut p = vec![0.0; self.p.len()];
        for a in 0..self.rows {
            for b in 0..self.cols {
                p[b * self.rows + a] = self.get(a, b);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            p,
        }
    }

    /// Drops rows and columns of zero mass; alpha is unchanged by this.
    pub fn compressed(&self) -> Self {
        let rm = self.row_marginal();
        let cm = self.col_marginal();
        let keep_r: Vec<usize> = (0..self.rows).filter(|&a| rm[a] > 0.0).collect();
        let keep_c: Vec<usize> = (0..self.cols).filter(|&b| cm[b] > 0.0).collect();
        let p = keep_r
            .iter()
            .flat_map(|&a| keep_c.iter().map(move |&b| (a, b)))
            .map(|(a, b)| self.get(a, b))
            .collect();
        Self {
            rows: keep_r.len(),
            cols: keep_c.len(),
            p,
        }
    }
}

/// Both forms of the total-variation distance between two laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalVariation {
    /// `(1/2) sum |mu - nu|`
    pub half_l1: f64,
    /// `1 - sum min(mu, nu)`
    pub one_minus_overlap: f64,
}

impl TotalVariation {
    pub fn value(&self) -> f64 {
        self.half_l1
    }
}

fn check_distribution(v: &[f64], name: &str) -> Result<()> {
    if v.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidParameter(format!("{name} has a negative entry")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("{name} sums to {s}")));
    }
    Ok(())
}

pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<TotalVariation> {
    if mu.len() != nu.len() || mu.is_empty() {
        return Err(Error::Dimension(format!(
            "distributions of length {} and {}",
            mu.len(),
            nu.len()
        )));
    }
    check_distribution(mu, "mu")?;
    check_distribution(nu, "nu")?;
    let half_l1 = 0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let overlap: f64 = mu.iter().zip(nu).map(|(a, b)| a.min(*b)).sum();
    Ok(TotalVariation {
        half_l1,
        one_minus_overlap: 1.0 - overlap,
    })
}

/// Exact strong-mixing coefficient between the two coordinates of `joint`.
///
/// For a fixed row set `S` the optimal column set takes every column with a
/// positive margin, so the search is over row subsets only. Subsets and their
/// complements give the same value, so half of them are visited.
pub fn alpha_exact(joint: &JointDistribution) -> Result<f64> {
    let j = joint.compressed();
    let j = if j.rows > j.cols { j.transpose() } else { j };
    if j.rows > MAX_ENUMERATION_ALPHABET {
        return Err(Error::AlphabetTooLarge {
            size: j.rows,
            limit: MAX_ENUMERATION_ALPHABET,
        });
    }
    if j.rows <= 1 || j.cols <= 1 {
        return Ok(0.0);
    }
    let pa = j.row_marginal();
    let pb = j.col_marginal();
    // Centered rows: d(a, b) = p(a, b) - pA(a) pB(b).
    let centered: Vec<Vec<f64>> = (0..j.rows)
        .map(|a| (0..j.cols).map(|b| j.get(a, b) - pa[a] * pb[b]).collect())
        .collect();
    // Fix the last row outside S; enumerate the remaining rows.
    let free = j.rows - 1;
    let split_bits = if free >= 12 { 4 } else { 0 };
    let chunks = 1usize << split_bits;
    let best = (0..chunks)
        .into_par_iter()
        .map(|chunk| enumerate_chunk(&centered, free, split_bits, chunk))
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Gray-code enumeration over the low `free - split_bits` rows with the top
/// `split_bits` rows fixed by `chunk`.
fn enumerate_chunk(centered: &[Vec<f64>], free: usize, split_bits: usize, chunk: usize) -> f64 {
    let cols = centered[0].len();
    let low = free - split_bits;
    let mut margin = vec![0.0; cols];
    for bit in 0..split_bits {
        if chunk >> bit & 1 == 1 {
            let row = &centered[low + bit];
            for (m, d) in margin.iter_mut().zip(row) {
                *m += d;
            }
        }
    }
    let score = |m: &[f64]| m.iter().map(|v| v.max(0.0)).sum::<f64>();
    let mut best = score(&margin);
    let mut in_set = vec![false; low];
    for step in 1u64..(1u64 << low) {
        let flip = step.trailing_zeros() as usize;
        let sign = if in_set[flip] { -1.0 } else { 1.0 };
        in_set[flip] = !in_set[flip];
        for (m, d) in margin.iter_mut().zip(&centered[flip]) {
            *m += sign * d;
        }
        best = best.max(score(&margin));
    }
    best
}

/// Exact coefficient between `X_0` and `X_n` of a stationary finite chain.
pub fn alpha_markov_exact(pi: &[f64], p: &StochasticMatrix, n: usize) -> Result<f64> {
    if pi.len() != p.n() {
        return Err(Error::Dimension(format!(
            "stationary vector of length {} for a {}-state chain",
            pi.len(),
            p.n()
        )));
    }
    if !p.is_stationary(pi, 1e-10) {
        return Err(Error::Precondition("pi is not stationary for P".into()));
    }
    let pn = p.pow(n);
    let k = p.n();
    let table = (0..k)
        .flat_map(|a| (0..k).map(move |b| (a, b)))
        .map(|(a, b)| pi[a] * pn.get(a, b))
        .collect::<Vec<_>>();
    let s: f64 = table.iter().sum();
    alpha_exact(&JointDistribution::new(
        k,
        k,
        table.into_iter().map(|v| v / s).collect(),
    )?)
}

/// Discretization of a vector-valued process into finite cells, plus the
/// past and future window lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    /// Sorted cut points per coordinate; `k` cuts make `k + 1` cells
    /// `(-inf, c_1], (c_1, c_2], ..., (c_k, inf)`.
    pub cuts: Vec<Vec<f64>>,
    pub past_window: usize,
    pub future_window: usize,
}

impl PartitionSpec {
    pub fn new(cuts: Vec<Vec<f64>>, past_window: usize, future_window: usize) -> Result<Self> {
        if past_window == 0 || future_window == 0 {
            return Err(Error::InvalidParameter("window lengths must be >= 1".into()));
        }
        for (c, coord) in cuts.iter().enumerate() {
            if coord.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidParameter(format!(
                    "cuts for coordinate {c} are not strictly increasing"
                )));
            }
        }
        Ok(Self {
            cuts,
            past_window,
            future_window,
        })
    }

    fn cells_per_value(&self) -> usize {
        self.cuts.iter().map(|c| c.len() + 1).product()
    }

    fn encode_value(&self, v: &[f64]) -> Result<usize> {
        if v.len() != self.cuts.len() {
            return Err(Error::Dimension(format!(
                "value of dimension {} for a partition of dimension {}",
                v.len(),
                self.cuts.len()
            )));
        }
        let mut code = 0;
        for (x, cuts) in v.iter().zip(&self.cuts) {
            let cell = cuts.partition_point(|c| c < x);
            code = code * (cuts.len() + 1) + cell;
        }
        Ok(code)
    }

    fn encode_window(&self, window: &[Vec<f64>]) -> Result<usize> {
        let base = self.cells_per_value();
        window
            .iter()
            .try_fold(0usize, |acc, v| Ok(acc * base + self.encode_value(v)?))
    }
}

/// Plug-in estimate of a restricted mixing coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaEstimate {
    pub estimate: f64,
    /// Bootstrap standard error over replicate resampling.
    pub se: f64,
    /// Mean plug-in value under independence with the same marginals and
    /// sample size; the upward bias of the estimator at alpha = 0.
    pub null_bias: f64,
    pub replicates: usize,
}

/// Bootstrap resamples used for `se` and `null_bias`.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Restricted alpha between the past window ending at `anchor` and the future
/// window starting at `anchor + lag`, estimated across replicate paths.
pub fn alpha_empirical(
    paths: &[Vec<Vec<f64>>],
    anchor: usize,
    lag: usize,
    partition: &PartitionSpec,
    rng: &mut RngStream,
) -> Result<AlphaEstimate> {
    if anchor + 1 < partition.past_window {
        return Err(Error::Precondition(format!(
            "anchor {anchor} leaves no room for a past window of {}",
            partition.past_window
        )));
    }
    let past_cells = checked_pow(partition.cells_per_value(), partition.past_window)?;
    let future_cells = checked_pow(partition.cells_per_value(), partition.future_window)?;
    let mut pairs = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let end = anchor + lag + partition.future_window;
        if path.len() < end {
            return Err(Error::Dimension(format!(
                "replicate {i} has length {} but the future window ends at {end}",
                path.len()
            )));
        }
        let past = partition.encode_window(&path[anchor + 1 - partition.past_window..=anchor])?;
        let future = partition.encode_window(&path[anchor + lag..end])?;
        pairs.push((past, future));
    }
    alpha_empirical_codes(&pairs, past_cells, future_cells, rng)
}

fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    base.checked_pow(exp as u32)
        .filter(|&v| v <= 1 << 24)
        .ok_or(Error::AlphabetTooLarge {
            size: usize::MAX,
            limit: 1 << 24,
        })
}

/// Same as [`alpha_empirical`] on pre-encoded `(past, future)` symbol pairs.
pub fn alpha_empirical_codes(
    pairs: &[(usize, usize)],
    past_cells: usize,
    future_cells: usize,
    rng: &mut RngStream,
) -> Result<AlphaEstimate> {
    if pairs.len() < MIN_EMPIRICAL_REPLICATES {
        return Err(Error::Precondition(format!(
            "alpha_empirical needs at least {MIN_EMPIRICAL_REPLICATES} replicates, got {}",
            pairs.len()
        )));
    }
    // Relabel observed symbols densely.
    let mut past_map = std::collections::BTreeMap::new();
    let mut future_map = std::collections::BTreeMap::new();
    for &(a, b) in pairs {
        if a >= past_cells || b >= future_cells {
            return Err(Error::Dimension("symbol outside its alphabet".into()));
        }
        let na = past_map.len();
        past_map.entry(a).or_insert(na);
        let nb = future_map.len();
        future_map.entry(b).or_insert(nb);
    }
    let (rows, cols) = (past_map.len(), future_map.len());
    if rows.min(cols) > MAX_ENUMERATION_ALPHABET {
        return Err(Error::AlphabetTooLarge {
            size: rows.min(cols),
            limit: MAX_ENUMERATION_ALPHABET,
        });
    }
    let mut counts = vec![0u64; rows * cols];
    for &(a, b) in pairs {
        counts[past_map[&a] * cols + future_map[&b]] += 1;
    }
    let n = pairs.len() as u64;
    let joint = JointDistribution::from_counts(rows, cols, &counts)?;
    let estimate = alpha_exact(&joint)?;

    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let null = {
        let pa = joint.row_marginal();
        let pb = joint.col_marginal();
        JointDistribution::product(&pa, &pb)?.p
    };
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut null_vals = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let c = multinomial(n, &probs, rng);
        boot.push(alpha_exact(&JointDistribution::from_counts(rows, cols, &c)?)?);
        let c0 = multinomial(n, &null, rng);
        null_vals.push(alpha_exact(&JointDistribution::from_counts(rows, cols, &c0)?)?);
    }
    let mean = boot.iter().sum::<f64>() / boot.len() as f64;
    let var = boot.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64;
    Ok(AlphaEstimate {
        estimate,
        se: var.sqrt(),
        null_bias: null_vals.iter().sum::<f64>() / null_vals.len() as f64,
        replicates: pairs.len(),
    })
}

/// Multinomial draw by sequential conditional binomials.
fn multinomial(n: u64, probs: &[f64], rng: &mut RngStream) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference: enumerate every (S, T) pair.
    fn alpha_brute(j: &JointDistribution) -> f64 {
        let pa = j.row_marginal();
        let pb = j.col_marginal();
        let mut best: f64 = 0.0;
        for s in 0u32..(1 << j.rows()) {
            for t in 0u32..(1 << j.cols()) {
                let mut pab = 0.0;
                let mut ps = 0.0;
                let mut pt = 0.0;
                for a in 0..j.rows() {
                    if s >> a & 1 == 1 {
                        ps += pa[a];
                        for b in 0..j.cols() {
                            if t >> b & 1 == 1 {
                                pab += j.get(a, b);
                            }
                        }
                    }
                }
                for b in 0..j.cols() {
                    if t >> b & 1 == 1 {
                        pt += pb[b];
                    }
                }
                best = best.max((pab - ps * pt).abs());
            }
        }
        best
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap().value(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap().value(), 1.0);
        let tv = tv_distance(&[0.9, 0.1], &[0.2, 0.8]).unwrap();
        assert!((tv.half_l1 - 0.7).abs() < 1e-15);
        assert!((tv.one_minus_overlap - 0.7).abs() < 1e-15);
        assert!(tv_distance(&[0.5, 0.5], &[1.0]).is_err());
        assert!(tv_distance(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn alpha_of_independent_and_correlated() {
        let prod = JointDistribution::product(&[0.3, 0.7], &[0.1, 0.6, 0.3]).unwrap();
        assert!(alpha_exact(&prod).unwrap() < 1e-15);
        let corr = JointDistribution::from_rows(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(alpha_exact(&corr).unwrap(), 0.25);
        assert_eq!(alpha_brute(&corr), 0.25);
    }

    #[test]
    fn alpha_matches_brute_force() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..200 {
            let r = 1 + rng.index(5);
            let c = 1 + rng.index(5);
            let raw: Vec<f64> = (0..r * c).map(|_| rng.uniform()).collect();
            let s: f64 = raw.iter().sum();
            let j = JointDistribution::new(r, c, raw.iter().map(|v| v / s).collect()).unwrap();
            let fast = alpha_exact(&j).unwrap();
            assert!((fast - alpha_brute(&j)).abs() < 1e-14);
            assert!(fast <= 0.25 + 1e-15);
        }
    }

    #[test]
    fn large_alphabet_guard() {
        let n = MAX_ENUMERATION_ALPHABET + 1;
        let j = JointDistribution::new(n, n, vec![1.0 / (n * n) as f64; n * n]).unwrap();
        assert!(matches!(alpha_exact(&j), Err(Error::AlphabetTooLarge { .. })));
    }

    #[test]
    fn parallel_split_agrees() {
        // 14 rows triggers the chunked enumeration.
        let mut rng = RngStream::new(8, 1);
        let raw: Vec<f64> = (0..14 * 3).map(|_| rng.uniform()).collect();
        let s: f64 = raw.iter().sum();
        let j = JointDistribution::new(14, 3, raw.iter().map(|v| v / s).collect()).unwrap();
        let t = alpha_exact(&j.transpose()).unwrap();
        assert!((alpha_exact(&j).unwrap() - t).abs() < 1e-15);
    }

    #[test]
    fn markov_alpha_examples() {
        let same = StochasticMatrix::constant_rows(&[0.4, 0.6]).unwrap();
        assert!(alpha_markov_exact(&[0.4, 0.6], &same, 1).unwrap() < 1e-15);
        let id = StochasticMatrix::identity(2);
        assert_eq!(alpha_markov_exact(&[0.5, 0.5], &id, 7).unwrap(), 0.25);
        let p = StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let pi = [2.0 / 3.0, 1.0 / 3.0];
        let a: Vec<f64> = (1..=3).map(|n| alpha_markov_exact(&pi, &p, n).unwrap()).collect();
        assert!(a[0] > a[1] && a[1] > a[2]);
        assert!(alpha_markov_exact(&[0.5, 0.5], &p, 1).is_err());
    }

    #[test]
    fn markov_alpha_two_state_closed_form() {
        // For two states the optimum is S = {0}, T = {0}:
        // pi0 (P^n(0,0) - pi0) = pi0 pi1 (1 - p - q)^n.
        let p = StochasticMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let (pi0, pi1) = (2.0 / 3.0, 1.0 / 3.0);
        let a1 = alpha_markov_exact(&[pi0, pi1], &p, 1).unwrap();
        let brute = {
            let j = JointDistribution::from_rows(vec![vec![pi0 * 0.9, pi0 * 0.1], vec![pi1 * 0.2, pi1 * 0.8]]).unwrap();
            alpha_brute(&j)
        };
        assert!((a1 - brute).abs() < 1e-15);
        assert!((a1 - pi0 * pi1 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn empirical_guard_and_constant_path() {
        let mut rng = RngStream::new(1, 1);
        let few = vec![(0, 0); 10];
        assert!(alpha_empirical_codes(&few, 2, 2, &mut rng).is_err());
        let constant = vec![(1, 0); 2000];
        let est = alpha_empirical_codes(&constant, 2, 2, &mut rng).unwrap();
        assert_eq!(est.estimate, 0.0);
    }

    #[test]
    fn partition_encoding() {
        let part = PartitionSpec::new(vec![vec![0.5], vec![-1.0, 1.0]], 1, 1).unwrap();
        assert_eq!(part.cells_per_value(), 6);
        assert_eq!(part.encode_value(&[0.0, -2.0]).unwrap(), 0);
        assert_eq!(part.encode_value(&[1.0, 0.0]).unwrap(), 4);
        assert_eq!(part.encode_value(&[1.0, 1.0]).unwrap(), 4);
        assert_eq!(part.encode_value(&[1.0, 1.5]).unwrap(), 5);
        assert!(PartitionSpec::new(vec![vec![1.0, 0.0]], 1, 1).is_err());
    }
}
