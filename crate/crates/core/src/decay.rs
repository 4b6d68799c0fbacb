//! Nonnegative sequences with an analytic tail.
//!
//! Every bound formula consumes sequences such as mixing coefficients,
//! contraction weights or return probabilities. A `DecaySequence` stores a
//! finite table plus an optional tail description, and answers point queries
//! and tail-sum queries. Tail sums are upper bounds; they are exact for the
//! zero and geometric tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extension of a tabulated sequence beyond its last stored index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tail {
    /// All further values are zero.
    Zero,
    /// `value(len + k) = first * ratio^k`.
    Geometric { first: f64, ratio: f64 },
    /// `value(i) = scale * i^(-exponent)` for `i >= len` (requires `len >= 1`).
    Power { scale: f64, exponent: f64 },
    /// Values beyond the table are unknown; queries past it fail.
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySequence {
    values: Vec<f64>,
    tail: Tail,
}

/// Terms summed explicitly before switching to the integral bound for power tails.
const POWER_EXPLICIT_TERMS: usize = 10_000;

impl DecaySequence {
    pub fn new(values: Vec<f64>, tail: Tail) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sequence value at index {i} is {} (must be finite and >= 0)",
                values[i]
            )));
        }
        match tail {
            Tail::Geometric { first, ratio } => {
                if !(first >= 0.0 && ratio >= 0.0 && first.is_finite() && ratio.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "geometric tail needs first >= 0 and ratio >= 0, got ({first}, {ratio})"
                    )));
                }
            }
            Tail::Power { scale, exponent } => {
                if values.is_empty() {
                    return Err(Error::InvalidParameter(
                        "power tail needs a tabulated value at index 0".into(),
                    ));
                }
                if !(scale >= 0.0 && exponent > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "power tail needs scale >= 0 and exponent > 0, got ({scale}, {exponent})"
                    )));
                }
            }
            Tail::Zero | Tail::Unspecified => {}
        }
        Ok(Self { values, tail })
    }

    /// The identically zero sequence.
    pub fn zeros() -> Self {
        Self {
            values: Vec::new(),
            tail: Tail::Zero,
        }
    }

    /// `value(i) = first * ratio^i` for every `i >= 0`.
    pub fn geometric(first: f64, ratio: f64) -> Result<Self> {
        Self::new(Vec::new(), Tail::Geometric { first, ratio })
    }

    /// `value(i) = first * ratio^(i - 1)` for `i >= 1`, `value(0) = 0`.
    ///
    /// The usual shape of weights indexed from one.
    pub fn geometric_from_one(first: f64, ratio: f64) -> Result<Self> {
        Self::new(vec![0.0], Tail::Geometric { first, ratio })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::geometric(c, 1.0)
    }

    /// `value(0) = at_zero`, `value(i) = scale * i^(-exponent)` for `i >= 1`.
    pub fn power(at_zero: f64, scale: f64, exponent: f64) -> Result<Self> {
        Self::new(vec![at_zero], Tail::Power { scale, exponent })
    }

    /// A finite table followed by zeros.
    pub fn finite(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Tail::Zero)
    }

    /// A finite table with nothing known past it.
    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Tail::Unspecified)
    }

    pub fn table(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        if let Some(&v) = self.values.get(i) {
            return Some(v);
        }
        let len = self.values.len();
        match self.tail {
            Tail::Zero => Some(0.0),
            Tail::Geometric { first, ratio } => Some(geometric_term(first, ratio, i - len)),
            Tail::Power { scale, exponent } => Some(scale * (i as f64).powf(-exponent)),
            Tail::Unspecified => None,
        }
    }

    /// Like [`get`](Self::get), but an unknown value is an error.
    pub fn at(&self, i: usize) -> Result<f64> {
        self.get(i).ok_or_else(|| {
            Error::Precondition(format!(
                "sequence value at index {i} is past the table (length {}) and no tail is given",
                self.values.len()
            ))
        })
    }

    /// Value at a possibly negative index; negative indices read index 0.
    pub fn at_signed(&self, i: i64) -> Result<f64> {
        self.at(i.max(0) as usize)
    }

    pub fn is_summable(&self) -> bool {
        match self.tail {
            Tail::Zero => true,
            Tail::Geometric { first, ratio } => first == 0.0 || ratio < 1.0,
            Tail::Power { scale, exponent } => scale == 0.0 || exponent > 1.0,
            Tail::Unspecified => false,
        }
    }

    /// Upper bound on `sum_{i >= p} value(i)`; exact for zero and geometric tails.
    pub fn tail_sum(&self, p: usize) -> Result<f64> {
        if !self.is_summable() {
            return Err(Error::NotSummable(format!(
                "tail sum from index {p} of a sequence with tail {:?}",
                self.tail
            )));
        }
        let len = self.values.len();
        let table: f64 = if p < len { self.values[p..].iter().sum() } else { 0.0 };
        let start = p.max(len);
        let rest = match self.tail {
            Tail::Zero | Tail::Unspecified => 0.0,
            Tail::Geometric { first, ratio } => {
                if first == 0.0 {
                    0.0
                } else {
                    geometric_term(first, ratio, start - len) / (1.0 - ratio)
                }
            }
            Tail::Power { scale, exponent } => {
                if scale == 0.0 {
                    0.0
                } else {
                    power_tail_sum(scale, exponent, start)
                }
            }
        };
        Ok(table + rest)
    }

    /// Sum of all values.
    pub fn total(&self) -> Result<f64> {
        self.tail_sum(0)
    }

    /// `sum_i value(i) z^i`, when the series converges in closed form.
    pub fn generating_fn(&self, z: f64) -> Option<f64> {
        let len = self.values.len();
        let mut zi = 1.0;
        let mut acc = 0.0;
        for &v in &self.values {
            acc += v * zi;
            zi *= z;
        }
        match self.tail {
            Tail::Zero => Some(acc),
            Tail::Geometric { first, ratio } => {
                if first == 0.0 {
                    Some(acc)
                } else if ratio * z < 1.0 {
                    Some(acc + first * z.powi(len as i32) / (1.0 - ratio * z))
                } else {
                    None
                }
            }
            Tail::Power { scale, .. } => (scale == 0.0).then_some(acc),
            Tail::Unspecified => None,
        }
    }

    /// A pair `(M, q)` with `q < 1` and `value(i) <= M q^i` for every `i >= 0`.
    ///
    /// Exists for finite sequences and geometric tails with ratio below one.
    pub fn geometric_majorant(&self) -> Option<(f64, f64)> {
        let len = self.values.len();
        let envelope = |q: f64| -> Option<f64> {
            let mut m: f64 = 0.0;
            for (i, &v) in self.values.iter().enumerate() {
                if v > 0.0 {
                    m = m.max(v / q.powi(i as i32));
                }
            }
            if let Tail::Geometric { first, ratio } = self.tail {
                if first > 0.0 {
                    if ratio > q {
                        return None;
                    }
                    m = m.max(first / q.powi(len as i32));
                }
            }
            (m.is_finite() && m < 1e12).then_some(m)
        };
        match self.tail {
            Tail::Zero => envelope(0.5).map(|m| (m, 0.5)),
            Tail::Geometric { first, ratio } => {
                if first == 0.0 {
                    return envelope(0.5).map(|m| (m, 0.5));
                }
                if ratio >= 1.0 {
                    return None;
                }
                if ratio > 0.0 {
                    if let Some(m) = envelope(ratio) {
                        return Some((m, ratio));
                    }
                }
                let q = ratio.max(0.5);
                envelope(q).map(|m| (m, q))
            }
            Tail::Power { .. } | Tail::Unspecified => None,
        }
    }

    /// Same sequence with every value multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let tail = match self.tail {
            Tail::Geometric { first, ratio } => Tail::Geometric {
                first: first * c,
                ratio,
            },
            Tail::Power { scale, exponent } => Tail::Power {
                scale: scale * c,
                exponent,
            },
            t => t,
        };
        Self::new(self.values.iter().map(|v| v * c).collect(), tail)
    }

    /// Same sequence with value at `index` replaced.
    pub fn with_value(&self, index: usize, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        if index >= values.len() {
            let n = index + 1;
            values = (0..n).map(|i| self.get(i).unwrap_or(0.0)).collect();
            let tail = match self.tail {
                Tail::Geometric { first, ratio } => Tail::Geometric {
                    first: geometric_term(first, ratio, n - self.values.len()),
                    ratio,
                },
                t => t,
            };
            values[index] = value;
            return Self::new(values, tail);
        }
        values[index] = value;
        Self::new(values, self.tail)
    }
}

fn geometric_term(first: f64, ratio: f64, k: usize) -> f64 {
    if first == 0.0 {
        0.0
    } else if k == 0 {
        first
    } else {
        first * ratio.powi(k.min(i32::MAX as usize) as i32)
    }
}

/// Upper bound on `sum_{i >= start} scale * i^(-e)`, `start >= 1`, `e > 1`.
fn power_tail_sum(scale: f64, exponent: f64, start: usize) -> f64 {
    let start = start.max(1);
    let end = start + POWER_EXPLICIT_TERMS;
    let explicit: f64 = (start..end).map(|i| (i as f64).powf(-exponent)).sum();
    // sum_{i >= end} i^-e <= int_{end-1}^inf x^-e dx
    let rest = ((end - 1) as f64).powf(1.0 - exponent) / (exponent - 1.0);
    scale * (explicit + rest)
}
