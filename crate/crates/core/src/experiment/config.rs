//! TOML experiment configs.
//!
//! One file holds the seed, an optional output directory and an
//! `[experiment]` table whose `kind` selects the runner. Model blocks reuse
//! the library's own serde types.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bounds::{CorSettings, LagConvention, RateKind, ResponseKind};
use crate::contraction::ContractionModelSpec;
use crate::decay::{DecaySequence, Tail};
use crate::doeblin::{softmax_family, Initialization, KernelFamily};
use crate::error::{Error, Result};
use crate::maps::MapModelSpec;
use crate::matrix::StochasticMatrix;
use crate::process::CovariateProcessSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    /// Artifacts go here; defaults to `runs/<name>`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub experiment: ExperimentKind,
}

impl ExperimentConfig {
    pub fn display_name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.experiment.kind_name().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    MreCoupling(MreCouplingConfig),
    MapsCoupling(MapsCouplingConfig),
    ContractionCoupling(ContractionCouplingConfig),
    BoundsCurve(BoundsCurveConfig),
    AlphaCurve(AlphaCurveConfig),
    LemmaCorpus(LemmaCorpusConfig),
    /// A built-in catalog check by id.
    Acceptance(AcceptanceConfig),
}

impl ExperimentKind {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::MreCoupling(_) => "mre_coupling",
            Self::MapsCoupling(_) => "maps_coupling",
            Self::ContractionCoupling(_) => "contraction_coupling",
            Self::BoundsCurve(_) => "bounds_curve",
            Self::AlphaCurve(_) => "alpha_curve",
            Self::LemmaCorpus(_) => "lemma_corpus",
            Self::Acceptance(_) => "acceptance",
        }
    }
}

/// A kernel family `x -> P_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Softmax {
        theta: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        supports: Option<Vec<Vec<usize>>>,
        #[serde(default = "one")]
        block_len: usize,
    },
    /// `kernels[i]` is used at covariate `values[i]`; other covariates use
    /// the nearest listed value.
    Table {
        values: Vec<Vec<f64>>,
        kernels: Vec<StochasticMatrix>,
        #[serde(default = "one")]
        block_len: usize,
    },
}

fn one() -> usize {
    1
}

impl FamilySpec {
    pub fn build(&self) -> Result<KernelFamily> {
        match self {
            Self::Softmax {
                theta,
                supports,
                block_len,
            } => softmax_family(theta, supports.as_deref())?.with_block_len(*block_len),
            Self::Table {
                values,
                kernels,
                block_len,
            } => {
                if values.is_empty() || values.len() != kernels.len() {
                    return Err(Error::Dimension(format!(
                        "{} covariate values for {} kernels",
                        values.len(),
                        kernels.len()
                    )));
                }
                let n = kernels[0].n();
                let d = values[0].len();
                if kernels.iter().any(|k| k.n() != n) || values.iter().any(|v| v.len() != d) {
                    return Err(Error::Dimension(
                        "table kernels and values must share their sizes".into(),
                    ));
                }
                let values = values.clone();
                let kernels = kernels.clone();
                KernelFamily::new(n, d, *block_len, move |x: &[f64]| {
                    let dist = |v: &[f64]| v.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    let mut best = 0;
                    for i in 1..values.len() {
                        if dist(&values[i]) < dist(&values[best]) {
                            best = i;
                        }
                    }
                    kernels[best].clone()
                })
            }
        }
    }
}

/// A nonnegative sequence in config form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSpec {
    #[default]
    Zero,
    /// `first * ratio^i` for `i >= 0`.
    Geometric {
        first: f64,
        ratio: f64,
    },
    /// Zero at index 0, then `first * ratio^(i - 1)`.
    GeometricFromOne {
        first: f64,
        ratio: f64,
    },
    Constant {
        value: f64,
    },
    /// `at_zero`, then `scale * i^(-exponent)`.
    Power {
        at_zero: f64,
        scale: f64,
        exponent: f64,
    },
    /// Listed values followed by zeros.
    Finite {
        values: Vec<f64>,
    },
    Table {
        values: Vec<f64>,
        tail: Tail,
    },
}

impl SequenceSpec {
    pub fn build(&self) -> Result<DecaySequence> {
        match self {
            Self::Zero => Ok(DecaySequence::zeros()),
            Self::Geometric { first, ratio } => DecaySequence::geometric(*first, *ratio),
            Self::GeometricFromOne { first, ratio } => DecaySequence::geometric_from_one(*first, *ratio),
            Self::Constant { value } => DecaySequence::constant(*value),
            Self::Power {
                at_zero,
                scale,
                exponent,
            } => DecaySequence::power(*at_zero, *scale, *exponent),
            Self::Finite { values } => DecaySequence::finite(values.clone()),
            Self::Table { values, tail } => DecaySequence::new(values.clone(), *tail),
        }
    }

    /// Whether the sequence is identically zero.
    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Finite { values } => values.iter().all(|v| *v == 0.0),
            Self::Geometric { first, .. } | Self::GeometricFromOne { first, .. } => *first == 0.0,
            Self::Constant { value } => *value == 0.0,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MreCouplingConfig {
    pub family: FamilySpec,
    pub environment: CovariateProcessSpec,
    pub restart: usize,
    /// Blocks of length `m` simulated after the restart.
    pub blocks: usize,
    #[serde(default)]
    pub restart_state: usize,
    pub replicates: usize,
    #[serde(default)]
    pub init: Option<Initialization>,
    /// Replicates whose full paths are written out.
    #[serde(default = "default_trace")]
    pub trace_replicates: usize,
    /// Grid points per axis for `eta_min` over a continuous support.
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

fn default_trace() -> usize {
    5
}

fn default_grid() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapsCouplingConfig {
    pub model: MapModelSpec,
    pub restart: usize,
    /// Steps simulated after the restart.
    pub steps: usize,
    #[serde(default)]
    pub restart_state: usize,
    pub replicates: usize,
    /// Blocks for the coalescence estimate; defaults to `replicates`.
    #[serde(default)]
    pub rho_replicates: Option<usize>,
    #[serde(default)]
    pub init: Option<Initialization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionCouplingConfig {
    pub model: ContractionModelSpec,
    pub restart: usize,
    pub steps: usize,
    pub replicates: usize,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    /// Offset `s` at which the constant in front of omega is calibrated.
    #[serde(default = "one")]
    pub calibrate_at: usize,
}

fn default_p_max() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Thm1,
    Thm3,
    Thm1Deterministic,
    Thm2,
    Cor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartRule {
    /// Minimize the bound over every admissible `r`.
    Optimized,
    /// `r = floor(n / 2)` from the rate schedule.
    Schedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RestartChoice {
    Fixed(usize),
    Rule(RestartRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsCurveConfig {
    pub theorem: Theorem,
    pub n: Vec<usize>,
    pub r: RestartChoice,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default)]
    pub rho: Option<f64>,
    /// Doeblin constant for `thm1_deterministic`; defaults to `1 - rho`.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Mixing coefficients of the environment.
    #[serde(default)]
    pub alpha: SequenceSpec,
    #[serde(default)]
    pub lag: Option<LagConvention>,
    #[serde(default = "default_factor")]
    pub factor: f64,
    #[serde(default = "default_cap")]
    pub horizon_cap: usize,
    #[serde(default)]
    pub rate: Option<RateKind>,
    /// Continuity coefficients for `thm2`, and the contraction weights `b` for `cor`.
    #[serde(default)]
    pub b: Option<SequenceSpec>,
    /// Covariate weights `S` for `thm2`.
    #[serde(default)]
    pub s: Option<SequenceSpec>,
    #[serde(default)]
    pub x_l1: Option<f64>,
    #[serde(default)]
    pub response: Option<ResponseKind>,
    /// Lag weights `a` for `cor`.
    #[serde(default)]
    pub a: Option<SequenceSpec>,
    #[serde(default)]
    pub settings: Option<CorSettings>,
}

fn default_factor() -> f64 {
    4.0
}

fn default_cap() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaCurveConfig {
    pub family: FamilySpec,
    /// Finite-support environment.
    pub environment: CovariateProcessSpec,
    pub max_lag: usize,
    pub replicates: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_cap")]
    pub horizon_cap: usize,
}

fn default_burn_in() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    /// Product expectations of two-state chains against the block infimum.
    Ult,
    /// The linear recursion against its closed bound.
    Ult3,
    /// Renewal return probabilities against Monte Carlo.
    BstarMc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaCorpusConfig {
    pub lemma: LemmaKind,
    /// Random instances (`ult`, `ult3`).
    #[serde(default = "default_count")]
    pub count: usize,
    /// Largest `s`, `t` or `n` checked.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Renewal paths for `bstar_mc`.
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Return probabilities for `bstar_mc`.
    #[serde(default)]
    pub b: Option<SequenceSpec>,
    /// Constant `b` whose `b*` must equal it exactly.
    #[serde(default = "default_constant")]
    pub constant: f64,
}

fn default_count() -> usize {
    100
}

fn default_horizon() -> usize {
    50
}

fn default_paths() -> usize {
    100_000
}

fn default_constant() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceConfig {
    pub id: String,
}
