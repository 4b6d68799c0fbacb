//! Built-in acceptance experiments.
//!
//! Every entry ships its default config under `configs/<id>.toml`.

use super::config::ExperimentKind;
use super::parse_config;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub criterion: u32,
    pub title: &'static str,
    pub description: &'static str,
    /// Seconds on a laptop at the default config.
    pub expected_runtime_s: f64,
    pub config: &'static str,
}

impl CatalogEntry {
    /// The experiment kind of the default config.
    pub fn kind(&self) -> &'static str {
        parse_config(self.config)
            .map(|c| c.experiment.kind_name())
            .unwrap_or("invalid")
    }

    pub fn is_acceptance_check(&self) -> bool {
        matches!(
            parse_config(self.config).map(|c| c.experiment),
            Ok(ExperimentKind::Acceptance(_))
        )
    }
}

macro_rules! config {
    ($id:literal) => {
        include_str!(concat!("../../configs/", $id, ".toml"))
    };
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        id: "doeblin-reconstruction",
        criterion: 1,
        title: "Doeblin split reconstruction and maximality",
        description: "1000 random 5x5 stochastic matrices are split as eta nu + (1 - eta) R. The split must \
                      reconstruct each matrix within 1e-12, and no larger constant may admit a minorization.",
        expected_runtime_s: 1.0,
        config: config!("doeblin-reconstruction"),
    },
    CatalogEntry {
        id: "block-coupling",
        criterion: 2,
        title: "Block coupling against (1 - eta_min)^s",
        description: "Two-state softmax chain driven by a clipped AR(1) on [-1, 1]. Disagreement at block \
                      boundaries over 1e5 coupled replicates must stay below (1 - eta_min)^s + 3 se for s <= 20.",
        expected_runtime_s: 5.0,
        config: config!("block-coupling"),
    },
    CatalogEntry {
        id: "lemma-ult-corpus",
        criterion: 3,
        title: "Block-infimum bound on two-state product expectations",
        description: "200 random two-state chains; the exact E prod kappa(X_i) must sit below the block-infimum \
                      bound for s <= 50. Reports whether factor 1 suffices or factor 4 is needed.",
        expected_runtime_s: 1.0,
        config: config!("lemma-ult-corpus"),
    },
    CatalogEntry {
        id: "lemma-ult3",
        criterion: 4,
        title: "Linear recursion bound",
        description: "100 random (a, v, C) triples with sum a_i < 1; the recursion u_t = sum a_i u_(t-i) + v_t \
                      must stay below its closed bound for t <= 50.",
        expected_runtime_s: 1.0,
        config: config!("lemma-ult3"),
    },
    CatalogEntry {
        id: "bstar-vs-mc",
        criterion: 5,
        title: "Renewal return probabilities against Monte Carlo",
        description: "b* from the exact recursion against 1e5 renewal-chain paths for n <= 30, plus the \
                      constant-b case b* = c.",
        expected_runtime_s: 2.0,
        config: config!("bstar-vs-mc"),
    },
    CatalogEntry {
        id: "coalescence-positivity",
        criterion: 6,
        title: "Coalescence probability against the constructive bound",
        description: "Multinomial, ordinal and multiple-choice models with full-support noise; 1 - rho_hat over \
                      1e5 blocks must exceed the product of infimum branch probabilities minus 3 se.",
        expected_runtime_s: 5.0,
        config: config!("coalescence-positivity"),
    },
    CatalogEntry {
        id: "backward-forward",
        criterion: 7,
        title: "Backward sampling against a forward run",
        description: "Binary multinomial model: TV between 1e5 coupling-from-the-past draws and a long forward \
                      run must be below 0.02; the covariate-free model must hit [0.5, 0.5] within 3 se.",
        expected_runtime_s: 10.0,
        config: config!("backward-forward"),
    },
    CatalogEntry {
        id: "restricted-alpha",
        criterion: 8,
        title: "Restricted alpha against the optimized bound",
        description: "Two-state chain in a two-state Markov environment; the plug-in alpha of (X_t, Y_t) with \
                      one-step windows over 1e5 replicates must stay below the optimized-r bound + 3 se at \
                      lags 1..15.",
        expected_runtime_s: 30.0,
        config: config!("restricted-alpha"),
    },
    CatalogEntry {
        id: "poisson-lipschitz",
        criterion: 9,
        title: "Poisson mean-Lipschitz identity",
        description: "On 20 mean pairs up to 10, the comonotone coupling gives E|N - N'| = |lambda - lambda'| \
                      within 1e-10 by exact series.",
        expected_runtime_s: 0.1,
        config: config!("poisson-lipschitz"),
    },
    CatalogEntry {
        id: "contraction-shape",
        criterion: 10,
        title: "Truncated-restart decay against the omega curve",
        description: "INGARCH identity and binary logistic models; delta_hat(r + s) must stay below L_hat omega \
                      for s in 2..30 with L_hat calibrated at s = 1, and decay at least as fast as omega.",
        expected_runtime_s: 20.0,
        config: config!("contraction-shape"),
    },
    CatalogEntry {
        id: "alpha-exact-sanity",
        criterion: 11,
        title: "Exact alpha sanity",
        description: "Product joints give 0, the correlated uniform binary joint gives 0.25, and 1000 random \
                      joints stay at or below 0.25.",
        expected_runtime_s: 1.0,
        config: config!("alpha-exact-sanity"),
    },
    CatalogEntry {
        id: "determinism",
        criterion: 12,
        title: "Byte-identical reruns",
        description: "Runs every other catalog entry twice from its default config and compares the CSV bytes.",
        expected_runtime_s: 180.0,
        config: config!("determinism"),
    },
];

pub fn list_experiments() -> &'static [CatalogEntry] {
    CATALOG
}

pub fn find(id: &str) -> Option<&'static CatalogEntry> {
    CATALOG.iter().find(|e| e.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique_and_configs_parse() {
        for (i, e) in CATALOG.iter().enumerate() {
            assert_eq!(e.criterion as usize, i + 1);
            assert!(CATALOG.iter().filter(|f| f.id == e.id).count() == 1);
            let cfg = parse_config(e.config).unwrap_or_else(|err| panic!("{}: {err}", e.id));
            assert_eq!(cfg.name.as_deref(), Some(e.id));
        }
        assert!(find("doeblin-reconstruction").is_some());
        assert!(find("bstar-vs-mc").is_some());
        assert!(find("nope").is_none());
        assert_eq!(list_experiments().len(), 12);
    }
}
