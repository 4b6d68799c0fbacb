//! Config-driven experiment runner.
//!
//! [`run_text`] parses a TOML config, runs the selected experiment, writes
//! one CSV per table plus `report.json` into the output directory and returns
//! the [`RunReport`]. A run is a pure function of the config bytes.

pub mod acceptance;
pub mod catalog;
pub mod config;
pub mod report;
pub mod runners;

use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

pub use catalog::{list_experiments, CatalogEntry, CATALOG};
pub use config::ExperimentConfig;
pub use report::{Outcome, RunReport, Table, TableRef, Verdict};

use crate::rng::RngStream;
use config::ExperimentKind;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, message: String },
    #[error("unknown experiment {0:?}; `list` shows the catalog")]
    UnknownExperiment(String),
}

impl RunError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<crate::Error> for RunError {
    fn from(e: crate::Error) -> Self {
        Self::Invalid {
            line: None,
            message: e.to_string(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, RunError> {
    toml::from_str(text).map_err(|e| RunError::Parse(e.to_string().trim_end().to_string()))
}

/// Line of the config key that `message` mentions first, if any.
fn anchor_line(text: &str, message: &str) -> Option<usize> {
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let mention = |key: &str| {
        message.match_indices(key).map(|(i, _)| i).find(|&i| {
            let before = message[..i].chars().next_back().is_none_or(|c| !is_word(c));
            let after = message[i + key.len()..].chars().next().is_none_or(|c| !is_word(c));
            before && after
        })
    };
    text.lines()
        .enumerate()
        .filter_map(|(ln, line)| {
            let key = line.split('=').next()?.trim();
            if key.is_empty() || !line.contains('=') || key.starts_with('#') || !key.chars().all(is_word) {
                return None;
            }
            mention(key).map(|pos| (pos, ln + 1))
        })
        .min()
        .map(|(_, ln)| ln)
}

fn anchored(text: &str, e: RunError) -> RunError {
    match e {
        RunError::Invalid { line: None, message } => RunError::Invalid {
            line: anchor_line(text, &message),
            message,
        },
        other => other,
    }
}

pub fn default_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.display_name()))
}

/// Runs the experiment without writing anything.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome, RunError> {
    let rng = RngStream::new(cfg.seed, 0);
    let out = match &cfg.experiment {
        ExperimentKind::MreCoupling(c) => runners::mre_coupling(c, &rng)?,
        ExperimentKind::MapsCoupling(c) => runners::maps_coupling(c, &rng)?,
        ExperimentKind::ContractionCoupling(c) => runners::contraction_coupling(c, &rng)?,
        ExperimentKind::BoundsCurve(c) => runners::bounds_curve(c)?,
        ExperimentKind::AlphaCurve(c) => runners::alpha_curve(c, &rng)?,
        ExperimentKind::LemmaCorpus(c) => runners::lemma_corpus(c, &rng)?,
        ExperimentKind::Acceptance(c) => acceptance::run(&c.id, &rng, out_dir)?,
    };
    Ok(out)
}

/// Parses, runs and writes artifacts. `output_dir` overrides the config's.
pub fn run_text(text: &str, output_dir: Option<&Path>) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let cfg = parse_config(text)?;
    let dir = output_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_output_dir(&cfg));
    std::fs::create_dir_all(&dir).map_err(|e| RunError::io(&dir, e))?;
    let outcome = execute(&cfg, &dir).map_err(|e| anchored(text, e))?;

    let mut tables = Vec::new();
    for t in &outcome.tables {
        let file = format!("{}.csv", t.name);
        let path = dir.join(&file);
        std::fs::write(&path, t.to_csv()).map_err(|e| RunError::io(&path, e))?;
        tables.push(TableRef {
            name: t.name.clone(),
            file,
            columns: t.columns.clone(),
            rows: t.rows.len(),
        });
    }
    let report = RunReport {
        name: cfg.display_name(),
        kind: cfg.experiment.kind_name().to_string(),
        seed: cfg.seed,
        config_sha256: hex::encode(Sha256::digest(text.as_bytes())),
        config: text.to_string(),
        all_passed: outcome.verdicts.iter().all(|v| v.passed),
        verdicts: outcome.verdicts,
        tables,
        summary: outcome.summary,
        output_dir: dir.display().to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        data: outcome.tables,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let path = dir.join("report.json");
    std::fs::write(&path, json + "\n").map_err(|e| RunError::io(&path, e))?;
    Ok(report)
}

pub fn run_file(path: &Path, output_dir: Option<&Path>) -> Result<RunReport, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    run_text(&text, output_dir)
}

/// Runs a config file into its own `output_dir` (default `runs/<name>`).
pub fn run(config_path: &Path) -> Result<RunReport, RunError> {
    run_file(config_path, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_first_mentioned_key() {
        let text = "seed = 1\n[experiment]\nkind = \"bounds_curve\"\nn = [3]\nr = 5\n";
        let msg = "restart index must satisfy 1 ≤ r ≤ n−1, got r = 5, n = 3";
        assert_eq!(anchor_line(text, msg), Some(5));
        assert_eq!(anchor_line(text, "nothing relevant"), None);
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
        assert!(n >= 12);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_config("seed = 1\n[experiment]\nkind = \"bounds_curve\"\nn = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        let err =
            parse_config("seed = 1\nbogus = 2\n[experiment]\nkind = \"lemma_corpus\"\nlemma = \"ult\"\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }
}
