//! Writing the artifacts of a run into an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::experiments::Outcome;
use crate::formats::{content_hash, write_csv, write_event_log, write_generator, write_summary, FormatError, Summary, SCHEMA_VERSION};

pub fn summary(cfg: &ExperimentConfig, outcome: &Outcome) -> Summary {
    Summary {
        schema_version: SCHEMA_VERSION,
        experiment: format!("{:?}", cfg.kind),
        model: cfg.model.to_string(),
        seed: cfg.seed,
        config_sha256: content_hash(&cfg.to_toml()),
        passed: outcome.passed(),
        assertions: outcome.assertions.clone(),
        estimates: outcome.estimates.clone(),
    }
}

/// `results.csv`, `summary.json`, and when present `events.log` and
/// `generators/<name>/`. Returns the files written.
pub fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<PathBuf>, FormatError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join("results.csv");
    write_csv(BufWriter::new(File::create(&path)?), &outcome.rows)?;
    written.push(path);

    let path = dir.join("summary.json");
    write_summary(BufWriter::new(File::create(&path)?), &summary(cfg, outcome))?;
    written.push(path);

    if let Some(log) = &outcome.event_log {
        let path = dir.join("events.log");
        let mut w = BufWriter::new(File::create(&path)?);
        write_event_log(&mut w, &log.header, &log.events)?;
        w.flush()?;
        written.push(path);
    }
    for (name, g) in &outcome.generators {
        let sub = dir.join("generators").join(name);
        write_generator(&sub, g)?;
        written.push(sub);
    }
    Ok(written)
}
