//! Result files: per-trial CSV and an aggregate JSON document.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{EnsembleSpec, SweepResult, TrialRecord};
use crate::error::{JsrError, Result};

pub const CSV_HEADER: [&str; 13] = [
    "algorithm",
    "n",
    "m",
    "K",
    "N",
    "snr_db",
    "trial",
    "seed",
    "success",
    "iterations",
    "fitness_final",
    "wall_time_us",
    "problem_hash",
];

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `#`-prefixed comment lines, the header and one row per record.
/// `specs` is indexed by each record's `spec_index`.
pub fn write_results_csv<W: Write>(
    mut out: W,
    comments: &[String],
    specs: &[EnsembleSpec],
    records: &[TrialRecord],
) -> Result<()> {
    for line in comments {
        if line.contains('\n') {
            return Err(JsrError::InvalidInput(
                "comment lines must not contain newlines".into(),
            ));
        }
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let spec = specs.get(r.spec_index).ok_or_else(|| {
            JsrError::InvalidInput(format!("record refers to unknown spec {}", r.spec_index))
        })?;
        w.write_record([
            r.algorithm.name().to_string(),
            spec.n.to_string(),
            spec.m.to_string(),
            spec.k.to_string(),
            spec.big_n.to_string(),
            spec.snr_db.map(|s| s.to_string()).unwrap_or_default(),
            r.trial_index.to_string(),
            r.seed.to_string(),
            r.success.to_string(),
            r.iterations.to_string(),
            r.fitness_final.to_string(),
            r.wall_time_us.to_string(),
            r.problem_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Aggregate<'a, C: Serialize> {
    schema: u32,
    config: &'a C,
    results: &'a [SweepResult],
}

/// Pretty-printed JSON: `{"schema": 1, "config": ..., "results": [...]}`.
pub fn write_aggregate_json<W: Write, C: Serialize>(
    mut out: W,
    config: &C,
    results: &[SweepResult],
) -> Result<()> {
    let doc = Aggregate {
        schema: SCHEMA_VERSION,
        config,
        results,
    };
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}
