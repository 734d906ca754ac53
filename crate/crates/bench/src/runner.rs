//! Paired trials: every controller in a run sees the same θ*, initial state
//! and observation-noise stream for a given trial index.

use std::path::{Path, PathBuf};

use svdro_core::control::draw_true_params;
use svdro_core::record::encode_trial;
use svdro_core::rng::{derive_seed, domain};
use svdro_core::svgd::KernelKind;
use svdro_core::{run_episode, ControllerKind, PhysParams, TrialRecord, WorkPool};

use crate::config::Resolved;
use crate::error::{BenchError, BenchResult};
use crate::stats::{mean, ordering_confidence, std_dev};
use crate::tables::{SummaryRow, SUMMARY_SCHEMA};

/// Episode seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &[domain::TRIAL, index as u64])
}

/// θ* for a trial: the pinned value if any, otherwise a prior draw keyed by
/// the trial seed.
pub fn true_params(r: &Resolved, seed: u64) -> PhysParams {
    r.pinned.unwrap_or_else(|| draw_true_params(&r.env, seed))
}

pub fn run_trial(r: &Resolved, kind: ControllerKind, seed: u64, pool: &WorkPool) -> BenchResult<TrialRecord> {
    let theta = true_params(r, seed);
    Ok(run_episode(kind, &r.env, &theta, seed, &r.settings, pool)?)
}

/// One row group of a benchmark: a controller under a display label.
#[derive(Clone, Debug)]
pub struct Cell {
    pub label: String,
    pub kind: ControllerKind,
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub label: String,
    pub kind: ControllerKind,
    /// Indexed by trial.
    pub records: Vec<TrialRecord>,
}

pub fn controller_cells(r: &Resolved) -> Vec<Cell> {
    r.controllers
        .iter()
        .map(|(name, kind)| Cell {
            label: name.clone(),
            kind: *kind,
        })
        .collect()
}

/// SV-DRO once per kernel in `kernels`, everything else as configured.
pub fn kernel_cells(r: &Resolved, kernels: &[String]) -> BenchResult<Vec<Cell>> {
    let base = r.cfg.controller_kind("svdro", &r.env)?;
    let ControllerKind::Svdro { gamma, alpha, .. } = base else {
        unreachable!("svdro resolves to an svdro controller")
    };
    kernels
        .iter()
        .map(|k| {
            let kernel: KernelKind = r.cfg.kernel(k, &r.env)?;
            Ok(Cell {
                label: k.clone(),
                kind: ControllerKind::Svdro { gamma, alpha, kernel },
            })
        })
        .collect()
}

/// Runs `cfg.trials` paired trials for every cell, spreading whole trials
/// over `pool`. Planning failures stay inside the records; only invalid
/// configurations abort.
pub fn run_cells(r: &Resolved, cells: &[Cell], pool: &WorkPool) -> BenchResult<Vec<CellResult>> {
    let n = r.cfg.trials;
    let serial = WorkPool::sequential();
    let mut out = pool.map_range(cells.len() * n, |j| {
        run_trial(r, cells[j / n].kind, trial_seed(r.cfg.seed, j % n), &serial)
    });
    let mut results = Vec::with_capacity(cells.len());
    for cell in cells.iter().rev() {
        let records = out.split_off(out.len() - n).into_iter().collect::<BenchResult<Vec<_>>>()?;
        results.push(CellResult {
            label: cell.label.clone(),
            kind: cell.kind,
            records,
        });
    }
    results.reverse();
    Ok(results)
}

pub fn summarize(env: &str, results: &[CellResult], thresholds: &[f64]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for c in results {
        for &thr in thresholds {
            let times: Vec<f64> = c
                .records
                .iter()
                .filter_map(|r| r.outcome(thr))
                .filter(|o| o.success)
                .filter_map(|o| o.completion_time)
                .collect();
            let successes = c
                .records
                .iter()
                .filter(|r| r.outcome(thr).is_some_and(|o| o.success))
                .count();
            let trials = c.records.len();
            rows.push(SummaryRow {
                schema: SUMMARY_SCHEMA.into(),
                env: env.into(),
                label: c.label.clone(),
                threshold: thr,
                trials,
                successes,
                success_pct: 100.0 * successes as f64 / trials.max(1) as f64,
                time_mean: mean(&times),
                time_std: std_dev(&times),
                star: if successes == 0 { "*".into() } else { String::new() },
            });
        }
    }
    rows
}

/// Completion times per cell and trial at `threshold`, `None` for trials
/// that did not succeed.
pub fn completion_matrix(results: &[CellResult], threshold: f64) -> Vec<Vec<Option<f64>>> {
    results
        .iter()
        .map(|c| {
            c.records
                .iter()
                .map(|r| r.outcome(threshold).filter(|o| o.success).and_then(|o| o.completion_time))
                .collect()
        })
        .collect()
}

/// Bootstrap confidence that mean completion times are ordered as the
/// cells are listed.
pub fn time_ordering_confidence(results: &[CellResult], threshold: f64, seed: u64) -> f64 {
    ordering_confidence(&completion_matrix(results, threshold), 2000, seed)
}

pub fn trial_file(dir: &Path, env: &str, label: &str, seed: u64) -> PathBuf {
    dir.join(format!("trial-{env}-{label}-{seed}.jsonl"))
}

pub fn write_record(path: &Path, rec: &TrialRecord) -> BenchResult<()> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d)?;
    }
    let text = encode_trial(rec).map_err(|e| BenchError::Runtime(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes every record as `records/<label>/trial-<index>.jsonl` under `dir`.
pub fn write_records(dir: &Path, results: &[CellResult]) -> BenchResult<()> {
    for c in results {
        for (i, rec) in c.records.iter().enumerate() {
            write_record(&dir.join("records").join(&c.label).join(format!("trial-{i:03}.jsonl")), rec)?;
        }
    }
    Ok(())
}
