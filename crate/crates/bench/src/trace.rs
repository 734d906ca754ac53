//! Convergence, particle and discrepancy traces in long CSV format.

use rand::Rng;
use svdro_core::control::Controller;
use svdro_core::env::sample_initial_state;
use svdro_core::rng::{derive_seed, domain, stream};
use svdro_core::{run_episode, ControllerKind, WorkPool};

use crate::config::Resolved;
use crate::error::BenchResult;
use crate::runner::{trial_seed, true_params, Cell};
use crate::stats::{linear_fit, mean, variance, LinearFit};
use crate::tables::{TraceRow, TRACE_SCHEMA};

fn row(mode: &str, label: &str, trial: usize, seed: u64, iteration: usize, series: String, value: f64) -> TraceRow {
    TraceRow {
        schema: TRACE_SCHEMA.into(),
        mode: mode.into(),
        label: label.into(),
        trial,
        seed,
        iteration,
        series,
        value,
    }
}

/// Per-cell objective traces against a frozen plant.
#[derive(Clone, Debug)]
pub struct ObjectiveTrace {
    pub rows: Vec<TraceRow>,
    /// `finals[cell][trial][seed]`: objective after the last iteration.
    pub finals: Vec<Vec<Vec<f64>>>,
    /// `best[cell][trial][seed]`: best-so-far objective per iteration.
    pub best: Vec<Vec<Vec<Vec<f64>>>>,
}

impl ObjectiveTrace {
    /// Across-seed variance of the final objective, averaged over trials.
    pub fn pooled_variance(&self, cell: usize) -> f64 {
        let v: Vec<f64> = self.finals[cell].iter().filter_map(|s| variance(s)).collect();
        mean(&v).unwrap_or(f64::NAN)
    }
}

/// Iterates each controller's solver from the trial's initial state with
/// the plant frozen. One solver iteration is one sampling iteration plus,
/// for SV-DRO, one SVGD step against the plan it produced.
pub fn objective_trace(r: &Resolved, cells: &[Cell], pool: &WorkPool) -> BenchResult<ObjectiveTrace> {
    let t = &r.cfg.trace;
    let mut settings = r.settings.clone();
    settings.sampler.iterations = 1;
    let per_cell = t.trials * t.seeds;
    let serial = WorkPool::sequential();
    let runs = pool.map_range(cells.len() * per_cell, |j| -> BenchResult<(Vec<TraceRow>, Vec<f64>, f64)> {
        let cell = &cells[j / per_cell];
        let (trial, seed) = ((j % per_cell) / t.seeds, (j % t.seeds) as u64);
        let tseed = trial_seed(r.cfg.seed, trial);
        let x0 = sample_initial_state(&r.env, &mut stream(tseed, &[domain::INIT_STATE]));
        let mut ctl = Controller::new(cell.kind, &r.env, &settings, derive_seed(tseed, &[seed]))?;
        let mut rows = Vec::with_capacity(2 * t.iterations);
        let mut best = Vec::with_capacity(t.iterations);
        let mut last = f64::NAN;
        for it in 0..t.iterations {
            let plan = ctl.plan(&x0, it, &serial)?;
            if matches!(cell.kind, ControllerKind::Svdro { .. }) {
                ctl.transport(&x0, &plan.controls, &serial)?;
            }
            ctl.warm_start = plan.controls.clone();
            let b = best.last().map_or(plan.objective, |b: &f64| b.min(plan.objective));
            best.push(b);
            last = plan.objective;
            rows.push(row("objective", &cell.label, trial, seed, it, "objective".into(), plan.objective));
            rows.push(row("objective", &cell.label, trial, seed, it, "best".into(), b));
        }
        Ok((rows, best, last))
    });
    let mut out = ObjectiveTrace {
        rows: Vec::new(),
        finals: vec![vec![Vec::with_capacity(t.seeds); t.trials]; cells.len()],
        best: vec![vec![Vec::with_capacity(t.seeds); t.trials]; cells.len()],
    };
    for (j, run) in runs.into_iter().enumerate() {
        let (rows, best, last) = run?;
        let (c, trial) = (j / per_cell, (j % per_cell) / t.seeds);
        out.rows.extend(rows);
        out.finals[c][trial].push(last);
        out.best[c][trial].push(best);
    }
    Ok(out)
}

/// Particle snapshots after every cycle of one episode per trial.
pub fn particle_trace(r: &Resolved, cells: &[Cell], pool: &WorkPool) -> BenchResult<Vec<TraceRow>> {
    let trials = r.cfg.trace.trials;
    let serial = WorkPool::sequential();
    let axes: Vec<&str> = r.env.prior.dims.iter().map(|d| d.axis.name()).collect();
    let runs = pool.map_range(cells.len() * trials, |j| -> BenchResult<Vec<TraceRow>> {
        let cell = &cells[j / trials];
        let trial = j % trials;
        let seed = trial_seed(r.cfg.seed, trial);
        let theta = true_params(r, seed);
        let rec = run_episode(cell.kind, &r.env, &theta, seed, &r.settings, &serial)?;
        let truth = r.env.prior.extract(&theta);
        let mut rows = Vec::new();
        for c in &rec.cycles {
            for (i, p) in c.particles.iter().enumerate() {
                for (d, v) in p.iter().enumerate() {
                    rows.push(row("particles", &cell.label, trial, seed, c.cycle, format!("p{i}.{}", axes[d]), *v));
                }
            }
            for (d, v) in truth.iter().enumerate() {
                rows.push(row("particles", &cell.label, trial, seed, c.cycle, format!("true.{}", axes[d]), *v));
            }
        }
        Ok(rows)
    });
    Ok(runs.into_iter().collect::<BenchResult<Vec<_>>>()?.concat())
}

#[derive(Clone, Debug)]
pub struct DiscrepancyTrace {
    pub rows: Vec<TraceRow>,
    /// Least-squares fit of final goal distance on the offset fraction, per
    /// cell.
    pub fits: Vec<Option<LinearFit>>,
}

/// Moves the prior box so its mean sits `offset` prior widths from θ* along
/// a random sign per axis (the same for every controller and offset of a
/// trial), then runs one episode and records the final goal distance.
pub fn discrepancy_trace(r: &Resolved, cells: &[Cell], pool: &WorkPool) -> BenchResult<DiscrepancyTrace> {
    let t = &r.cfg.trace;
    let offsets = &t.offsets;
    let per_cell = t.trials * offsets.len();
    let serial = WorkPool::sequential();
    let runs = pool.map_range(cells.len() * per_cell, |j| -> BenchResult<(usize, f64, f64)> {
        let cell = &cells[j / per_cell];
        let (trial, k) = ((j % per_cell) / offsets.len(), j % offsets.len());
        let seed = trial_seed(r.cfg.seed, trial);
        let theta = true_params(r, seed);
        let truth = r.env.prior.extract(&theta);
        let mut signs = stream(seed, &[domain::DISCREPANCY]);
        let center = r.env.prior.mean();
        let shift: Vec<f64> = r
            .env
            .prior
            .dims
            .iter()
            .zip(&truth)
            .zip(&center)
            .map(|((d, th), c)| {
                let s = if signs.random_bool(0.5) { 1.0 } else { -1.0 };
                th + s * offsets[k] * d.width() - c
            })
            .collect();
        let mut env = r.env.clone();
        env.prior = env.prior.shifted(&shift);
        let rec = run_episode(cell.kind, &env, &theta, seed, &r.settings, &serial)?;
        Ok((trial, offsets[k], rec.final_distance))
    });
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let results = runs.into_iter().collect::<BenchResult<Vec<_>>>()?;
    for (c, chunk) in results.chunks(per_cell.max(1)).enumerate() {
        let label = &cells[c].label;
        for (i, &(trial, off, dist)) in chunk.iter().enumerate() {
            let seed = trial_seed(r.cfg.seed, trial);
            let k = i % offsets.len();
            rows.push(row("discrepancy", label, trial, seed, k, "offset".into(), off));
            rows.push(row("discrepancy", label, trial, seed, k, "final_error".into(), dist));
        }
        let x: Vec<f64> = chunk.iter().map(|c| c.1).collect();
        let y: Vec<f64> = chunk.iter().map(|c| c.2).collect();
        fits.push(linear_fit(&x, &y));
    }
    Ok(DiscrepancyTrace { rows, fits })
}
