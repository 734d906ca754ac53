//! Wall-clock of one SV-DRO planning cycle (plan plus transport) swept over
//! the particle count or the horizon, with seeds and state held fixed.

use std::time::Instant;

use svdro_core::control::Controller;
use svdro_core::env::sample_initial_state;
use svdro_core::rng::{domain, stream};
use svdro_core::WorkPool;

use crate::config::Resolved;
use crate::error::BenchResult;
use crate::runner::trial_seed;
use crate::stats::{linear_fit, mean, std_dev, LinearFit};
use crate::tables::{ScalingRow, SCALING_SCHEMA};

#[derive(Clone, Debug)]
pub struct Scaling {
    pub rows: Vec<ScalingRow>,
    /// (workers, fit of mean seconds on the axis value).
    pub fits: Vec<(usize, Option<LinearFit>)>,
}

impl Scaling {
    pub fn fit(&self, workers: usize) -> Option<LinearFit> {
        self.fits.iter().find(|(w, _)| *w == workers).and_then(|(_, f)| *f)
    }
}

/// Times `reps` cycles after `warmup` discarded ones.
fn time_cycles(r: &Resolved, axis: &str, value: usize, pool: &WorkPool) -> BenchResult<Vec<f64>> {
    let s = &r.cfg.scale;
    let mut env = r.env.clone();
    let mut settings = r.settings.clone();
    match axis {
        "particles" => env.particle_count = value,
        _ => {
            settings.sampler.horizon_steps = value;
            settings.episode.execution_window = settings.episode.execution_window.min(value);
        }
    }
    let kind = r.cfg.controller_kind("svdro", &env)?;
    let seed = trial_seed(r.cfg.seed, 0);
    let x0 = sample_initial_state(&env, &mut stream(seed, &[domain::INIT_STATE]));
    let base = Controller::new(kind, &env, &settings, seed)?;
    let mut times = Vec::with_capacity(s.repetitions);
    for rep in 0..s.warmup + s.repetitions {
        let mut ctl = base.clone();
        let start = Instant::now();
        let plan = ctl.plan(&x0, 0, pool)?;
        ctl.transport(&x0, &plan.controls, pool)?;
        let dt = start.elapsed().as_secs_f64();
        if rep >= s.warmup {
            times.push(dt);
        }
    }
    Ok(times)
}

/// Serial sweep, then the same sweep on `scale.workers` threads.
pub fn run_scaling(r: &Resolved) -> BenchResult<Scaling> {
    let s = &r.cfg.scale;
    let values = s.sweep();
    let mut workers = vec![1];
    if s.workers > 1 {
        workers.push(s.workers);
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &w in &workers {
        let pool = WorkPool::new(w)?;
        let mut means = Vec::with_capacity(values.len());
        for &v in &values {
            let times = time_cycles(r, &s.axis, v, &pool)?;
            let m = mean(&times).unwrap_or(0.0);
            means.push(m);
            rows.push(ScalingRow {
                schema: SCALING_SCHEMA.into(),
                axis: s.axis.clone(),
                value: v,
                workers: w,
                repetitions: times.len(),
                mean_s: m,
                std_s: std_dev(&times).unwrap_or(0.0),
            });
        }
        let x: Vec<f64> = values.iter().map(|v| *v as f64).collect();
        fits.push((w, linear_fit(&x, &means)));
    }
    Ok(Scaling { rows, fits })
}
