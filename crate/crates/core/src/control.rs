//! Sampling MPC with nominal, ensemble, soft-DRO and Stein-variational
//! robust objectives, and the receding-horizon episode loop.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step, BodyState, ControlInput};
use crate::env::{
    goal_distance, observe, rollout_cost, sample_initial_state, wrap_angle, ControlBounds, EnvSpec,
};
use crate::error::{config_err, Error, Result};
use crate::params::PhysParams;
use crate::pool::WorkPool;
use crate::rng::{domain, stream, Stream};
use crate::svgd::{median_bandwidth, svgd_step, KernelKind, ParticleSet, PosteriorModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerKind {
    /// Plans against the prior mean only.
    Nominal,
    /// Averages rollout costs over parameters drawn from the prior.
    Emppi,
    /// KL-ball dual with temperature β and radius ε.
    SoftDro { beta: f64, epsilon: f64 },
    /// Particle-mean cost plus γ times the mean optimality gap, with the
    /// particles transported by SVGD after every cycle.
    Svdro {
        gamma: f64,
        alpha: f64,
        kernel: KernelKind,
    },
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::Nominal => "nominal",
            ControllerKind::Emppi => "emppi",
            ControllerKind::SoftDro { .. } => "softdro",
            ControllerKind::Svdro { .. } => "svdro",
        }
    }

    /// Default configuration for a controller name.
    pub fn from_name(name: &str, env: &EnvSpec) -> Result<Self> {
        let kind = match name {
            "nominal" | "mpc" => ControllerKind::Nominal,
            "emppi" => ControllerKind::Emppi,
            "softdro" | "dro" => ControllerKind::SoftDro {
                beta: 1.0,
                epsilon: 0.1,
            },
            "svdro" => ControllerKind::Svdro {
                gamma: 1.0,
                alpha: env.svgd_step_size,
                kernel: KernelKind::Rbf {
                    bandwidth: env.kernel_bandwidth,
                },
            },
            other => return Err(config_err(format!("unknown controller `{other}`"))),
        };
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ControllerKind::Nominal | ControllerKind::Emppi => Ok(()),
            ControllerKind::SoftDro { beta, epsilon } => {
                if !(beta.is_finite() && *beta > 0.0) || !(epsilon.is_finite() && *epsilon >= 0.0) {
                    Err(config_err("softdro needs beta > 0 and epsilon >= 0"))
                } else {
                    Ok(())
                }
            }
            ControllerKind::Svdro {
                gamma,
                alpha,
                kernel,
            } => {
                if !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(config_err("svdro gamma must lie in (0, 1]"));
                }
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(config_err("svdro step size must be positive"));
                }
                kernel.validate()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// K
    pub samples: usize,
    /// Per control dimension.
    pub noise_std: Vec<f64>,
    /// Lag-one correlation ρ of the perturbations along the horizon; the
    /// stationary std stays `noise_std`.
    pub noise_correlation: f64,
    /// λ_s
    pub temperature: f64,
    /// Measure λ_s in units of the iteration's cost spread (mean minus
    /// minimum over the samples) instead of absolute cost units.
    pub relative_temperature: bool,
    pub horizon_steps: usize,
    pub iterations: usize,
    pub warm_start_shift: bool,
}

impl SamplerConfig {
    /// K = 256, λ_s = 0.5, three iterations, and per-dimension noise of
    /// 20% of the control range, capped by [`penalty_capped_noise`].
    pub fn for_env(env: &EnvSpec) -> Self {
        let temperature = 0.5;
        let horizon_steps = env.horizon_steps();
        Self {
            samples: 256,
            noise_std: penalty_capped_noise(env, temperature, horizon_steps, NOISE_PENALTY_BUDGET),
            noise_correlation: 0.9,
            temperature,
            relative_temperature: true,
            horizon_steps,
            iterations: 3,
            warm_start_shift: true,
        }
    }

    pub fn validate(&self, control_dim: usize) -> Result<()> {
        if self.samples == 0 {
            return Err(config_err("sampler needs at least one sample"));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(config_err("sampler temperature must be positive"));
        }
        if self.noise_std.len() != control_dim
            || self.noise_std.iter().any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(config_err(format!(
                "sampler noise needs {control_dim} nonnegative entries"
            )));
        }
        if !(self.noise_correlation >= 0.0 && self.noise_correlation < 1.0) {
            return Err(config_err("noise correlation must lie in [0, 1)"));
        }
        if self.horizon_steps == 0 || self.iterations == 0 {
            return Err(config_err("sampler horizon and iterations must be positive"));
        }
        Ok(())
    }
}

/// Control penalty, in temperatures, that a one-σ perturbation held over
/// the whole horizon may cost.
pub const NOISE_PENALTY_BUDGET: f64 = 0.1;

/// 20% of each control range, reduced where `T · R_i · σ_i²` would exceed
/// `budget · λ_s`. Without the cap, heavily penalized controls make every
/// perturbed sample so expensive that the weighted update never leaves the
/// warm start.
pub fn penalty_capped_noise(env: &EnvSpec, temperature: f64, horizon_steps: usize, budget: f64) -> Vec<f64> {
    let r = &env.weights.r;
    env.control_bounds
        .range()
        .iter()
        .enumerate()
        .map(|(i, range)| {
            let w = r[i % r.len()];
            let base = 0.2 * range;
            if w > 0.0 {
                base.min((budget * temperature / (horizon_steps as f64 * w)).sqrt())
            } else {
                base
            }
        })
        .collect()
}

/// `L(θ̄)` for the controls.
pub fn objective_nominal(
    controls: &[ControlInput],
    x0: &BodyState,
    theta_bar: &PhysParams,
    env: &EnvSpec,
) -> Result<f64> {
    rollout_cost(x0, controls, theta_bar, env)
}

fn sample_costs(
    controls: &[ControlInput],
    x0: &BodyState,
    samples: &[PhysParams],
    env: &EnvSpec,
) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|p| rollout_cost(x0, controls, p, env))
        .collect()
}

pub fn mean_cost(costs: &[f64]) -> f64 {
    costs.iter().sum::<f64>() / costs.len() as f64
}

/// βε + β·log((1/N) Σ exp(Lᵢ/β)), shifted by the max for stability.
pub fn softdro_value(costs: &[f64], beta: f64, epsilon: f64) -> Result<f64> {
    if costs.is_empty() {
        return Err(config_err("softdro needs at least one sample cost"));
    }
    let m = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = costs.iter().map(|c| ((c - m) / beta).exp()).sum();
    let v = beta * epsilon + m + beta * (s / costs.len() as f64).ln();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!(
            "softdro log-sum-exp not finite (beta = {beta}, max cost = {m})"
        )))
    }
}

/// L(θ̄) + γ·(1/N) Σ (Lᵢ − L(θ̄)).
pub fn svdro_value(reference: f64, costs: &[f64], gamma: f64) -> f64 {
    if gamma == 0.0 || costs.is_empty() {
        return reference;
    }
    let gap = costs.iter().map(|c| c - reference).sum::<f64>() / costs.len() as f64;
    reference + gamma * gap
}

pub fn objective_empi(
    controls: &[ControlInput],
    x0: &BodyState,
    samples: &[PhysParams],
    env: &EnvSpec,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(config_err("ensemble objective needs at least one sample"));
    }
    Ok(mean_cost(&sample_costs(controls, x0, samples, env)?))
}

pub fn objective_softdro(
    controls: &[ControlInput],
    x0: &BodyState,
    samples: &[PhysParams],
    beta: f64,
    epsilon: f64,
    env: &EnvSpec,
) -> Result<f64> {
    softdro_value(&sample_costs(controls, x0, samples, env)?, beta, epsilon)
}

pub fn objective_svdro(
    controls: &[ControlInput],
    x0: &BodyState,
    particles: &ParticleSet,
    gamma: f64,
    env: &EnvSpec,
) -> Result<f64> {
    let reference = rollout_cost(x0, controls, &env.params_from(&particles.mean()), env)?;
    if gamma == 0.0 {
        return Ok(reference);
    }
    let costs = sample_costs(controls, x0, &particles.params(&env.nominal_params), env)?;
    Ok(svdro_value(reference, &costs, gamma))
}

/// Objective value and its per-sample decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Cost under each parameter sample (empty for the nominal objective).
    pub costs: Vec<f64>,
    /// Cost under the reference parameter, when the objective uses one.
    pub reference: Option<f64>,
}

pub trait Objective: Sync {
    fn evaluate(&self, controls: &[ControlInput]) -> Result<Evaluation>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reduction {
    Nominal,
    Mean,
    SoftDro { beta: f64, epsilon: f64 },
    Svdro { gamma: f64 },
}

/// Rollout objective over a fixed parameter set from one initial state.
#[derive(Clone, Debug)]
pub struct EnsembleObjective<'a> {
    pub env: &'a EnvSpec,
    pub initial: BodyState,
    pub samples: Vec<PhysParams>,
    pub reference: PhysParams,
    pub reduction: Reduction,
}

impl Objective for EnsembleObjective<'_> {
    fn evaluate(&self, controls: &[ControlInput]) -> Result<Evaluation> {
        let env = self.env;
        let x0 = &self.initial;
        Ok(match self.reduction {
            Reduction::Nominal => {
                let r = objective_nominal(controls, x0, &self.reference, env)?;
                Evaluation {
                    value: r,
                    costs: Vec::new(),
                    reference: Some(r),
                }
            }
            Reduction::Mean => {
                let costs = sample_costs(controls, x0, &self.samples, env)?;
                Evaluation {
                    value: mean_cost(&costs),
                    costs,
                    reference: None,
                }
            }
            Reduction::SoftDro { beta, epsilon } => {
                let costs = sample_costs(controls, x0, &self.samples, env)?;
                Evaluation {
                    value: softdro_value(&costs, beta, epsilon)?,
                    costs,
                    reference: None,
                }
            }
            Reduction::Svdro { gamma } => {
                let r = rollout_cost(x0, controls, &self.reference, env)?;
                let costs = if gamma == 0.0 {
                    Vec::new()
                } else {
                    sample_costs(controls, x0, &self.samples, env)?
                };
                Evaluation {
                    value: svdro_value(r, &costs, gamma),
                    costs,
                    reference: Some(r),
                }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub controls: Vec<ControlInput>,
    pub objective: f64,
    /// δL of each parameter sample on the returned controls.
    pub gaps: Vec<f64>,
    /// Best-so-far objective after each iteration and after the final
    /// mean is scored.
    pub best_trace: Vec<f64>,
    pub duration: Duration,
}

fn gaps_of(e: &Evaluation) -> Vec<f64> {
    match e.reference {
        Some(r) => e.costs.iter().map(|c| c - r).collect(),
        None => Vec::new(),
    }
}

fn padded(warm_start: &[ControlInput], steps: usize, dim: usize, bounds: &ControlBounds) -> Vec<Vec<f64>> {
    (0..steps)
        .map(|k| {
            let mut u = warm_start
                .get(k)
                .map(|c| c.0.clone())
                .unwrap_or_else(|| vec![0.0; dim]);
            u.resize(dim, 0.0);
            bounds.clamp(&mut u);
            u
        })
        .collect()
}

fn to_controls(seq: &[Vec<f64>]) -> Vec<ControlInput> {
    seq.iter().map(|u| ControlInput(u.clone())).collect()
}

/// Path-integral sampling optimizer with elite retention.
///
/// Each iteration scores the current mean and K − 1 perturbations of it
/// (Gaussian, AR(1)-correlated along the horizon), then moves the mean to their exp(−(J − J_min)/λ)-weighted average.
/// The best sequence seen so far is kept and returned if the final mean
/// does not beat it.
pub fn plan(
    objective: &dyn Objective,
    bounds: &ControlBounds,
    warm_start: &[ControlInput],
    sampler: &SamplerConfig,
    rng: &mut Stream,
    pool: &WorkPool,
) -> Result<PlanResult> {
    let start = Instant::now();
    let dim = bounds.lower.len();
    sampler.validate(dim)?;
    let t = sampler.horizon_steps;
    let mut mean = padded(warm_start, t, dim, bounds);
    let mut best: Option<(Vec<Vec<f64>>, Evaluation)> = None;
    let mut best_trace = Vec::with_capacity(sampler.iterations + 1);
    let mut last_error = None;

    for _ in 0..sampler.iterations {
        let mut candidates = Vec::with_capacity(sampler.samples);
        candidates.push(mean.clone());
        let rho = sampler.noise_correlation;
        let innovation = (1.0 - rho * rho).sqrt();
        for _ in 1..sampler.samples {
            let mut eps: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let seq: Vec<Vec<f64>> = mean
                .iter()
                .enumerate()
                .map(|(k, u)| {
                    if k > 0 {
                        for e in eps.iter_mut() {
                            *e = rho * *e + innovation * rng.sample::<f64, _>(StandardNormal);
                        }
                    }
                    let mut v: Vec<f64> = u
                        .iter()
                        .zip(&sampler.noise_std)
                        .zip(&eps)
                        .map(|((m, s), e)| m + s * e)
                        .collect();
                    bounds.clamp(&mut v);
                    v
                })
                .collect();
            candidates.push(seq);
        }
        let evals = pool.map(&candidates, |seq| objective.evaluate(&to_controls(seq)));
        let costs: Vec<f64> = evals
            .iter()
            .map(|e| match e {
                Ok(e) if e.value.is_finite() => e.value,
                _ => f64::INFINITY,
            })
            .collect();
        let (imin, jmin) = costs
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, c)| if c < acc.1 { (i, c) } else { acc });
        if !jmin.is_finite() {
            last_error = evals.into_iter().find_map(|e| e.err());
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| jmin < b.value) {
            let e = evals[imin].clone().expect("finite cost comes from a successful evaluation");
            best = Some((candidates[imin].clone(), e));
        }
        best_trace.push(best.as_ref().map_or(f64::INFINITY, |(_, b)| b.value));

        let lambda = if sampler.relative_temperature {
            let finite: Vec<f64> = costs.iter().copied().filter(|c| c.is_finite()).collect();
            let spread = finite.iter().sum::<f64>() / finite.len() as f64 - jmin;
            sampler.temperature * if spread > 0.0 { spread } else { 1.0 }
        } else {
            sampler.temperature
        };
        let weights: Vec<f64> = costs
            .iter()
            .map(|c| (-(c - jmin) / lambda).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        for (k, u) in mean.iter_mut().enumerate() {
            // Offsets from the current mean, so a noiseless batch leaves it exact.
            for (c, v) in u.iter_mut().enumerate() {
                let m = *v;
                *v = m + candidates
                    .iter()
                    .zip(&weights)
                    .filter(|(_, w)| **w > 0.0)
                    .map(|(seq, w)| w * (seq[k][c] - m))
                    .sum::<f64>()
                    / total;
            }
            bounds.clamp(u);
        }
    }

    let (best_seq, best_eval) = match best {
        Some(b) => b,
        None => {
            return Err(Error::PlanningFailure(match last_error {
                Some(e) => format!("every sampled rollout failed; last error: {e}"),
                None => "every sampled rollout failed".into(),
            }))
        }
    };
    let (seq, eval) = match objective.evaluate(&to_controls(&mean)) {
        Ok(e) if e.value.is_finite() && e.value < best_eval.value => (mean, e),
        _ => (best_seq, best_eval),
    };
    best_trace.push(eval.value);
    Ok(PlanResult {
        controls: to_controls(&seq),
        objective: eval.value,
        gaps: gaps_of(&eval),
        best_trace,
        duration: start.elapsed(),
    })
}

/// Knobs of the receding-horizon loop beyond the environment constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    /// T, in control steps.
    pub total_steps: usize,
    /// H
    pub execution_window: usize,
    pub observation_noise: bool,
    /// SVGD steps per planning cycle.
    pub svgd_iterations: usize,
    /// γ_post
    pub posterior_temperature: f64,
    /// Sign of δL in the likelihood exponent.
    pub likelihood_sign: f64,
    /// Replace the fixed bandwidth by the median heuristic.
    pub median_bandwidth: bool,
    pub thresholds: Vec<f64>,
    pub dwell_steps: usize,
}

impl EpisodeConfig {
    pub fn for_env(env: &EnvSpec) -> Self {
        Self {
            total_steps: env.total_steps(),
            execution_window: env.execution_window,
            observation_noise: true,
            svgd_iterations: 1,
            posterior_temperature: 1.0,
            likelihood_sign: 1.0,
            median_bandwidth: false,
            thresholds: vec![0.10, 0.01],
            dwell_steps: env.dwell_steps(),
        }
    }

    pub fn validate(&self, horizon_steps: usize) -> Result<()> {
        if self.execution_window == 0 || self.execution_window > horizon_steps {
            return Err(config_err(format!(
                "execution window must lie in 1..={horizon_steps}"
            )));
        }
        if !self.posterior_temperature.is_finite() || self.posterior_temperature < 0.0 {
            return Err(config_err("posterior temperature must be nonnegative"));
        }
        if self.likelihood_sign != 1.0 && self.likelihood_sign != -1.0 {
            return Err(config_err("likelihood sign must be +1 or -1"));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(config_err("thresholds must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub episode: EpisodeConfig,
    pub sampler: SamplerConfig,
}

impl Settings {
    pub fn for_env(env: &EnvSpec) -> Self {
        Self {
            episode: EpisodeConfig::for_env(env),
            sampler: SamplerConfig::for_env(env),
        }
    }

    pub fn validate(&self, env: &EnvSpec) -> Result<()> {
        self.sampler.validate(env.task.control_dim())?;
        self.episode.validate(self.sampler.horizon_steps)
    }
}

/// Controller state carried across planning cycles.
#[derive(Clone, Debug)]
pub struct Controller<'a> {
    pub kind: ControllerKind,
    pub env: &'a EnvSpec,
    pub settings: &'a Settings,
    pub seed: u64,
    /// Parameter set of the current cycle: transported particles for SV-DRO,
    /// fresh prior draws for the ensemble baselines, the prior mean for
    /// nominal MPC.
    pub particles: ParticleSet,
    pub warm_start: Vec<ControlInput>,
}

impl<'a> Controller<'a> {
    pub fn new(kind: ControllerKind, env: &'a EnvSpec, settings: &'a Settings, seed: u64) -> Result<Self> {
        kind.validate()?;
        env.validate()?;
        settings.validate(env)?;
        let particles = match kind {
            ControllerKind::Svdro { .. } => ParticleSet::sample(
                &env.prior,
                env.particle_count,
                &mut stream(seed, &[domain::PARTICLES]),
            )?,
            _ => ParticleSet::new(vec![env.prior.mean()], env.prior.clone())?,
        };
        Ok(Self {
            kind,
            env,
            settings,
            seed,
            particles,
            warm_start: Vec::new(),
        })
    }

    fn refresh_parameters(&mut self, cycle: usize) -> Result<()> {
        if matches!(self.kind, ControllerKind::Emppi | ControllerKind::SoftDro { .. }) {
            let mut rng = stream(self.seed, &[domain::RESAMPLE, cycle as u64]);
            self.particles = ParticleSet::sample(&self.env.prior, self.env.particle_count, &mut rng)?;
        }
        Ok(())
    }

    pub fn objective(&self, observed: &BodyState) -> EnsembleObjective<'a> {
        let env = self.env;
        let samples = self.particles.params(&env.nominal_params);
        let (reduction, reference) = match self.kind {
            ControllerKind::Nominal => (Reduction::Nominal, env.prior_mean_params()),
            ControllerKind::Emppi => (Reduction::Mean, env.prior_mean_params()),
            ControllerKind::SoftDro { beta, epsilon } => {
                (Reduction::SoftDro { beta, epsilon }, env.prior_mean_params())
            }
            ControllerKind::Svdro { gamma, .. } => (
                Reduction::Svdro { gamma },
                env.params_from(&self.particles.mean()),
            ),
        };
        EnsembleObjective {
            env,
            initial: observed.clone(),
            samples,
            reference,
            reduction,
        }
    }

    /// Plans from `observed`, refreshing the parameter set first when the
    /// controller resamples every cycle.
    pub fn plan(&mut self, observed: &BodyState, cycle: usize, pool: &WorkPool) -> Result<PlanResult> {
        self.refresh_parameters(cycle)?;
        let objective = self.objective(observed);
        let mut rng = stream(self.seed, &[domain::PLANNER, cycle as u64]);
        plan(
            &objective,
            &self.env.control_bounds,
            &self.warm_start,
            &self.settings.sampler,
            &mut rng,
            pool,
        )
    }

    /// Shifts the plan by `executed` steps for the next warm start.
    pub fn advance(&mut self, plan: &PlanResult, executed: usize) {
        self.warm_start = if self.settings.sampler.warm_start_shift {
            plan.controls.iter().skip(executed).cloned().collect()
        } else {
            plan.controls.clone()
        };
    }

    /// SVGD transport toward the task-aware posterior of the frozen plan.
    /// Returns the largest normalized particle displacement.
    pub fn transport(&mut self, observed: &BodyState, controls: &[ControlInput], pool: &WorkPool) -> Result<f64> {
        let ControllerKind::Svdro { alpha, kernel, .. } = self.kind else {
            return Ok(0.0);
        };
        let ep = &self.settings.episode;
        let before = self.particles.clone();
        for _ in 0..ep.svgd_iterations {
            let model = PosteriorModel::new(
                self.env,
                observed.clone(),
                controls.to_vec(),
                &self.particles,
                ep.posterior_temperature,
                ep.likelihood_sign,
            )?;
            let kernel = if ep.median_bandwidth {
                median_bandwidth(&self.particles.normalized())
                    .map_or(kernel, |h| kernel.with_bandwidth(h))
            } else {
                kernel
            };
            self.particles = svgd_step(&self.particles, &model, &kernel, alpha, pool)?.particles;
        }
        Ok(self.particles.displacement(&before))
    }
}

/// Outcome at one success threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdOutcome {
    /// m
    pub threshold: f64,
    pub success: bool,
    /// s; first time the object came within the threshold and stayed for
    /// the dwell time (or until the episode ended).
    pub completion_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleRecord {
    pub cycle: usize,
    /// First control step of the cycle.
    pub step: usize,
    pub objective: f64,
    pub best_trace: Vec<f64>,
    /// Parameter set used for planning this cycle, after transport for
    /// SV-DRO.
    pub particles: Vec<Vec<f64>>,
    pub mean_abs_gap: f64,
    pub displacement: f64,
    /// Executed controls.
    pub controls: Vec<Vec<f64>>,
    /// Goal distance after each executed step.
    pub distances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub env: String,
    pub controller: ControllerKind,
    pub seed: u64,
    pub true_params: PhysParams,
    pub initial_state: BodyState,
    pub initial_distance: f64,
    pub cycles: Vec<CycleRecord>,
    pub outcomes: Vec<ThresholdOutcome>,
    pub final_distance: f64,
    /// rad, wrapped.
    pub final_heading_error: f64,
    pub steps: usize,
    pub failure: Option<String>,
}

impl TrialRecord {
    pub fn outcome(&self, threshold: f64) -> Option<&ThresholdOutcome> {
        self.outcomes.iter().find(|o| o.threshold == threshold)
    }

    /// Goal distance at every step, starting with the initial state.
    pub fn distance_series(&self) -> Vec<f64> {
        std::iter::once(self.initial_distance)
            .chain(self.cycles.iter().flat_map(|c| c.distances.iter().copied()))
            .collect()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.cycles.last().map(|c| c.objective)
    }
}

/// First index from which `distances` stays within `threshold` for
/// `dwell` steps, or to the end of the series.
pub fn completion_index(distances: &[f64], threshold: f64, dwell: usize) -> Option<usize> {
    let mut run_start = None;
    for (k, d) in distances.iter().enumerate() {
        if *d <= threshold {
            let s = *run_start.get_or_insert(k);
            if k - s >= dwell {
                return Some(s);
            }
        } else {
            run_start = None;
        }
    }
    run_start
}

fn heading_error(state: &BodyState, env: &EnvSpec) -> f64 {
    let o = env.task.object_index();
    let h = match env.task {
        crate::env::TaskSpec::Tray(_) => state.bodies[o].pose.heading - state.bodies[0].pose.heading,
        crate::env::TaskSpec::PushT(_) => state.bodies[o].pose.heading,
    };
    wrap_angle(h - env.goal.heading)
}

/// Runs the receding-horizon loop against a plant with hidden parameters.
///
/// Each cycle observes the plant (with position noise), plans on the
/// surrogate, executes the first H controls on the plant and then, for
/// SV-DRO, transports the particles toward the posterior of the plan just
/// executed. Planning failures end the trial as a non-success.
pub fn run_episode(
    controller: ControllerKind,
    env: &EnvSpec,
    true_params: &PhysParams,
    seed: u64,
    settings: &Settings,
    pool: &WorkPool,
) -> Result<TrialRecord> {
    let mut ctl = Controller::new(controller, env, settings, seed)?;
    if !env.prior.contains(&env.prior.extract(true_params)) {
        return Err(config_err("true parameters lie outside the prior box"));
    }
    let ep = &settings.episode;
    let dt = env.integrator.dt;
    let mut state = sample_initial_state(env, &mut stream(seed, &[domain::INIT_STATE]));
    let mut obs_rng = stream(seed, &[domain::OBSERVATION]);
    let initial_state = state.clone();
    let initial_distance = goal_distance(&state, env);
    let mut cycles = Vec::new();
    let mut t = 0;
    let mut failure = None;

    while t < ep.total_steps {
        let cycle = cycles.len();
        let observed = if ep.observation_noise {
            observe(&state, env.observation_noise, &mut obs_rng)
        } else {
            state.clone()
        };
        let plan = match ctl.plan(&observed, cycle, pool) {
            Ok(p) => p,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        let n = ep.execution_window.min(ep.total_steps - t);
        let mut distances = Vec::with_capacity(n);
        let mut executed = Vec::with_capacity(n);
        let mut blew_up = false;
        for u in plan.controls.iter().take(n) {
            match step(&state, u, true_params, env) {
                Ok((next, _)) => state = next,
                Err(e) => {
                    failure = Some(match e {
                        Error::IntegrationBlowup { detail, .. } => Error::IntegrationBlowup {
                            step: t + executed.len(),
                            detail,
                        }
                        .to_string(),
                        other => other.to_string(),
                    });
                    blew_up = true;
                    break;
                }
            }
            executed.push(u.0.clone());
            distances.push(goal_distance(&state, env));
        }
        let displacement = if blew_up {
            0.0
        } else {
            match ctl.transport(&observed, &plan.controls, pool) {
                Ok(d) => d,
                Err(e) => {
                    failure = Some(e.to_string());
                    0.0
                }
            }
        };
        ctl.advance(&plan, n);
        let mean_abs_gap = if plan.gaps.is_empty() {
            0.0
        } else {
            plan.gaps.iter().map(|g| g.abs()).sum::<f64>() / plan.gaps.len() as f64
        };
        cycles.push(CycleRecord {
            cycle,
            step: t,
            objective: plan.objective,
            best_trace: plan.best_trace,
            particles: ctl.particles.particles.clone(),
            mean_abs_gap,
            displacement,
            controls: executed.clone(),
            distances,
        });
        t += executed.len();
        if failure.is_some() {
            break;
        }
    }

    let final_distance = goal_distance(&state, env);
    let mut series = vec![initial_distance];
    series.extend(cycles.iter().flat_map(|c| c.distances.iter().copied()));
    let outcomes = ep
        .thresholds
        .iter()
        .map(|&thr| {
            let ok = failure.is_none() && final_distance <= thr;
            ThresholdOutcome {
                threshold: thr,
                success: ok,
                completion_time: if ok {
                    completion_index(&series, thr, ep.dwell_steps).map(|k| k as f64 * dt)
                } else {
                    None
                },
            }
        })
        .collect();
    Ok(TrialRecord {
        env: env.name.clone(),
        controller,
        seed,
        true_params: *true_params,
        initial_state,
        initial_distance,
        cycles,
        outcomes,
        final_distance,
        final_heading_error: heading_error(&state, env),
        steps: t,
        failure,
    })
}

/// Draws θ* for a trial from the prior; shared by every controller.
pub fn draw_true_params(env: &EnvSpec, seed: u64) -> PhysParams {
    let mut rng = stream(seed, &[domain::TRUE_PARAMS]);
    crate::params::sample_prior(&env.prior, &env.nominal_params, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softdro_limits() {
        let costs = [1.0f64, 2.0, 4.0];
        let big = softdro_value(&costs, 1e6, 0.1).unwrap() - 1e6 * 0.1;
        assert!((big - mean_cost(&costs)).abs() < 1e-3);
        let small = softdro_value(&costs, 0.1, 0.1).unwrap() - 0.01;
        assert!((small - 4.0).abs() < 1e-3 * 3.0 + 0.1 * 3f64.ln());
    }

    #[test]
    fn softdro_hand_case() {
        let costs = [0.5f64, 1.5, 3.0];
        let (b, e) = (2.0f64, 0.3);
        let direct = b * e + b * ((costs.iter().map(|c| (c / b).exp()).sum::<f64>()) / 3.0).ln();
        assert!((softdro_value(&costs, b, e).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn completion_needs_dwell() {
        let d = [0.2, 0.05, 0.2, 0.05, 0.05, 0.05, 0.2];
        assert_eq!(completion_index(&d, 0.1, 2), Some(3));
        assert_eq!(completion_index(&d, 0.1, 3), None);
        assert_eq!(completion_index(&[0.2, 0.05], 0.1, 5), Some(1));
        assert_eq!(completion_index(&[0.2], 0.1, 0), None);
    }

    #[test]
    fn svdro_reductions() {
        let costs = [1.0, 3.0, 8.0];
        assert_eq!(svdro_value(2.0, &costs, 0.0), 2.0);
        assert!((svdro_value(2.0, &costs, 1.0) - 4.0).abs() < 1e-15);
    }
}
