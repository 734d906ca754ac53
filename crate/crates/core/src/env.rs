//! Benchmark tasks: bimanual Push-T and in-hand tray positioning.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::contact::{ContactConfig, ContactImpulse};
use crate::dynamics::{step, Body, BodyState, ControlInput, IntegratorConfig, Trajectory};
use crate::error::{config_err, Error, Result};
use crate::geometry::{
    polygon_centroid, polygon_gyration_sq, polygon_sdf, rotate, sub, Geometry, Pose, Vec2,
};
use crate::params::{ParamAxis, ParamFloor, ParamPrior, PhysParams, PriorDim};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TBlockDims {
    pub height: f64,
    pub width: f64,
    pub thickness: f64,
}

impl TBlockDims {
    /// Counter-clockwise vertices about the area centroid.
    pub fn vertices(&self) -> [Vec2; 8] {
        let (h, w, t) = (self.height, self.width, self.thickness);
        let mut v = [
            [-t / 2.0, 0.0],
            [t / 2.0, 0.0],
            [t / 2.0, h - t],
            [w / 2.0, h - t],
            [w / 2.0, h],
            [-w / 2.0, h],
            [-w / 2.0, h - t],
            [-t / 2.0, h - t],
        ];
        let c = polygon_centroid(&v);
        for p in v.iter_mut() {
            *p = sub(*p, c);
        }
        v
    }

    pub fn gyration_radius(&self) -> f64 {
        polygon_gyration_sq(&self.vertices()).sqrt()
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::Polygon {
            vertices: self.vertices().to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.height, self.width, self.thickness]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && self.thickness < self.height
            && self.thickness < self.width;
        if !ok {
            return Err(config_err("T-block needs 0 < thickness < height, width"));
        }
        self.geometry().validate()
    }
}

/// Two force-actuated disc effectors pushing a T-block on a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushTSpec {
    pub block: TBlockDims,
    /// m
    pub effector_radius: f64,
    /// kg
    pub effector_mass: f64,
    /// Viscous drag on each effector, N·s/m.
    pub effector_drag: f64,
    pub effector_home: [Vec2; 2],
    /// Effector–block and wall friction coefficient.
    pub pusher_friction: f64,
    /// Normal-load acceleration for block–table friction, m/s².
    pub support_accel: f64,
}

/// A force/torque actuated tray carrying a sliding disc between four walls
/// placed at the spatial bounds, in the tray frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraySpec {
    /// m
    pub object_radius: f64,
    /// kg
    pub tray_mass: f64,
    /// kg·m²
    pub tray_inertia: f64,
    /// Normal-load acceleration for object–tray friction, m/s².
    pub support_accel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    PushT(PushTSpec),
    Tray(TraySpec),
}

impl TaskSpec {
    pub fn body_count(&self) -> usize {
        match self {
            TaskSpec::PushT(_) => 3,
            TaskSpec::Tray(_) => 2,
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            TaskSpec::PushT(_) => 4,
            TaskSpec::Tray(_) => 3,
        }
    }

    /// Length of the cost-state vector weighted by Q and Qf.
    pub fn cost_state_dim(&self) -> usize {
        match self {
            TaskSpec::PushT(_) => 6,
            TaskSpec::Tray(_) => 12,
        }
    }

    pub fn contact_channels(&self) -> usize {
        2
    }

    /// Index of the body scored against the goal.
    pub fn object_index(&self) -> usize {
        match self {
            TaskSpec::PushT(_) => 2,
            TaskSpec::Tray(_) => 1,
        }
    }
}

/// Uniform initial object pose around the goal, everything else at rest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSampler {
    /// m
    pub position_half_range: Vec2,
    /// rad
    pub heading_half_range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ControlBounds {
    pub fn clamp(&self, u: &mut [f64]) {
        for ((v, lo), hi) in u.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.lower.len()
            && u
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    pub fn range(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }
}

/// Diagonal cost weights.
///
/// `r` may be shorter than the control vector when every actuator group
/// shares one block of weights (Push-T lists one (x, y) pair reused for
/// both effectors); it is tiled across the control vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub q: Vec<f64>,
    pub qf: Vec<f64>,
    pub r: Vec<f64>,
    pub n_c: Vec<f64>,
}

impl CostWeights {
    pub fn zeros_like(&self) -> Self {
        Self {
            q: vec![0.0; self.q.len()],
            qf: vec![0.0; self.qf.len()],
            r: vec![0.0; self.r.len()],
            n_c: vec![0.0; self.n_c.len()],
        }
    }

    fn validate(&self, task: &TaskSpec) -> Result<()> {
        let all = self.q.iter().chain(&self.qf).chain(&self.r).chain(&self.n_c);
        if all.clone().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(config_err("cost weights must be finite and nonnegative"));
        }
        let sd = task.cost_state_dim();
        if self.q.len() != sd || self.qf.len() != sd {
            return Err(config_err(format!("Q and Qf need {sd} entries")));
        }
        let cd = task.control_dim();
        if self.r.is_empty() || cd % self.r.len() != 0 {
            return Err(config_err(format!(
                "R has {} entries, which does not tile {cd} controls",
                self.r.len()
            )));
        }
        if self.n_c.len() != task.contact_channels() {
            return Err(config_err(format!(
                "N_c needs {} entries",
                task.contact_channels()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub name: String,
    pub task: TaskSpec,
    /// Target object pose; for the tray it is expressed in the tray frame.
    pub goal: Pose,
    pub init: InitSampler,
    /// Square workspace `[lo, hi]²`, m. For the tray these are the walls.
    pub spatial_bounds: [f64; 2],
    pub control_bounds: ControlBounds,
    pub prior: ParamPrior,
    /// Values of the axes the prior leaves fixed.
    pub nominal_params: PhysParams,
    pub param_floor: ParamFloor,
    pub weights: CostWeights,
    /// Planning horizon, s.
    pub horizon: f64,
    /// Episode length, s.
    pub total_time: f64,
    /// Controls executed per planning cycle.
    pub execution_window: usize,
    pub particle_count: usize,
    pub svgd_step_size: f64,
    pub kernel_bandwidth: f64,
    /// Std of the Gaussian noise on observed positions, m.
    pub observation_noise: f64,
    /// Time the success predicate must hold to count as completed, s.
    pub dwell_time: f64,
    pub contact: ContactConfig,
    pub integrator: IntegratorConfig,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        self.contact.validate()?;
        self.integrator.validate()?;
        self.prior.validate()?;
        self.weights.validate(&self.task)?;
        let [lo, hi] = self.spatial_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(config_err("spatial bounds must satisfy lo < hi"));
        }
        if !(self.goal.x >= lo && self.goal.x <= hi && self.goal.y >= lo && self.goal.y <= hi) {
            return Err(config_err("goal lies outside the spatial bounds"));
        }
        let cd = self.task.control_dim();
        let cb = &self.control_bounds;
        if cb.lower.len() != cd || cb.upper.len() != cd {
            return Err(config_err(format!("control bounds need {cd} entries")));
        }
        if cb.lower.iter().zip(&cb.upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
            return Err(config_err("control bounds must satisfy lower < upper"));
        }
        let hs = self
            .integrator
            .steps_in(self.horizon)
            .filter(|n| *n > 0)
            .ok_or_else(|| config_err("horizon must be a positive multiple of dt"))?;
        self.integrator
            .steps_in(self.total_time)
            .ok_or_else(|| config_err("total time must be a multiple of dt"))?;
        if self.execution_window == 0 || self.execution_window > hs {
            return Err(config_err(format!(
                "execution window must lie in 1..={hs} steps"
            )));
        }
        if self.particle_count == 0 {
            return Err(config_err("particle count must be at least 1"));
        }
        for (v, what) in [
            (self.svgd_step_size, "svgd step size"),
            (self.kernel_bandwidth, "kernel bandwidth"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(format!("{what} must be positive")));
            }
        }
        for (v, what) in [
            (self.observation_noise, "observation noise"),
            (self.dwell_time, "dwell time"),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(config_err(format!("{what} must be nonnegative")));
            }
        }
        if !self.nominal_params.is_finite()
            || !(self.param_floor.mass > 0.0 && self.param_floor.inertia > 0.0)
        {
            return Err(config_err("nominal parameters and floors must be finite and positive"));
        }
        match &self.task {
            TaskSpec::PushT(p) => {
                p.block.validate()?;
                let pos = [
                    p.effector_radius,
                    p.effector_mass,
                    p.effector_drag,
                    p.support_accel,
                ];
                if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) || p.pusher_friction < 0.0 {
                    return Err(config_err("push-t effector constants must be positive"));
                }
            }
            TaskSpec::Tray(t) => {
                if (lo + hi).abs() > 1e-12 {
                    return Err(config_err("tray walls must be symmetric about the tray center"));
                }
                let pos = [t.object_radius, t.tray_mass, t.tray_inertia, t.support_accel];
                if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(config_err("tray constants must be positive"));
                }
                if t.object_radius >= hi {
                    return Err(config_err("object does not fit inside the tray"));
                }
            }
        }
        Ok(())
    }

    pub fn horizon_steps(&self) -> usize {
        self.integrator.steps_in(self.horizon).unwrap_or(0)
    }

    pub fn total_steps(&self) -> usize {
        self.integrator.steps_in(self.total_time).unwrap_or(0)
    }

    pub fn dwell_steps(&self) -> usize {
        (self.dwell_time / self.integrator.dt).round() as usize
    }

    pub fn prior_mean_params(&self) -> PhysParams {
        self.prior.apply(&self.nominal_params, &self.prior.mean())
    }

    pub fn params_from(&self, theta: &[f64]) -> PhysParams {
        self.prior.apply(&self.nominal_params, theta)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let env: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        env.validate()?;
        Ok(env)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "pusht" | "push-t" | "push_t" => Ok(make_pusht_env()),
            "tray" => Ok(make_tray_env()),
            other => Err(config_err(format!("unknown environment `{other}`"))),
        }
    }
}

pub fn make_pusht_env() -> EnvSpec {
    EnvSpec {
        name: "pusht".into(),
        task: TaskSpec::PushT(PushTSpec {
            block: TBlockDims {
                height: 0.5,
                width: 0.6,
                thickness: 0.2,
            },
            effector_radius: 0.02,
            effector_mass: 0.1,
            effector_drag: 2.0,
            effector_home: [[-0.65, -0.65], [0.65, 0.65]],
            pusher_friction: 0.3,
            support_accel: 0.25,
        }),
        goal: Pose::default(),
        init: InitSampler {
            position_half_range: [0.3, 0.3],
            heading_half_range: PI,
        },
        spatial_bounds: [-0.75, 0.75],
        control_bounds: ControlBounds {
            lower: vec![-1.0; 4],
            upper: vec![1.0; 4],
        },
        prior: ParamPrior {
            dims: vec![
                PriorDim {
                    axis: ParamAxis::Mass,
                    lower: -1e-4,
                    upper: 10.0,
                },
                PriorDim {
                    axis: ParamAxis::Inertia,
                    lower: -1e-4,
                    upper: 10.0,
                },
            ],
        },
        nominal_params: PhysParams {
            mass: 5.0,
            inertia: 5.0,
            com_offset: [0.0; 2],
            friction: 0.5,
        },
        param_floor: ParamFloor {
            mass: 0.05,
            inertia: 0.005,
        },
        weights: CostWeights {
            q: vec![5.0, 5.0, 2.0, 0.0, 0.0, 0.0],
            qf: vec![5.0, 5.0, 2.0, 0.5, 0.5, 0.5],
            r: vec![1e-4, 1e-4],
            n_c: vec![0.1, 0.1],
        },
        horizon: 0.375,
        total_time: 10.0,
        execution_window: 10,
        particle_count: 5,
        svgd_step_size: 1e-4,
        kernel_bandwidth: 0.75,
        observation_noise: 0.001,
        dwell_time: 0.5,
        contact: ContactConfig::default(),
        integrator: IntegratorConfig::default(),
    }
}

pub fn make_tray_env() -> EnvSpec {
    EnvSpec {
        name: "tray".into(),
        task: TaskSpec::Tray(TraySpec {
            object_radius: 0.05,
            tray_mass: 0.01,
            tray_inertia: 1e-2,
            support_accel: 9.81,
        }),
        goal: Pose::default(),
        init: InitSampler {
            position_half_range: [0.06, 0.0],
            heading_half_range: 0.0,
        },
        spatial_bounds: [-0.125, 0.125],
        control_bounds: ControlBounds {
            lower: vec![-5.0, -0.2, -0.5],
            upper: vec![5.0, 0.2, 0.5],
        },
        prior: ParamPrior {
            dims: vec![
                PriorDim {
                    axis: ParamAxis::Mass,
                    lower: 0.05,
                    upper: 1.0,
                },
                PriorDim {
                    axis: ParamAxis::Inertia,
                    lower: -1e-4,
                    upper: 1.0,
                },
                PriorDim {
                    axis: ParamAxis::ComX,
                    lower: -0.012,
                    upper: 0.012,
                },
                PriorDim {
                    axis: ParamAxis::ComY,
                    lower: -0.025,
                    upper: 0.025,
                },
                PriorDim {
                    axis: ParamAxis::Friction,
                    lower: 0.001,
                    upper: 0.01,
                },
            ],
        },
        nominal_params: PhysParams {
            mass: 0.525,
            inertia: 0.5,
            com_offset: [0.0; 2],
            friction: 0.0055,
        },
        param_floor: ParamFloor {
            mass: 0.05,
            inertia: 1e-3,
        },
        weights: CostWeights {
            q: vec![15.0, 0.0, 5.0, 0.01, 0.01, 0.1, 0.0, 0.0, 5.0, 0.01, 0.01, 0.1],
            qf: vec![15.0, 0.0, 5.0, 0.01, 0.01, 0.1, 0.0, 0.0, 5.0, 0.01, 0.01, 0.1],
            r: vec![15.0, 20.0, 20.0],
            n_c: vec![0.001, 0.001],
        },
        horizon: 0.375,
        total_time: 12.5,
        execution_window: 10,
        particle_count: 5,
        svgd_step_size: 1e-4,
        kernel_bandwidth: 0.75,
        observation_noise: 0.01,
        dwell_time: 0.5,
        contact: ContactConfig::default(),
        integrator: IntegratorConfig::default(),
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Object pose relative to the goal frame plus twists, in the layout the
/// Q and Qf weights index.
pub fn cost_state(state: &BodyState, env: &EnvSpec) -> Result<Vec<f64>> {
    if state.bodies.len() != env.task.body_count() {
        return Err(config_err(format!(
            "state has {} bodies, task needs {}",
            state.bodies.len(),
            env.task.body_count()
        )));
    }
    let g = env.goal;
    Ok(match env.task {
        TaskSpec::PushT(_) => {
            let b = &state.bodies[2];
            vec![
                b.pose.x - g.x,
                b.pose.y - g.y,
                wrap_angle(b.pose.heading - g.heading),
                b.twist.vx,
                b.twist.vy,
                b.twist.omega,
            ]
        }
        TaskSpec::Tray(_) => {
            let (t, o) = (&state.bodies[0], &state.bodies[1]);
            let rel = object_in_tray(t, o);
            vec![
                rel.pose.x - g.x,
                rel.pose.y - g.y,
                wrap_angle(rel.pose.heading - g.heading),
                rel.twist.vx,
                rel.twist.vy,
                rel.twist.omega,
                t.pose.x,
                t.pose.y,
                wrap_angle(t.pose.heading),
                t.twist.vx,
                t.twist.vy,
                t.twist.omega,
            ]
        }
    })
}

/// Pose and twist of `object` expressed in the frame of `tray`.
pub fn object_in_tray(tray: &Body, object: &Body) -> Body {
    let p = tray.pose.to_local(object.pose.position());
    let d = sub(object.pose.position(), tray.pose.position());
    let w = tray.twist.omega;
    // velocity of object relative to a point fixed to the tray
    let v_rel = [
        object.twist.vx - tray.twist.vx + w * d[1],
        object.twist.vy - tray.twist.vy - w * d[0],
    ];
    let v = rotate(v_rel, -tray.pose.heading);
    Body {
        pose: Pose::new(p[0], p[1], object.pose.heading - tray.pose.heading),
        twist: crate::dynamics::Twist {
            vx: v[0],
            vy: v[1],
            omega: object.twist.omega - w,
        },
    }
}

/// Signed distances from each Push-T effector surface to the block.
pub fn effector_block_sdf(state: &BodyState, spec: &PushTSpec) -> [f64; 2] {
    let verts = spec.block.vertices();
    let block = state.bodies[2].pose;
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let local = block.to_local(state.bodies[i].pose.position());
        *o = polygon_sdf(&verts, local).distance - spec.effector_radius;
    }
    out
}

fn quad(weights: &[f64], x: &[f64]) -> f64 {
    weights.iter().zip(x).map(|(w, v)| w * v * v).sum()
}

fn control_cost(r: &[f64], u: &[f64]) -> f64 {
    u.iter()
        .enumerate()
        .map(|(i, v)| r[i % r.len()] * v * v)
        .sum()
}

/// ℓ(x, u, c) for one step, including the Push-T effector SDF penalty.
pub fn running_cost(
    state: &BodyState,
    control: &ControlInput,
    impulses: &[ContactImpulse],
    env: &EnvSpec,
) -> Result<f64> {
    running_cost_with(state, control, impulses, env, &env.weights)
}

pub fn running_cost_with(
    state: &BodyState,
    control: &ControlInput,
    impulses: &[ContactImpulse],
    env: &EnvSpec,
    weights: &CostWeights,
) -> Result<f64> {
    let x = cost_state(state, env)?;
    if control.0.len() != env.task.control_dim() || impulses.len() != weights.n_c.len() {
        return Err(config_err(format!(
            "expected {} controls and {} contact channels, got {} and {}",
            env.task.control_dim(),
            weights.n_c.len(),
            control.0.len(),
            impulses.len()
        )));
    }
    let c: Vec<f64> = impulses.iter().map(ContactImpulse::magnitude).collect();
    let mut cost = quad(&weights.q, &x) + control_cost(&weights.r, &control.0) + quad(&weights.n_c, &c);
    if let TaskSpec::PushT(spec) = &env.task {
        let phi = effector_block_sdf(state, spec);
        cost += phi[0] * phi[0] + phi[1] * phi[1];
    }
    Ok(cost)
}

/// m(x) with the terminal weights.
pub fn terminal_cost(state: &BodyState, env: &EnvSpec) -> Result<f64> {
    terminal_cost_with(state, env, &env.weights)
}

pub fn terminal_cost_with(state: &BodyState, env: &EnvSpec, weights: &CostWeights) -> Result<f64> {
    Ok(quad(&weights.qf, &cost_state(state, env)?))
}

/// Σ ℓ over the steps plus the terminal cost of the final state.
pub fn trajectory_cost(traj: &Trajectory, _params: &PhysParams, env: &EnvSpec) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..traj.len() {
        total += running_cost(&traj.states[k], &traj.controls[k], &traj.impulses[k], env)?;
    }
    Ok(total + terminal_cost(traj.final_state(), env)?)
}

/// `trajectory_cost(rollout(..))` without storing the trajectory; the
/// summation order is the same, so the two agree bit for bit.
pub fn rollout_cost(
    initial: &BodyState,
    controls: &[ControlInput],
    params: &PhysParams,
    env: &EnvSpec,
) -> Result<f64> {
    let mut state = initial.clone();
    let mut total = 0.0;
    for (k, u) in controls.iter().enumerate() {
        let (next, imp) = step(&state, u, params, env).map_err(|e| match e {
            Error::IntegrationBlowup { detail, .. } => Error::IntegrationBlowup { step: k, detail },
            other => other,
        })?;
        total += running_cost(&state, u, &imp, env)?;
        state = next;
    }
    Ok(total + terminal_cost(&state, env)?)
}

/// Planar distance between the scored object and its goal.
pub fn goal_distance(state: &BodyState, env: &EnvSpec) -> f64 {
    let p = match env.task {
        TaskSpec::PushT(_) => state.bodies[2].pose.position(),
        TaskSpec::Tray(_) => object_in_tray(&state.bodies[0], &state.bodies[1])
            .pose
            .position(),
    };
    (p[0] - env.goal.x).hypot(p[1] - env.goal.y)
}

/// Closed threshold test on the final object distance.
pub fn success(final_state: &BodyState, env: &EnvSpec, threshold: f64) -> bool {
    goal_distance(final_state, env) <= threshold
}

pub fn sample_initial_state<R: Rng + ?Sized>(env: &EnvSpec, rng: &mut R) -> BodyState {
    let init = &env.init;
    let mut draw = |half: f64| {
        if half > 0.0 {
            rng.random_range(-half..half)
        } else {
            0.0
        }
    };
    let dx = draw(init.position_half_range[0]);
    let dy = draw(init.position_half_range[1]);
    let dh = draw(init.heading_half_range);
    let object = Pose::new(env.goal.x + dx, env.goal.y + dy, env.goal.heading + dh);
    let bodies = match &env.task {
        TaskSpec::PushT(spec) => vec![
            Body::at_rest(Pose::new(spec.effector_home[0][0], spec.effector_home[0][1], 0.0)),
            Body::at_rest(Pose::new(spec.effector_home[1][0], spec.effector_home[1][1], 0.0)),
            Body::at_rest(object),
        ],
        TaskSpec::Tray(_) => vec![Body::at_rest(Pose::default()), Body::at_rest(object)],
    };
    BodyState { bodies }
}

/// Plant-state read with zero-mean Gaussian noise on every body position.
pub fn observe<R: Rng + ?Sized>(state: &BodyState, std: f64, rng: &mut R) -> BodyState {
    if std == 0.0 {
        return state.clone();
    }
    let normal = Normal::new(0.0, std).expect("validated noise std");
    let mut out = state.clone();
    for b in out.bodies.iter_mut() {
        b.pose.x += normal.sample(rng);
        b.pose.y += normal.sample(rng);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_goal(env: &EnvSpec) -> BodyState {
        let mut s = sample_initial_state(env, &mut crate::rng::stream(0, &[]));
        let o = env.task.object_index();
        s.bodies[o] = Body::at_rest(env.goal);
        s
    }

    #[test]
    fn table_constants() {
        let tray = make_tray_env();
        tray.validate().unwrap();
        assert_eq!(tray.control_bounds.lower, vec![-5.0, -0.2, -0.5]);
        assert_eq!(tray.control_bounds.upper, vec![5.0, 0.2, 0.5]);
        assert_eq!(tray.weights.r, vec![15.0, 20.0, 20.0]);
        let pusht = make_pusht_env();
        pusht.validate().unwrap();
        assert_eq!(pusht.weights.r, vec![1e-4, 1e-4]);
        let TaskSpec::PushT(p) = &pusht.task else { unreachable!() };
        assert_eq!((p.block.height, p.block.width, p.block.thickness), (0.5, 0.6, 0.2));
        assert_eq!(pusht.horizon_steps(), 15);
        assert_eq!(tray.total_steps(), 500);
    }

    #[test]
    fn tray_offset_cost() {
        let env = make_tray_env();
        let mut s = at_goal(&env);
        s.bodies[1].pose.x = 0.1;
        let zero_c = vec![ContactImpulse::default(); 2];
        let c = running_cost(&s, &ControlInput(vec![0.0; 3]), &zero_c, &env).unwrap();
        assert!((c - 0.15).abs() < 1e-12);
    }

    #[test]
    fn pusht_terminal_at_goal_is_zero() {
        let env = make_pusht_env();
        assert_eq!(terminal_cost(&at_goal(&env), &env).unwrap(), 0.0);
    }

    #[test]
    fn closed_threshold() {
        let env = make_tray_env();
        let mut s = at_goal(&env);
        s.bodies[1].pose.x = 0.009;
        assert!(success(&s, &env, 0.01));
        s.bodies[1].pose.x = 0.05;
        assert!(!success(&s, &env, 0.01));
        assert!(success(&s, &env, 0.10));
    }

    #[test]
    fn toml_roundtrip() {
        for env in [make_pusht_env(), make_tray_env()] {
            let text = env.to_toml().unwrap();
            assert_eq!(EnvSpec::from_toml(&text).unwrap(), env);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = make_tray_env().to_toml().unwrap();
        text.insert_str(0, "bogus = 1\n");
        assert!(EnvSpec::from_toml(&text).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
