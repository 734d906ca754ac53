//! Parameterized planar rigid-body dynamics with soft contact.
//!
//! Bodies are integrated about their centers of mass with semi-implicit
//! Euler. Each contact evaluates the smooth contact law at a velocity
//! predicted with that contact's effective mass (damping and friction are
//! treated implicitly along the contact), which keeps the stiff springs
//! and steep friction regularization stable at the fixed substep.

use serde::{Deserialize, Serialize};

use crate::contact::{
    implicit_slip, soft_contact_impulse, spring_and_activation, support_friction_impulse,
    ContactConfig, ContactImpulse,
};
use crate::env::{EnvSpec, PushTSpec, TaskSpec, TraySpec};
use crate::error::{config_err, Error, Result};
use crate::geometry::{
    add, cross, dot, norm, perp, rotate, scale, sub, Pose, SdfSample, Vec2,
};
use crate::params::PhysParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Twist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Body {
    pub pose: Pose,
    pub twist: Twist,
}

impl Body {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            twist: Twist::default(),
        }
    }

    fn is_finite(&self) -> bool {
        [
            self.pose.x,
            self.pose.y,
            self.pose.heading,
            self.twist.vx,
            self.twist.vy,
            self.twist.omega,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Poses and twists of every body of a task, in the task's body order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BodyState {
    pub bodies: Vec<Body>,
}

impl BodyState {
    pub fn is_finite(&self) -> bool {
        self.bodies.iter().all(Body::is_finite)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlInput(pub Vec<f64>);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Control step, s.
    pub dt: f64,
    pub substeps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.025,
            substeps: 4,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(config_err("integrator dt must be positive"));
        }
        if self.substeps == 0 {
            return Err(config_err("integrator needs at least one substep"));
        }
        Ok(())
    }

    /// Number of whole steps in `duration`, if it is an integer multiple.
    pub fn steps_in(&self, duration: f64) -> Option<usize> {
        let n = duration / self.dt;
        let r = n.round();
        ((n - r).abs() < 1e-9 * n.max(1.0)).then_some(r as usize)
    }
}

/// States, controls and per-step contact impulses over a horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `controls.len() + 1` states.
    pub states: Vec<BodyState>,
    pub controls: Vec<ControlInput>,
    /// Per-step impulses on the task's contact channels.
    pub impulses: Vec<Vec<ContactImpulse>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn final_state(&self) -> &BodyState {
        self.states.last().expect("trajectory holds its initial state")
    }
}

const MAX_BODIES: usize = 3;

/// Center-of-mass representation used inside a step.
#[derive(Clone, Copy, Default)]
struct Dyn {
    com: Vec2,
    heading: f64,
    vel: Vec2,
    omega: f64,
    inv_mass: f64,
    inv_inertia: f64,
    offset: Vec2,
    impulse: Vec2,
    angular_impulse: f64,
}

impl Dyn {
    fn from_body(body: &Body, mass: f64, inertia: f64, offset: Vec2, rotates: bool) -> Self {
        let r = rotate(offset, body.pose.heading);
        let omega = if rotates { body.twist.omega } else { 0.0 };
        Self {
            com: add(body.pose.position(), r),
            heading: body.pose.heading,
            vel: add([body.twist.vx, body.twist.vy], scale(perp(r), omega)),
            omega,
            inv_mass: 1.0 / mass,
            inv_inertia: if rotates { 1.0 / inertia } else { 0.0 },
            offset,
            impulse: [0.0; 2],
            angular_impulse: 0.0,
        }
    }

    fn to_body(&self) -> Body {
        let r = rotate(self.offset, self.heading);
        let p = sub(self.com, r);
        let v = sub(self.vel, scale(perp(r), self.omega));
        Body {
            pose: Pose::new(p[0], p[1], self.heading),
            twist: Twist {
                vx: v[0],
                vy: v[1],
                omega: self.omega,
            },
        }
    }

    fn frame_pose(&self) -> Pose {
        let p = sub(self.com, rotate(self.offset, self.heading));
        Pose::new(p[0], p[1], self.heading)
    }

    /// Linear velocity including impulses applied so far this substep, so
    /// later contacts in the same substep see earlier ones.
    fn current_vel(&self) -> Vec2 {
        add(self.vel, scale(self.impulse, self.inv_mass))
    }

    fn current_omega(&self) -> f64 {
        self.omega + self.angular_impulse * self.inv_inertia
    }

    fn point_velocity(&self, point: Vec2) -> Vec2 {
        add(self.current_vel(), scale(perp(sub(point, self.com)), self.current_omega()))
    }

    fn inv_mass_along(&self, point: Vec2, dir: Vec2) -> f64 {
        let rn = cross(sub(point, self.com), dir);
        self.inv_mass + self.inv_inertia * rn * rn
    }

    fn push(&mut self, point: Vec2, j: Vec2) {
        self.impulse = add(self.impulse, j);
        self.angular_impulse += cross(sub(point, self.com), j);
    }

    fn integrate(&mut self, h: f64) {
        self.vel = add(self.vel, scale(self.impulse, self.inv_mass));
        self.omega += self.angular_impulse * self.inv_inertia;
        self.com = add(self.com, scale(self.vel, h));
        self.heading += h * self.omega;
        self.impulse = [0.0; 2];
        self.angular_impulse = 0.0;
    }
}

struct Scene {
    bodies: [Dyn; MAX_BODIES],
    n: usize,
    h: f64,
}

/// Second body of a contact pair: another body or the static world.
#[derive(Clone, Copy)]
enum Other {
    Body(usize),
    World,
}

impl Scene {
    fn rel_velocity(&self, a: usize, b: Other, point: Vec2) -> Vec2 {
        let va = self.bodies[a].point_velocity(point);
        match b {
            Other::Body(j) => sub(va, self.bodies[j].point_velocity(point)),
            Other::World => va,
        }
    }

    fn inv_mass_along(&self, a: usize, b: Other, point: Vec2, dir: Vec2) -> f64 {
        let wa = self.bodies[a].inv_mass_along(point, dir);
        match b {
            Other::Body(j) => wa + self.bodies[j].inv_mass_along(point, dir),
            Other::World => wa,
        }
    }

    fn apply(&mut self, a: usize, b: Other, point: Vec2, j: Vec2) {
        self.bodies[a].push(point, j);
        if let Other::Body(k) = b {
            self.bodies[k].push(point, scale(j, -1.0));
        }
    }

    /// Gap contact between body `a` and `b` at `point` with unit normal
    /// `normal` pointing from `b` toward `a`. Returns the applied impulse.
    #[allow(clippy::too_many_arguments)]
    fn gap_contact(
        &mut self,
        a: usize,
        b: Other,
        gap: f64,
        point: Vec2,
        normal: Vec2,
        friction: f64,
        config: &ContactConfig,
    ) -> Option<ContactImpulse> {
        if gap > config.cutoff_gap() {
            return None;
        }
        let h = self.h;
        let tangent = perp(normal);
        let v = self.rel_velocity(a, b, point);
        let (vn, vt) = (dot(v, normal), dot(v, tangent));
        let wn = self.inv_mass_along(a, b, point, normal);
        let wt = self.inv_mass_along(a, b, point, tangent);
        let (spring, act) = spring_and_activation(gap, config);
        let vn_pred =
            (vn + h * wn * spring) / (1.0 + h * wn * config.restitution_damping * act);
        let mu = PhysParams {
            mass: 1.0,
            inertia: 1.0,
            com_offset: [0.0; 2],
            friction,
        };
        let pre = soft_contact_impulse(gap, [vn_pred, 0.0], &mu, config, h);
        let load = pre.normal / h;
        let vt_pred = implicit_slip(vt, h * wt * friction * load, config.tangential_smoothness);
        let mut imp = soft_contact_impulse(gap, [vn_pred, vt_pred], &mu, config, h);
        if imp.normal == 0.0 {
            return None;
        }
        let j = add(scale(normal, imp.normal), scale(tangent, imp.tangential));
        self.apply(a, b, point, j);
        imp.contact_point = point;
        Some(imp)
    }

    /// Distributed sliding friction of body `a` on a supporting surface
    /// (`b`), applied at `a`'s center of mass, plus the torsional part.
    #[allow(clippy::too_many_arguments)]
    fn support_contact(
        &mut self,
        a: usize,
        b: Other,
        load: f64,
        friction: f64,
        torsion_radius: f64,
        config: &ContactConfig,
    ) -> ContactImpulse {
        let h = self.h;
        let s = config.tangential_smoothness;
        let point = self.bodies[a].com;
        let slip = self.rel_velocity(a, b, point);
        let w = self.bodies[a].inv_mass
            + match b {
                Other::Body(j) => {
                    let r = norm(sub(point, self.bodies[j].com));
                    self.bodies[j].inv_mass + self.bodies[j].inv_inertia * r * r
                }
                Other::World => 0.0,
            };
        let r_slip = norm(slip);
        let slip_pred = if r_slip > 0.0 {
            scale(slip, implicit_slip(r_slip, h * w * friction * load, s) / r_slip)
        } else {
            slip
        };
        let j = support_friction_impulse(slip_pred, load, friction, config, h);
        self.apply(a, b, point, j);

        let spin = self.bodies[a].current_omega()
            - match b {
                Other::Body(k) => self.bodies[k].current_omega(),
                Other::World => 0.0,
            };
        let w_rot = self.bodies[a].inv_inertia
            + match b {
                Other::Body(k) => self.bodies[k].inv_inertia,
                Other::World => 0.0,
            };
        let r = torsion_radius;
        // solved in rim-speed units r·ω so the same implicit rule applies
        let rim = implicit_slip(r * spin, h * w_rot * r * r * friction * load, s);
        let tau = -h * friction * load * r * (s * rim).tanh();
        self.bodies[a].angular_impulse += tau;
        if let Other::Body(k) = b {
            self.bodies[k].angular_impulse -= tau;
        }
        ContactImpulse {
            normal: h * load,
            tangential: norm(j),
            contact_point: point,
            active_gap: 0.0,
        }
    }

    /// Soft walls of the square workspace `[lo, hi]²` against a disc.
    fn disc_walls(
        &mut self,
        a: usize,
        center: Vec2,
        radius: f64,
        bounds: [f64; 2],
        friction: f64,
        config: &ContactConfig,
    ) {
        for (axis, sign) in [(0usize, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
            let gap = if sign > 0.0 {
                center[axis] - bounds[0] - radius
            } else {
                bounds[1] - center[axis] - radius
            };
            let mut normal = [0.0; 2];
            normal[axis] = sign;
            let point = sub(center, scale(normal, radius));
            self.gap_contact(a, Other::World, gap, point, normal, friction, config);
        }
    }

    fn accumulate(acc: &mut ContactImpulse, imp: Option<ContactImpulse>) {
        if let Some(i) = imp {
            if i.normal > acc.normal {
                acc.contact_point = i.contact_point;
            }
            acc.normal += i.normal;
            acc.tangential += i.tangential;
            acc.active_gap = acc.active_gap.min(i.active_gap);
        }
    }
}

/// Advances the task by one control step. Returns the new state and the
/// impulses on the task's contact channels, summed over substeps.
pub fn step(
    state: &BodyState,
    control: &ControlInput,
    params: &PhysParams,
    env: &EnvSpec,
) -> Result<(BodyState, Vec<ContactImpulse>)> {
    let params = params.physical(&env.param_floor);
    let out = match &env.task {
        TaskSpec::PushT(spec) => step_pusht(state, control, &params, env, spec)?,
        TaskSpec::Tray(spec) => step_tray(state, control, &params, env, spec)?,
    };
    if !out.0.is_finite() {
        return Err(Error::IntegrationBlowup {
            step: 0,
            detail: "non-finite body state".into(),
        });
    }
    Ok(out)
}

fn check_dims(state: &BodyState, control: &ControlInput, bodies: usize, controls: usize) -> Result<()> {
    if state.bodies.len() != bodies || control.0.len() != controls {
        return Err(config_err(format!(
            "expected {bodies} bodies and {controls} controls, got {} and {}",
            state.bodies.len(),
            control.0.len()
        )));
    }
    Ok(())
}

fn empty_channel() -> ContactImpulse {
    ContactImpulse {
        active_gap: f64::INFINITY,
        ..Default::default()
    }
}

fn step_pusht(
    state: &BodyState,
    control: &ControlInput,
    params: &PhysParams,
    env: &EnvSpec,
    spec: &PushTSpec,
) -> Result<(BodyState, Vec<ContactImpulse>)> {
    check_dims(state, control, 3, 4)?;
    let cfg = &env.contact;
    let verts = spec.block.vertices();
    let gyration = spec.block.gyration_radius();
    let h = env.integrator.dt / env.integrator.substeps as f64;
    let r_e = spec.effector_radius;
    let mut scene = Scene {
        bodies: [Dyn::default(); MAX_BODIES],
        n: 3,
        h,
    };
    for i in 0..2 {
        scene.bodies[i] = Dyn::from_body(&state.bodies[i], spec.effector_mass, 1.0, [0.0; 2], false);
    }
    scene.bodies[2] = Dyn::from_body(
        &state.bodies[2],
        params.mass,
        params.inertia,
        params.com_offset,
        true,
    );
    let mut channels = [empty_channel(), empty_channel()];
    let u = &control.0;
    let bounds = env.spatial_bounds;
    for _ in 0..env.integrator.substeps {
        for i in 0..2 {
            let e = &mut scene.bodies[i];
            e.impulse = add(e.impulse, scale([u[2 * i], u[2 * i + 1]], h));
            let damp = spec.effector_drag * h / (1.0 + spec.effector_drag * h * e.inv_mass);
            e.impulse = sub(e.impulse, scale(e.current_vel(), damp));
        }
        let load = params.mass * spec.support_accel;
        scene.support_contact(2, Other::World, load, params.friction, gyration, cfg);

        let block_pose = scene.bodies[2].frame_pose();
        for i in 0..2 {
            let c = scene.bodies[i].com;
            let sdf: SdfSample = crate::geometry::polygon_sdf(&verts, block_pose.to_local(c));
            let gap = sdf.distance - r_e;
            if gap <= cfg.cutoff_gap() {
                let normal = rotate(sdf.normal, block_pose.heading);
                let point = block_pose.to_world(sdf.closest);
                let imp = scene.gap_contact(
                    i,
                    Other::Body(2),
                    gap,
                    point,
                    normal,
                    spec.pusher_friction,
                    cfg,
                );
                Scene::accumulate(&mut channels[i], imp);
            }
        }
        // effector-effector
        let d = sub(scene.bodies[0].com, scene.bodies[1].com);
        let dist = norm(d);
        let gap = dist - 2.0 * r_e;
        if gap <= cfg.cutoff_gap() && dist > 1e-12 {
            let n = scale(d, 1.0 / dist);
            let point = add(scene.bodies[1].com, scale(n, r_e));
            scene.gap_contact(0, Other::Body(1), gap, point, n, spec.pusher_friction, cfg);
        }
        for i in 0..2 {
            let c = scene.bodies[i].com;
            scene.disc_walls(i, c, r_e, bounds, spec.pusher_friction, cfg);
        }
        for v in &verts {
            let p = block_pose.to_world(*v);
            for (axis, sign) in [(0usize, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
                let gap = if sign > 0.0 {
                    p[axis] - bounds[0]
                } else {
                    bounds[1] - p[axis]
                };
                let mut normal = [0.0; 2];
                normal[axis] = sign;
                scene.gap_contact(2, Other::World, gap, p, normal, spec.pusher_friction, cfg);
            }
        }
        for b in scene.bodies[..scene.n].iter_mut() {
            b.integrate(h);
        }
    }
    let bodies = scene.bodies[..scene.n].iter().map(Dyn::to_body).collect();
    Ok((BodyState { bodies }, finish_channels(&channels)))
}

fn finish_channels(channels: &[ContactImpulse]) -> Vec<ContactImpulse> {
    channels
        .iter()
        .map(|c| {
            let mut c = *c;
            if c.normal == 0.0 {
                c.active_gap = c.active_gap.min(f64::MAX);
            }
            c
        })
        .collect()
}

fn step_tray(
    state: &BodyState,
    control: &ControlInput,
    params: &PhysParams,
    env: &EnvSpec,
    spec: &TraySpec,
) -> Result<(BodyState, Vec<ContactImpulse>)> {
    check_dims(state, control, 2, 3)?;
    let cfg = &env.contact;
    let h = env.integrator.dt / env.integrator.substeps as f64;
    let radius = spec.object_radius;
    let he = [env.spatial_bounds[1]; 2];
    let mut scene = Scene {
        bodies: [Dyn::default(); MAX_BODIES],
        n: 2,
        h,
    };
    scene.bodies[0] = Dyn::from_body(&state.bodies[0], spec.tray_mass, spec.tray_inertia, [0.0; 2], true);
    scene.bodies[1] = Dyn::from_body(
        &state.bodies[1],
        params.mass,
        params.inertia,
        params.com_offset,
        true,
    );
    let mut walls = empty_channel();
    let mut support = empty_channel();
    let u = &control.0;
    let load = params.mass * spec.support_accel;
    let torsion = 2.0 / 3.0 * radius;
    for _ in 0..env.integrator.substeps {
        let tray = &mut scene.bodies[0];
        tray.impulse = add(tray.impulse, scale([u[0], u[1]], h));
        tray.angular_impulse += u[2] * h;

        let s = scene.support_contact(1, Other::Body(0), load, params.friction, torsion, cfg);
        support.normal += s.normal;
        support.tangential += s.tangential;
        support.contact_point = s.contact_point;
        support.active_gap = 0.0;

        let tray_pose = scene.bodies[0].frame_pose();
        let center = scene.bodies[1].frame_pose().position();
        let local = tray_pose.to_local(center);
        for (axis, sign) in [(0usize, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)] {
            // wall at local coordinate -sign*he[axis]; normal points inward
            let gap = he[axis] + sign * local[axis] - radius;
            if gap > cfg.cutoff_gap() {
                continue;
            }
            let mut n_local = [0.0; 2];
            n_local[axis] = sign;
            let normal = rotate(n_local, tray_pose.heading);
            let point = sub(center, scale(normal, radius));
            let imp = scene.gap_contact(1, Other::Body(0), gap, point, normal, params.friction, cfg);
            Scene::accumulate(&mut walls, imp);
        }
        for b in scene.bodies[..scene.n].iter_mut() {
            b.integrate(h);
        }
    }
    let bodies = scene.bodies[..scene.n].iter().map(Dyn::to_body).collect();
    Ok((BodyState { bodies }, finish_channels(&[walls, support])))
}

/// Rolls `controls` forward from `initial` under `params`.
pub fn rollout(
    initial: &BodyState,
    controls: &[ControlInput],
    params: &PhysParams,
    env: &EnvSpec,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    let mut impulses = Vec::with_capacity(controls.len());
    states.push(initial.clone());
    for (k, u) in controls.iter().enumerate() {
        let (next, imp) = step(&states[k], u, params, env).map_err(|e| match e {
            Error::IntegrationBlowup { detail, .. } => Error::IntegrationBlowup { step: k, detail },
            other => other,
        })?;
        states.push(next);
        impulses.push(imp);
    }
    Ok(Trajectory {
        states,
        controls: controls.to_vec(),
        impulses,
    })
}
