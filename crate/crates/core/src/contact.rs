//! Smooth spring-like contact.
//!
//! The normal force is a softplus penalty on the signed gap, tapered to
//! exactly zero with a C² smoothstep between 4σ and 6σ so distant pairs
//! contribute nothing. Tangential force is a tanh-regularized Coulomb law.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::params::PhysParams;

/// Gap (in units of σ) where the tail taper starts.
pub const TAPER_START: f64 = 4.0;
/// Gap (in units of σ) beyond which contact is exactly inactive.
pub const TAPER_END: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactConfig {
    /// N/m
    pub stiffness: f64,
    /// Smoothing width σ of the softplus, m.
    pub smoothing_width: f64,
    /// Slope of the tanh friction regularization, s/m.
    pub tangential_smoothness: f64,
    /// N·s/m
    pub restitution_damping: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            stiffness: 1e3,
            smoothing_width: 2e-3,
            tangential_smoothness: 50.0,
            restitution_damping: 10.0,
        }
    }
}

impl ContactConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [
            self.stiffness,
            self.smoothing_width,
            self.tangential_smoothness,
            self.restitution_damping,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(config_err("contact constants must all be strictly positive"))
        }
    }

    /// Force scale `stiffness · σ` used when judging contact inactivity.
    pub fn force_scale(&self) -> f64 {
        self.stiffness * self.smoothing_width
    }

    /// Gap beyond which the contact law is identically zero.
    pub fn cutoff_gap(&self) -> f64 {
        TAPER_END * self.smoothing_width
    }
}

/// Impulse exchanged at one contact over one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactImpulse {
    /// N·s, nonnegative.
    pub normal: f64,
    /// N·s, signed along the contact tangent.
    pub tangential: f64,
    pub contact_point: [f64; 2],
    /// m
    pub active_gap: f64,
}

impl ContactImpulse {
    pub fn magnitude(&self) -> f64 {
        self.normal.hypot(self.tangential)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Taper weight `w(gap)` and its derivative with respect to the gap.
#[inline]
pub fn taper(gap: f64, sigma: f64) -> (f64, f64) {
    let t = (gap / sigma - TAPER_START) / (TAPER_END - TAPER_START);
    if t <= 0.0 {
        (1.0, 0.0)
    } else if t >= 1.0 {
        (0.0, 0.0)
    } else {
        let s = t * t * t * (t * (6.0 * t - 15.0) + 10.0);
        let ds = 30.0 * t * t * (t - 1.0) * (t - 1.0);
        (1.0 - s, -ds / ((TAPER_END - TAPER_START) * sigma))
    }
}

/// `tanh(s·r)/r`, the secant slope of the regularized Coulomb law, with its
/// limit `s` at zero slip.
#[inline]
pub fn tanh_secant(r: f64, s: f64) -> f64 {
    let x = s * r;
    if x.abs() < 1e-4 {
        s * (1.0 - x * x / 3.0)
    } else {
        x.tanh() / r
    }
}

/// Backward-Euler slip of a regularized Coulomb contact: the root of
/// `x + a·tanh(s·x) = r`, where `a = h·w·μ·load` folds in the step, the
/// inverse effective mass and the friction bound. Odd in `r`.
pub fn implicit_slip(r: f64, a: f64, s: f64) -> f64 {
    if r == 0.0 || !r.is_finite() || a <= 0.0 {
        return r;
    }
    let target = r.abs();
    // x0 = r/(1 + a·s) sits below the root; the residual is concave and
    // increasing, so Newton climbs to it monotonically.
    let mut x = target / (1.0 + a * s);
    for _ in 0..50 {
        let t = (s * x).tanh();
        let f = x + a * t - target;
        let df = 1.0 + a * s * (1.0 - t * t);
        let next = x - f / df;
        if (next - x).abs() <= 1e-15 * target.max(1e-300) {
            x = next;
            break;
        }
        x = next;
    }
    x.clamp(0.0, target).copysign(r)
}

/// Spring force magnitude and damping activation at a gap, before the
/// velocity-dependent damping is subtracted.
#[inline]
pub(crate) fn spring_and_activation(gap: f64, config: &ContactConfig) -> (f64, f64) {
    let sigma = config.smoothing_width;
    let (w, _) = taper(gap, sigma);
    if w == 0.0 {
        return (0.0, 0.0);
    }
    let x = -gap / sigma;
    (
        config.stiffness * sigma * softplus(x) * w,
        sigmoid(x) * w,
    )
}

/// Contact impulse over a step of length `dt`.
///
/// `relative_velocity` is `(normal, tangential)` with positive normal
/// velocity meaning separation. The normal impulse is
/// `dt·max(0, k·σ·softplus(−gap/σ)·w − c·sigmoid(−gap/σ)·w·v_n)` and the
/// tangential impulse is `−μ·normal·tanh(s·v_t)`.
pub fn soft_contact_impulse(
    gap: f64,
    relative_velocity: [f64; 2],
    params: &PhysParams,
    config: &ContactConfig,
    dt: f64,
) -> ContactImpulse {
    let (spring, act) = spring_and_activation(gap, config);
    let force = (spring - config.restitution_damping * act * relative_velocity[0]).max(0.0);
    let normal = dt * force;
    let tangential =
        -params.friction * normal * (config.tangential_smoothness * relative_velocity[1]).tanh();
    ContactImpulse {
        normal,
        tangential,
        contact_point: [0.0, 0.0],
        active_gap: gap,
    }
}

/// Analytic partial derivatives of the contact impulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactJacobian {
    /// ∂(normal, tangential)/∂gap
    pub d_gap: [f64; 2],
    /// ∂(normal, tangential)/∂v_n
    pub d_normal_velocity: [f64; 2],
    /// ∂(normal, tangential)/∂v_t
    pub d_tangential_velocity: [f64; 2],
    /// ∂(normal, tangential)/∂μ
    pub d_friction: [f64; 2],
}

pub fn soft_contact_jacobian(
    gap: f64,
    relative_velocity: [f64; 2],
    params: &PhysParams,
    config: &ContactConfig,
    dt: f64,
) -> ContactJacobian {
    let sigma = config.smoothing_width;
    let (w, dw) = taper(gap, sigma);
    let x = -gap / sigma;
    let sp = softplus(x);
    let sg = sigmoid(x);
    let k = config.stiffness;
    let c = config.restitution_damping;
    let vn = relative_velocity[0];
    let force = k * sigma * sp * w - c * sg * w * vn;
    let (dn_dgap, dn_dvn) = if force > 0.0 {
        // d/dgap softplus(−g/σ) = −sigmoid/σ; d/dgap sigmoid(−g/σ) = −s(1−s)/σ
        let dspring = k * sigma * (-sg / sigma * w + sp * dw);
        let dact = -sg * (1.0 - sg) / sigma * w + sg * dw;
        (dt * (dspring - c * dact * vn), -dt * c * sg * w)
    } else {
        (0.0, 0.0)
    };
    let normal = dt * force.max(0.0);
    let s = config.tangential_smoothness;
    let th = (s * relative_velocity[1]).tanh();
    let mu = params.friction;
    ContactJacobian {
        d_gap: [dn_dgap, -mu * dn_dgap * th],
        d_normal_velocity: [dn_dvn, -mu * dn_dvn * th],
        d_tangential_velocity: [0.0, -mu * normal * s * (1.0 - th * th)],
        d_friction: [0.0, -normal * th],
    }
}

/// Planar regularized-Coulomb impulse for a supported body sliding with
/// slip velocity `slip` under a normal load `load` (N).
pub fn support_friction_impulse(
    slip: [f64; 2],
    load: f64,
    friction: f64,
    config: &ContactConfig,
    dt: f64,
) -> [f64; 2] {
    let r = slip[0].hypot(slip[1]);
    let g = friction * load * tanh_secant(r, config.tangential_smoothness);
    [-dt * g * slip[0], -dt * g * slip[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mu: f64) -> PhysParams {
        PhysParams {
            mass: 0.5,
            inertia: 0.01,
            com_offset: [0.0; 2],
            friction: mu,
        }
    }

    const DT: f64 = 0.025;

    #[test]
    fn zero_gap_gives_ln2() {
        let cfg = ContactConfig::default();
        let imp = soft_contact_impulse(0.0, [0.0, 0.0], &params(0.5), &cfg, DT);
        let expected = DT * cfg.stiffness * cfg.smoothing_width * std::f64::consts::LN_2;
        assert!((imp.normal - expected).abs() < 1e-15);
        assert_eq!(imp.tangential, 0.0);
    }

    #[test]
    fn far_gap_is_inactive() {
        let cfg = ContactConfig::default();
        let sigma = cfg.smoothing_width;
        let imp = soft_contact_impulse(10.0 * sigma, [-1.0, 2.0], &params(0.5), &cfg, DT);
        assert!(imp.normal <= cfg.force_scale() * DT * softplus(-10.0));
        assert!(imp.normal < 1e-3 * cfg.force_scale());
    }

    #[test]
    fn zero_slip_has_no_tangential_impulse() {
        let cfg = ContactConfig::default();
        let imp = soft_contact_impulse(-1e-3, [-0.1, 0.0], &params(0.9), &cfg, DT);
        assert!(imp.normal > 0.0);
        assert_eq!(imp.tangential, 0.0);
    }

    #[test]
    fn lipschitz_in_gap() {
        let cfg = ContactConfig::default();
        let sigma = cfg.smoothing_width;
        let bound = cfg.stiffness * DT;
        for i in 0..200 {
            let gap = -3.0 * sigma + 9.0 * sigma * (i as f64) / 200.0;
            for frac in [1e-3, 1e-4, 1e-5] {
                let d = frac * sigma;
                let a = soft_contact_impulse(gap, [0.0, 0.05], &params(0.5), &cfg, DT);
                let b = soft_contact_impulse(gap + d, [0.0, 0.05], &params(0.5), &cfg, DT);
                assert!((a.normal - b.normal).abs() / d <= bound * (1.0 + 1e-9));
                assert!((a.tangential - b.tangential).abs() / d <= bound * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn taper_is_continuous_at_its_ends() {
        let sigma = 2e-3;
        let (a, _) = taper(TAPER_START * sigma, sigma);
        let (b, _) = taper(TAPER_END * sigma, sigma);
        assert_eq!(a, 1.0);
        assert!(b.abs() < 1e-15);
    }

    #[test]
    fn support_friction_opposes_slip_within_cone() {
        let cfg = ContactConfig::default();
        let j = support_friction_impulse([0.3, -0.4], 2.0, 0.5, &cfg, DT);
        assert!(j[0] < 0.0 && j[1] > 0.0);
        assert!(j[0].hypot(j[1]) <= 0.5 * 2.0 * DT + 1e-15);
        assert_eq!(support_friction_impulse([0.0, 0.0], 2.0, 0.5, &cfg, DT), [0.0, 0.0]);
    }
}
