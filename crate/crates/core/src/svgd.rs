//! Stein variational transport of parameter particles.
//!
//! Everything here works in prior-normalized coordinates
//! `z = (θ − lower) / (upper − lower)`, so one bandwidth is meaningful
//! across axes measured in kg, kg·m², m and plain numbers. Scores are
//! gradients of the log target in those coordinates.

use serde::{Deserialize, Serialize};

use crate::dynamics::{BodyState, ControlInput};
use crate::env::EnvSpec;
use crate::error::{config_err, Error, Result};
use crate::params::{ParamPrior, PhysParams};
use crate::pool::WorkPool;
use crate::rollout_cost;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelKind {
    Rbf { bandwidth: f64 },
    Imq { bandwidth: f64 },
    Constant,
}

/// Kernel value with the pieces the Stein kernel needs.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTerms {
    pub value: f64,
    /// ∇ₓ k(x, y)
    pub grad_x: Vec<f64>,
    /// tr ∇ₓ∇ᵧ k(x, y)
    pub trace: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Rbf { .. } => "rbf",
            KernelKind::Imq { .. } => "imq",
            KernelKind::Constant => "constant",
        }
    }

    pub fn from_name(name: &str, bandwidth: f64) -> Result<Self> {
        let k = match name {
            "rbf" => KernelKind::Rbf { bandwidth },
            "imq" => KernelKind::Imq { bandwidth },
            "constant" => KernelKind::Constant,
            other => return Err(config_err(format!("unknown kernel `{other}`"))),
        };
        k.validate()?;
        Ok(k)
    }

    pub fn bandwidth(&self) -> Option<f64> {
        match self {
            KernelKind::Rbf { bandwidth } | KernelKind::Imq { bandwidth } => Some(*bandwidth),
            KernelKind::Constant => None,
        }
    }

    pub fn with_bandwidth(self, h: f64) -> Self {
        match self {
            KernelKind::Rbf { .. } => KernelKind::Rbf { bandwidth: h },
            KernelKind::Imq { .. } => KernelKind::Imq { bandwidth: h },
            KernelKind::Constant => KernelKind::Constant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.bandwidth() {
            Some(h) if !(h.is_finite() && h > 0.0) => {
                Err(config_err(format!("kernel bandwidth must be positive, got {h}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelKind::Rbf { bandwidth: h } => (-sq_dist(x, y) / h).exp(),
            KernelKind::Imq { bandwidth: h } => 1.0 / (1.0 + sq_dist(x, y) / h).sqrt(),
            KernelKind::Constant => 1.0,
        }
    }

    /// Gradient in the first argument.
    pub fn grad(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.terms(x, y).grad_x
    }

    pub fn terms(&self, x: &[f64], y: &[f64]) -> KernelTerms {
        let d = x.len() as f64;
        let r2 = sq_dist(x, y);
        match *self {
            KernelKind::Rbf { bandwidth: h } => {
                let k = (-r2 / h).exp();
                let c = -2.0 * k / h;
                KernelTerms {
                    value: k,
                    grad_x: x.iter().zip(y).map(|(a, b)| c * (a - b)).collect(),
                    trace: k * (2.0 * d / h - 4.0 * r2 / (h * h)),
                }
            }
            KernelKind::Imq { bandwidth: h } => {
                let q = 1.0 + r2 / h;
                let k = 1.0 / q.sqrt();
                let q3 = k / q;
                let c = -q3 / h;
                KernelTerms {
                    value: k,
                    grad_x: x.iter().zip(y).map(|(a, b)| c * (a - b)).collect(),
                    trace: d * q3 / h - 3.0 * r2 / (h * h) * q3 / q,
                }
            }
            KernelKind::Constant => KernelTerms {
                value: 1.0,
                grad_x: vec![0.0; x.len()],
                trace: 0.0,
            },
        }
    }
}

pub fn kernel_eval(kind: &KernelKind, x: &[f64], y: &[f64]) -> Result<f64> {
    kind.validate()?;
    Ok(kind.eval(x, y))
}

pub fn kernel_grad(kind: &KernelKind, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    kind.validate()?;
    Ok(kind.grad(x, y))
}

/// Median heuristic `h = med(‖zᵢ − zⱼ‖²) / ln N`, or `None` when it is
/// undefined (fewer than two particles or all coincident).
pub fn median_bandwidth(points: &[Vec<f64>]) -> Option<f64> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let mut d: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| sq_dist(&points[i], &points[j]))
        .collect();
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    let h = med / (n as f64).ln().max(f64::MIN_POSITIVE);
    (h > 0.0 && h.is_finite()).then_some(h)
}

/// Evaluates ∇_z log p(z) at each particle.
pub trait ScoreFunction: Sync {
    fn scores(&self, zs: &[Vec<f64>], pool: &WorkPool) -> Result<Vec<Vec<f64>>>;
}

/// Parameter particles with the prior box that bounds them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    /// One vector per particle over the prior's axes.
    pub particles: Vec<Vec<f64>>,
    pub prior: ParamPrior,
}

impl ParticleSet {
    pub fn new(particles: Vec<Vec<f64>>, prior: ParamPrior) -> Result<Self> {
        if particles.is_empty() {
            return Err(config_err("a particle set needs at least one particle"));
        }
        if particles.iter().any(|p| p.len() != prior.dim()) {
            return Err(config_err("particle dimension does not match the prior"));
        }
        let mut set = Self { particles, prior };
        for p in set.particles.iter_mut() {
            set.prior.clamp(p);
        }
        Ok(set)
    }

    pub fn sample<R: rand::Rng + ?Sized>(prior: &ParamPrior, n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| prior.sample_vec(rng)).collect(), prior.clone())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    /// Arithmetic mean θ̄.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim()];
        for p in &self.particles {
            for (a, v) in m.iter_mut().zip(p) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.particles.iter().map(|p| self.prior.normalize(p)).collect()
    }

    pub fn from_normalized(&self, zs: &[Vec<f64>]) -> Self {
        let particles = zs
            .iter()
            .map(|z| {
                let mut t = self.prior.denormalize(z);
                self.prior.clamp(&mut t);
                t
            })
            .collect();
        Self {
            particles,
            prior: self.prior.clone(),
        }
    }

    pub fn params(&self, nominal: &PhysParams) -> Vec<PhysParams> {
        self.particles
            .iter()
            .map(|t| self.prior.apply(nominal, t))
            .collect()
    }

    /// Largest normalized displacement of any particle relative to `other`.
    pub fn displacement(&self, other: &ParticleSet) -> f64 {
        self.normalized()
            .iter()
            .zip(other.normalized())
            .map(|(a, b)| sq_dist(a, &b).sqrt())
            .fold(0.0, f64::max)
    }
}

/// φ(z_j) = (1/N) Σᵢ [k(zᵢ, z_j) sᵢ + ∇_{zᵢ} k(zᵢ, z_j)].
pub fn stein_direction(zs: &[Vec<f64>], scores: &[Vec<f64>], kernel: &KernelKind) -> Vec<Vec<f64>> {
    let n = zs.len();
    let d = zs.first().map_or(0, Vec::len);
    let inv_n = 1.0 / n as f64;
    (0..n)
        .map(|j| {
            let mut phi = vec![0.0; d];
            for i in 0..n {
                let t = kernel.terms(&zs[i], &zs[j]);
                for (c, p) in phi.iter_mut().enumerate() {
                    *p += t.value * scores[i][c] + t.grad_x[c];
                }
            }
            phi.iter_mut().for_each(|p| *p *= inv_n);
            phi
        })
        .collect()
}

/// Result of one transport step.
#[derive(Clone, Debug, PartialEq)]
pub struct SvgdStep {
    pub particles: ParticleSet,
    /// Normalized-coordinate direction applied to each particle.
    pub direction: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
}

/// z ← z + α φ(z), then back to parameter space and clamped to the box.
pub fn svgd_step(
    particles: &ParticleSet,
    target: &dyn ScoreFunction,
    kernel: &KernelKind,
    alpha: f64,
    pool: &WorkPool,
) -> Result<SvgdStep> {
    kernel.validate()?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(config_err("svgd step size must be nonnegative"));
    }
    let zs = particles.normalized();
    let scores = target.scores(&zs, pool)?;
    let direction = stein_direction(&zs, &scores, kernel);
    // θ + α·scale·φ is z + αφ mapped back, without the round-trip error
    let scales = particles.prior.scales();
    let moved: Vec<Vec<f64>> = particles
        .particles
        .iter()
        .zip(&direction)
        .map(|(t, phi)| t.iter().zip(phi).zip(&scales).map(|((a, p), s)| a + alpha * p * s).collect())
        .collect();
    Ok(SvgdStep {
        particles: ParticleSet::new(moved, particles.prior.clone())?,
        direction,
        scores,
    })
}

/// Squared kernel Stein discrepancy, V-statistic form:
/// (1/N²) Σᵢⱼ [sᵢᵀsⱼ k + sᵢᵀ∇ᵧk + sⱼᵀ∇ₓk + tr ∇ₓ∇ᵧk].
///
/// The diagonal terms are kept, so identical particles with zero score give
/// the kernel's trace term at zero distance (2d/h for RBF, d/h for IMQ)
/// rather than zero.
pub fn ksd_estimate(zs: &[Vec<f64>], scores: &[Vec<f64>], kernel: &KernelKind) -> f64 {
    let n = zs.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = kernel.terms(&zs[i], &zs[j]);
            let (si, sj) = (&scores[i], &scores[j]);
            let mut u = t.trace;
            for c in 0..si.len() {
                // ∇ᵧk = −∇ₓk for translation-invariant kernels
                u += si[c] * sj[c] * t.value - si[c] * t.grad_x[c] + sj[c] * t.grad_x[c];
            }
            acc += u;
        }
    }
    (acc / (n * n) as f64).max(0.0)
}

/// Isotropic-in-θ Gaussian correlated target used to check the transport.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    /// Precision matrix in parameter coordinates.
    pub precision: Vec<Vec<f64>>,
    pub prior: ParamPrior,
}

impl ScoreFunction for GaussianTarget {
    fn scores(&self, zs: &[Vec<f64>], _pool: &WorkPool) -> Result<Vec<Vec<f64>>> {
        let scales = self.prior.scales();
        Ok(zs
            .iter()
            .map(|z| {
                let theta = self.prior.denormalize(z);
                let diff: Vec<f64> = theta.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
                self.precision
                    .iter()
                    .zip(&scales)
                    .map(|(row, s)| -s * row.iter().zip(&diff).map(|(p, d)| p * d).sum::<f64>())
                    .collect()
            })
            .collect())
    }
}

/// Task-aware posterior p′(θ) ∝ p(θ) · exp(γ_post · sign · δL(τ*, θ)) for a
/// frozen plan τ* = (x₀, u*).
#[derive(Clone, Debug)]
pub struct PosteriorModel<'a> {
    pub env: &'a EnvSpec,
    pub initial: BodyState,
    pub plan: Vec<ControlInput>,
    /// θ̄ the gap is measured against.
    pub reference: Vec<f64>,
    pub reference_cost: f64,
    pub temperature: f64,
    /// +1 puts mass where the plan degrades, −1 where it holds up.
    pub sign: f64,
    /// Finite-difference step in normalized coordinates.
    pub fd_step: f64,
}

impl<'a> PosteriorModel<'a> {
    pub fn new(
        env: &'a EnvSpec,
        initial: BodyState,
        plan: Vec<ControlInput>,
        particles: &ParticleSet,
        temperature: f64,
        sign: f64,
    ) -> Result<Self> {
        let reference = particles.mean();
        let reference_cost = rollout_cost(&initial, &plan, &env.params_from(&reference), env)?;
        Ok(Self {
            env,
            initial,
            plan,
            reference,
            reference_cost,
            temperature,
            sign,
            fd_step: 1e-3,
        })
    }

    pub fn cost(&self, theta: &[f64]) -> Result<f64> {
        rollout_cost(&self.initial, &self.plan, &self.env.params_from(theta), self.env)
    }

    /// δL(τ*, θ) = L(τ*, θ) − L(τ*, θ̄).
    pub fn optimality_gap(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.cost(theta)? - self.reference_cost)
    }

    /// log p′ up to its normalizer, inside the prior box.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.temperature * self.sign * self.optimality_gap(theta)?)
    }

    /// ∇_θ log p′ by central differences with step `fd_step × scale`.
    pub fn score_theta(&self, theta: &[f64], pool: &WorkPool) -> Result<Vec<f64>> {
        let z = self.env.prior.normalize(theta);
        let s = self.scores(&[z], pool)?.remove(0);
        Ok(s.iter()
            .zip(self.env.prior.scales())
            .map(|(v, sc)| v / sc)
            .collect())
    }
}

impl ScoreFunction for PosteriorModel<'_> {
    fn scores(&self, zs: &[Vec<f64>], pool: &WorkPool) -> Result<Vec<Vec<f64>>> {
        let d = self.env.prior.dim();
        let prior_grad = |z: &Vec<f64>| {
            let t = self.env.prior.denormalize(z);
            let scales = self.env.prior.scales();
            self.env
                .prior
                .log_density_grad(&t)
                .iter()
                .zip(scales)
                .map(|(g, s)| g * s)
                .collect::<Vec<f64>>()
        };
        if self.temperature == 0.0 {
            return Ok(zs.iter().map(prior_grad).collect());
        }
        let h = self.fd_step;
        let probes = pool.map_range(zs.len() * d * 2, |idx| {
            let (p, rem) = (idx / (2 * d), idx % (2 * d));
            let (c, side) = (rem / 2, if rem % 2 == 0 { 1.0 } else { -1.0 });
            let mut z = zs[p].clone();
            z[c] += side * h;
            let theta = self.env.prior.denormalize(&z);
            self.cost(&theta).map_err(|e| Error::ScoreProbe {
                dim: c,
                source: Box::new(e),
            })
        });
        let mut out = Vec::with_capacity(zs.len());
        for (p, z) in zs.iter().enumerate() {
            let mut g = prior_grad(z);
            for (c, gc) in g.iter_mut().enumerate() {
                let base = p * 2 * d + 2 * c;
                let plus = probes[base].clone()?;
                let minus = probes[base + 1].clone()?;
                *gc += self.temperature * self.sign * (plus - minus) / (2.0 * h);
            }
            out.push(g);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_identity_values() {
        let x = [0.3, 0.7];
        for k in [
            KernelKind::Rbf { bandwidth: 0.75 },
            KernelKind::Imq { bandwidth: 0.75 },
        ] {
            assert_eq!(k.eval(&x, &x), 1.0);
            assert_eq!(k.grad(&x, &x), vec![0.0, 0.0]);
        }
        let y = [0.3 + 0.75f64.sqrt(), 0.7];
        let v = KernelKind::Rbf { bandwidth: 0.75 }.eval(&x, &y);
        assert!((v - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_bandwidth_rejected() {
        assert!(kernel_eval(&KernelKind::Rbf { bandwidth: 0.0 }, &[0.0], &[1.0]).is_err());
        assert!(kernel_grad(&KernelKind::Imq { bandwidth: -1.0 }, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn two_particles_repel_symmetrically() {
        let zs = vec![vec![0.4, 0.5], vec![0.6, 0.5]];
        let scores = vec![vec![0.0; 2]; 2];
        let phi = stein_direction(&zs, &scores, &KernelKind::Rbf { bandwidth: 0.75 });
        assert!(phi[0][0] < 0.0 && phi[1][0] > 0.0);
        assert!((phi[0][0] + phi[1][0]).abs() < 1e-15);
        assert_eq!(phi[0][1], 0.0);
    }

    #[test]
    fn median_bandwidth_cases() {
        assert_eq!(median_bandwidth(&[vec![0.0]]), None);
        let h = median_bandwidth(&[vec![0.0], vec![1.0]]).unwrap();
        assert!((h - 1.0 / 2f64.ln()).abs() < 1e-12);
    }
}
