//! Closed-form circle orbits of the constant-curvature flow and their
//! explicit kernel fields.
//!
//! For k ≡ k₀ > 1 the simple closed solutions are the circles
//! α(t) = √(1+r²)w + r cos(2πt)v₁ + r sin(2πt)v₀ with k₀ = √(1+r²)/r and
//! period-1 parametrization (speed 2πr).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::FlowState;
use crate::hyperboloid::{Curve, HPoint, TangentVec};
use crate::minkowski::{Frame, MVec3};

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("no circle solution for k0 = {0} <= 1 (horocycle/hypercycle regime)")]
    SubcriticalCurvature(f64),
    #[error("initial velocity is zero")]
    ZeroVelocity,
}

/// r = 1/√(k₀²−1), the unique radius parameter with √(1+r²)/r = k₀.
pub fn radius_from_k(k0: f64) -> Result<f64, OrbitError> {
    if k0 <= 1.0 {
        return Err(OrbitError::SubcriticalCurvature(k0));
    }
    Ok(1.0 / (k0 * k0 - 1.0).sqrt())
}

/// The simple (n = 1) circle orbit determined by a positive frame and r > 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircleOrbit {
    pub frame: Frame,
    pub r: f64,
}

/// Index into the kernel fields W₀–W₃ of the linearization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelFieldId(pub usize);

impl CircleOrbit {
    pub fn new(frame: Frame, r: f64) -> Self {
        assert!(r > 0.0, "radius parameter must be positive");
        CircleOrbit { frame, r }
    }

    /// The prescribed curvature k₀ = √(1+r²)/r.
    pub fn k0(&self) -> f64 {
        (1.0 + self.r * self.r).sqrt() / self.r
    }

    /// Circumference parameter λ = 2πr (also the constant speed).
    pub fn lambda(&self) -> f64 {
        2.0 * PI * self.r
    }

    /// Hyperbolic center of the circle: the point at distance
    /// arcosh √(1+r²) from every trace point.
    pub fn center(&self) -> HPoint {
        HPoint(self.frame.w)
    }

    fn rho(&self) -> f64 {
        (1.0 + self.r * self.r).sqrt()
    }

    pub fn position(&self, t: f64) -> HPoint {
        let (s, c) = (2.0 * PI * t).sin_cos();
        HPoint(self.frame.w * self.rho() + self.frame.v1 * (self.r * c) + self.frame.v0 * (self.r * s))
    }

    pub fn velocity(&self, t: f64) -> MVec3 {
        let (s, c) = (2.0 * PI * t).sin_cos();
        (self.frame.v0 * c - self.frame.v1 * s) * (2.0 * PI * self.r)
    }

    pub fn alpha_eval(&self, t: f64) -> FlowState {
        let p = self.position(t);
        FlowState { point: p, velocity: TangentVec { base: p, vector: self.velocity(t) } }
    }

    /// The rotating radial vector m(t) = r·w + √(1+r²)(cos(2πt)v₁ + sin(2πt)v₀);
    /// α ×ₘ α̇ = −2πr·m(t), and all covariant derivatives of the kernel
    /// fields are multiples of it.
    pub fn m_vec(&self, t: f64) -> MVec3 {
        let (s, c) = (2.0 * PI * t).sin_cos();
        self.frame.w * self.r + (self.frame.v1 * c + self.frame.v0 * s) * self.rho()
    }

    /// Kernel fields of the linearized flow with their covariant derivatives:
    /// W₀ = tα̇ (non-periodic), W₁ = α̇, W₂ = √(1+r²)v₁ + r cos(2πt)w,
    /// W₃ = √(1+r²)v₀ + r sin(2πt)w.
    pub fn kernel_field(&self, id: KernelFieldId, t: f64) -> (MVec3, MVec3) {
        assert!(id.0 < 4, "kernel field index out of range");
        let (s, c) = (2.0 * PI * t).sin_cos();
        let r = self.r;
        let rho = self.rho();
        let m = self.m_vec(t);
        match id.0 {
            // D_t α̇ = 2πr k₀ (α ×ₘ α̇) / ... = −4π²r² k₀ m(t)
            0 => {
                let w1 = self.velocity(t);
                (w1 * t, w1 + m * (-4.0 * PI * PI * r * r * self.k0() * t))
            }
            1 => (self.velocity(t), m * (-4.0 * PI * PI * r * r * self.k0())),
            2 => (
                self.frame.v1 * rho + self.frame.w * (r * c),
                m * (2.0 * PI * r * r * s),
            ),
            3 => (
                self.frame.v0 * rho + self.frame.w * (r * s),
                m * (-2.0 * PI * r * r * c),
            ),
            _ => unreachable!(),
        }
    }

    /// Same orbit with phase shifted by θ: position(t) of the result equals
    /// position(t + θ) of the original.
    pub fn phase_shifted(&self, theta: f64) -> CircleOrbit {
        let (s, c) = (2.0 * PI * theta).sin_cos();
        let frame = Frame {
            v0: self.frame.v0 * c - self.frame.v1 * s,
            v1: self.frame.v1 * c + self.frame.v0 * s,
            w: self.frame.w,
        };
        CircleOrbit { frame, r: self.r }
    }

    pub fn transformed(&self, a: &crate::minkowski::LorentzMap) -> CircleOrbit {
        CircleOrbit { frame: self.frame.transformed(a), r: self.r }
    }

    /// Sample the orbit as a period-1 [`Curve`] with n points.
    pub fn curve(&self, n: usize) -> Curve {
        let points = (0..n).map(|j| self.position(j as f64 / n as f64)).collect();
        let velocities = (0..n).map(|j| self.velocity(j as f64 / n as f64)).collect();
        Curve::new(points, velocities).expect("orbit sampling is valid")
    }
}

/// The circle orbit through (p, v) for curvature k₀ > 1: v₀ = v/|v|ₘ,
/// v₁ = −r·p + √(1+r²)(v₀ ×ₘ p), w = v₀ ×ₘ v₁. Returns the orbit and the
/// phase at which it passes through p (zero by construction).
pub fn orbit_from_initial(
    p: HPoint,
    v: &TangentVec,
    k0: f64,
) -> Result<(CircleOrbit, f64), OrbitError> {
    let speed = v.norm();
    if speed <= 0.0 {
        return Err(OrbitError::ZeroVelocity);
    }
    let r = radius_from_k(k0)?;
    let rho = (1.0 + r * r).sqrt();
    let v0 = v.vector * (1.0 / speed);
    let v1 = -p.0 * r + v0.cross_m(p.0) * rho;
    let w = v0.cross_m(v1);
    Ok((CircleOrbit::new(Frame { v0, v1, w }, r), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperboloid::{covariant_derivative, distance, project_tangent};
    use crate::minkowski::{is_positive_frame, make_boost, make_rotation};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn canonical(r: f64) -> CircleOrbit {
        CircleOrbit::new(Frame::canonical(), r)
    }

    #[test]
    fn radius_dictionary() {
        assert!((radius_from_k(2f64.sqrt()).unwrap() - 1.0).abs() <= 1e-15);
        let r = radius_from_k(2.0).unwrap();
        assert!((r - 1.0 / 3f64.sqrt()).abs() <= 1e-15);
        // round trip
        assert!(((1.0 + r * r).sqrt() / r - 2.0).abs() <= 1e-12);
        assert!(matches!(radius_from_k(1.0), Err(OrbitError::SubcriticalCurvature(_))));
    }

    #[test]
    fn alpha_eval_canonical() {
        let o = canonical(1.0);
        let s = o.alpha_eval(0.0);
        assert!((s.point.0 - MVec3::new(0.0, 1.0, 2f64.sqrt())).norm_e() <= 1e-15);
        assert!((s.velocity.vector - MVec3::new(2.0 * PI, 0.0, 0.0)).norm_e() <= 1e-15);
        // periodicity and constraint
        for t in [0.13, 0.5, 0.99] {
            let a = o.alpha_eval(t);
            let b = o.alpha_eval(t + 1.0);
            assert!((a.point.0 - b.point.0).norm_e() <= 1e-12);
            assert!(a.point.constraint_residual() <= 1e-12);
            assert!((a.speed() - o.lambda()).abs() <= 1e-12);
        }
    }

    #[test]
    fn orbit_from_initial_canonical_frame() {
        let p = HPoint(MVec3::new(0.0, 1.0, 2f64.sqrt()));
        let v = project_tangent(p, MVec3::E1);
        let (o, phase) = orbit_from_initial(p, &v, 2f64.sqrt()).unwrap();
        assert_eq!(phase, 0.0);
        assert!((o.r - 1.0).abs() <= 1e-12);
        assert!((o.frame.v0 - MVec3::E1).norm_e() <= 1e-12);
        assert!((o.frame.v1 - MVec3::E2).norm_e() <= 1e-12);
        assert!((o.frame.w - MVec3::E3).norm_e() <= 1e-12);
    }

    #[test]
    fn orbit_from_initial_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::DEFAULT_SEED);
        for _ in 0..100 {
            let a = make_rotation(rng.gen_range(-3.0..3.0))
                .compose(&make_boost(rng.gen_range(-1.0..1.0), (rng.gen_range(-1.0..1.0), 1.0)));
            let p = HPoint(a.apply(MVec3::E3));
            let raw = MVec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let v = project_tangent(p, raw);
            if v.norm() < 1e-3 {
                continue;
            }
            let k0 = rng.gen_range(1.1..4.0);
            let (o, _) = orbit_from_initial(p, &v, k0).unwrap();
            let (ok, res) = is_positive_frame(&o.frame);
            assert!(ok, "frame residuals {res:?}");
            let s = o.alpha_eval(0.0);
            assert!((s.point.0 - p.0).norm_e() <= 1e-10);
            // velocity direction reproduced; magnitude is the orbit's own 2πr
            let dir_err = (s.velocity.vector * (1.0 / s.speed()) - v.vector * (1.0 / v.norm())).norm_e();
            assert!(dir_err <= 1e-10);
            assert!((o.k0() - k0).abs() <= 1e-12);
        }
    }

    #[test]
    fn kernel_field_initial_values() {
        let o = canonical(1.0);
        let r = 1.0;
        let k0 = 2f64.sqrt();
        let (w2, dw2) = o.kernel_field(KernelFieldId(2), 0.0);
        assert!((w2 - (MVec3::E2 * (r * k0) + MVec3::E3 * r)).norm_e() <= 1e-12);
        assert!(dw2.norm_e() <= 1e-12);
        let (w1, _) = o.kernel_field(KernelFieldId(1), 0.0);
        assert!((w1 - MVec3::E1 * (2.0 * PI * r)).norm_e() <= 1e-12);
        let (_, dw3) = o.kernel_field(KernelFieldId(3), 0.0);
        let expect = (MVec3::E2 * k0 + MVec3::E3) * (-2.0 * PI * r * r * r);
        assert!((dw3 - expect).norm_e() <= 1e-12);
    }

    #[test]
    fn kernel_derivatives_match_spectral_covariant_derivative() {
        let o = canonical(0.35);
        let n = 256;
        let curve = o.curve(n);
        for idx in 1..4 {
            let field: Vec<MVec3> = (0..n)
                .map(|j| o.kernel_field(KernelFieldId(idx), j as f64 / n as f64).0)
                .collect();
            let numeric = covariant_derivative(&curve, &field).unwrap();
            for j in (0..n).step_by(17) {
                let (_, closed) = o.kernel_field(KernelFieldId(idx), j as f64 / n as f64);
                assert!(
                    (numeric[j].vector - closed).norm_e() <= 1e-8,
                    "field {idx} sample {j}"
                );
            }
        }
    }

    #[test]
    fn w0_is_nonperiodic_by_one_speed() {
        let o = canonical(0.5);
        let (w0_start, _) = o.kernel_field(KernelFieldId(0), 0.0);
        let (w0_end, _) = o.kernel_field(KernelFieldId(0), 1.0);
        let jump = w0_end - w0_start;
        assert!((jump.norm_m() - o.lambda()).abs() <= 1e-12);
    }

    #[test]
    fn rotating_frame_expansion_of_w2() {
        // W₂ = −(1/2πr)(√(1+r²) sin(2πt) α̇ + cos(2πt) (α ×ₘ α̇))
        let o = canonical(0.7);
        let r = o.r;
        for j in 0..32 {
            let t = j as f64 / 32.0;
            let (w2, _) = o.kernel_field(KernelFieldId(2), t);
            let alpha_cross = o.m_vec(t) * (-2.0 * PI * r);
            let recon = (o.velocity(t) * ((1.0 + r * r).sqrt() * (2.0 * PI * t).sin())
                + alpha_cross * (2.0 * PI * t).cos())
                * (-1.0 / (2.0 * PI * r));
            assert!((w2 - recon).norm_e() <= 1e-10, "t={t}");
        }
    }

    #[test]
    fn phase_shift_matches_reparametrization() {
        let o = canonical(0.4).transformed(&make_boost(0.3, (0.5, -1.0)));
        let shifted = o.phase_shifted(0.3);
        for j in 0..16 {
            let t = j as f64 / 16.0;
            assert!((shifted.position(t).0 - o.position(t + 0.3).0).norm_e() <= 1e-12);
            assert!((shifted.velocity(t) - o.velocity(t + 0.3)).norm_e() <= 1e-11);
        }
    }

    #[test]
    fn trace_sits_at_constant_distance_from_center() {
        let o = canonical(0.25);
        let d_expect = (1.0 + o.r * o.r).sqrt().acosh();
        for j in 0..16 {
            let d = distance(o.center(), o.position(j as f64 / 16.0));
            assert!((d - d_expect).abs() <= 1e-12);
        }
    }
}
