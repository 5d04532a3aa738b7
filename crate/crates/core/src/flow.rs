//! Initial-value integration of the prescribed-curvature flow
//! D_t γ̇ = |γ̇|ₘ k(γ) J(γ) γ̇ on ℍ, plus the constant-k trichotomy.
//!
//! The flow is integrated as the ambient second-order ODE
//! γ̈ = |γ̇|²ₘ γ + |γ̇|ₘ k(γ) (γ ×ₘ γ̇), whose tangential part is the equation
//! above and whose normal part is the second fundamental form of ℍ.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::Curvature;
use crate::hyperboloid::{
    distance, project_point, project_tangent, rotate_j, Curve, HPoint, TangentVec,
};
use crate::minkowski::MVec3;
use crate::store::fmt_f64;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("adaptive step size underflow at t = {0}")]
    StepFailure(f64),
    #[error("energy level must be positive, got {0}")]
    NonpositiveEnergy(f64),
    #[error("integration left the hyperboloid: {0}")]
    Geometry(#[from] crate::hyperboloid::HyperboloidError),
    #[error("sample count {0} is not a power of two >= 64")]
    BadSampleCount(usize),
}

/// A point of the tangent bundle: the state of Eq.-of-motion integration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FlowState {
    pub point: HPoint,
    pub velocity: TangentVec,
}

impl FlowState {
    pub fn new(point: HPoint, velocity: MVec3) -> Self {
        FlowState { point, velocity: project_tangent(point, velocity) }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// Classical RK4 with the given fixed step (in trajectory time).
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with the given local error tolerance.
    Rk45 { tol: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Project each stored sample back onto ℍ / its tangent space.
    pub renormalize: bool,
    /// Stored samples per trajectory; power of two ≥ 64.
    pub samples: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { method: Method::Rk45 { tol: 1e-10 }, renormalize: true, samples: 1024 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        if let Method::Rk45 { tol } = self.method {
            assert!((1e-14..=1e-3).contains(&tol), "tolerance out of range");
        }
        if self.samples < 64 || !self.samples.is_power_of_two() {
            return Err(FlowError::BadSampleCount(self.samples));
        }
        Ok(())
    }
}

/// An integrated trajectory: N uniform samples of [0, T] plus the exact
/// final state and conservation diagnostics.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Samples at t = j·T/N reparametrized to the unit interval, i.e. the
    /// stored velocities are T·γ̇ so the curve is a genuine map from [0,1].
    pub curve: Curve,
    pub t_span: f64,
    pub final_state: FlowState,
    /// max_t | |γ̇(t)|ₘ − |γ̇(0)|ₘ |.
    pub speed_drift: f64,
    /// max_t |⟨γ,γ⟩ₘ + 1| before renormalization.
    pub constraint_drift: f64,
}

impl Trajectory {
    /// State at sample j in trajectory time (velocity rescaled back).
    pub fn state(&self, j: usize) -> FlowState {
        FlowState {
            point: self.curve.points[j],
            velocity: TangentVec {
                base: self.curve.points[j],
                vector: self.curve.velocities[j] * (1.0 / self.t_span),
            },
        }
    }
}

/// Right-hand side of the ambient second-order equation: (γ̇, γ̈).
pub fn magnetic_rhs(s: &FlowState, k: &Curvature) -> (MVec3, MVec3) {
    let gamma = s.point.0;
    let v = s.velocity.vector;
    let speed2 = v.dot_m(v).max(0.0);
    let speed = speed2.sqrt();
    let accel = gamma * speed2 + gamma.cross_m(v) * (speed * k.value(s.point));
    (v, accel)
}

// ambient RHS on raw (position, velocity) pairs used inside the steppers;
// positions slightly off ℍ are evaluated as-is and corrected by projection
fn rhs_raw(p: MVec3, v: MVec3, k: &Curvature) -> (MVec3, MVec3) {
    let speed2 = v.dot_m(v).max(0.0);
    let speed = speed2.sqrt();
    // renormalize the point only for the curvature evaluation
    let q = p.dot_m(p);
    let kp = if q < -1e-14 && p.tau > 0.0 {
        k.value(HPoint(p * (1.0 / (-q).sqrt())))
    } else {
        k.value(HPoint(p))
    };
    (v, p * speed2 + p.cross_m(v) * (speed * kp))
}

fn rk4_step(p: MVec3, v: MVec3, h: f64, k: &Curvature) -> (MVec3, MVec3) {
    let (k1p, k1v) = rhs_raw(p, v, k);
    let (k2p, k2v) = rhs_raw(p + k1p * (h / 2.0), v + k1v * (h / 2.0), k);
    let (k3p, k3v) = rhs_raw(p + k2p * (h / 2.0), v + k2v * (h / 2.0), k);
    let (k4p, k4v) = rhs_raw(p + k3p * h, v + k3v * h, k);
    (
        p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0),
        v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0),
    )
}

// Dormand–Prince 5(4) coefficients
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct AdaptiveStepper {
    tol: f64,
    h: f64,
}

impl AdaptiveStepper {
    /// Advance (p, v) from `t0` to exactly `t1`.
    fn advance(
        &mut self,
        mut p: MVec3,
        mut v: MVec3,
        t0: f64,
        t1: f64,
        k: &Curvature,
    ) -> Result<(MVec3, MVec3), FlowError> {
        let mut t = t0;
        while t < t1 {
            let h = self.h.min(t1 - t);
            if h < 1e-14 * (t1 - t0).max(1.0) {
                return Err(FlowError::StepFailure(t));
            }
            let mut kp = [MVec3::ZERO; 7];
            let mut kv = [MVec3::ZERO; 7];
            for i in 0..7 {
                let mut sp = p;
                let mut sv = v;
                for j in 0..i {
                    sp = sp + kp[j] * (h * DP_A[i][j]);
                    sv = sv + kv[j] * (h * DP_A[i][j]);
                }
                let _ = DP_C;
                let (dp, dv) = rhs_raw(sp, sv, k);
                kp[i] = dp;
                kv[i] = dv;
            }
            let mut p5 = p;
            let mut v5 = v;
            let mut ep = MVec3::ZERO;
            let mut ev = MVec3::ZERO;
            for i in 0..7 {
                p5 = p5 + kp[i] * (h * DP_B5[i]);
                v5 = v5 + kv[i] * (h * DP_B5[i]);
                ep = ep + kp[i] * (h * (DP_B5[i] - DP_B4[i]));
                ev = ev + kv[i] * (h * (DP_B5[i] - DP_B4[i]));
            }
            let err = ep.norm_e().max(ev.norm_e());
            if err <= self.tol {
                p = p5;
                v = v5;
                t += h;
            }
            // aim the controller a factor below tol so accepted-step errors
            // accumulate to ~tol over unit time rather than per step
            let factor = if err > 0.0 { 0.9 * (0.25 * self.tol / err).powf(0.2) } else { 5.0 };
            self.h = (self.h * factor.clamp(0.2, 5.0)).min(0.5);
        }
        Ok((p, v))
    }
}

/// Integrate the flow from `s0` over [0, T]; see [`Trajectory`] for the
/// sampling convention.
pub fn integrate(
    s0: &FlowState,
    k: &Curvature,
    t_span: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, FlowError> {
    cfg.validate()?;
    assert!(t_span > 0.0, "T must be positive");
    let n = cfg.samples;
    let dt = t_span / n as f64;
    let speed0 = s0.speed();

    let mut points = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    let mut p = s0.point.0;
    let mut v = s0.velocity.vector;
    let mut speed_drift = 0.0f64;
    let mut constraint_drift = 0.0f64;
    let mut adaptive = match cfg.method {
        Method::Rk45 { tol } => Some(AdaptiveStepper { tol, h: dt.min(1e-2) }),
        Method::Rk4 { .. } => None,
    };

    for j in 0..=n {
        constraint_drift = constraint_drift.max((p.dot_m(p) + 1.0).abs());
        let speed = v.dot_m(v).max(0.0).sqrt();
        speed_drift = speed_drift.max((speed - speed0).abs());
        if cfg.renormalize {
            let hp = project_point(p)?;
            p = hp.0;
            v = project_tangent(hp, v).vector;
        }
        if j < n {
            points.push(HPoint(p));
            velocities.push(v * t_span);
            let (t0, t1) = (j as f64 * dt, (j + 1) as f64 * dt);
            match (&mut adaptive, cfg.method) {
                (Some(stepper), _) => {
                    let (np, nv) = stepper.advance(p, v, t0, t1, k)?;
                    p = np;
                    v = nv;
                }
                (None, Method::Rk4 { step }) => {
                    let m = ((dt / step).ceil() as usize).max(1);
                    let h = dt / m as f64;
                    for _ in 0..m {
                        let (np, nv) = rk4_step(p, v, h, k);
                        p = np;
                        v = nv;
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let end_point = project_point(p)?;
    let final_state = FlowState { point: end_point, velocity: project_tangent(end_point, v) };
    Ok(Trajectory {
        curve: Curve::new(points, velocities).map_err(FlowError::Geometry)?,
        t_span,
        final_state,
        speed_drift,
        constraint_drift,
    })
}

/// Pass from energy level E_c to Eq.-of-motion form: k ↦ k/c.
pub fn energy_rescale(k: &Curvature, c: f64) -> Result<Curvature, FlowError> {
    if c <= 0.0 {
        return Err(FlowError::NonpositiveEnergy(c));
    }
    Ok(Curvature::scale(1.0 / c, k.clone()))
}

/// Trajectory type of the constant-curvature flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConstantClass {
    /// Closed circle of the given hyperbolic radius parameter r.
    Circle(f64),
    Horocycle,
    Hypercycle,
}

pub fn classify_constant(k0: f64) -> ConstantClass {
    assert!(k0 > 0.0, "curvature must be positive");
    if (k0 - 1.0).abs() <= 1e-12 {
        ConstantClass::Horocycle
    } else if k0 > 1.0 {
        ConstantClass::Circle(1.0 / (k0 * k0 - 1.0).sqrt())
    } else {
        ConstantClass::Hypercycle
    }
}

/// Trajectory CSV: t, xi1, xi2, tau, v1, v2, v3, speed, curvature_residual.
///
/// The residual column compares the finite-difference geodesic curvature of
/// the samples against k at the sample — an order-h² diagnostic that is
/// independent of the integrator's own right-hand side.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    traj: &Trajectory,
    k: &Curvature,
) -> std::io::Result<()> {
    writeln!(out, "t,xi1,xi2,tau,v1,v2,v3,speed,curvature_residual")?;
    let n = traj.curve.n();
    let dt = traj.t_span / n as f64;
    for j in 0..n {
        let s = traj.state(j);
        let t = j as f64 * dt;
        let residual = {
            // central difference of the velocity, clamped at the ends
            let (jm, jp) = (j.saturating_sub(1), (j + 1).min(n - 1));
            if jp == jm {
                0.0
            } else {
                let vm = traj.state(jm).velocity.vector;
                let vp = traj.state(jp).velocity.vector;
                let vdot = (vp - vm) * (1.0 / ((jp - jm) as f64 * dt));
                let dv = project_tangent(s.point, vdot);
                let jv = rotate_j(s.point, &s.velocity);
                let speed = s.speed();
                if speed < 1e-12 {
                    0.0
                } else {
                    dv.vector.dot_m(jv.vector) / speed.powi(3) - k.value(s.point)
                }
            }
        };
        let p = s.point.0;
        let v = s.velocity.vector;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(t),
            fmt_f64(p.x1),
            fmt_f64(p.x2),
            fmt_f64(p.tau),
            fmt_f64(v.x1),
            fmt_f64(v.x2),
            fmt_f64(v.tau),
            fmt_f64(s.speed()),
            fmt_f64(residual)
        )?;
    }
    Ok(())
}

/// Distance from the start point at the end of [0, T]; helper for the
/// no-return checks of the trichotomy.
pub fn escape_distance(
    s0: &FlowState,
    k: &Curvature,
    t_span: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, FlowError> {
    let traj = integrate(s0, k, t_span, cfg)?;
    Ok(distance(s0.point, traj.final_state.point))
}
