//! Gauge-fixed shooting Newton for closed orbits with k = k₀ + ε k₁, the
//! ε-continuation machinery, local S¹-degrees, and the energy trichotomy
//! sweep for constant k.

use std::f64::consts::PI;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::Curvature;
use crate::flow::{self, ConstantClass, FlowState, IntegratorConfig, Method, Trajectory};
use crate::hyperboloid::{distance, log_map, project_point, Curve, HPoint};
use crate::minkowski::{cross_m, Frame, MVec3};
use crate::orbits::CircleOrbit;
use crate::reduction::{CenterChart, ReducedZero};
use crate::variational::Monodromy;

/// Newton convergence target on the shooting residual norm.
pub const NEWTON_TOL: f64 = 1e-10;
/// Singular values of the shooting Jacobian below this count as null when
/// ranking; rank < 3 marks the unperturbed S¹ × isometry degeneracy, and
/// null directions are truncated out of the Newton step.
pub const DEGENERATE_SV: f64 = 1e-7;
/// Truncation level for the Newton solve itself: weakly-determined directions
/// still carry usable linear signal well below [`DEGENERATE_SV`]; only the
/// integration-noise floor (~4e−10) must stay excluded.
const SOLVE_TRUNC: f64 = 2e-9;
const NEWTON_MAX_ITER: usize = 40;
/// FD steps for the Jacobian: chart coords and angle, then speed.
const FD_STEP_COORD: f64 = 1e-6;
const FD_STEP_SPEED: f64 = 1e-7;
/// Fixed RK4 substep for shooting integrations (smooth in initial data,
/// which keeps finite-difference Jacobians clean).
const SHOOT_STEP: f64 = 1.0 / 4096.0;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("effective curvature dips to {0} <= 1 over the working region")]
    CurvatureBelowThreshold(f64),
    #[error("shooting Newton stalled after {0} iterations (residual {1})")]
    NoConvergence(usize, f64),
    #[error("shooting Jacobian is degenerate (smallest singular value {0})")]
    DegenerateJacobian(f64),
    #[error("record carries no reduced-zero provenance or a singular seed")]
    MissingProvenance,
    #[error("energy value {0} outside (0, 3]")]
    BadEnergy(f64),
    #[error(transparent)]
    Flow(#[from] flow::FlowError),
    #[error(transparent)]
    Geometry(#[from] crate::hyperboloid::HyperboloidError),
    #[error(transparent)]
    Variational(#[from] crate::variational::VariationalError),
    #[error(transparent)]
    Reduction(#[from] crate::reduction::ReductionError),
}

/// The perturbation data: effective curvature k = k₀ + ε·k₁.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub k0: f64,
    pub k1: Curvature,
    pub epsilon: f64,
}

impl PerturbationSpec {
    pub fn new(k0: f64, k1: Curvature, epsilon: f64) -> Self {
        assert!(k0 > 1.0, "k0 must exceed the horocycle threshold");
        assert!(epsilon >= 0.0, "epsilon must be nonnegative");
        PerturbationSpec { k0, k1, epsilon }
    }

    pub fn effective(&self) -> Curvature {
        Curvature::sum(
            Curvature::Constant(self.k0),
            Curvature::scale(self.epsilon, self.k1.clone()),
        )
    }

    /// Check inf k > 1 over a disk of the given radius around `center` by
    /// dense sampling.
    pub fn check_above_threshold(
        &self,
        center: &CenterChart,
        radius: f64,
    ) -> Result<(), SolverError> {
        let k = self.effective();
        let mut min_k = f64::INFINITY;
        let m = 16;
        for i in 0..=m {
            let rho = radius * i as f64 / m as f64;
            for j in 0..(4 * m) {
                let phi = 2.0 * PI * j as f64 / (4 * m) as f64;
                let p = center
                    .point(rho * phi.cos(), rho * phi.sin())
                    .map_err(SolverError::Reduction)?;
                min_k = min_k.min(k.value(p));
            }
        }
        if min_k <= 1.0 {
            return Err(SolverError::CurvatureBelowThreshold(min_k));
        }
        Ok(())
    }
}

/// Shooting unknowns: chart coordinates of the start point (x tangential,
/// y normal), direction angle θ in the transported frame, speed s > 0.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ShootingUnknowns {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub s: f64,
}

/// The phase gauge: a chart whose v₁-axis is the predicted initial velocity
/// direction, so the geodesic {x = 0} is the Poincaré section orthogonal to
/// it through the predictor start point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShootingSection {
    pub chart: CenterChart,
}

impl ShootingSection {
    /// Section through `o.position(0)` orthogonal to the predicted velocity.
    pub fn from_predictor(o: &CircleOrbit) -> Self {
        let p = o.position(0.0);
        let v = o.velocity(0.0);
        let t_hat = v * (1.0 / v.norm_m());
        let n_hat = cross_m(p.0, t_hat);
        ShootingSection {
            chart: CenterChart::new(Frame { v0: n_hat, v1: t_hat, w: p.0 }),
        }
    }

    /// Initial state encoded by the unknowns.
    pub fn state(&self, u: &ShootingUnknowns) -> Result<FlowState, SolverError> {
        let p = self.chart.point(u.x, u.y)?;
        let f = self.chart.frame_at(u.x, u.y)?;
        let dir = f.v1 * u.theta.cos() + f.v0 * u.theta.sin();
        Ok(FlowState::new(p, dir * u.s))
    }
}

/// Predictor from a converged reduced zero: the circle orbit at the zero and
/// the exact-circle unknowns on its section.
pub fn seed_from_reduced_zero(
    chart: &CenterChart,
    r: f64,
    zero: &ReducedZero,
) -> Result<(ShootingSection, ShootingUnknowns), SolverError> {
    let orbit = chart.orbit_at(zero.x, zero.y, r)?;
    Ok((
        ShootingSection::from_predictor(&orbit),
        ShootingUnknowns { x: 0.0, y: 0.0, theta: 0.0, s: 2.0 * PI * r },
    ))
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn shoot_config(samples: usize) -> IntegratorConfig {
    IntegratorConfig { method: Method::Rk4 { step: SHOOT_STEP }, renormalize: true, samples }
}

fn integrate_shot(
    section: &ShootingSection,
    u: &ShootingUnknowns,
    k: &Curvature,
    samples: usize,
) -> Result<Trajectory, SolverError> {
    let s0 = section.state(u)?;
    Ok(flow::integrate(&s0, k, 1.0, &shoot_config(samples))?)
}

/// Shooting residual: (chart displacement over one period (2), direction
/// angle mismatch (1), section gauge x (1)).
pub fn shoot_residual(
    u: &ShootingUnknowns,
    spec: &PerturbationSpec,
    section: &ShootingSection,
) -> Result<[f64; 4], SolverError> {
    assert!(u.s > 0.0, "speed must be positive");
    let k = spec.effective();
    let traj = integrate_shot(section, u, &k, 64)?;
    let end = traj.final_state;
    let ulog = log_map(section.chart.base(), end.point);
    let x_end = ulog.vector.dot_m(section.chart.frame.v1);
    let y_end = ulog.vector.dot_m(section.chart.frame.v0);
    let f_end = section.chart.frame_at(x_end, y_end)?;
    let v_end = end.velocity.vector;
    let theta_end = v_end.dot_m(f_end.v0).atan2(v_end.dot_m(f_end.v1));
    Ok([x_end - u.x, y_end - u.y, wrap_angle(theta_end - u.theta), u.x])
}

fn residual_norm(r: &[f64; 4]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn fd_jacobian(
    u: &ShootingUnknowns,
    spec: &PerturbationSpec,
    section: &ShootingSection,
) -> Result<Matrix4<f64>, SolverError> {
    let steps = [FD_STEP_COORD, FD_STEP_COORD, FD_STEP_COORD, FD_STEP_SPEED];
    let mut jac = Matrix4::zeros();
    for col in 0..4 {
        let h = steps[col];
        let mut up = *u;
        let mut um = *u;
        match col {
            0 => {
                up.x += h;
                um.x -= h;
            }
            1 => {
                up.y += h;
                um.y -= h;
            }
            2 => {
                up.theta += h;
                um.theta -= h;
            }
            _ => {
                up.s += h;
                um.s -= h;
            }
        }
        let rp = shoot_residual(&up, spec, section)?;
        let rm = shoot_residual(&um, spec, section)?;
        for row in 0..4 {
            jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// A converged closed orbit with its diagnostics and provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub k0: f64,
    pub epsilon: f64,
    pub k1: Curvature,
    pub unknowns: ShootingUnknowns,
    /// Hyperbolic distance between γ(0) and γ(1).
    pub closure_residual: f64,
    /// Fixed parametrization period.
    pub period: f64,
    pub speed: f64,
    pub floquet: Vec<(f64, f64)>,
    pub geometric_mult_one: usize,
    pub provenance: Option<ReducedZero>,
    pub created_unix: u64,
    pub config_hash: String,
    #[serde(skip)]
    pub curve: Option<Curve>,
}

impl OrbitRecord {
    /// Intrinsic center: the normalized Minkowski mean of the samples (for a
    /// circle this is exactly the hyperbolic center).
    pub fn center(&self) -> Option<HPoint> {
        let curve = self.curve.as_ref()?;
        let mut sum = MVec3::ZERO;
        for p in &curve.points {
            sum = sum + p.0;
        }
        let q = sum.dot_m(sum);
        if q >= 0.0 {
            return None;
        }
        Some(HPoint(sum * (1.0 / (-q).sqrt())))
    }
}

fn offset(u: &ShootingUnknowns, d: &Vector4<f64>, scale: f64) -> ShootingUnknowns {
    ShootingUnknowns {
        x: u.x + scale * d[0],
        y: u.y + scale * d[1],
        theta: u.theta + scale * d[2],
        s: u.s + scale * d[3],
    }
}

/// One pass of damped truncated-SVD Newton; returns (u, res, norm, weak
/// right-singular direction of the last Jacobian, stalled flag).
fn newton_pass(
    mut u: ShootingUnknowns,
    mut res: [f64; 4],
    mut norm: f64,
    spec: &PerturbationSpec,
    section: &ShootingSection,
) -> Result<(ShootingUnknowns, [f64; 4], f64, Vector4<f64>), SolverError> {
    let mut weak = Vector4::zeros();
    for _ in 0..NEWTON_MAX_ITER {
        // drive to the noise floor, not just the acceptance tolerance, so
        // weakly-determined directions are pinned as sharply as possible
        if norm <= 1e-13 {
            break;
        }
        let jac = fd_jacobian(&u, spec, section)?;
        let svd = jac.svd(true, true);
        let (mut smin, mut imin) = (f64::INFINITY, 0);
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s < smin {
                smin = s;
                imin = i;
            }
        }
        weak = svd.v_t.as_ref().expect("requested").row(imin).transpose();
        // pseudo-inverse step: directions at the noise floor are excluded
        // and handled by the polish phase instead
        let rhs = Vector4::from_row_slice(&res);
        let delta = svd
            .solve(&rhs, SOLVE_TRUNC)
            .map_err(|_| SolverError::DegenerateJacobian(0.0))?;
        // Armijo backtracking on ‖residual‖²
        let mut lambda = 1.0f64;
        let mut improved = false;
        while lambda >= 1.0 / 128.0 {
            let trial = offset(&u, &delta, -lambda);
            if trial.s > 0.0 {
                if let Ok(tres) = shoot_residual(&trial, spec, section) {
                    let tnorm = residual_norm(&tres);
                    if tnorm * tnorm <= (1.0 - 1e-4 * lambda) * norm * norm {
                        u = trial;
                        res = tres;
                        norm = tnorm;
                        improved = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break; // stalled at the truncated-direction floor
        }
    }
    Ok((u, res, norm, weak))
}

/// Parabolic line search along the weak direction, where the residual is
/// quadratic in the offset (the linear term sits below the noise floor).
fn polish_weak_direction(
    u: ShootingUnknowns,
    norm: f64,
    weak: &Vector4<f64>,
    spec: &PerturbationSpec,
    section: &ShootingSection,
) -> Result<(ShootingUnknowns, [f64; 4], f64), SolverError> {
    let mut best_u = u;
    let mut best_res = shoot_residual(&u, spec, section)?;
    let mut best = norm;
    let mut a = norm.sqrt().clamp(1e-7, 1e-2);
    for _ in 0..6 {
        let eval = |alpha: f64| -> Result<f64, SolverError> {
            let t = offset(&best_u, weak, alpha);
            if t.s <= 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(residual_norm(&shoot_residual(&t, spec, section)?))
        };
        let (gm, g0, gp) = (eval(-a)?, best, eval(a)?);
        let denom = gm - 2.0 * g0 + gp;
        let alpha = if denom > 0.0 {
            (0.5 * a * (gm - gp) / denom).clamp(-2.0 * a, 2.0 * a)
        } else if gm < gp {
            -a
        } else {
            a
        };
        let trial = offset(&best_u, weak, alpha);
        if trial.s > 0.0 {
            if let Ok(tres) = shoot_residual(&trial, spec, section) {
                let tnorm = residual_norm(&tres);
                if tnorm < best {
                    best_u = trial;
                    best_res = tres;
                    best = tnorm;
                }
            }
        }
        a = (alpha.abs().max(a / 4.0)).max(1e-8);
        if best <= NEWTON_TOL {
            break;
        }
    }
    Ok((best_u, best_res, best))
}

/// Rank cutoff (relative to ‖M‖) for the eigenvalue-1 multiplicity of a
/// perturbed orbit: the ε-split multipliers move (M−I) singular values to
/// ~4e−7·(ε/1e−3), far above the ~1e−13 integration floor but below the
/// coarse cutoff used for the unperturbed multiplicity-3 structure.
pub const PERTURBED_RANK_CUTOFF: f64 = 1e-9;

fn eigenvalue_one_geometric_mult(m: &[[f64; 4]; 4]) -> usize {
    let mut mat = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            mat[(i, j)] = m[i][j];
        }
    }
    let mi = mat - Matrix4::identity();
    let cutoff = PERTURBED_RANK_CUTOFF * mat.norm();
    let svd = mi.svd(false, false);
    let rank = svd.singular_values.iter().filter(|&&s| s >= cutoff).count();
    4 - rank
}

/// Damped Newton on [`shoot_residual`] from the given seed, with a polish
/// phase for the weakly-determined direction.
pub fn solve_orbit(
    spec: &PerturbationSpec,
    section: &ShootingSection,
    seed: &ShootingUnknowns,
    provenance: Option<&ReducedZero>,
) -> Result<OrbitRecord, SolverError> {
    spec.check_above_threshold(&section.chart, 0.5)?;
    let mut u = *seed;
    let mut res = shoot_residual(&u, spec, section)?;
    let mut norm = residual_norm(&res);

    // structural degeneracy check at the seed: on the unperturbed manifold
    // the Jacobian has rank 2 there (closure is blind to center motions)
    let jac0 = fd_jacobian(&u, spec, section)?;
    let mut svs: Vec<f64> = jac0.svd(false, false).singular_values.iter().cloned().collect();
    svs.sort_by(|a, b| b.total_cmp(a));
    if svs[2] < DEGENERATE_SV {
        return Err(SolverError::DegenerateJacobian(svs[2]));
    }

    for _ in 0..5 {
        let (nu, _, nnorm, weak) = newton_pass(u, res, norm, spec, section)?;
        u = nu;
        norm = nnorm;
        if norm <= NEWTON_TOL {
            break;
        }
        let (pu, pres, pnorm) = polish_weak_direction(u, norm, &weak, spec, section)?;
        if pnorm >= norm {
            break; // polish exhausted; floor reached
        }
        u = pu;
        res = pres;
        norm = pnorm;
    }
    if norm > NEWTON_TOL {
        return Err(SolverError::NoConvergence(NEWTON_MAX_ITER, norm));
    }

    let k = spec.effective();
    let traj = integrate_shot(section, &u, &k, 256)?;
    let closure = distance(traj.curve.points[0], traj.final_state.point);
    let mono = crate::variational::monodromy(&traj.curve, &k)?;
    let created_unix =
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    Ok(OrbitRecord {
        k0: spec.k0,
        epsilon: spec.epsilon,
        k1: spec.k1.clone(),
        unknowns: u,
        closure_residual: closure,
        period: 1.0,
        speed: traj.state(0).speed(),
        floquet: mono.eigenvalues.clone(),
        geometric_mult_one: eigenvalue_one_geometric_mult(&mono.matrix),
        provenance: provenance.cloned(),
        created_unix,
        config_hash: String::new(),
        curve: Some(traj.curve),
    })
}

/// Local S¹-degree of the orbit family: minus the local degree of the
/// seeding reduced zero.
pub fn local_s1_degree(record: &OrbitRecord) -> Result<i32, SolverError> {
    let zero = record.provenance.as_ref().ok_or(SolverError::MissingProvenance)?;
    if zero.det.abs() <= 1e-10 {
        return Err(SolverError::MissingProvenance);
    }
    Ok(-zero.local_degree)
}

pub fn monodromy_of_record(record: &OrbitRecord, spec: &PerturbationSpec) -> Result<Monodromy, SolverError> {
    let curve = record.curve.as_ref().ok_or(SolverError::MissingProvenance)?;
    Ok(crate::variational::monodromy(curve, &spec.effective())?)
}

/// Per-energy outcome of the constant-curvature sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum SweepOutcome {
    /// Found the closed circle of radius parameter r with the given closure
    /// residual.
    Closed { r: f64, closure: f64 },
    /// Distance from the start grows monotonically over [1, T].
    Diverging { monotone: bool, d_mid: f64, d_end: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepEntry {
    pub c: f64,
    pub k_effective: f64,
    pub outcome: SweepOutcome,
    pub pass: bool,
}

/// Energy trichotomy for constant k: closed circles below c = 1, divergence
/// at and above it.
pub fn sweep_energy(k: &Curvature, c_values: &[f64]) -> Result<Vec<SweepEntry>, SolverError> {
    let mut entries = Vec::with_capacity(c_values.len());
    for &c in c_values {
        if c <= 0.0 || c > 3.0 {
            return Err(SolverError::BadEnergy(c));
        }
        let k_eff = flow::energy_rescale(k, c)?;
        let k0 = k_eff.value(HPoint::origin());
        let entry = match flow::classify_constant(k0) {
            ConstantClass::Circle(r) => {
                let orbit = CircleOrbit::new(Frame::canonical(), r);
                let s0 = FlowState::new(orbit.position(0.0), orbit.velocity(0.0));
                let cfg = IntegratorConfig {
                    method: Method::Rk45 { tol: 1e-10 },
                    renormalize: true,
                    samples: 256,
                };
                let traj = flow::integrate(&s0, &k_eff, 1.0, &cfg)?;
                let closure = distance(s0.point, traj.final_state.point);
                SweepEntry {
                    c,
                    k_effective: k0,
                    pass: closure <= 1e-8,
                    outcome: SweepOutcome::Closed { r, closure },
                }
            }
            ConstantClass::Horocycle | ConstantClass::Hypercycle => {
                // Integrate in unit-time chunks, boosting the state back to
                // the origin after each one and dragging the start point
                // along.  A single long run loses the plot once coordinates
                // reach ~1e7: the Minkowski norm cancels catastrophically and
                // the speed drifts by O(1).  Re-centered, every chunk stays at
                // desk scale and d(t) = arcosh τ(start) has no cancellation.
                let cfg = IntegratorConfig {
                    method: Method::Rk4 { step: 1.0 / 2048.0 },
                    renormalize: true,
                    samples: 64,
                };
                let t_end = 20usize;
                let mut state = FlowState::new(HPoint::origin(), MVec3::E1);
                let mut start = HPoint::origin().0;
                let mut dists = Vec::with_capacity(t_end + 1);
                dists.push(0.0);
                for _ in 0..t_end {
                    let traj = flow::integrate(&state, &k_eff, 1.0, &cfg)?;
                    let p = traj.final_state.point.0;
                    let spatial = (p.x1 * p.x1 + p.x2 * p.x2).sqrt();
                    let recenter = if spatial < 1e-14 {
                        crate::minkowski::LorentzMap::identity()
                    } else {
                        crate::minkowski::make_boost(
                            spatial.asinh(),
                            (p.x1 / spatial, p.x2 / spatial),
                        )
                        .inverse()
                    };
                    start = recenter.apply(start);
                    state = FlowState::new(
                        project_point(recenter.apply(p))?,
                        recenter.apply(traj.final_state.velocity.vector),
                    );
                    dists.push(start.tau.max(1.0).acosh());
                }
                let monotone = dists.windows(2).all(|w| w[1] > w[0]);
                let d_mid = dists[t_end / 2];
                let d_end = dists[t_end];
                SweepEntry {
                    c,
                    k_effective: k0,
                    pass: monotone && d_end > d_mid,
                    outcome: SweepOutcome::Diverging { monotone, d_mid, d_end },
                }
            }
        };
        entries.push(entry);
    }
    Ok(entries)
}
