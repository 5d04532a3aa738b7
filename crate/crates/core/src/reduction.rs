//! Finite-dimensional reduction: the σ₂/σ₃ projections of a perturbation k₁
//! onto the degenerate (W₂, W₃) directions, the planar field H over a
//! center chart, zero finding, and local degrees.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::Curvature;
use crate::hyperboloid::{exp_map, parallel_transport_along, HPoint, TangentVec};
use crate::minkowski::{make_boost, Frame, LorentzMap};
use crate::orbits::CircleOrbit;
use crate::spectral::integrate_periodic;
use crate::store::fmt_f64;

/// Quadrature resolution for the σ integrals (spectrally accurate, so modest).
pub const SIGMA_SAMPLES: usize = 256;
/// Default chart radius.
pub const CHART_RADIUS: f64 = 1.0;
/// Newton convergence target on |H|.
pub const ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("r = {0} is at the resonant radius (2π)⁻¹ where σ₂/σ₃ blow up")]
    ResonantRadius(f64),
    #[error("chart coordinates ({0}, {1}) outside chart radius {CHART_RADIUS}")]
    ChartDomain(f64, f64),
    #[error("Newton did not reach |H| <= {ZERO_TOL} in {0} iterations (residual {1})")]
    NoConvergence(usize, f64),
    #[error("Jacobian of H is singular at a candidate zero: det = {0}")]
    SingularJacobian(f64),
    #[error("remainder fit is degenerate: {0}")]
    DegenerateFit(String),
}

/// A geodesic normal chart (x, y) ↦ exp_{w₀}(x v₁ + y v₀) with the frame
/// carried outward by parallel transport along the radial geodesics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CenterChart {
    /// Frame at the base point: tangent pair (v₀, v₁) and w = base point.
    pub frame: Frame,
}

impl CenterChart {
    pub fn new(frame: Frame) -> Self {
        CenterChart { frame }
    }

    /// Chart at `base` with the frame obtained by boosting the canonical one
    /// from the origin (identity when `base` is the origin).
    pub fn at_point(base: HPoint) -> Self {
        let spatial = (base.0.x1 * base.0.x1 + base.0.x2 * base.0.x2).sqrt();
        let frame = if spatial < 1e-15 {
            Frame::canonical()
        } else {
            let boost = make_boost(base.0.tau.acosh(), (base.0.x1, base.0.x2));
            Frame::canonical().transformed(&boost)
        };
        CenterChart { frame }
    }

    pub fn base(&self) -> HPoint {
        HPoint(self.frame.w)
    }

    fn radial(&self, x: f64, y: f64) -> TangentVec {
        TangentVec { base: self.base(), vector: self.frame.v1 * x + self.frame.v0 * y }
    }

    pub fn point(&self, x: f64, y: f64) -> Result<HPoint, ReductionError> {
        if x * x + y * y > CHART_RADIUS * CHART_RADIUS {
            return Err(ReductionError::ChartDomain(x, y));
        }
        Ok(exp_map(self.base(), &self.radial(x, y)))
    }

    /// Frame at (x, y): (v₀, v₁) parallel-transported along the radial
    /// geodesic, w the chart point itself.
    pub fn frame_at(&self, x: f64, y: f64) -> Result<Frame, ReductionError> {
        let radial = self.radial(x, y);
        let p = self.point(x, y)?;
        let base = self.base();
        let v0 = parallel_transport_along(
            base,
            &radial,
            &TangentVec { base, vector: self.frame.v0 },
        );
        let v1 = parallel_transport_along(
            base,
            &radial,
            &TangentVec { base, vector: self.frame.v1 },
        );
        Ok(Frame { v0: v0.vector, v1: v1.vector, w: p.0 })
    }

    /// Circle orbit of radius parameter r centered at the chart point.
    pub fn orbit_at(&self, x: f64, y: f64, r: f64) -> Result<CircleOrbit, ReductionError> {
        Ok(CircleOrbit::new(self.frame_at(x, y)?, r))
    }

    /// Max mismatch of the chart derivative identities ∂w/∂x|₀ = v₁,
    /// ∂w/∂y|₀ = v₀ against central differences.
    pub fn derivative_residual(&self) -> f64 {
        let h = 1e-6;
        let fd = |xp: HPoint, xm: HPoint| (xp.0 - xm.0) * (1.0 / (2.0 * h));
        let dx = fd(self.point(h, 0.0).unwrap(), self.point(-h, 0.0).unwrap());
        let dy = fd(self.point(0.0, h).unwrap(), self.point(0.0, -h).unwrap());
        (dx - self.frame.v1).norm_e().max((dy - self.frame.v0).norm_e())
    }

    pub fn transformed(&self, a: &LorentzMap) -> CenterChart {
        CenterChart { frame: self.frame.transformed(a) }
    }

    /// Chart with the tangent pair rotated by `angle` around the base.
    pub fn rotated(&self, angle: f64) -> CenterChart {
        let (s, c) = angle.sin_cos();
        CenterChart {
            frame: Frame {
                v0: self.frame.v0 * c - self.frame.v1 * s,
                v1: self.frame.v1 * c + self.frame.v0 * s,
                w: self.frame.w,
            },
        }
    }
}

/// The (σ₂, σ₃) projection values.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReducedValue {
    pub sigma2: f64,
    pub sigma3: f64,
}

impl ReducedValue {
    pub fn norm(&self) -> f64 {
        self.sigma2.hypot(self.sigma3)
    }
}

/// σ₂ = 8π²r²/(1−4π²r²) ∫₀¹ k₁(α(t)) cos(2πt) dt, σ₃ the sine analogue.
pub fn sigma23(o: &CircleOrbit, k1: &Curvature) -> Result<ReducedValue, ReductionError> {
    let r = o.r;
    let denom = 1.0 - 4.0 * PI * PI * r * r;
    if crate::variational::is_resonant(r) {
        return Err(ReductionError::ResonantRadius(r));
    }
    let pref = 8.0 * PI * PI * r * r / denom;
    let n = SIGMA_SAMPLES;
    let mut cos_integrand = Vec::with_capacity(n);
    let mut sin_integrand = Vec::with_capacity(n);
    for j in 0..n {
        let t = j as f64 / n as f64;
        let val = k1.value(o.position(t));
        let (s, c) = (2.0 * PI * t).sin_cos();
        cos_integrand.push(val * c);
        sin_integrand.push(val * s);
    }
    Ok(ReducedValue {
        sigma2: pref * integrate_periodic(&cos_integrand),
        sigma3: pref * integrate_periodic(&sin_integrand),
    })
}

/// The planar field H(x, y) = (σ₂, σ₃) of the orbit centered at the chart
/// point (x, y).
pub fn reduced_field(
    chart: &CenterChart,
    r: f64,
    k1: &Curvature,
    x: f64,
    y: f64,
) -> Result<ReducedValue, ReductionError> {
    sigma23(&chart.orbit_at(x, y, r)?, k1)
}

/// A converged zero of H with its Jacobian data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedZero {
    pub x: f64,
    pub y: f64,
    pub residual: f64,
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    /// sign(det dH); the reduced-field side of the degree identity.
    pub local_degree: i32,
    pub iterations: usize,
}

const NEWTON_FD_STEP: f64 = 1e-5;
const NEWTON_MAX_ITER: usize = 50;

fn h_jacobian(
    chart: &CenterChart,
    r: f64,
    k1: &Curvature,
    x: f64,
    y: f64,
) -> Result<[[f64; 2]; 2], ReductionError> {
    let h = NEWTON_FD_STEP;
    let fx_p = reduced_field(chart, r, k1, x + h, y)?;
    let fx_m = reduced_field(chart, r, k1, x - h, y)?;
    let fy_p = reduced_field(chart, r, k1, x, y + h)?;
    let fy_m = reduced_field(chart, r, k1, x, y - h)?;
    Ok([
        [(fx_p.sigma2 - fx_m.sigma2) / (2.0 * h), (fy_p.sigma2 - fy_m.sigma2) / (2.0 * h)],
        [(fx_p.sigma3 - fx_m.sigma3) / (2.0 * h), (fy_p.sigma3 - fy_m.sigma3) / (2.0 * h)],
    ])
}

/// Damped 2D Newton on H from the given start; converges to |H| ≤ 1e−10.
pub fn find_reduced_zero(
    chart: &CenterChart,
    r: f64,
    k1: &Curvature,
    start: (f64, f64),
) -> Result<ReducedZero, ReductionError> {
    let (mut x, mut y) = start;
    let mut value = reduced_field(chart, r, k1, x, y)?;
    for iter in 0..NEWTON_MAX_ITER {
        if value.norm() <= ZERO_TOL {
            let jac = h_jacobian(chart, r, k1, x, y)?;
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-12 {
                return Err(ReductionError::SingularJacobian(det));
            }
            let local_degree = if det.abs() > 1e-10 { det.signum() as i32 } else { 0 };
            return Ok(ReducedZero {
                x,
                y,
                residual: value.norm(),
                jacobian: jac,
                det,
                local_degree,
                iterations: iter,
            });
        }
        let jac = h_jacobian(chart, r, k1, x, y)?;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-300 {
            return Err(ReductionError::SingularJacobian(det));
        }
        let dx = (jac[1][1] * value.sigma2 - jac[0][1] * value.sigma3) / det;
        let dy = (-jac[1][0] * value.sigma2 + jac[0][0] * value.sigma3) / det;
        // Armijo-style damping on |H|
        let mut lambda = 1.0;
        loop {
            let (nx, ny) = (x - lambda * dx, y - lambda * dy);
            match reduced_field(chart, r, k1, nx, ny) {
                Ok(next) if next.norm() < value.norm() => {
                    x = nx;
                    y = ny;
                    value = next;
                    break;
                }
                _ if lambda > 1.0 / 64.0 => lambda *= 0.5,
                _ => return Err(ReductionError::NoConvergence(iter, value.norm())),
            }
        }
    }
    Err(ReductionError::NoConvergence(NEWTON_MAX_ITER, value.norm()))
}

/// Central-difference Hessian of k₁ in chart coordinates at (x, y); the
/// independent oracle for the degree identity sgn det dH = sgn det ∇dk₁.
pub fn fd_hessian_k1(
    chart: &CenterChart,
    k1: &Curvature,
    x: f64,
    y: f64,
) -> Result<[[f64; 2]; 2], ReductionError> {
    let h = 1e-4;
    let f = |x: f64, y: f64| -> Result<f64, ReductionError> {
        Ok(k1.value(chart.point(x, y)?))
    };
    let fxx = (f(x + h, y)? - 2.0 * f(x, y)? + f(x - h, y)?) / (h * h);
    let fyy = (f(x, y + h)? - 2.0 * f(x, y)? + f(x, y - h)?) / (h * h);
    let fxy = (f(x + h, y + h)? - f(x + h, y - h)? - f(x - h, y + h)? + f(x - h, y - h)?)
        / (4.0 * h * h);
    Ok([[fxx, fxy], [fxy, fyy]])
}

/// Outcome of the small-r remainder fit for
/// e(r) = (1−4π²r²)/(8π²r²)·σ₂ − ½ r·dk₁(w₀)·v₁.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum AsymptoticOutcome {
    /// All remainders at machine zero (exactly Minkowski-linear k₁).
    Exact,
    /// Fitted log-log slope of the remainder.
    Slope(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub radii: Vec<f64>,
    pub remainders: Vec<f64>,
    pub outcome: AsymptoticOutcome,
    pub pass: bool,
}

/// Check the first-order asymptotics of σ₂ at the chart base over a
/// decreasing sequence of radii; passes if the remainder decays with slope
/// ≥ 1.8 (or is exactly zero for linear k₁).
pub fn asymptotic_check(
    chart: &CenterChart,
    k1: &Curvature,
    radii: &[f64],
) -> Result<AsymptoticReport, ReductionError> {
    assert!(radii.len() >= 3, "need at least three radii");
    assert!(
        radii.windows(2).all(|w| w[1] < w[0]),
        "radii must decrease"
    );
    let dk_v1 = k1.gradient(chart.base()).vector.dot_m(chart.frame.v1);
    let mut remainders = Vec::with_capacity(radii.len());
    for &r in radii {
        let sigma = sigma23(&chart.orbit_at(0.0, 0.0, r)?, k1)?;
        let lead = (1.0 - 4.0 * PI * PI * r * r) / (8.0 * PI * PI * r * r) * sigma.sigma2;
        remainders.push(lead - 0.5 * r * dk_v1);
    }
    let max_e = remainders.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if max_e < 1e-14 {
        return Ok(AsymptoticReport {
            radii: radii.to_vec(),
            remainders,
            outcome: AsymptoticOutcome::Exact,
            pass: true,
        });
    }
    if remainders.iter().any(|e| e.abs() < 1e-16) {
        return Err(ReductionError::DegenerateFit(
            "some remainders vanish while others do not".into(),
        ));
    }
    // least-squares slope of log|e| against log r
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = remainders.iter().map(|e| e.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(AsymptoticReport {
        radii: radii.to_vec(),
        remainders,
        outcome: AsymptoticOutcome::Slope(slope),
        pass: slope >= 1.8,
    })
}

/// H-field grid CSV (columns x, y, sigma2, sigma3) on a uniform
/// (2m+1)×(2m+1) grid over [−half_width, half_width]².
pub fn write_h_grid_csv<W: Write>(
    out: &mut W,
    chart: &CenterChart,
    r: f64,
    k1: &Curvature,
    m: usize,
    half_width: f64,
) -> Result<(), Box<dyn std::error::Error>> {
    writeln!(out, "x,y,sigma2,sigma3")?;
    let steps = 2 * m + 1;
    for i in 0..steps {
        for j in 0..steps {
            let x = -half_width + 2.0 * half_width * i as f64 / (steps - 1) as f64;
            let y = -half_width + 2.0 * half_width * j as f64 / (steps - 1) as f64;
            let v = reduced_field(chart, r, k1, x, y)?;
            writeln!(
                out,
                "{},{},{},{}",
                fmt_f64(x),
                fmt_f64(y),
                fmt_f64(v.sigma2),
                fmt_f64(v.sigma3)
            )?;
        }
    }
    Ok(())
}
