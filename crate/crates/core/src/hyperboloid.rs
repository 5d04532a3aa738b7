//! Geometry of the upper hyperboloid sheet ℍ = {τ² − |ξ|² = 1, τ > 0} with
//! the metric induced by g_m.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minkowski::MVec3;
use crate::spectral;

/// Constraint tolerance for points and tangency.
pub const POINT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum HyperboloidError {
    #[error("input is not timelike: <x,x>_m = {0}")]
    SpacelikeInput(f64),
    #[error("input lies on the lower sheet (tau = {0})")]
    WrongSheet(f64),
    #[error("field is not 1-periodic: endpoint mismatch {0}")]
    NonPeriodicField(f64),
    #[error("curve length {0} is not a power of two >= 64")]
    BadSampleCount(usize),
}

/// A point on ℍ: an ambient vector with ⟨p,p⟩ₘ = −1 and τ > 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint(pub MVec3);

impl HPoint {
    /// The "north pole" (0,0,1).
    pub fn origin() -> Self {
        HPoint(MVec3::E3)
    }

    pub fn constraint_residual(&self) -> f64 {
        (self.0.dot_m(self.0) + 1.0).abs()
    }

    pub fn is_valid(&self) -> bool {
        self.constraint_residual() <= POINT_TOL && self.0.tau > 0.0
    }
}

/// A tangent vector at a base point: ⟨vector, base⟩ₘ = 0.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TangentVec {
    pub base: HPoint,
    pub vector: MVec3,
}

impl TangentVec {
    pub fn tangency_residual(&self) -> f64 {
        self.vector.dot_m(self.base.0).abs()
    }

    /// Minkowski norm; tangent vectors on ℍ are spacelike so this is real.
    pub fn norm(&self) -> f64 {
        self.vector.norm2_m().max(0.0).sqrt()
    }
}

/// Radial renormalization x ↦ x/√(−⟨x,x⟩ₘ) onto ℍ.
pub fn project_point(x: MVec3) -> Result<HPoint, HyperboloidError> {
    let q = x.dot_m(x);
    if q >= -1e-14 {
        return Err(HyperboloidError::SpacelikeInput(q));
    }
    if x.tau <= 0.0 {
        return Err(HyperboloidError::WrongSheet(x.tau));
    }
    Ok(HPoint(x * (1.0 / (-q).sqrt())))
}

/// Tangent projection v ↦ v + ⟨v,p⟩ₘ p onto T_pℍ.
pub fn project_tangent(p: HPoint, v: MVec3) -> TangentVec {
    TangentVec { base: p, vector: v + p.0 * v.dot_m(p.0) }
}

/// The π/2 rotation J(p)v = p ×ₘ v on T_pℍ.
pub fn rotate_j(p: HPoint, v: &TangentVec) -> TangentVec {
    TangentVec { base: p, vector: p.0.cross_m(v.vector) }
}

/// Geodesic distance. Computed from the Minkowski chord
/// ⟨q−p, q−p⟩ₘ = 2(cosh d − 1), which avoids the cancellation of
/// arccosh(−⟨p,q⟩ₘ) for nearby points; −⟨p,q⟩ₘ is clamped below at 1.
pub fn distance(p: HPoint, q: HPoint) -> f64 {
    let chord = (q.0 - p.0).norm2_m().max(0.0);
    2.0 * (chord / 4.0).sqrt().asinh()
}

/// Exponential map: cosh(|v|)p + sinh(|v|)v/|v|; renormalizes p + v for
/// |v| below 1e−10.
pub fn exp_map(p: HPoint, v: &TangentVec) -> HPoint {
    let s = v.norm();
    if s < 1e-10 {
        return project_point(p.0 + v.vector).expect("small tangent step stays timelike");
    }
    HPoint(p.0 * s.cosh() + v.vector * (s.sinh() / s))
}

/// Inverse of [`exp_map`]: the tangent vector at `p` whose geodesic reaches `q`.
pub fn log_map(p: HPoint, q: HPoint) -> TangentVec {
    let d = distance(p, q);
    if d < 1e-14 {
        return TangentVec { base: p, vector: MVec3::ZERO };
    }
    let u = (q.0 - p.0 * d.cosh()) * (d / d.sinh());
    project_tangent(p, u)
}

/// Parallel transport of `x` along the radial geodesic t ↦ exp_p(t v) to its
/// endpoint. The unit normal p ×ₘ u is constant along the geodesic and the
/// unit tangent boosts, so transport is a 2×2 rotation-free recombination.
pub fn parallel_transport_along(p: HPoint, v: &TangentVec, x: &TangentVec) -> TangentVec {
    let s = v.norm();
    if s < 1e-14 {
        return TangentVec { base: p, vector: x.vector };
    }
    let u = v.vector * (1.0 / s);
    let n = p.0.cross_m(u);
    let a = x.vector.dot_m(u);
    let b = x.vector.dot_m(n);
    let q = exp_map(p, v);
    let u_end = p.0 * s.sinh() + u * s.cosh();
    TangentVec { base: q, vector: u_end * a + n * b }
}

/// Speed statistics of a sampled curve.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpeedStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// A 1-periodic curve sampled at N uniform parameters on [0,1), with ambient
/// velocities d γ/dt per sample. N is a power of two ≥ 64 so spectral
/// operations need no resampling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<HPoint>,
    pub velocities: Vec<MVec3>,
    pub speed: SpeedStats,
}

impl Curve {
    pub fn new(points: Vec<HPoint>, velocities: Vec<MVec3>) -> Result<Self, HyperboloidError> {
        let n = points.len();
        if n < 64 || !n.is_power_of_two() || velocities.len() != n {
            return Err(HyperboloidError::BadSampleCount(n));
        }
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        let mut sum = 0.0;
        for (p, v) in points.iter().zip(&velocities) {
            // relative tolerance: far out on ℍ the constraint residual of a
            // freshly projected point is still quadratic in |p| by roundoff
            debug_assert!(
                p.constraint_residual() <= POINT_TOL * p.0.norm_e().powi(2).max(1.0),
                "off-hyperboloid sample: residual {}",
                p.constraint_residual()
            );
            let s = v.dot_m(*v).max(0.0).sqrt();
            min = min.min(s);
            max = max.max(s);
            sum += s;
            let _ = p;
        }
        Ok(Curve {
            points,
            velocities,
            speed: SpeedStats { min, max, mean: sum / n as f64 },
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Parameter of the j-th sample.
    pub fn param(&self, j: usize) -> f64 {
        j as f64 / self.n() as f64
    }

    /// Max hyperboloid-constraint drift over the samples.
    pub fn constraint_drift(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.constraint_residual())
            .fold(0.0, f64::max)
    }

    /// Estimate of the jump |γ(1) − γ(0)| hiding at the sample seam: the
    /// eighth finite difference across the wrap, normalized by its central
    /// coefficient. Vanishes to ~h⁸ for samples of a smooth 1-periodic curve
    /// and is of the order of the jump for a curve that fails to close.
    pub fn closure_gap(&self) -> f64 {
        const C: [f64; 9] = [1.0, -8.0, 28.0, -56.0, 70.0, -56.0, 28.0, -8.0, 1.0];
        let n = self.n();
        let mut acc = MVec3::ZERO;
        for (i, c) in C.iter().enumerate() {
            acc = acc + self.points[(n - 8 + i) % n].0 * *c;
        }
        acc.norm_e() / 70.0
    }

    /// Band-limited resampling to `new_n` points, followed by constraint
    /// renormalization of the interpolated positions.
    pub fn refine(&self, new_n: usize) -> Result<Curve, HyperboloidError> {
        let pos: Vec<MVec3> = self.points.iter().map(|p| p.0).collect();
        let new_pos = spectral::resample_mvec(&pos, new_n);
        let new_vel = spectral::resample_mvec(&self.velocities, new_n);
        let mut points = Vec::with_capacity(new_n);
        let mut velocities = Vec::with_capacity(new_n);
        for (x, v) in new_pos.into_iter().zip(new_vel) {
            let p = project_point(x)?;
            points.push(p);
            velocities.push(project_tangent(p, v).vector);
        }
        Curve::new(points, velocities)
    }

    /// Phase shift by `k` grid samples: γ(t) ↦ γ(t + k/N).
    pub fn phase_shifted(&self, k: usize) -> Curve {
        let n = self.n();
        let points = (0..n).map(|j| self.points[(j + k) % n]).collect();
        let velocities = (0..n).map(|j| self.velocities[(j + k) % n]).collect();
        Curve::new(points, velocities).expect("shift preserves sampling")
    }

    pub fn transformed(&self, a: &crate::minkowski::LorentzMap) -> Curve {
        let points = self.points.iter().map(|p| HPoint(a.apply(p.0))).collect();
        let velocities = self.velocities.iter().map(|v| a.apply(*v)).collect();
        Curve::new(points, velocities).expect("isometry preserves sampling")
    }
}

/// Covariant derivative of a tangent field along a closed curve:
/// D_t V = V̇ + ⟨V̇, γ⟩ₘ γ, with V̇ the spectral parameter derivative.
///
/// `field` may carry N samples or N+1 with a duplicated endpoint; in the
/// latter case the wrap mismatch must stay below 1e−8.
pub fn covariant_derivative(
    curve: &Curve,
    field: &[MVec3],
) -> Result<Vec<TangentVec>, HyperboloidError> {
    let n = curve.n();
    let field = if field.len() == n + 1 {
        let gap = (field[n] - field[0]).norm_e();
        if gap > 1e-8 {
            return Err(HyperboloidError::NonPeriodicField(gap));
        }
        &field[..n]
    } else {
        field
    };
    assert_eq!(field.len(), n, "field must match the curve sampling");
    let dots = spectral::derivative_mvec(field);
    Ok(curve
        .points
        .iter()
        .zip(dots)
        .map(|(&p, vdot)| project_tangent(p, vdot))
        .collect())
}
