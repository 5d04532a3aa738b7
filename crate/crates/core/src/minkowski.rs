//! Linear algebra of (ℝ³, g_m) with g_m = (dξ¹)² + (dξ²)² − (dτ)².
//!
//! The twisted cross product ×ₘ satisfies, for all a, b, c, d ∈ ℝ³:
//!
//! ```text
//! ⟨a ×ₘ b, a⟩ₘ = ⟨a ×ₘ b, b⟩ₘ = 0
//! a ×ₘ (b ×ₘ c) = −b⟨a,c⟩ₘ + c⟨a,b⟩ₘ
//! ⟨a ×ₘ b, c ×ₘ d⟩ₘ = −⟨a,c⟩ₘ⟨b,d⟩ₘ + ⟨b,c⟩ₘ⟨a,d⟩ₘ
//! ```

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// Absolute tolerance for Lorentz-map and metric identities.
pub const ATOL: f64 = 1e-12;
/// Relative tolerance matching [`ATOL`]; all desk-scale quantities are O(1)–O(10).
pub const RTOL: f64 = 1e-12;
/// Tolerance for frame orthonormality residuals.
pub const FRAME_TOL: f64 = 1e-10;

/// A vector of ℝ³ carrying Minkowski semantics: components (ξ¹, ξ², τ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MVec3 {
    pub x1: f64,
    pub x2: f64,
    pub tau: f64,
}

impl MVec3 {
    pub const ZERO: MVec3 = MVec3 { x1: 0.0, x2: 0.0, tau: 0.0 };
    pub const E1: MVec3 = MVec3 { x1: 1.0, x2: 0.0, tau: 0.0 };
    pub const E2: MVec3 = MVec3 { x1: 0.0, x2: 1.0, tau: 0.0 };
    pub const E3: MVec3 = MVec3 { x1: 0.0, x2: 0.0, tau: 1.0 };

    pub const fn new(x1: f64, x2: f64, tau: f64) -> Self {
        MVec3 { x1, x2, tau }
    }

    /// Minkowski inner product a¹b¹ + a²b² − a³b³.
    pub fn dot_m(self, other: MVec3) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2 - self.tau * other.tau
    }

    /// Twisted cross product (a³b² − a²b³, a¹b³ − a³b¹, a¹b² − a²b¹).
    pub fn cross_m(self, other: MVec3) -> MVec3 {
        MVec3 {
            x1: self.tau * other.x2 - self.x2 * other.tau,
            x2: self.x1 * other.tau - self.tau * other.x1,
            tau: self.x1 * other.x2 - self.x2 * other.x1,
        }
    }

    /// Minkowski square ⟨v,v⟩ₘ (any sign).
    pub fn norm2_m(self) -> f64 {
        self.dot_m(self)
    }

    /// √⟨v,v⟩ₘ for spacelike vectors; NaN when the square is negative.
    pub fn norm_m(self) -> f64 {
        self.norm2_m().sqrt()
    }

    /// Euclidean norm, used only for scale-aware tolerances.
    pub fn norm_e(self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.tau * self.tau).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.tau.is_finite()
    }
}

impl Add for MVec3 {
    type Output = MVec3;
    fn add(self, o: MVec3) -> MVec3 {
        MVec3::new(self.x1 + o.x1, self.x2 + o.x2, self.tau + o.tau)
    }
}

impl Sub for MVec3 {
    type Output = MVec3;
    fn sub(self, o: MVec3) -> MVec3 {
        MVec3::new(self.x1 - o.x1, self.x2 - o.x2, self.tau - o.tau)
    }
}

impl Mul<f64> for MVec3 {
    type Output = MVec3;
    fn mul(self, s: f64) -> MVec3 {
        MVec3::new(self.x1 * s, self.x2 * s, self.tau * s)
    }
}

impl Neg for MVec3 {
    type Output = MVec3;
    fn neg(self) -> MVec3 {
        self * -1.0
    }
}

/// Minkowski inner product of two ambient vectors.
pub fn minkowski_inner(a: MVec3, b: MVec3) -> f64 {
    a.dot_m(b)
}

/// Twisted cross product of two ambient vectors.
pub fn cross_m(a: MVec3, b: MVec3) -> MVec3 {
    a.cross_m(b)
}

/// An element of SO(2,1)₊: preserves g_m, has det 1, and maps the upper
/// hyperboloid sheet to itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzMap {
    /// Row-major 3×3 entries.
    pub entries: [[f64; 3]; 3],
}

impl LorentzMap {
    pub fn identity() -> Self {
        LorentzMap {
            entries: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn apply(&self, v: MVec3) -> MVec3 {
        let e = &self.entries;
        MVec3 {
            x1: e[0][0] * v.x1 + e[0][1] * v.x2 + e[0][2] * v.tau,
            x2: e[1][0] * v.x1 + e[1][1] * v.x2 + e[1][2] * v.tau,
            tau: e[2][0] * v.x1 + e[2][1] * v.x2 + e[2][2] * v.tau,
        }
    }

    pub fn compose(&self, other: &LorentzMap) -> LorentzMap {
        let mut entries = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for (k, row) in other.entries.iter().enumerate() {
                    entries[i][j] += self.entries[i][k] * row[j];
                }
            }
        }
        LorentzMap { entries }
    }

    /// Inverse via the g_m-adjoint: A⁻¹ = I₂₁ Aᵀ I₂₁ for A ∈ O(2,1).
    pub fn inverse(&self) -> LorentzMap {
        let e = &self.entries;
        let mut t = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                t[i][j] = e[j][i];
            }
        }
        // conjugate by I_{2,1}: flip sign of entries mixing space and time rows/cols
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let si = if i == 2 { -1.0 } else { 1.0 };
                let sj = if j == 2 { -1.0 } else { 1.0 };
                *v *= si * sj;
            }
        }
        LorentzMap { entries: t }
    }

    pub fn det(&self) -> f64 {
        let e = &self.entries;
        e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
            - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
            + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
    }

    /// Residuals of the SO(2,1)₊ invariants on the canonical basis:
    /// max |⟨Aeᵢ,Aeⱼ⟩ₘ − ⟨eᵢ,eⱼ⟩ₘ|, |det − 1|, and the sign of entry (3,3).
    pub fn invariant_residuals(&self) -> LorentzResiduals {
        let basis = [MVec3::E1, MVec3::E2, MVec3::E3];
        let mut metric = 0.0f64;
        for (i, &ei) in basis.iter().enumerate() {
            for &ej in &basis[i..] {
                let expected = ei.dot_m(ej);
                let got = self.apply(ei).dot_m(self.apply(ej));
                metric = metric.max((got - expected).abs());
            }
        }
        LorentzResiduals {
            metric,
            det: (self.det() - 1.0).abs(),
            upper_sheet: self.entries[2][2] > 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        let r = self.invariant_residuals();
        r.metric <= 16.0 * ATOL && r.det <= 16.0 * ATOL && r.upper_sheet
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LorentzResiduals {
    pub metric: f64,
    pub det: f64,
    pub upper_sheet: bool,
}

/// Rotation about the τ-axis by `angle` radians.
pub fn make_rotation(angle: f64) -> LorentzMap {
    let (s, c) = angle.sin_cos();
    LorentzMap {
        entries: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    }
}

/// Boost of rapidity `s` along the spatial unit direction `(d1, d2)`.
pub fn make_boost(rapidity: f64, direction: (f64, f64)) -> LorentzMap {
    let (d1, d2) = direction;
    let n = (d1 * d1 + d2 * d2).sqrt();
    let (d1, d2) = if n == 0.0 { (1.0, 0.0) } else { (d1 / n, d2 / n) };
    let ch = rapidity.cosh();
    let sh = rapidity.sinh();
    // I + (cosh−1)·dd^T on the spatial block, sinh coupling to τ
    LorentzMap {
        entries: [
            [1.0 + (ch - 1.0) * d1 * d1, (ch - 1.0) * d1 * d2, sh * d1],
            [(ch - 1.0) * d1 * d2, 1.0 + (ch - 1.0) * d2 * d2, sh * d2],
            [sh * d1, sh * d2, ch],
        ],
    }
}

/// A positively oriented g_m-orthonormal system (v₀, v₁, w) with
/// ⟨v₀,v₀⟩ₘ = ⟨v₁,v₁⟩ₘ = 1, ⟨w,w⟩ₘ = −1 and v₀ ×ₘ v₁ = w.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Frame {
    pub v0: MVec3,
    pub v1: MVec3,
    pub w: MVec3,
}

/// Per-invariant residuals of a candidate frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FrameResiduals {
    pub v0_unit: f64,
    pub v1_unit: f64,
    pub w_timelike_unit: f64,
    pub v0_v1: f64,
    pub v0_w: f64,
    pub v1_w: f64,
    /// |v₀ ×ₘ v₁ − w| (Euclidean, orientation check).
    pub orientation: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        self.v0_unit
            .max(self.v1_unit)
            .max(self.w_timelike_unit)
            .max(self.v0_v1)
            .max(self.v0_w)
            .max(self.v1_w)
            .max(self.orientation)
    }
}

impl Frame {
    /// The canonical frame (e₁, e₂, e₃).
    pub fn canonical() -> Self {
        Frame { v0: MVec3::E1, v1: MVec3::E2, w: MVec3::E3 }
    }

    pub fn residuals(&self) -> FrameResiduals {
        FrameResiduals {
            v0_unit: (self.v0.dot_m(self.v0) - 1.0).abs(),
            v1_unit: (self.v1.dot_m(self.v1) - 1.0).abs(),
            w_timelike_unit: (self.w.dot_m(self.w) + 1.0).abs(),
            v0_v1: self.v0.dot_m(self.v1).abs(),
            v0_w: self.v0.dot_m(self.w).abs(),
            v1_w: self.v1.dot_m(self.w).abs(),
            orientation: (self.v0.cross_m(self.v1) - self.w).norm_e(),
        }
    }

    pub fn transformed(&self, a: &LorentzMap) -> Frame {
        Frame {
            v0: a.apply(self.v0),
            v1: a.apply(self.v1),
            w: a.apply(self.w),
        }
    }
}

/// True iff all frame invariants hold within [`FRAME_TOL`]; the report lists
/// each residual.
pub fn is_positive_frame(f: &Frame) -> (bool, FrameResiduals) {
    let r = f.residuals();
    (r.max() <= FRAME_TOL, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(crate::DEFAULT_SEED)
    }

    fn random_vec(rng: &mut ChaCha8Rng) -> MVec3 {
        MVec3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        )
    }

    fn random_lorentz(rng: &mut ChaCha8Rng) -> LorentzMap {
        let rot1 = make_rotation(rng.gen_range(-3.0..3.0));
        let boost = make_boost(rng.gen_range(-1.5..1.5), (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rot2 = make_rotation(rng.gen_range(-3.0..3.0));
        rot2.compose(&boost).compose(&rot1)
    }

    #[test]
    fn inner_product_signature() {
        assert_eq!(minkowski_inner(MVec3::E1, MVec3::E1), 1.0);
        assert_eq!(minkowski_inner(MVec3::E3, MVec3::E3), -1.0);
        assert_eq!(
            minkowski_inner(MVec3::new(1.0, 2.0, 3.0), MVec3::new(4.0, 5.0, 6.0)),
            -4.0
        );
    }

    #[test]
    fn cross_m_components() {
        assert_eq!(cross_m(MVec3::E1, MVec3::E2), MVec3::E3);
        assert_eq!(cross_m(MVec3::E3, MVec3::E1), -MVec3::E2);
    }

    #[test]
    fn triple_product_identity() {
        let a = MVec3::new(1.0, 0.0, 1.0);
        let b = MVec3::new(0.0, 1.0, 0.0);
        let lhs = a.cross_m(b.cross_m(a));
        let rhs = -b * a.dot_m(a) + a * a.dot_m(b);
        assert!((lhs - rhs).norm_e() <= ATOL);
    }

    #[test]
    fn cross_orthogonality_sampled() {
        let mut rng = rng();
        for _ in 0..1000 {
            let a = random_vec(&mut rng);
            let b = random_vec(&mut rng);
            let c = a.cross_m(b);
            let scale = ATOL * a.norm_e() * b.norm_e();
            assert!(c.dot_m(a).abs() <= scale.max(ATOL));
            assert!(c.dot_m(b).abs() <= scale.max(ATOL));
        }
    }

    #[test]
    fn cross_inner_identity_sampled() {
        let mut rng = rng();
        for _ in 0..1000 {
            let (a, b, c, d) = (
                random_vec(&mut rng),
                random_vec(&mut rng),
                random_vec(&mut rng),
                random_vec(&mut rng),
            );
            let lhs = a.cross_m(b).dot_m(c.cross_m(d));
            let rhs = -a.dot_m(c) * b.dot_m(d) + b.dot_m(c) * a.dot_m(d);
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn rotation_and_boost_generators() {
        assert_eq!(make_rotation(0.0), LorentzMap::identity());
        assert_eq!(make_boost(0.0, (1.0, 0.0)), LorentzMap::identity());
        let s = 0.7;
        let b = make_boost(s, (1.0, 0.0));
        let p = b.apply(MVec3::E3);
        assert!((p.x1 - s.sinh()).abs() <= ATOL);
        assert!(p.x2.abs() <= ATOL);
        assert!((p.tau - s.cosh()).abs() <= ATOL);
        assert!((p.dot_m(p) + 1.0).abs() <= 8.0 * ATOL);
    }

    #[test]
    fn random_lorentz_maps_are_valid() {
        let mut rng = rng();
        for _ in 0..100 {
            let a = random_lorentz(&mut rng);
            assert!(a.is_valid(), "residuals {:?}", a.invariant_residuals());
            let inv = a.inverse().compose(&a);
            assert!(inv.invariant_residuals().metric <= 1e-10);
            let id = LorentzMap::identity();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((inv.entries[i][j] - id.entries[i][j]).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn canonical_frame_positive() {
        let (ok, _) = is_positive_frame(&Frame::canonical());
        assert!(ok);
    }

    #[test]
    fn swapped_frame_negative() {
        let f = Frame { v0: MVec3::E2, v1: MVec3::E1, w: MVec3::E3 };
        let (ok, r) = is_positive_frame(&f);
        assert!(!ok);
        assert!(r.orientation > 1.0);
    }

    #[test]
    fn frame_transport_sampled() {
        let mut rng = rng();
        for _ in 0..200 {
            let a = random_lorentz(&mut rng);
            let f = Frame::canonical().transformed(&a);
            let (ok, r) = is_positive_frame(&f);
            assert!(ok, "residuals {r:?}");
            // equivariance A(v ×ₘ w) = Av ×ₘ Aw
            let v = random_vec(&mut rng);
            let w = random_vec(&mut rng);
            let lhs = a.apply(v.cross_m(w));
            let rhs = a.apply(v).cross_m(a.apply(w));
            assert!((lhs - rhs).norm_e() <= 1e-10 * (1.0 + v.norm_e() * w.norm_e()));
        }
    }
}
