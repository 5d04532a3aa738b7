//! Prescribed-curvature functions k: ℍ → ℝ and their Riemannian gradients.
//!
//! The builtins are Minkowski-linear functions p ↦ ⟨p,u⟩ₘ and the closure of
//! those under sum/scale/product and Lorentz pullback — enough to express
//! every Morse test function the reduction and solver modules need.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperboloid::{exp_map, project_tangent, HPoint, TangentVec};
use crate::minkowski::{LorentzMap, MVec3};

#[derive(Debug, Error)]
pub enum CurvatureError {
    #[error("unknown curvature selector `{0}`")]
    UnknownSelector(String),
    #[error("bad parameter in selector `{0}`: {1}")]
    BadParameter(String, String),
}

/// A smooth curvature function on ℍ, closed under the combinators below.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Curvature {
    /// k ≡ c.
    Constant(f64),
    /// p ↦ ⟨p,u⟩ₘ.
    Linear(MVec3),
    Sum(Box<Curvature>, Box<Curvature>),
    Scale(f64, Box<Curvature>),
    Product(Box<Curvature>, Box<Curvature>),
    /// k ∘ A for a Lorentz map A.
    Pullback(LorentzMap, Box<Curvature>),
}

impl Curvature {
    pub fn linear(u: MVec3) -> Self {
        Curvature::Linear(u)
    }

    pub fn sum(a: Curvature, b: Curvature) -> Self {
        Curvature::Sum(Box::new(a), Box::new(b))
    }

    pub fn scale(c: f64, a: Curvature) -> Self {
        Curvature::Scale(c, Box::new(a))
    }

    pub fn product(a: Curvature, b: Curvature) -> Self {
        Curvature::Product(Box::new(a), Box::new(b))
    }

    pub fn pullback(a: LorentzMap, k: Curvature) -> Self {
        Curvature::Pullback(a, Box::new(k))
    }

    pub fn value(&self, p: HPoint) -> f64 {
        match self {
            Curvature::Constant(c) => *c,
            Curvature::Linear(u) => p.0.dot_m(*u),
            Curvature::Sum(a, b) => a.value(p) + b.value(p),
            Curvature::Scale(c, a) => c * a.value(p),
            Curvature::Product(a, b) => a.value(p) * b.value(p),
            Curvature::Pullback(a, k) => k.value(HPoint(a.apply(p.0))),
        }
    }

    /// Riemannian gradient on ℍ: the tangent vector with ⟨∇k, X⟩ₘ = dk·X.
    pub fn gradient(&self, p: HPoint) -> TangentVec {
        match self {
            Curvature::Constant(_) => TangentVec { base: p, vector: MVec3::ZERO },
            Curvature::Linear(u) => project_tangent(p, *u),
            Curvature::Sum(a, b) => TangentVec {
                base: p,
                vector: a.gradient(p).vector + b.gradient(p).vector,
            },
            Curvature::Scale(c, a) => TangentVec { base: p, vector: a.gradient(p).vector * *c },
            Curvature::Product(a, b) => TangentVec {
                base: p,
                vector: a.gradient(p).vector * b.value(p) + b.gradient(p).vector * a.value(p),
            },
            // d(k∘A)·X = dk(Ap)·AX, and A is a g_m-isometry, so the gradient
            // pulls back by A⁻¹.
            Curvature::Pullback(a, k) => {
                let g = k.gradient(HPoint(a.apply(p.0)));
                TangentVec { base: p, vector: a.inverse().apply(g.vector) }
            }
        }
    }

    /// Directional derivative of k along the geodesic t ↦ exp_p(t u), by
    /// central differences; the oracle for gradient consistency.
    pub fn fd_directional(&self, p: HPoint, u: &TangentVec, h: f64) -> f64 {
        let plus = TangentVec { base: p, vector: u.vector * h };
        let minus = TangentVec { base: p, vector: u.vector * (-h) };
        (self.value(exp_map(p, &plus)) - self.value(exp_map(p, &minus))) / (2.0 * h)
    }
}

/// Parse a CLI/config curvature selector.
///
/// Grammar: `const:<c>`, `linear-e1|linear-e2|linear-e3`, `linear:<a>,<b>,<c>`
/// (the vector u of ⟨p,u⟩ₘ), `quad-e3` = ⟨p,e₃⟩ₘ², `saddle` = ⟨p,e₁⟩ₘ⟨p,e₂⟩ₘ.
pub fn parse_selector(s: &str) -> Result<Curvature, CurvatureError> {
    let bad = |msg: &str| CurvatureError::BadParameter(s.to_string(), msg.to_string());
    match s {
        "linear-e1" => return Ok(Curvature::Linear(MVec3::E1)),
        "linear-e2" => return Ok(Curvature::Linear(MVec3::E2)),
        "linear-e3" => return Ok(Curvature::Linear(MVec3::E3)),
        "quad-e3" => {
            return Ok(Curvature::product(
                Curvature::Linear(MVec3::E3),
                Curvature::Linear(MVec3::E3),
            ))
        }
        "saddle" => {
            return Ok(Curvature::product(
                Curvature::Linear(MVec3::E1),
                Curvature::Linear(MVec3::E2),
            ))
        }
        _ => {}
    }
    if let Some(arg) = s.strip_prefix("const:") {
        let c: f64 = arg.parse().map_err(|_| bad("expected a number"))?;
        return Ok(Curvature::Constant(c));
    }
    if let Some(arg) = s.strip_prefix("linear:") {
        let parts: Vec<&str> = arg.split(',').collect();
        if parts.len() != 3 {
            return Err(bad("expected three comma-separated numbers"));
        }
        let mut v = [0.0f64; 3];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part.trim().parse().map_err(|_| bad("expected a number"))?;
        }
        return Ok(Curvature::Linear(MVec3::new(v[0], v[1], v[2])));
    }
    Err(CurvatureError::UnknownSelector(s.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::{make_boost, make_rotation};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(crate::DEFAULT_SEED)
    }

    fn random_point(rng: &mut ChaCha8Rng) -> HPoint {
        let b = make_boost(rng.gen_range(-1.0..1.0), (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        HPoint(b.apply(MVec3::E3))
    }

    fn samples() -> Vec<Curvature> {
        vec![
            Curvature::Constant(1.7),
            Curvature::Linear(MVec3::E3),
            Curvature::Linear(MVec3::new(0.4, -0.2, 1.1)),
            Curvature::sum(Curvature::Linear(MVec3::E1), Curvature::Constant(2.0)),
            Curvature::scale(-0.5, Curvature::Linear(MVec3::E2)),
            parse_selector("saddle").unwrap(),
            parse_selector("quad-e3").unwrap(),
            Curvature::pullback(
                make_boost(0.7, (1.0, -0.5)),
                parse_selector("quad-e3").unwrap(),
            ),
        ]
    }

    #[test]
    fn linear_values() {
        // ⟨p,e₃⟩ₘ = −τ = −cosh(dist to origin): maximal at the origin
        let p = HPoint::origin();
        assert_eq!(Curvature::Linear(MVec3::E3).value(p), -1.0);
        assert_eq!(Curvature::Linear(MVec3::E1).value(p), 0.0);
        let q = HPoint(MVec3::new(1.0, 0.0, 2f64.sqrt()));
        assert!((Curvature::Linear(MVec3::E1).value(q) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // invariant from the module contract: relative error ≤ 1e−5 at step 1e−4
        let mut rng = rng();
        for k in samples() {
            for _ in 0..50 {
                let p = random_point(&mut rng);
                let raw = MVec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let u = project_tangent(p, raw);
                if u.norm() < 1e-3 {
                    continue;
                }
                let fd = k.fd_directional(p, &u, 1e-4);
                let an = k.gradient(p).vector.dot_m(u.vector);
                let scale = fd.abs().max(an.abs()).max(1e-8);
                assert!(
                    (fd - an).abs() / scale <= 1e-5,
                    "k={k:?} fd={fd} analytic={an}"
                );
            }
        }
    }

    #[test]
    fn gradient_is_tangent() {
        let mut rng = rng();
        for k in samples() {
            for _ in 0..20 {
                let p = random_point(&mut rng);
                assert!(k.gradient(p).tangency_residual() <= 1e-10);
            }
        }
    }

    #[test]
    fn pullback_matches_composition() {
        let mut rng = rng();
        let a = make_rotation(0.9).compose(&make_boost(0.6, (0.2, 1.0)));
        let k = parse_selector("saddle").unwrap();
        let pk = Curvature::pullback(a.clone(), k.clone());
        for _ in 0..50 {
            let p = random_point(&mut rng);
            assert!((pk.value(p) - k.value(HPoint(a.apply(p.0)))).abs() <= 1e-13);
        }
    }

    #[test]
    fn selector_parsing() {
        assert!(matches!(parse_selector("linear-e3").unwrap(), Curvature::Linear(u) if u == MVec3::E3));
        assert!(matches!(parse_selector("const:2.5").unwrap(), Curvature::Constant(c) if c == 2.5));
        let lin = parse_selector("linear:1,0,-0.5").unwrap();
        assert!(matches!(lin, Curvature::Linear(u) if u == MVec3::new(1.0, 0.0, -0.5)));
        assert!(matches!(
            parse_selector("bogus"),
            Err(CurvatureError::UnknownSelector(_))
        ));
        assert!(matches!(
            parse_selector("const:abc"),
            Err(CurvatureError::BadParameter(_, _))
        ));
        assert!(matches!(
            parse_selector("linear:1,2"),
            Err(CurvatureError::BadParameter(_, _))
        ));
    }
}
