//! Linearized dynamics along solutions of the flow: the Jacobi-type
//! equation, monodromy/Floquet data, and the rotating-frame spectral
//! operator (−D²+1) on circle orbits.
//!
//! On a circle orbit the frame (α̇, α×ₘα̇) rotates with rate ω = 2π√(1+r²),
//! so both (−D²+1) and the linearized operator act frequency-by-frequency as
//! 2×2 symbols on the Fourier coefficients of (λ₁, λ₂).

use std::f64::consts::PI;

use nalgebra::Matrix4;
use num_complex::Complex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::Curvature;
use crate::flow::FlowState;
use crate::hyperboloid::{project_tangent, Curve, HPoint, TangentVec};
use crate::minkowski::MVec3;
use crate::orbits::CircleOrbit;
use crate::spectral::HalfSpectrum;

/// Relative singular-value cutoff for monodromy rank decisions.
pub const RANK_CUTOFF: f64 = 1e-6;
/// |r − (2π)⁻¹| below this counts as the resonant radius where the symbol
/// coefficient 1 − 4π²r² vanishes.
pub const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("base curve does not close: gap {0}")]
    NotClosed(f64),
    #[error("spectral symbol is singular at frequency {0}")]
    SingularSymbol(usize),
}

/// State of the linearized equation: W and its covariant derivative, both
/// ambient tangent vectors along the base curve.
#[derive(Clone, Copy, Debug)]
pub struct LinState {
    pub w: MVec3,
    pub dw: MVec3,
}

/// Is r at the degenerate radius (2π)⁻¹ where W₂/W₃ leave the symbol range?
pub fn is_resonant(r: f64) -> bool {
    (r - 1.0 / (2.0 * PI)).abs() <= RESONANCE_TOL
}

/// Time derivative of an ambient [`LinState`] along the base solution:
/// Ẇ = D_tW + ⟨W,γ̇⟩ₘγ and D_t(D_tW) = D²W from the linearized equation
/// D²W = −R(W,γ̇)γ̇ + |γ̇|⁻¹⟨D_tW,γ̇⟩ₘ k Jγ̇ + |γ̇|(dk·W) Jγ̇
///       + |γ̇| k (W ×ₘ γ̇ + J D_tW),   R(W,γ̇)γ̇ = −W|γ̇|²ₘ + ⟨W,γ̇⟩ₘγ̇.
pub fn linearized_rhs(base: &FlowState, k: &Curvature, s: &LinState) -> LinState {
    let gamma = base.point.0;
    let gdot = base.velocity.vector;
    let speed2 = gdot.dot_m(gdot).max(0.0);
    let speed = speed2.sqrt();
    let j_gdot = gamma.cross_m(gdot);
    let kval = k.value(base.point);
    let grad = k.gradient(base.point).vector;

    let mut d2w = s.w * speed2 - gdot * s.w.dot_m(gdot)
        + j_gdot * (kval * s.dw.dot_m(gdot) / speed.max(1e-300))
        + j_gdot * (speed * grad.dot_m(s.w))
        + (s.w.cross_m(gdot) + gamma.cross_m(s.dw)) * (speed * kval);
    // the ×ₘ terms carry a normal component; the covariant equation is the
    // tangential part
    d2w = d2w + gamma * d2w.dot_m(gamma);

    LinState { w: s.dw + gamma * s.w.dot_m(gdot), dw: d2w + gamma * s.dw.dot_m(gdot) }
}

// one RK4 step of the base flow coupled with a batch of linearized states
fn rk4_augmented(
    p: MVec3,
    v: MVec3,
    lin: &[LinState],
    h: f64,
    k: &Curvature,
) -> (MVec3, MVec3, Vec<LinState>) {
    let eval = |p: MVec3, v: MVec3, lin: &[LinState]| {
        let base = FlowState {
            point: HPoint(p),
            velocity: TangentVec { base: HPoint(p), vector: v },
        };
        let (dp, dv) = crate::flow::magnetic_rhs(&base, k);
        let dl: Vec<LinState> = lin.iter().map(|s| linearized_rhs(&base, k, s)).collect();
        (dp, dv, dl)
    };
    let add = |p: MVec3, v: MVec3, lin: &[LinState], d: &(MVec3, MVec3, Vec<LinState>), c: f64| {
        let lin2: Vec<LinState> = lin
            .iter()
            .zip(&d.2)
            .map(|(s, ds)| LinState { w: s.w + ds.w * c, dw: s.dw + ds.dw * c })
            .collect();
        (p + d.0 * c, v + d.1 * c, lin2)
    };
    let k1 = eval(p, v, lin);
    let (p2, v2, l2) = add(p, v, lin, &k1, h / 2.0);
    let k2 = eval(p2, v2, &l2);
    let (p3, v3, l3) = add(p, v, lin, &k2, h / 2.0);
    let k3 = eval(p3, v3, &l3);
    let (p4, v4, l4) = add(p, v, lin, &k3, h);
    let k4 = eval(p4, v4, &l4);
    let lin_out = (0..lin.len())
        .map(|i| LinState {
            w: lin[i].w
                + (k1.2[i].w + k2.2[i].w * 2.0 + k3.2[i].w * 2.0 + k4.2[i].w) * (h / 6.0),
            dw: lin[i].dw
                + (k1.2[i].dw + k2.2[i].dw * 2.0 + k3.2[i].dw * 2.0 + k4.2[i].dw) * (h / 6.0),
        })
        .collect();
    (
        p + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (h / 6.0),
        v + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (h / 6.0),
        lin_out,
    )
}

/// Integrate linearized states over [0, t_end] along the base solution
/// through `s0`; returns `samples+1` snapshots (including both endpoints)
/// for each initial state. Fixed-step RK4, deterministic.
pub fn integrate_linearized(
    s0: &FlowState,
    k: &Curvature,
    inits: &[LinState],
    t_end: f64,
    samples: usize,
    substeps: usize,
) -> Vec<Vec<LinState>> {
    let mut p = s0.point.0;
    let mut v = s0.velocity.vector;
    let mut lin = inits.to_vec();
    let mut out: Vec<Vec<LinState>> = vec![Vec::with_capacity(samples + 1); inits.len()];
    let h = t_end / (samples * substeps) as f64;
    for j in 0..=samples {
        for (series, s) in out.iter_mut().zip(&lin) {
            series.push(*s);
        }
        if j < samples {
            for _ in 0..substeps {
                let (np, nv, nl) = rk4_augmented(p, v, &lin, h, k);
                p = np;
                v = nv;
                lin = nl;
            }
        }
    }
    out
}

/// Floquet data of a closed base solution: the period map of the linearized
/// flow in the orthonormal frame (γ̇, Jγ̇)/|γ̇| at the base point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Monodromy {
    pub matrix: [[f64; 4]; 4],
    pub eigenvalues: Vec<(f64, f64)>,
    pub geometric_mult_one: usize,
    pub algebraic_mult_one: usize,
    /// |det M − Π eigenvalues|.
    pub det_residual: f64,
    pub closure_gap: f64,
}

fn rank_at_cutoff(m: &Matrix4<f64>, cutoff: f64) -> usize {
    m.svd(false, false)
        .singular_values
        .iter()
        .filter(|s| **s > cutoff)
        .count()
}

/// Monodromy matrix of the linearized flow over one period of `base`
/// (period-1 parametrization). Errors if the curve does not close to 1e−8.
pub fn monodromy(base: &Curve, k: &Curvature) -> Result<Monodromy, VariationalError> {
    let gap = base.closure_gap();
    if gap > 1e-8 {
        return Err(VariationalError::NotClosed(gap));
    }
    let p0 = base.points[0];
    let v0 = base.velocities[0];
    let s0 = FlowState { point: p0, velocity: project_tangent(p0, v0) };
    let speed = s0.speed();
    let t = v0 * (1.0 / speed);
    let n = p0.0.cross_m(t);
    let basis = [
        LinState { w: t, dw: MVec3::ZERO },
        LinState { w: n, dw: MVec3::ZERO },
        LinState { w: MVec3::ZERO, dw: t },
        LinState { w: MVec3::ZERO, dw: n },
    ];
    let evolved = integrate_linearized(&s0, k, &basis, 1.0, 1, 4096);
    let coords = |s: &LinState| {
        [
            s.w.dot_m(t),
            s.w.dot_m(n),
            s.dw.dot_m(t),
            s.dw.dot_m(n),
        ]
    };
    let mut matrix = [[0.0; 4]; 4];
    for (j, series) in evolved.iter().enumerate() {
        let c = coords(series.last().unwrap());
        for (i, row) in matrix.iter_mut().enumerate() {
            row[j] = c[i];
        }
    }
    let m = Matrix4::from_fn(|i, j| matrix[i][j]);
    let norm = m.norm();
    let cutoff = RANK_CUTOFF * norm;
    let m_minus_i = m - Matrix4::identity();
    let geometric_mult_one = 4 - rank_at_cutoff(&m_minus_i, cutoff);
    // Jordan structure of eigenvalue 1 from the rank drop of (M−I)²; the
    // squared noise floor scales with ‖M−I‖
    let algebraic_mult_one =
        4 - rank_at_cutoff(&(m_minus_i * m_minus_i), cutoff * m_minus_i.norm());
    let eig = m.complex_eigenvalues();
    let mut prod = Complex::new(1.0, 0.0);
    for e in eig.iter() {
        prod *= Complex::new(e.re, e.im);
    }
    let det_residual = (Complex::new(m.determinant(), 0.0) - prod).norm();
    Ok(Monodromy {
        matrix,
        eigenvalues: eig.iter().map(|e| (e.re, e.im)).collect(),
        geometric_mult_one,
        algebraic_mult_one,
        det_residual,
        closure_gap: gap,
    })
}

/// Fourier coefficients (rfft layout, length N/2+1) of the rotating-frame
/// components of a tangent field V = λ₁ α̇ + λ₂ (α ×ₘ α̇) along a circle
/// orbit.
#[derive(Clone, Debug)]
pub struct FrameSeries {
    pub l1: Vec<Complex<f64>>,
    pub l2: Vec<Complex<f64>>,
    pub n: usize,
}

impl FrameSeries {
    pub fn zero(n: usize) -> Self {
        FrameSeries {
            l1: vec![Complex::new(0.0, 0.0); n / 2 + 1],
            l2: vec![Complex::new(0.0, 0.0); n / 2 + 1],
            n,
        }
    }

    pub fn from_components(l1: &[f64], l2: &[f64]) -> Self {
        let s1 = HalfSpectrum::from_samples(l1);
        let s2 = HalfSpectrum::from_samples(l2);
        FrameSeries { n: s1.n, l1: s1.coeffs, l2: s2.coeffs }
    }

    pub fn to_components(&self) -> (Vec<f64>, Vec<f64>) {
        let s1 = HalfSpectrum { coeffs: self.l1.clone(), n: self.n };
        let s2 = HalfSpectrum { coeffs: self.l2.clone(), n: self.n };
        (s1.to_samples(), s2.to_samples())
    }

    /// Decompose an ambient tangent field sampled along the orbit.
    pub fn from_field(o: &CircleOrbit, field: &[MVec3]) -> Self {
        let n = field.len();
        let speed2 = o.lambda() * o.lambda();
        let mut l1 = Vec::with_capacity(n);
        let mut l2 = Vec::with_capacity(n);
        for (j, v) in field.iter().enumerate() {
            let t = j as f64 / n as f64;
            let adot = o.velocity(t);
            let c = o.m_vec(t) * (-2.0 * PI * o.r);
            l1.push(v.dot_m(adot) / speed2);
            l2.push(v.dot_m(c) / speed2);
        }
        FrameSeries::from_components(&l1, &l2)
    }

    /// Reassemble the ambient tangent field at the orbit's samples.
    pub fn to_field(&self, o: &CircleOrbit) -> Vec<MVec3> {
        let (l1, l2) = self.to_components();
        (0..self.n)
            .map(|j| {
                let t = j as f64 / self.n as f64;
                let c = o.m_vec(t) * (-2.0 * PI * o.r);
                o.velocity(t) * l1[j] + c * l2[j]
            })
            .collect()
    }
}

/// Apply (or invert) the rotating-frame operator (−D²+1): per frequency k,
/// with ω = 2π√(1+r²), K = ω²+1, a = 4π²k² + K, b = 2ω·2πk:
/// out₁ = a·λ₁ + ib·λ₂, out₂ = a·λ₂ − ib·λ₁.
pub fn spectral_apply_d2plus1(
    o: &CircleOrbit,
    series: &FrameSeries,
    invert: bool,
) -> Result<FrameSeries, VariationalError> {
    let omega = 2.0 * PI * (1.0 + o.r * o.r).sqrt();
    let big_k = omega * omega + 1.0;
    let mut out = FrameSeries::zero(series.n);
    for k in 0..=series.n / 2 {
        let a = 4.0 * PI * PI * (k * k) as f64 + big_k;
        let b = 2.0 * omega * 2.0 * PI * k as f64;
        let ib = Complex::new(0.0, b);
        if invert {
            // A = [[a, ib], [−ib, a]], det = a² − b² = 4π²(k−√(1+r²))²+1 > 0
            let det = a * a - b * b;
            if det.abs() < 1e-12 {
                return Err(VariationalError::SingularSymbol(k));
            }
            out.l1[k] = (series.l1[k] * a - ib * series.l2[k]) / det;
            out.l2[k] = (series.l2[k] * a + ib * series.l1[k]) / det;
        } else {
            out.l1[k] = series.l1[k] * a + ib * series.l2[k];
            out.l2[k] = series.l2[k] * a - ib * series.l1[k];
        }
    }
    Ok(out)
}

/// Apply the linearized operator L (whose kernel is ⟨W₁,W₂,W₃⟩) in the
/// rotating frame: L₁ = −λ₁″ + ωλ₂′, L₂ = −λ₂″ − 4π²λ₂.
pub fn spectral_apply_l(o: &CircleOrbit, series: &FrameSeries) -> FrameSeries {
    let omega = 2.0 * PI * (1.0 + o.r * o.r).sqrt();
    let mut out = FrameSeries::zero(series.n);
    for k in 0..=series.n / 2 {
        let ksq = 4.0 * PI * PI * (k * k) as f64;
        let d = Complex::new(0.0, 2.0 * PI * k as f64);
        out.l1[k] = series.l1[k] * ksq + d * series.l2[k] * omega;
        out.l2[k] = series.l2[k] * (ksq - 4.0 * PI * PI);
    }
    out
}

/// DX = (−D²+1)⁻¹ L on frame series.
pub fn spectral_apply_dx(
    o: &CircleOrbit,
    series: &FrameSeries,
) -> Result<FrameSeries, VariationalError> {
    spectral_apply_d2plus1(o, &spectral_apply_l(o, series), true)
}

/// The L² pairing ⟨U, V⟩ = ∫⟨U(t), V(t)⟩ₘ dt of two frame series
/// (⟨α̇,α̇⟩ₘ = ⟨α×ₘα̇, α×ₘα̇⟩ₘ = 4π²r²).
pub fn frame_l2_pairing(o: &CircleOrbit, u: &FrameSeries, v: &FrameSeries) -> f64 {
    let speed2 = o.lambda() * o.lambda();
    let half = u.n / 2;
    let mut acc = 0.0;
    for k in 0..=half {
        let weight = if k == 0 || k == half { 1.0 } else { 2.0 };
        acc += weight * ((u.l1[k] * v.l1[k].conj()).re + (u.l2[k] * v.l2[k].conj()).re);
    }
    speed2 * acc
}

/// Coupling constant of the E₊ first-harmonic constraint:
/// f₂ = ρ·(y cos − x sin) for f₁ = x cos + y sin.
pub fn e_plus_coupling(r: f64) -> f64 {
    8.0 * PI * PI * (1.0 + r * r).sqrt() / (4.0 * PI * PI * (2.0 + r * r) + 1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PositivityReport {
    pub r: f64,
    pub trials: usize,
    pub seed: u64,
    pub min_form_value: f64,
    pub negative_count: usize,
    pub resonant: bool,
    /// Eigenvalue of DX on the α×ₘα̇ direction, measured spectrally.
    pub dx_eigenvalue: f64,
    pub pass: bool,
}

/// Sample the quadratic form ⟨(−D²+1)DX(V), V⟩ = ⟨LV, V⟩ on random V ∈ E₊
/// (λ₁ ⊥ constants; λ₂ ⊥ constants and first harmonics except the coupled
/// f₂ part; band-limited to 32 harmonics).
pub fn check_e_plus_positivity(o: &CircleOrbit, trials: usize, seed: u64) -> PositivityReport {
    let n = 128;
    let rho = e_plus_coupling(o.r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_form = f64::INFINITY;
    let mut negative = 0usize;
    for _ in 0..trials {
        let mut series = FrameSeries::zero(n);
        for k in 1..=32usize {
            series.l1[k] = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if k >= 2 {
                series.l2[k] = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        // first-harmonic constraint f₂ = ρ(y cos − x sin) ⟺ c₁(λ₂) = iρ c₁(λ₁)
        series.l2[1] = Complex::new(0.0, rho) * series.l1[1];
        let lv = spectral_apply_l(o, &series);
        let form = frame_l2_pairing(o, &lv, &series);
        if form <= 0.0 {
            negative += 1;
        }
        min_form = min_form.min(form);
    }
    // measured DX eigenvalue on the pure α×ₘα̇ direction (constant λ₂)
    let mut jdir = FrameSeries::zero(n);
    jdir.l2[0] = Complex::new(1.0, 0.0);
    let image = spectral_apply_dx(o, &jdir).expect("symbol regular");
    let dx_eigenvalue = image.l2[0].re;
    PositivityReport {
        r: o.r,
        trials,
        seed,
        min_form_value: min_form,
        negative_count: negative,
        resonant: is_resonant(o.r),
        dx_eigenvalue,
        pass: negative == 0 && !is_resonant(o.r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperboloid::covariant_derivative;
    use crate::minkowski::Frame;
    use crate::orbits::KernelFieldId;

    fn canonical(r: f64) -> CircleOrbit {
        CircleOrbit::new(Frame::canonical(), r)
    }

    #[test]
    fn w1_satisfies_linearized_equation_pointwise() {
        // k' ≡ 0, W = γ̇: both sides of the linearized equation are the
        // t-derivative of the flow equation itself
        let o = canonical(0.6);
        let k = Curvature::Constant(o.k0());
        for j in 0..16 {
            let t = j as f64 / 16.0;
            let base = o.alpha_eval(t);
            let (w1, dw1) = o.kernel_field(KernelFieldId(1), t);
            let rhs = linearized_rhs(&base, &k, &LinState { w: w1, dw: dw1 });
            // D²W₁ must equal the closed-form derivative of D_tW₁
            let h = 1e-6;
            let (_, dw1_p) = o.kernel_field(KernelFieldId(1), t + h);
            let (_, dw1_m) = o.kernel_field(KernelFieldId(1), t - h);
            let fd = (dw1_p - dw1_m) * (1.0 / (2.0 * h));
            let fd_cov = fd + base.point.0 * fd.dot_m(base.point.0);
            let rhs_cov = rhs.dw + base.point.0 * rhs.dw.dot_m(base.point.0);
            assert!((rhs_cov - fd_cov).norm_e() <= 1e-4 * (1.0 + fd_cov.norm_e()), "t={t}");
        }
    }

    #[test]
    fn closed_form_kernel_fields_reproduced_by_integration() {
        for r in [1.0, 0.3] {
            let o = canonical(r);
            let k = Curvature::Constant(o.k0());
            let s0 = o.alpha_eval(0.0);
            let inits: Vec<LinState> = (1..4)
                .map(|i| {
                    let (w, dw) = o.kernel_field(KernelFieldId(i), 0.0);
                    LinState { w, dw }
                })
                .collect();
            let series = integrate_linearized(&s0, &k, &inits, 1.0, 64, 64);
            for (idx, traj) in series.iter().enumerate() {
                let id = KernelFieldId(idx + 1);
                let mut sup = 0.0f64;
                for (j, s) in traj.iter().enumerate() {
                    let t = j as f64 / 64.0;
                    let (w, _) = o.kernel_field(id, t);
                    sup = sup.max((s.w - w).norm_e());
                }
                assert!(sup <= 1e-7, "field {} sup error {sup} at r={r}", idx + 1);
            }
        }
    }

    #[test]
    fn circle_monodromy_structure() {
        let o = canonical(1.0);
        let k = Curvature::Constant(o.k0());
        let m = monodromy(&o.curve(256), &k).unwrap();
        assert_eq!(m.geometric_mult_one, 3, "matrix {:?}", m.matrix);
        assert_eq!(m.algebraic_mult_one, 4);
        assert!(m.det_residual <= 1e-8);
    }

    #[test]
    fn monodromy_jordan_block_maps_w0_to_w1() {
        // (M − I)·state(W₀) = state(W₁) in frame coordinates
        let o = canonical(0.5);
        let k = Curvature::Constant(o.k0());
        let m = monodromy(&o.curve(256), &k).unwrap();
        let s0 = o.alpha_eval(0.0);
        let speed = s0.speed();
        let t_hat = s0.velocity.vector * (1.0 / speed);
        let n_hat = s0.point.0.cross_m(t_hat);
        let coords = |w: MVec3, dw: MVec3| {
            [w.dot_m(t_hat), w.dot_m(n_hat), dw.dot_m(t_hat), dw.dot_m(n_hat)]
        };
        let (w0, dw0) = o.kernel_field(KernelFieldId(0), 0.0);
        let (w1, dw1) = o.kernel_field(KernelFieldId(1), 0.0);
        let x0 = coords(w0, dw0);
        let x1 = coords(w1, dw1);
        for i in 0..4 {
            let mut mx = 0.0;
            for j in 0..4 {
                mx += m.matrix[i][j] * x0[j];
            }
            assert!(
                ((mx - x0[i]) - x1[i]).abs() <= 1e-6 * (1.0 + x1[i].abs()),
                "component {i}"
            );
        }
    }

    #[test]
    fn monodromy_is_deterministic() {
        let o = canonical(0.4);
        let k = Curvature::Constant(o.k0());
        let a = monodromy(&o.curve(128), &k).unwrap();
        let b = monodromy(&o.curve(128), &k).unwrap();
        assert_eq!(a.matrix, b.matrix);
    }

    #[test]
    fn monodromy_rejects_open_curves() {
        // a trajectory that spirals away (horocycle segment) must be refused
        let s0 = FlowState::new(HPoint::origin(), MVec3::E1);
        let traj = crate::flow::integrate(
            &s0,
            &Curvature::Constant(1.0),
            1.0,
            &crate::flow::IntegratorConfig::default(),
        )
        .unwrap();
        assert!(matches!(
            monodromy(&traj.curve, &Curvature::Constant(1.0)),
            Err(VariationalError::NotClosed(_))
        ));
    }

    #[test]
    fn d2plus1_image_of_w1() {
        let o = canonical(1.0);
        let n = 128;
        let mut series = FrameSeries::zero(n);
        series.l1[0] = Complex::new(1.0, 0.0);
        let out = spectral_apply_d2plus1(&o, &series, false).unwrap();
        let factor = 4.0 * PI * PI * 2.0 + 1.0; // 8π²+1 ≈ 79.9568
        assert!((out.l1[0].re - factor).abs() <= 1e-10);
        assert!((factor - 79.956835).abs() <= 1e-5);
        for k in 1..=n / 2 {
            assert!(out.l1[k].norm() <= 1e-12 && out.l2[k].norm() <= 1e-12);
        }
    }

    #[test]
    fn d2plus1_image_of_w2() {
        // input −2πr·W₂ ⟺ λ₁ = √(1+r²) sin(2πt), λ₂ = cos(2πt);
        // image must be λ₁ = √(1+r²)(4π²r²+1) sin, λ₂ = (1−4π²r²) cos
        for r in [1.0, 0.3] {
            let o = canonical(r);
            let rho = (1.0 + r * r).sqrt();
            let n = 128;
            let l1: Vec<f64> = (0..n)
                .map(|j| rho * (2.0 * PI * j as f64 / n as f64).sin())
                .collect();
            let l2: Vec<f64> = (0..n).map(|j| (2.0 * PI * j as f64 / n as f64).cos()).collect();
            let series = FrameSeries::from_components(&l1, &l2);
            let out = spectral_apply_d2plus1(&o, &series, false).unwrap();
            let (o1, o2) = out.to_components();
            for j in 0..n {
                let t = j as f64 / n as f64;
                let e1 = rho * (4.0 * PI * PI * r * r + 1.0) * (2.0 * PI * t).sin();
                let e2 = (1.0 - 4.0 * PI * PI * r * r) * (2.0 * PI * t).cos();
                assert!((o1[j] - e1).abs() <= 1e-10, "r={r} j={j}");
                assert!((o2[j] - e2).abs() <= 1e-10, "r={r} j={j}");
            }
        }
    }

    #[test]
    fn invert_round_trips() {
        let o = canonical(0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(crate::DEFAULT_SEED);
        let n = 128;
        let mut series = FrameSeries::zero(n);
        for k in 0..=n / 2 {
            series.l1[k] = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            series.l2[k] = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let fwd = spectral_apply_d2plus1(&o, &series, false).unwrap();
        let back = spectral_apply_d2plus1(&o, &fwd, true).unwrap();
        for k in 0..=n / 2 {
            assert!((back.l1[k] - series.l1[k]).norm() <= 1e-12);
            assert!((back.l2[k] - series.l2[k]).norm() <= 1e-12);
        }
    }

    #[test]
    fn kernel_fields_lie_in_l_kernel() {
        let o = canonical(0.35);
        let n = 128;
        for idx in 1..4usize {
            let field: Vec<MVec3> = (0..n)
                .map(|j| o.kernel_field(KernelFieldId(idx), j as f64 / n as f64).0)
                .collect();
            let series = FrameSeries::from_field(&o, &field);
            let lv = spectral_apply_l(&o, &series);
            for k in 0..=n / 2 {
                assert!(
                    lv.l1[k].norm() <= 1e-9 && lv.l2[k].norm() <= 1e-9,
                    "field {idx} frequency {k}"
                );
            }
        }
    }

    #[test]
    fn spectral_and_time_domain_agree() {
        // (−D²+1)V computed spectrally vs two spectral covariant derivatives
        // of the assembled ambient field
        let o = canonical(0.4);
        let n = 256;
        let curve = o.curve(n);
        let mut series = FrameSeries::zero(n);
        let mut rng = ChaCha8Rng::seed_from_u64(crate::DEFAULT_SEED ^ 1);
        for k in 0..=8usize {
            series.l1[k] = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            series.l2[k] = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let field = series.to_field(&o);
        let dv: Vec<MVec3> = covariant_derivative(&curve, &field)
            .unwrap()
            .into_iter()
            .map(|t| t.vector)
            .collect();
        let d2v: Vec<MVec3> = covariant_derivative(&curve, &dv)
            .unwrap()
            .into_iter()
            .map(|t| t.vector)
            .collect();
        let expected = spectral_apply_d2plus1(&o, &series, false).unwrap().to_field(&o);
        for j in (0..n).step_by(13) {
            let time_domain = field[j] - d2v[j];
            assert!(
                (time_domain - expected[j]).norm_e() <= 1e-8 * (1.0 + expected[j].norm_e()),
                "sample {j}"
            );
        }
    }

    #[test]
    fn dx_eigenvalue_and_positivity() {
        let o = canonical(0.1);
        let report = check_e_plus_positivity(&o, 1000, crate::DEFAULT_SEED);
        assert!(report.pass, "min form {}", report.min_form_value);
        assert!(report.min_form_value > 0.0);
        let expect = -4.0 * PI * PI / (4.0 * PI * PI * (1.0 + 0.01) + 1.0);
        assert!((report.dx_eigenvalue - expect).abs() <= 1e-10);
        // r = 1 arithmetic from the same formula
        let o1 = canonical(1.0);
        let r1 = check_e_plus_positivity(&o1, 1, crate::DEFAULT_SEED);
        let expect1 = -4.0 * PI * PI / (8.0 * PI * PI + 1.0);
        assert!((r1.dx_eigenvalue - expect1).abs() <= 1e-10);
    }

    #[test]
    fn sign_prediction_on_range() {
        // the α×ₘα̇ direction is the single negative direction of DX on its
        // range for r < (2π)⁻¹
        let o = canonical(0.1);
        let report = check_e_plus_positivity(&o, 200, crate::DEFAULT_SEED ^ 2);
        assert!(report.dx_eigenvalue < 0.0);
        assert_eq!(report.negative_count, 0);
    }

    #[test]
    fn resonance_detection() {
        assert!(is_resonant(1.0 / (2.0 * PI)));
        assert!(is_resonant(1.0 / (2.0 * PI) + 5e-10));
        assert!(!is_resonant(0.1));
        let o = CircleOrbit::new(Frame::canonical(), 1.0 / (2.0 * PI));
        let report = check_e_plus_positivity(&o, 10, crate::DEFAULT_SEED);
        assert!(report.resonant && !report.pass);
    }
}
