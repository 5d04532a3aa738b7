//! Fourier machinery for 1-periodic sampled data on uniform grids.
//!
//! All grids have a power-of-two length N with samples at t = j/N, so
//! differentiation, quadrature, and band-limited resampling act exactly on
//! the stored coefficients.

use num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::minkowski::MVec3;

/// Half-spectrum (rfft layout) of a real 1-periodic series: coefficients for
/// frequencies 0..=N/2 of length N/2 + 1, with the convention
/// f(t) = Σₖ cₖ e^{2πikt} + conj. terms.
#[derive(Clone, Debug)]
pub struct HalfSpectrum {
    pub coeffs: Vec<Complex<f64>>,
    pub n: usize,
}

impl HalfSpectrum {
    pub fn zero(n: usize) -> Self {
        HalfSpectrum { coeffs: vec![Complex::new(0.0, 0.0); n / 2 + 1], n }
    }

    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n.is_power_of_two(), "grid length must be a power of two");
        let mut buf: Vec<Complex<f64>> =
            samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        let coeffs = buf[..=n / 2].iter().map(|c| c * scale).collect();
        HalfSpectrum { coeffs, n }
    }

    pub fn to_samples(&self) -> Vec<f64> {
        let n = self.n;
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        buf[0] = self.coeffs[0];
        for k in 1..n / 2 {
            buf[k] = self.coeffs[k];
            buf[n - k] = self.coeffs[k].conj();
        }
        buf[n / 2] = self.coeffs[n / 2];
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Max |Im| leaked into a would-be real reconstruction; nonzero only when
    /// the Nyquist bin carries an imaginary part.
    pub fn conjugate_symmetry_residual(&self) -> f64 {
        self.coeffs[0].im.abs().max(self.coeffs[self.n / 2].im.abs())
    }
}

/// Spectral derivative d/dt of a real 1-periodic series sampled at t = j/N.
pub fn derivative(samples: &[f64]) -> Vec<f64> {
    let mut spec = HalfSpectrum::from_samples(samples);
    let n = spec.n;
    for (k, c) in spec.coeffs.iter_mut().enumerate() {
        *c *= Complex::new(0.0, 2.0 * PI * k as f64);
    }
    // odd-order derivative has no consistent real Nyquist mode
    spec.coeffs[n / 2] = Complex::new(0.0, 0.0);
    spec.to_samples()
}

/// Componentwise spectral derivative of an ambient-vector series.
pub fn derivative_mvec(samples: &[MVec3]) -> Vec<MVec3> {
    let d1 = derivative(&samples.iter().map(|v| v.x1).collect::<Vec<_>>());
    let d2 = derivative(&samples.iter().map(|v| v.x2).collect::<Vec<_>>());
    let d3 = derivative(&samples.iter().map(|v| v.tau).collect::<Vec<_>>());
    (0..samples.len())
        .map(|j| MVec3::new(d1[j], d2[j], d3[j]))
        .collect()
}

/// Band-limited resampling of a real series from N to `new_n` points
/// (zero-padding or truncation in coefficient space).
pub fn resample(samples: &[f64], new_n: usize) -> Vec<f64> {
    assert!(new_n.is_power_of_two());
    let spec = HalfSpectrum::from_samples(samples);
    let mut out = HalfSpectrum::zero(new_n);
    let keep = (spec.n / 2).min(new_n / 2);
    out.coeffs[..keep].copy_from_slice(&spec.coeffs[..keep]);
    if new_n > spec.n {
        // split the old Nyquist bin symmetrically
        out.coeffs[spec.n / 2] = spec.coeffs[spec.n / 2] * 0.5;
    } else if new_n < spec.n {
        out.coeffs[new_n / 2] = Complex::new(spec.coeffs[new_n / 2].re, 0.0);
    } else {
        out.coeffs[new_n / 2] = spec.coeffs[new_n / 2];
    }
    out.to_samples()
}

/// Componentwise band-limited resampling of an ambient-vector series.
pub fn resample_mvec(samples: &[MVec3], new_n: usize) -> Vec<MVec3> {
    let r1 = resample(&samples.iter().map(|v| v.x1).collect::<Vec<_>>(), new_n);
    let r2 = resample(&samples.iter().map(|v| v.x2).collect::<Vec<_>>(), new_n);
    let r3 = resample(&samples.iter().map(|v| v.tau).collect::<Vec<_>>(), new_n);
    (0..new_n).map(|j| MVec3::new(r1[j], r2[j], r3[j])).collect()
}

/// Trapezoidal quadrature ∫₀¹ f dt on the periodic grid (spectrally accurate
/// for smooth periodic integrands).
pub fn integrate_periodic(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}
