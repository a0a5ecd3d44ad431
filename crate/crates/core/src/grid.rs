//! Uniform time grids and the continuous-Fourier-transform approximations
//! used throughout the crate.
//!
//! The forward transform uses the `e^{+iωt}` kernel,
//!
//! ```text
//! F(ω_k) = dt · Σ_j e^{+iω_k t_j} f(t_j)
//! f(t_j) = (dω / 2π) · Σ_k e^{-iω_k t_j} F(ω_k)
//! ```
//!
//! which is the opposite sign of the usual numerical-library default. With
//! `t_j = t0 + j·dt` and `ω_k = k·dω` (signed `k`), the forward sum factors as
//! `dt · e^{iω_k t0} · Σ_j f_j e^{+2πi jk/n}`, i.e. an *unnormalized inverse*
//! FFT followed by a phase ramp. The inverse transform is the matching
//! unnormalized forward FFT scaled by `1/(n·dt)`.
//!
//! Spectra are stored in natural signed order, `k = -⌊n/2⌋ ..`, so index
//! `⌊n/2⌋` holds `ω = 0`. The wrap-around layout the FFT needs stays private.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, require_positive, Result};

/// Relative size of the discarded imaginary part above which
/// [`inverse_transform`] logs a warning.
pub const IMAG_WARN_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n: usize,
    dt: f64,
    t0: f64,
}

impl TimeGrid {
    pub fn new(n: usize, dt: f64, t0: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", format!("need at least 2 samples, got {n}")));
        }
        require_positive("dt", dt)?;
        if !t0.is_finite() {
            return Err(invalid("t0", "must be finite"));
        }
        Ok(Self { n, dt, t0 })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn span(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.time(j))
    }

    /// Angular-frequency bin spacing `2π / (n·dt)`.
    pub fn d_omega(&self) -> f64 {
        2.0 * PI / self.span()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.dt
    }

    /// Index of `ω = 0` in natural signed order.
    pub fn zero_index(&self) -> usize {
        self.n / 2
    }

    fn signed_bin(&self, k: usize) -> i64 {
        k as i64 - self.zero_index() as i64
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.signed_bin(k) as f64 * self.d_omega()
    }

    pub fn omegas(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.omega(k))
    }

    /// Index of the sample closest to time `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let j = ((t - self.t0) / self.dt).round();
        j.clamp(0.0, (self.n - 1) as f64) as usize
    }

    // Position of natural-order bin `k` in the FFT's wrap-around layout.
    fn wrapped(&self, k: usize) -> usize {
        self.signed_bin(k).rem_euclid(self.n as i64) as usize
    }
}

/// Builds a grid, rejecting `n < 2` and `dt <= 0`.
pub fn make_grid(n: usize, dt: f64, t0: f64) -> Result<TimeGrid> {
    TimeGrid::new(n, dt, t0)
}

/// Grid that holds a pulse of width `width` and carrier `omega0` launched at
/// `t ≈ 0` as well as its image after a group delay `delay` and a Gaussian
/// spreading of variance `spread_var`.
///
/// `dt ≤ min(0.1·width, 0.1π/omega0)`, the window covers both the input and
/// the delayed, broadened output with ten standard scores on either side,
/// `t0` is an integer multiple of `dt`, and `n` is a power of two.
pub fn grid_for_delay(width: f64, omega0: f64, delay: f64, spread_var: f64) -> Result<TimeGrid> {
    require_positive("T", width)?;
    if !(omega0.is_finite() && omega0 >= 0.0) {
        return Err(invalid("omega0", "must be finite and >= 0"));
    }
    if !(delay.is_finite() && spread_var.is_finite() && spread_var >= 0.0) {
        return Err(invalid("z", "delay and spread must be finite"));
    }
    let mut dt = 0.1 * width;
    if omega0 > 0.0 {
        dt = dt.min(0.1 * PI / omega0);
    }
    let out_sigma = (spread_var + width * width).sqrt();
    let start = (-10.0 * width).min(delay - 10.0 * out_sigma);
    let end = (10.0 * width).max(delay + 10.0 * out_sigma);
    let lead = (start / dt).floor();
    let needed = ((end - start) / dt).ceil() as usize + 2;
    let n = needed.max(64).next_power_of_two();
    TimeGrid::new(n, dt, lead * dt)
}

/// Grid adequacy helper for a pulse of width `width` and carrier `omega0`
/// after depth `z` in a medium with small-frequency parameters `(a, v)`.
///
/// The window spans at least `z/v + 10·max(T, √(z/a))`, centered so that
/// both the input near `t = 0` and the output near `t = z/v` fit.
/// `a = ∞` (no absorption) is accepted.
pub fn recommend_grid(width: f64, omega0: f64, a: f64, v: f64, z: f64) -> Result<TimeGrid> {
    if !(a > 0.0) {
        return Err(invalid("a", "must be > 0"));
    }
    require_positive("v", v)?;
    if !(z.is_finite() && z >= 0.0) {
        return Err(invalid("z", "must be finite and >= 0"));
    }
    grid_for_delay(width, omega0, z / v, z / a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(
                "values",
                format!("length {} does not match grid size {}", values.len(), grid.len()),
            ));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite sample at index {j}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid time.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.times().map(f).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.times().zip(self.values.iter().copied())
    }

    /// `dt · Σ |f|²`.
    pub fn energy(&self) -> f64 {
        self.grid.dt() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SampledSignal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: TimeGrid,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(
                "values",
                format!("length {} does not match grid size {}", values.len(), grid.len()),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Samples `g(ω)` at every bin in natural order.
    pub fn from_fn(grid: TimeGrid, g: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.omegas().map(g).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn at_zero(&self) -> Complex64 {
        self.values[self.grid.zero_index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.grid.omegas().zip(self.values.iter().copied())
    }

    /// Pointwise product with `g(ω)`.
    pub fn multiplied_by(mut self, g: impl Fn(f64) -> Complex64) -> Self {
        for (k, value) in self.values.iter_mut().enumerate() {
            *value *= g(self.grid.omega(k));
        }
        self
    }
}

/// FFT plans for one grid size, reusable across many transforms.
#[derive(Clone)]
pub struct SpectralPlan {
    grid: TimeGrid,
    // e^{+2πi jk/n}
    plus: Arc<dyn Fft<f64>>,
    // e^{-2πi jk/n}
    minus: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("grid", &self.grid).finish()
    }
}

/// Output of an inverse transform together with the discarded imaginary part.
#[derive(Debug, Clone)]
pub struct InverseOutput {
    pub signal: SampledSignal,
    /// `‖Im‖₂ / ‖Re‖₂` of the raw inverse sum (0 when the real part vanishes).
    pub imag_ratio: f64,
}

impl SpectralPlan {
    pub fn new(grid: TimeGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            plus: planner.plan_fft_inverse(grid.len()),
            minus: planner.plan_fft_forward(grid.len()),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn forward(&self, f: &SampledSignal) -> Spectrum {
        assert_eq!(f.grid.len(), self.grid.len(), "signal grid does not match plan");
        let grid = f.grid;
        let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plus.process(&mut buf);
        let values = (0..grid.len())
            .map(|k| {
                let w = grid.omega(k);
                Complex64::from_polar(grid.dt(), w * grid.t0()) * buf[grid.wrapped(k)]
            })
            .collect();
        Spectrum { grid, values }
    }

    pub fn inverse_checked(&self, spectrum: &Spectrum) -> InverseOutput {
        assert_eq!(spectrum.grid.len(), self.grid.len(), "spectrum grid does not match plan");
        let grid = spectrum.grid;
        let n = grid.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, value) in spectrum.values.iter().enumerate() {
            let w = grid.omega(k);
            buf[grid.wrapped(k)] = Complex64::from_polar(1.0, -w * grid.t0()) * value;
        }
        self.minus.process(&mut buf);
        let scale = 1.0 / (n as f64 * grid.dt());
        let (mut re2, mut im2) = (0.0, 0.0);
        let values: Vec<f64> = buf
            .iter()
            .map(|c| {
                let c = c * scale;
                re2 += c.re * c.re;
                im2 += c.im * c.im;
                c.re
            })
            .collect();
        let imag_ratio = if re2 > 0.0 { (im2 / re2).sqrt() } else { 0.0 };
        InverseOutput {
            signal: SampledSignal { grid, values },
            imag_ratio,
        }
    }

    pub fn inverse(&self, spectrum: &Spectrum) -> SampledSignal {
        let out = self.inverse_checked(spectrum);
        if out.imag_ratio > IMAG_WARN_RATIO {
            log::warn!(
                "inverse transform discarded an imaginary part {:.3e} of the real norm; spectrum is not Hermitian",
                out.imag_ratio
            );
        }
        out.signal
    }
}

pub fn forward_transform(f: &SampledSignal) -> Spectrum {
    SpectralPlan::new(f.grid).forward(f)
}

/// Real part of the inverse transform. Logs a warning when the discarded
/// imaginary part exceeds [`IMAG_WARN_RATIO`] of the real-part norm.
pub fn inverse_transform(spectrum: &Spectrum) -> SampledSignal {
    SpectralPlan::new(spectrum.grid).inverse(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_grid() -> TimeGrid {
        TimeGrid::new(256, 0.1, -12.8).unwrap()
    }

    #[test]
    fn grid_spacing_and_nyquist() {
        let g = make_grid(8, 1.0, 0.0).unwrap();
        assert_relative_eq!(g.d_omega(), 2.0 * PI / 8.0);
        let g = make_grid(2, 0.5, -0.5).unwrap();
        assert_relative_eq!(g.span(), 1.0);
        assert_relative_eq!(g.nyquist(), 2.0 * PI);
        assert_eq!(g.omega(0), -2.0 * PI);
        assert_eq!(g.omega(g.zero_index()), 0.0);
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(matches!(make_grid(0, 1.0, 0.0), Err(crate::Error::InvalidArgument { name: "n", .. })));
        assert!(make_grid(1, 1.0, 0.0).is_err());
        assert!(make_grid(8, 0.0, 0.0).is_err());
        assert!(make_grid(8, -1.0, 0.0).is_err());
    }

    #[test]
    fn odd_grids_are_symmetric_in_frequency() {
        let g = make_grid(7, 0.3, 0.0).unwrap();
        assert_relative_eq!(g.omega(0), -g.omega(6));
        assert_eq!(g.omega(3), 0.0);
    }

    #[test]
    fn unit_impulse_has_flat_spectrum() {
        let g = make_grid(64, 0.25, -8.0).unwrap();
        let mut values = vec![0.0; 64];
        values[g.nearest_index(0.0)] = 1.0 / g.dt();
        let spec = forward_transform(&SampledSignal::new(g, values).unwrap());
        for (_, v) in spec.iter() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let g = gaussian_grid();
        let f = SampledSignal::from_fn(g, |t| (-t * t / 2.0).exp()).unwrap();
        let spec = forward_transform(&f);
        let err = spec
            .iter()
            .map(|(w, v)| (v - Complex64::new((2.0 * PI).sqrt() * (-w * w / 2.0).exp(), 0.0)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "max error {err}");
    }

    #[test]
    fn real_signals_have_hermitian_spectra() {
        let g = make_grid(128, 0.05, -1.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = SampledSignal::new(g, values).unwrap();
        let spec = forward_transform(&f);
        let mid = g.zero_index();
        for k in 1..mid {
            let a = spec.values()[mid + k];
            let b = spec.values()[mid - k];
            assert!((a - b.conj()).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let g = make_grid(200, 0.37, -20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = SampledSignal::new(g, values).unwrap();
        let plan = SpectralPlan::new(g);
        let spec = plan.forward(&f);
        let back = plan.inverse_checked(&spec);
        assert!(back.signal.max_abs_diff(&f) < 1e-12);
        assert!(back.imag_ratio < 1e-12);
        let again = plan.forward(&back.signal);
        let err = spec.values().iter().zip(again.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn flat_spectrum_inverts_to_unit_area_impulse() {
        let g = make_grid(64, 0.5, -16.0).unwrap();
        let spec = Spectrum::from_fn(g, |_| Complex64::new(1.0, 0.0));
        let f = inverse_transform(&spec);
        let j0 = g.nearest_index(0.0);
        for (j, v) in f.values().iter().enumerate() {
            let expect = if j == j0 { 1.0 / g.dt() } else { 0.0 };
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_spectrum_inverts_to_gaussian() {
        let g = gaussian_grid();
        let spec = Spectrum::from_fn(g, |w| Complex64::new((2.0 * PI).sqrt() * (-w * w / 2.0).exp(), 0.0));
        let f = inverse_transform(&spec);
        for (t, v) in f.iter() {
            assert!((v - (-t * t / 2.0).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn parseval_holds() {
        let g = make_grid(512, 0.02, -5.0).unwrap();
        let f = SampledSignal::from_fn(g, |t| (-(t - 0.3) * (t - 0.3) * 4.0).exp() * (7.0 * t).cos()).unwrap();
        let spec = forward_transform(&f);
        let freq = g.d_omega() / (2.0 * PI) * spec.values().iter().map(|c| c.norm_sqr()).sum::<f64>();
        assert_relative_eq!(f.energy(), freq, max_relative = 1e-10);
    }

    #[test]
    fn recommended_grid_covers_input_and_output() {
        let g = recommend_grid(1.0, 2.0, 1.0, 1.0, 100.0).unwrap();
        assert!(g.dt() <= 0.1 + 1e-15);
        assert!(g.dt() <= 0.1 * PI / 2.0);
        assert!(g.span() >= 100.0 + 10.0 * 10.0);
        assert!(g.t0() <= -10.0);
        assert!(g.time(g.len() - 1) >= 100.0 + 10.0 * 101f64.sqrt());
        assert!(g.len().is_power_of_two());
        // t0 sits on the dt lattice so that t = 0 is a sample
        assert!((g.time(g.nearest_index(0.0))).abs() < 1e-9);
    }

    #[test]
    fn signal_rejects_non_finite_and_wrong_length() {
        let g = make_grid(4, 1.0, 0.0).unwrap();
        assert!(SampledSignal::new(g, vec![0.0; 3]).is_err());
        assert!(SampledSignal::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
