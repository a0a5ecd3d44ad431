//! Numerical propagation `f_z = F⁻¹[M_z · F f_0]` and the closed-form
//! outputs it is checked against.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{invalid, require_positive, Error, Result};
use crate::grid::{SampledSignal, SpectralPlan, Spectrum, TimeGrid};
use crate::media::{transfer_function, MediumModel, SPEED_OF_LIGHT};
use crate::signals::moment;

/// Large-depth formulas require `z > LARGE_Z_FACTOR · aT²`.
pub const LARGE_Z_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fft,
    AnalyticGaussian,
    AnalyticGaussianLargeZ,
    AnalyticRectLargeZ,
    MomentExpansion,
    ThinSlab,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fft => "fft",
            Method::AnalyticGaussian => "analytic-gaussian",
            Method::AnalyticGaussianLargeZ => "analytic-gaussian-largez",
            Method::AnalyticRectLargeZ => "analytic-rect-largez",
            Method::MomentExpansion => "moment-expansion",
            Method::ThinSlab => "thin-slab",
        })
    }
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub signal: SampledSignal,
    pub z: f64,
    pub medium: String,
    pub method: Method,
}

/// Propagates many signals or depths on one grid, reusing the FFT plans.
#[derive(Debug, Clone)]
pub struct Propagator {
    plan: SpectralPlan,
}

impl Propagator {
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            plan: SpectralPlan::new(grid),
        }
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    pub fn spectrum(&self, f0: &SampledSignal) -> Spectrum {
        self.plan.forward(f0)
    }

    /// Applies `M_z` to an input spectrum and returns the time signal.
    pub fn propagate_spectrum(&self, spectrum: &Spectrum, medium: &MediumModel, z: f64) -> Result<SampledSignal> {
        let grid = *spectrum.grid();
        let mut out = spectrum.clone();
        for (k, value) in out.values_mut().iter_mut().enumerate() {
            *value *= transfer_function(medium, z, grid.omega(k))?;
        }
        Ok(self.plan.inverse(&out))
    }

    pub fn propagate(&self, f0: &SampledSignal, medium: &MediumModel, z: f64) -> Result<PropagationResult> {
        warn_if_inadequate(f0.grid(), medium, z);
        let signal = self.propagate_spectrum(&self.spectrum(f0), medium, z)?;
        Ok(PropagationResult {
            signal,
            z,
            medium: medium.to_string(),
            method: Method::Fft,
        })
    }
}

/// Whether the grid holds the delayed, broadened output with ten standard
/// scores of margin on both sides.
pub fn grid_is_adequate(grid: &TimeGrid, medium: &MediumModel, z: f64) -> Result<bool> {
    let (delay, spread) = medium.delay_and_spread(z)?;
    let sigma = spread.sqrt();
    let end = grid.time(grid.len() - 1);
    Ok(delay - 10.0 * sigma >= grid.t0() && delay + 10.0 * sigma <= end)
}

fn warn_if_inadequate(grid: &TimeGrid, medium: &MediumModel, z: f64) {
    if let Ok(false) = grid_is_adequate(grid, medium, z) {
        log::warn!("grid [{}, {}] may not contain the output at depth {z} through {medium}", grid.t0(), grid.time(grid.len() - 1));
    }
}

pub fn propagate_fft(f0: &SampledSignal, medium: &MediumModel, z: f64) -> Result<PropagationResult> {
    Propagator::new(*f0.grid()).propagate(f0, medium, z)
}

/// Impulse response `m_z(t)` sampled on `grid` by inverse transform of `M_z`.
pub fn impulse_response(medium: &MediumModel, z: f64, grid: &TimeGrid) -> Result<SampledSignal> {
    let mut spectrum = Spectrum::from_fn(*grid, |_| Complex64::new(1.0, 0.0));
    for (k, value) in spectrum.values_mut().iter_mut().enumerate() {
        *value = transfer_function(medium, z, grid.omega(k))?;
    }
    Ok(SpectralPlan::new(*grid).inverse(&spectrum))
}

fn check_gaussian_params(a: f64, v: f64, z: f64) -> Result<()> {
    require_positive("a", a)?;
    require_positive("v", v)?;
    require_positive("z", z)
}

/// Gaussian impulse response `√(a/2πz) exp(-a(t - z/v)²/2z)` of the
/// lossless-at-DC quadratic medium.
pub fn gaussian_impulse_response(a: f64, v: f64, z: f64, t: f64) -> Result<f64> {
    check_gaussian_params(a, v, z)?;
    let tau = t - z / v;
    Ok((a / (2.0 * PI * z)).sqrt() * (-a * tau * tau / (2.0 * z)).exp())
}

/// First and second time derivatives of [`gaussian_impulse_response`].
pub fn gaussian_impulse_derivatives(a: f64, v: f64, z: f64, t: f64) -> Result<(f64, f64, f64)> {
    let m = gaussian_impulse_response(a, v, z, t)?;
    let tau = t - z / v;
    let d1 = -(a / z) * tau * m;
    let d2 = (a / (z * z)) * (a * tau * tau - z) * m;
    Ok((m, d1, d2))
}

/// Exact output for the Gaussian input `e^{-t²/2T²} cos(ω₀t)` through the
/// quadratic medium with `ℓ⁻¹ = 0`:
///
/// ```text
/// f_z(t) = 1/√(1+z/aT²) · exp(-[(a/z)τ² + (ω₀T)²] / 2(1 + aT²/z)) · cos(ω₀τ / (1 + z/aT²)),  τ = t - z/v
/// ```
pub fn analytic_gaussian_output(width: f64, omega0: f64, a: f64, v: f64, z: f64, t: f64) -> Result<f64> {
    require_positive("T", width)?;
    check_gaussian_params(a, v, z)?;
    let tau = t - z / v;
    let at2 = a * width * width;
    let stretch = 1.0 + z / at2;
    let exponent = -((a / z) * tau * tau + (omega0 * width).powi(2)) / (2.0 * (1.0 + at2 / z));
    Ok(exponent.exp() / stretch.sqrt() * (omega0 * tau / stretch).cos())
}

fn check_large_z(width: f64, a: f64, z: f64) -> Result<()> {
    let limit = LARGE_Z_FACTOR * a * width * width;
    if z > limit {
        Ok(())
    } else {
        Err(Error::RegimeViolation(format!(
            "large-depth form needs z > {LARGE_Z_FACTOR}·aT² = {limit}, got z = {z}"
        )))
    }
}

/// Large-depth limit of [`analytic_gaussian_output`]:
/// `√(aT²/z) exp(-a(t - z/v)²/2z - (ω₀T)²/2)`.
pub fn analytic_gaussian_output_largez(width: f64, omega0: f64, a: f64, v: f64, z: f64, t: f64) -> Result<f64> {
    require_positive("T", width)?;
    check_gaussian_params(a, v, z)?;
    check_large_z(width, a, z)?;
    let tau = t - z / v;
    Ok((a * width * width / z).sqrt() * (-a * tau * tau / (2.0 * z) - (omega0 * width).powi(2) / 2.0).exp())
}

fn sinc_half(omega0: f64, width: f64) -> f64 {
    let x = 0.5 * omega0 * width;
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Large-depth output for `rect(t/T) cos(ω₀t)`:
/// `√(aT²/2πz) · sin(ω₀T/2)/(ω₀T/2) · exp(-a(t - z/v)²/2z)`.
///
/// Fails with [`Error::RegimeViolation`] unless `z > 100·aT²`.
pub fn analytic_rect_output_largez(width: f64, omega0: f64, a: f64, v: f64, z: f64, t: f64) -> Result<f64> {
    require_positive("T", width)?;
    check_gaussian_params(a, v, z)?;
    check_large_z(width, a, z)?;
    let half_turns = omega0 * width / (2.0 * PI);
    // sin(ω₀T/2) is exactly zero when ω₀T is a multiple of 2π
    if half_turns != 0.0 && (half_turns - half_turns.round()).abs() < 1e-12 {
        return Ok(0.0);
    }
    let tau = t - z / v;
    Ok((a * width * width / (2.0 * PI * z)).sqrt() * sinc_half(omega0, width) * (-a * tau * tau / (2.0 * z)).exp())
}

/// Taylor expansion of the Gaussian impulse response about the input:
/// `m_z ∫f₀ - m_z' ∫s f₀ + ½ m_z'' ∫s² f₀`, truncated after `order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentExpansion {
    pub a: f64,
    pub v: f64,
    pub z: f64,
    pub order: u32,
    pub moments: [f64; 3],
}

impl MomentExpansion {
    pub fn new(f0: &SampledSignal, a: f64, v: f64, z: f64, order: u32) -> Result<Self> {
        check_gaussian_params(a, v, z)?;
        if order > 2 {
            return Err(invalid("order", format!("expansion order {order} exceeds 2")));
        }
        Ok(Self {
            a,
            v,
            z,
            order,
            moments: [moment(f0, 0)?, moment(f0, 1)?, moment(f0, 2)?],
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (m, d1, d2) =
            gaussian_impulse_derivatives(self.a, self.v, self.z, t).expect("parameters validated at construction");
        let terms = [m * self.moments[0], -d1 * self.moments[1], 0.5 * d2 * self.moments[2]];
        terms[..=self.order as usize].iter().sum()
    }

    pub fn sample(&self, grid: &TimeGrid) -> SampledSignal {
        SampledSignal::from_fn(*grid, |t| self.eval(t)).expect("closed form is finite")
    }
}

pub fn moment_expansion_output(f0: &SampledSignal, a: f64, v: f64, z: f64, order: u32, t: f64) -> Result<f64> {
    Ok(MomentExpansion::new(f0, a, v, z, order)?.eval(t))
}

/// Leading response to `rect(t/T) cos(ω₀t)` with `ω₀T = 2nπ`, whose DC
/// content vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroDcOutput {
    /// The nominal closed form
    /// `(-1)ⁿ/(2(nπ)²) √(aT²/2πz) (aT²/z²) [a(t-z/v)² - z] e^{-a(t-z/v)²/2z}`.
    pub nominal: f64,
    /// `½ m_z''(t) ∫s² f₀` with `∫s² f₀ = (-1)ⁿ T³ / (2n²π²)`.
    pub derived: f64,
}

impl ZeroDcOutput {
    /// Nominal over derived amplitude; the two differ only by a constant.
    pub fn ratio(&self) -> f64 {
        self.nominal / self.derived
    }
}

pub fn zero_dc_rect_output(n: u32, width: f64, a: f64, v: f64, z: f64, t: f64) -> Result<ZeroDcOutput> {
    if n < 1 {
        return Err(invalid("n", "carrier must complete at least one cycle (n >= 1)"));
    }
    require_positive("T", width)?;
    let (_, _, d2) = gaussian_impulse_derivatives(a, v, z, t)?;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let npi2 = (n as f64 * PI).powi(2);
    let at2 = a * width * width;
    let tau = t - z / v;
    let nominal = sign / (2.0 * npi2)
        * (at2 / (2.0 * PI * z)).sqrt()
        * (at2 / (z * z))
        * (a * tau * tau - z)
        * (-a * tau * tau / (2.0 * z)).exp();
    let second_moment = sign * width.powi(3) / (2.0 * npi2);
    Ok(ZeroDcOutput {
        nominal,
        derived: 0.5 * d2 * second_moment,
    })
}

/// Delay of the thin-slab pulse: `(z - ℓ)/c + ℓ/ṽ`, or `z/c` with the
/// `ṽ ≈ c` shortcut.
pub fn thin_slab_delay(ell: f64, v_tilde: f64, z: f64, light_speed_shortcut: bool) -> f64 {
    if light_speed_shortcut {
        z / SPEED_OF_LIGHT
    } else {
        (z - ell) / SPEED_OF_LIGHT + ell / v_tilde
    }
}

fn check_slab(ell: f64, a_tilde: f64, v_tilde: f64, z: f64) -> Result<()> {
    require_positive("ell", ell)?;
    require_positive("a_tilde", a_tilde)?;
    require_positive("v_tilde", v_tilde)?;
    if !(z > ell) {
        return Err(invalid("z", format!("thin-slab output is defined beyond the slab (z > {ell}), got {z}")));
    }
    Ok(())
}

/// Output beyond a slab of thickness `ell` followed by free space, for an
/// input much shorter than `√(ℓ/ã)`:
/// `√(ã/2πℓ) exp(-ã(t - delay)²/2ℓ) ∫f₀`. The width does not change with
/// `z` past the slab.
pub fn thin_slab_output(ell: f64, a_tilde: f64, v_tilde: f64, z: f64, dc_moment: f64, t: f64) -> Result<f64> {
    check_slab(ell, a_tilde, v_tilde, z)?;
    let tau = t - thin_slab_delay(ell, v_tilde, z, false);
    Ok((a_tilde / (2.0 * PI * ell)).sqrt() * (-a_tilde * tau * tau / (2.0 * ell)).exp() * dc_moment)
}

/// The thin-slab form with the bare prefactor `√(ã/ℓ)`, which omits
/// the `1/√(2π)` that normalizes the Gaussian kernel.
pub fn thin_slab_output_unnormalized(ell: f64, a_tilde: f64, v_tilde: f64, z: f64, dc_moment: f64, t: f64) -> Result<f64> {
    Ok(thin_slab_output(ell, a_tilde, v_tilde, z, dc_moment, t)? * (2.0 * PI).sqrt())
}

/// DC content `F₀(0)` of a Gaussian-envelope linear chirp, two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpDcContent {
    /// `√(π/α) e^{-(ω₀T)²/2α²T⁴} [cos φ + sin φ]` with the nominal phase `φ = ω₀²/α`.
    pub nominal_phase: f64,
    /// Same envelope with the stationary-phase argument `φ = ω₀²/2α`.
    pub stationary_phase: f64,
}

impl ChirpDcContent {
    pub fn envelope(&self, width: f64, omega0: f64, alpha: f64) -> f64 {
        (PI / alpha).sqrt() * (-(omega0 * width).powi(2) / (2.0 * alpha * alpha * width.powi(4))).exp()
    }
}

pub fn chirp_dc_content(width: f64, omega0: f64, alpha: f64) -> Result<ChirpDcContent> {
    require_positive("T", width)?;
    require_positive("alpha", alpha)?;
    if !(alpha * width * width > 1.0) {
        return Err(invalid("alpha", format!("needs αT² > 1, got {}", alpha * width * width)));
    }
    let envelope = (PI / alpha).sqrt() * (-(omega0 * width).powi(2) / (2.0 * alpha * alpha * width.powi(4))).exp();
    let phase_nominal = omega0 * omega0 / alpha;
    let phase_sp = omega0 * omega0 / (2.0 * alpha);
    Ok(ChirpDcContent {
        nominal_phase: envelope * (phase_nominal.cos() + phase_nominal.sin()),
        stationary_phase: envelope * (phase_sp.cos() + phase_sp.sin()),
    })
}

/// `F₀(0) = √(2π) T e^{-(ω₀T)²/2}` of the unchirped Gaussian pulse.
pub fn unchirped_dc_content(width: f64, omega0: f64) -> f64 {
    (2.0 * PI).sqrt() * width * (-(omega0 * width).powi(2) / 2.0).exp()
}

/// `e^{-(ω₀T)²/2α²T⁴} / e^{-(ω₀T)²/2}`, the envelope gain of chirping.
pub fn chirp_enhancement(width: f64, omega0: f64, alpha: f64) -> f64 {
    let x = (omega0 * width).powi(2) / 2.0;
    (x - x / (alpha * alpha * width.powi(4))).exp()
}

/// `2√(aT²/z) e^{-(ω₀T)²} / (1 + e^{-(ω₀T)²})`, the large-depth energy ratio
/// for the Gaussian input.
pub fn gaussian_energy_ratio_largez(width: f64, omega0: f64, a: f64, z: f64) -> f64 {
    let e = (-(omega0 * width).powi(2)).exp();
    2.0 * (a * width * width / z).sqrt() * e / (1.0 + e)
}
