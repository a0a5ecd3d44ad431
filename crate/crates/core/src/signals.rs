//! Input waveforms: Gaussian, rectangular and linearly chirped Gaussian
//! pulses, plus low-order temporal moments.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, require_positive, Error, Result};
use crate::grid::{SampledSignal, TimeGrid};

/// `αT²` above which a chirp counts as strong.
pub const STRONG_CHIRP_THRESHOLD: f64 = 10.0;

/// Highest moment order [`moment`] accepts.
pub const MAX_MOMENT_ORDER: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseKind {
    Gaussian,
    Rect,
    ChirpGaussian,
}

impl PulseKind {
    pub fn name(self) -> &'static str {
        match self {
            PulseKind::Gaussian => "gaussian",
            PulseKind::Rect => "rect",
            PulseKind::ChirpGaussian => "chirp-gaussian",
        }
    }
}

impl fmt::Display for PulseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PulseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(PulseKind::Gaussian),
            "rect" => Ok(PulseKind::Rect),
            "chirp-gaussian" | "chirp" => Ok(PulseKind::ChirpGaussian),
            other => Err(invalid(
                "kind",
                format!("unknown pulse kind `{other}` (expected gaussian, rect or chirp-gaussian)"),
            )),
        }
    }
}

/// Shape parameters of an input pulse.
///
/// `width` is the pulse width `T` in seconds, `omega0` the carrier in rad/s
/// and `alpha` the chirp rate in rad/s², which is zero for every kind except
/// [`PulseKind::ChirpGaussian`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub kind: PulseKind,
    pub width: f64,
    pub omega0: f64,
    pub alpha: f64,
}

impl PulseSpec {
    pub fn new(kind: PulseKind, width: f64, omega0: f64, alpha: f64) -> Result<Self> {
        require_positive("T", width)?;
        if !(omega0.is_finite() && omega0 >= 0.0) {
            return Err(invalid("omega0", format!("must be finite and >= 0, got {omega0}")));
        }
        if !alpha.is_finite() {
            return Err(invalid("alpha", "must be finite"));
        }
        if kind != PulseKind::ChirpGaussian && alpha != 0.0 {
            return Err(invalid("alpha", format!("chirp rate must be 0 for a {kind} pulse")));
        }
        Ok(Self {
            kind,
            width,
            omega0,
            alpha,
        })
    }

    pub fn gaussian(width: f64, omega0: f64) -> Result<Self> {
        Self::new(PulseKind::Gaussian, width, omega0, 0.0)
    }

    pub fn rect(width: f64, omega0: f64) -> Result<Self> {
        Self::new(PulseKind::Rect, width, omega0, 0.0)
    }

    pub fn chirp(width: f64, omega0: f64, alpha: f64) -> Result<Self> {
        Self::new(PulseKind::ChirpGaussian, width, omega0, alpha)
    }

    /// True iff `αT² > 10`, the regime where the stationary-phase estimate
    /// of the chirp spectrum applies.
    pub fn is_strong_chirp(&self) -> bool {
        self.kind == PulseKind::ChirpGaussian
            && self.alpha.abs() * self.width * self.width > STRONG_CHIRP_THRESHOLD
    }

    /// Samples the pulse on `grid`, dispatching on `kind`.
    pub fn sample(&self, grid: &TimeGrid) -> Result<SampledSignal> {
        match self.kind {
            PulseKind::Gaussian => gaussian_pulse(self, grid),
            PulseKind::Rect => rect_pulse(self, grid),
            PulseKind::ChirpGaussian => chirp_pulse(self, grid),
        }
    }

    fn expect_kind(&self, kind: PulseKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(invalid("kind", format!("expected a {kind} pulse, got {}", self.kind)))
        }
    }
}

fn chirped_gaussian(width: f64, omega0: f64, alpha: f64, t: f64) -> f64 {
    let envelope = (-t * t / (2.0 * width * width)).exp();
    envelope * (omega0 * t + 0.5 * alpha * t * t).cos()
}

/// `e^{-t²/2T²} cos(ω₀ t)`.
pub fn gaussian_pulse(spec: &PulseSpec, grid: &TimeGrid) -> Result<SampledSignal> {
    spec.expect_kind(PulseKind::Gaussian)?;
    SampledSignal::from_fn(*grid, |t| chirped_gaussian(spec.width, spec.omega0, 0.0, t))
}

/// `rect(t/T) cos(ω₀ t)` with half amplitude on samples that fall exactly on
/// an edge `|t| = T/2`.
pub fn rect_pulse(spec: &PulseSpec, grid: &TimeGrid) -> Result<SampledSignal> {
    spec.expect_kind(PulseKind::Rect)?;
    let half = 0.5 * spec.width;
    let edge_tol = 1e-6 * grid.dt();
    SampledSignal::from_fn(*grid, |t| {
        let d = t.abs() - half;
        if d.abs() <= edge_tol {
            0.5 * (spec.omega0 * half).cos()
        } else if d < 0.0 {
            (spec.omega0 * t).cos()
        } else {
            0.0
        }
    })
}

/// `e^{-t²/2T²} cos(ω₀ t + αt²/2)`. With `α = 0` the samples are bitwise
/// identical to [`gaussian_pulse`].
pub fn chirp_pulse(spec: &PulseSpec, grid: &TimeGrid) -> Result<SampledSignal> {
    spec.expect_kind(PulseKind::ChirpGaussian)?;
    SampledSignal::from_fn(*grid, |t| chirped_gaussian(spec.width, spec.omega0, spec.alpha, t))
}

/// Riemann sum `dt · Σ t_j^k f(t_j)` for `k ≤ 4`.
pub fn moment(f: &SampledSignal, k: u32) -> Result<f64> {
    if k > MAX_MOMENT_ORDER {
        return Err(invalid("k", format!("moment order {k} exceeds {MAX_MOMENT_ORDER}")));
    }
    let sum: f64 = f.iter().map(|(t, v)| t.powi(k as i32) * v).sum();
    Ok(f.grid().dt() * sum)
}

/// Resamples scattered `(t, f)` pairs onto `grid` by linear interpolation;
/// samples outside the data range are zero. `times` must be strictly
/// increasing.
pub fn resample_linear(times: &[f64], values: &[f64], grid: &TimeGrid) -> Result<SampledSignal> {
    if times.len() != values.len() {
        return Err(invalid("values", "time and value columns differ in length"));
    }
    if times.len() < 2 {
        return Err(invalid("values", "need at least two samples"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("t", "times must be strictly increasing"));
    }
    let first = times[0];
    let last = times[times.len() - 1];
    SampledSignal::from_fn(*grid, |t| {
        if t < first || t > last {
            return 0.0;
        }
        let i = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
        let (t0, t1) = (times[i - 1], times[i]);
        let w = (t - t0) / (t1 - t0);
        values[i - 1] * (1.0 - w) + values[i] * w
    })
}
