//! Pulse metrics: peak, width, energy, decay exponent and acausal mass.

use crate::error::{invalid, require_positive, Error, Result};
use crate::grid::SampledSignal;

/// One depth of a z-sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub z: f64,
    pub t_peak: f64,
    pub peak_amp: f64,
    pub rms_width: f64,
    pub energy: f64,
}

impl SweepRecord {
    pub fn new(z: f64, t_peak: f64, peak_amp: f64, rms_width: f64, energy: f64) -> Result<Self> {
        require_positive("z", z)?;
        require_positive("rms_width", rms_width)?;
        if !(energy >= 0.0) {
            return Err(invalid("energy", format!("must be >= 0, got {energy}")));
        }
        Ok(Self {
            z,
            t_peak,
            peak_amp,
            rms_width,
            energy,
        })
    }

    /// Measures `f_z` against the input `f0`.
    pub fn measure(z: f64, f_z: &SampledSignal, f0: &SampledSignal) -> Result<Self> {
        let (t_peak, peak_amp) = peak(f_z)?;
        Self::new(z, t_peak, peak_amp, rms_width(f_z)?, energy_ratio(f_z, f0)?)
    }
}

/// Location and height of the maximum of `|f|`, refined by a parabola
/// through the three samples around the discrete maximum.
pub fn peak(signal: &SampledSignal) -> Result<(f64, f64)> {
    let values = signal.values();
    if values.is_empty() {
        return Err(Error::DegenerateInput("empty signal".into()));
    }
    // strict comparison keeps the first (smallest t) of equal maxima
    let mut best = 0;
    for (j, v) in values.iter().enumerate() {
        if v.abs() > values[best].abs() {
            best = j;
        }
    }
    let top = values[best].abs();
    if top == 0.0 {
        return Err(Error::DegenerateInput("signal is identically zero".into()));
    }
    let grid = signal.grid();
    if best == 0 || best + 1 == values.len() {
        return Ok((grid.time(best), top));
    }
    let (l, r) = (values[best - 1].abs(), values[best + 1].abs());
    let curvature = l - 2.0 * top + r;
    if curvature >= 0.0 {
        return Ok((grid.time(best), top));
    }
    let offset = 0.5 * (l - r) / curvature;
    let amp = top - 0.25 * (l - r) * offset;
    Ok((grid.time(best) + offset * grid.dt(), amp))
}

/// `√(⟨t²⟩ - ⟨t⟩²)` under the weight `|f|²`.
pub fn rms_width(signal: &SampledSignal) -> Result<f64> {
    let grid = signal.grid();
    let mut w = 0.0;
    let mut mean = 0.0;
    for (j, v) in signal.values().iter().enumerate() {
        w += v * v;
        mean += v * v * grid.time(j);
    }
    if w == 0.0 {
        return Err(Error::DegenerateInput("signal has zero energy".into()));
    }
    mean /= w;
    // second pass about the mean avoids cancellation for delayed pulses
    let var: f64 = signal
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let d = grid.time(j) - mean;
            v * v * d * d
        })
        .sum::<f64>()
        / w;
    Ok(var.sqrt())
}

/// Least-squares slope of `ln peak_amp` against `ln z`, with its standard error.
pub fn fit_decay_exponent(records: &[SweepRecord]) -> Result<(f64, f64)> {
    if records.len() < 3 {
        return Err(invalid("records", format!("need at least 3, got {}", records.len())));
    }
    for (i, a) in records.iter().enumerate() {
        if records[..i].iter().any(|b| b.z == a.z) {
            return Err(invalid("records", format!("repeated z = {}", a.z)));
        }
        require_positive("z", a.z)?;
        if !(a.peak_amp.abs() > 0.0) || !a.peak_amp.is_finite() {
            return Err(invalid("records", format!("peak_amp must be nonzero at z = {}", a.z)));
        }
    }
    let xs: Vec<f64> = records.iter().map(|r| r.z.ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.peak_amp.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

/// `∫|f_z|² / ∫|f0|²`.
pub fn energy_ratio(f_z: &SampledSignal, f0: &SampledSignal) -> Result<f64> {
    let e0 = f0.energy();
    if e0 == 0.0 {
        return Err(Error::DegenerateInput("input has zero energy".into()));
    }
    Ok(f_z.energy() / e0)
}

/// Fraction of the L1 mass of an impulse response lying at `t < 0`.
pub fn causality_metric(response: &SampledSignal) -> Result<f64> {
    let grid = response.grid();
    let mut before = 0.0;
    let mut total = 0.0;
    for (j, v) in response.values().iter().enumerate() {
        total += v.abs();
        if grid.time(j) < 0.0 {
            before += v.abs();
        }
    }
    if total == 0.0 {
        return Err(Error::DegenerateInput("impulse response is identically zero".into()));
    }
    Ok(before / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::signals::PulseSpec;
    use approx::assert_relative_eq;

    #[test]
    fn peak_of_input_gaussian() {
        let g = make_grid(1024, 0.01, -5.12).unwrap();
        let f = PulseSpec::gaussian(1.0, 0.0).unwrap().sample(&g).unwrap();
        let (t, a) = peak(&f).unwrap();
        assert!(t.abs() < 1e-12);
        assert!((a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn peak_refines_between_samples() {
        let g = make_grid(25, 0.1, -1.0).unwrap();
        let f = SampledSignal::from_fn(g, |t| 2.0 - 0.5 * (t - 0.237).powi(2)).unwrap();
        let (t, a) = peak(&f).unwrap();
        assert!((t - 0.237).abs() < 1e-12);
        assert!((a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn peak_uses_magnitude_and_prefers_earlier_ties() {
        let g = make_grid(8, 1.0, 0.0).unwrap();
        let f = SampledSignal::new(g, vec![0.0, -3.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
        assert_eq!(peak(&f).unwrap(), (1.0, 3.0));
    }

    #[test]
    fn degenerate_inputs() {
        let g = make_grid(16, 0.1, 0.0).unwrap();
        let z = SampledSignal::zeros(g);
        assert!(matches!(peak(&z), Err(Error::DegenerateInput(_))));
        assert!(matches!(rms_width(&z), Err(Error::DegenerateInput(_))));
        assert!(matches!(energy_ratio(&z, &z), Err(Error::DegenerateInput(_))));
        assert!(matches!(causality_metric(&z), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn width_examples() {
        let g = make_grid(4096, 0.005, -10.24).unwrap();
        let f = SampledSignal::from_fn(g, |t| (-t * t / 2.0).exp()).unwrap();
        assert_relative_eq!(rms_width(&f).unwrap(), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-10);
        let dt = 1e-3;
        let g = make_grid(4096, dt, -2.0).unwrap();
        let r = PulseSpec::rect(2.0, 0.0).unwrap().sample(&g).unwrap();
        // the half-height edge samples carry |f|² weight 1/4, an O(dt/T) bias
        assert_relative_eq!(rms_width(&r).unwrap(), 1.0 / 3f64.sqrt(), max_relative = 1e-3);
    }

    fn power_law(c: f64, p: f64) -> Vec<SweepRecord> {
        [100.0, 200.0, 400.0, 800.0, 1600.0]
            .iter()
            .map(|&z| SweepRecord::new(z, z, c * z.powf(p), 1.0, 0.0).unwrap())
            .collect()
    }

    #[test]
    fn exact_power_laws() {
        let (s, e) = fit_decay_exponent(&power_law(3.0, -0.5)).unwrap();
        assert!((s + 0.5).abs() < 1e-12);
        assert!(e < 1e-12);
        let (s, _) = fit_decay_exponent(&power_law(0.2, -1.0)).unwrap();
        assert!((s + 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejections() {
        let r = power_law(1.0, -0.5);
        assert!(fit_decay_exponent(&r[..2]).is_err());
        let mut dup = r.clone();
        dup[1].z = dup[0].z;
        assert!(fit_decay_exponent(&dup).is_err());
    }

    #[test]
    fn energy_ratio_identity() {
        let g = make_grid(256, 0.05, -6.4).unwrap();
        let f = PulseSpec::gaussian(1.0, 2.0).unwrap().sample(&g).unwrap();
        assert_eq!(energy_ratio(&f, &f).unwrap(), 1.0);
    }

    #[test]
    fn causality_of_one_sided_and_centered() {
        let g = make_grid(2000, 0.01, -10.0).unwrap();
        let causal = SampledSignal::from_fn(g, |t| if t >= 0.0 { (-t).exp() } else { 0.0 }).unwrap();
        assert_eq!(causality_metric(&causal).unwrap(), 0.0);
        let g = make_grid(2001, 0.01, -10.0).unwrap();
        let even = SampledSignal::from_fn(g, |t| (-t * t).exp()).unwrap();
        let m = causality_metric(&even).unwrap();
        assert!((m - 0.5).abs() < 1e-2);
    }

    #[test]
    fn sweep_record_validation() {
        assert!(SweepRecord::new(0.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(SweepRecord::new(1.0, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(SweepRecord::new(1.0, 0.0, 1.0, 1.0, -1.0).is_err());
    }
}
