//! wasm-bindgen surface for the static demo page in `www/`.

use precursor_core::analysis::{fit_decay_exponent, SweepRecord};
use precursor_core::grid::{grid_for_delay, recommend_grid};
use precursor_core::stochastic::{direct_average_output, observed_output, EnsembleSpec};
use precursor_core::{MediumModel, PulseSpec, Propagator};
use wasm_bindgen::prelude::*;

fn js_err(e: precursor_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Input and output traces on a shared time axis.
#[wasm_bindgen]
pub struct Trace {
    t: Vec<f64>,
    input: Vec<f64>,
    output: Vec<f64>,
    reference: Vec<f64>,
}

#[wasm_bindgen]
impl Trace {
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn input(&self) -> Vec<f64> {
        self.input.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn output(&self) -> Vec<f64> {
        self.output.clone()
    }

    /// Second curve for comparison; empty when there is none.
    #[wasm_bindgen(getter)]
    pub fn reference(&self) -> Vec<f64> {
        self.reference.clone()
    }
}

/// Gaussian pulse of width `width` and carrier `omega0` after depth `z` of a
/// quadratic medium with parameters `a`, `v`.
#[wasm_bindgen]
pub fn propagate_pulse(width: f64, omega0: f64, a: f64, v: f64, z: f64) -> Result<Trace, JsError> {
    let grid = recommend_grid(width, omega0, a, v, z).map_err(js_err)?;
    let medium = MediumModel::quadratic(0.0, a, v).map_err(js_err)?;
    let f0 = PulseSpec::gaussian(width, omega0).and_then(|p| p.sample(&grid)).map_err(js_err)?;
    let out = Propagator::new(grid).propagate(&f0, &medium, z).map_err(js_err)?.signal;
    Ok(Trace {
        t: grid.times().collect(),
        input: f0.into_values(),
        output: out.into_values(),
        reference: Vec::new(),
    })
}

/// Gaussian pulse after depth `z` of a random medium. `output` uses the
/// closed-form ensemble kernel, `reference` the direct gamma-ensemble average.
#[wasm_bindgen]
pub fn stochastic_response(width: f64, b: f64, m: u32, v: f64, z: f64) -> Result<Trace, JsError> {
    let spec = EnsembleSpec::new(b, m, v).map_err(js_err)?;
    let sigma = (4.0 + m as f64) * (z / b).sqrt();
    let grid = grid_for_delay(width, 0.0, z / v, sigma * sigma).map_err(js_err)?;
    let f0 = PulseSpec::gaussian(width, 0.0).and_then(|p| p.sample(&grid)).map_err(js_err)?;
    let out = observed_output(&f0, &spec, z).map_err(js_err)?;
    let avg = direct_average_output(&f0, &spec, z).map_err(js_err)?;
    Ok(Trace {
        t: grid.times().collect(),
        input: f0.into_values(),
        output: out.into_values(),
        reference: avg.into_values(),
    })
}

/// Peak amplitude against depth on a log-spaced sweep, with the fitted
/// power-law exponent.
#[wasm_bindgen]
pub struct DecaySweep {
    z: Vec<f64>,
    peak: Vec<f64>,
    exponent: f64,
}

#[wasm_bindgen]
impl DecaySweep {
    #[wasm_bindgen(getter)]
    pub fn z(&self) -> Vec<f64> {
        self.z.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn peak(&self) -> Vec<f64> {
        self.peak.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

#[wasm_bindgen]
pub fn decay_sweep(width: f64, omega0: f64, a: f64, v: f64, z_min: f64, z_max: f64, count: usize) -> Result<DecaySweep, JsError> {
    if count < 3 || !(z_min > 0.0 && z_max > z_min) {
        return Err(JsError::new("need count >= 3 and 0 < z_min < z_max"));
    }
    let zs: Vec<f64> = (0..count)
        .map(|i| z_min * (z_max / z_min).powf(i as f64 / (count - 1) as f64))
        .collect();
    let grid = recommend_grid(width, omega0, a, v, z_max).map_err(js_err)?;
    let medium = MediumModel::quadratic(0.0, a, v).map_err(js_err)?;
    let f0 = PulseSpec::gaussian(width, omega0).and_then(|p| p.sample(&grid)).map_err(js_err)?;
    let prop = Propagator::new(grid);
    let spectrum = prop.spectrum(&f0);
    let records = zs
        .iter()
        .map(|&z| {
            let out = prop.propagate_spectrum(&spectrum, &medium, z)?;
            SweepRecord::measure(z, &out, &f0)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(js_err)?;
    let (exponent, _) = fit_decay_exponent(&records).map_err(js_err)?;
    Ok(DecaySweep {
        peak: records.iter().map(|r| r.peak_amp).collect(),
        z: zs,
        exponent,
    })
}
