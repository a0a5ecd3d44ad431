//! The named experiments. Each writes its CSVs and returns the summary.

use std::fs;
use std::path::{Path, PathBuf};

use precursor_core::analysis::{causality_metric, fit_decay_exponent, peak, rms_width, SweepRecord};
use precursor_core::grid::{forward_transform, make_grid, recommend_grid, SampledSignal, TimeGrid};
use precursor_core::media::{effective_params, interval_transfer, transfer_function, MediumModel};
use precursor_core::propagate::{
    analytic_gaussian_output, chirp_dc_content, gaussian_energy_ratio_largez, impulse_response, propagate_fft,
    thin_slab_output, thin_slab_output_unnormalized, unchirped_dc_content, zero_dc_rect_output, Propagator,
};
use precursor_core::signals::{moment, resample_linear, PulseKind};
use precursor_core::stochastic::{
    c_coefficients, direct_average_output, kernel_scale_report, monte_carlo_ensemble, observed_output,
    stochastic_impulse, EnsembleSpec, MAX_COEFF_ORDER,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, PulseSource};
use crate::error::LabError;
use crate::output::{ensure_dir, write_signal, write_sweep, write_table, z_tag, Summary};

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub files: Vec<PathBuf>,
    /// `false` only when the verify experiment found a failing invariant.
    pub verified: bool,
}

struct Run<'a> {
    config: &'a ExperimentConfig,
    dir: PathBuf,
    summary: Summary,
    files: Vec<PathBuf>,
}

impl Run<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunReport, LabError> {
    config.validate()?;
    let dir = ensure_dir(&config.output_dir)?;
    let mut run = Run {
        config,
        dir,
        summary: Summary::default(),
        files: Vec::new(),
    };
    run.summary.put("EXPERIMENT", config.experiment);
    run.summary.put("SEED", config.seed);
    let verified = match config.experiment {
        Experiment::Propagate | Experiment::SweepZ => propagation(&mut run).map(|_| true),
        Experiment::Stochastic => stochastic(&mut run).map(|_| true),
        Experiment::Chirp => chirp(&mut run).map(|_| true),
        Experiment::Slab => slab(&mut run).map(|_| true),
        Experiment::Verify => verify(&mut run),
    }?;
    discrepancy_reports(&mut run)?;
    let path = run.path("summary.txt");
    run.summary.write(&path)?;
    Ok(RunReport {
        summary: run.summary,
        files: run.files,
        verified,
    })
}

fn load_input(config: &ExperimentConfig, grid: &TimeGrid) -> Result<SampledSignal, LabError> {
    match config.pulse.as_ref().expect("validated") {
        PulseSource::Generated(spec) => Ok(spec.sample(grid)?),
        PulseSource::File(path) => read_pulse_csv(path, grid),
    }
}

fn read_pulse_csv(path: &Path, grid: &TimeGrid) -> Result<SampledSignal, LabError> {
    let wrap = |source| LabError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(wrap)?;
    let (mut ts, mut fs) = (Vec::new(), Vec::new());
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(wrap)?;
        let num = |j: usize| -> Result<f64, LabError> {
            row.get(j).and_then(|s| s.trim().parse().ok()).ok_or_else(|| {
                LabError::validation("pulse.file", format!("{}: row {} needs two numeric columns t,f", path.display(), i + 2))
            })
        };
        ts.push(num(0)?);
        fs.push(num(1)?);
    }
    resample_linear(&ts, &fs, grid).map_err(|e| LabError::validation("pulse.file", e.to_string()))
}

fn put_grid(summary: &mut Summary, grid: &TimeGrid) {
    summary.put("GRID_N", grid.len());
    summary.put_num("GRID_DT", grid.dt());
    summary.put_num("GRID_T0", grid.t0());
}

fn put_decay_fit(summary: &mut Summary, records: &[SweepRecord]) -> Result<(), LabError> {
    if records.len() >= 3 {
        let (slope, err) = fit_decay_exponent(records)?;
        summary.put_num("DECAY_EXPONENT", slope);
        summary.put_num("DECAY_EXPONENT_STDERR", err);
    }
    Ok(())
}

fn write_outputs(run: &mut Run, outputs: &[(f64, SampledSignal)], f0: &SampledSignal) -> Result<Vec<SweepRecord>, LabError> {
    let mut records = Vec::with_capacity(outputs.len());
    for (z, out) in outputs {
        let path = run.path(&format!("signal_z{}.csv", z_tag(*z)));
        write_signal(&path, out)?;
        records.push(SweepRecord::measure(*z, out, f0)?);
    }
    let path = run.path("sweep.csv");
    write_sweep(&path, &records)?;
    Ok(records)
}

fn propagate_all(grid: TimeGrid, f0: &SampledSignal, medium: &MediumModel, zs: &[f64]) -> Result<Vec<(f64, SampledSignal)>, LabError> {
    let prop = Propagator::new(grid);
    let spectrum = prop.spectrum(f0);
    zs.par_iter()
        .map(|&z| Ok((z, prop.propagate_spectrum(&spectrum, medium, z)?)))
        .collect()
}

fn propagation(run: &mut Run) -> Result<(), LabError> {
    let config = run.config;
    let medium = config.medium.as_ref().expect("validated");
    let grid = config.resolve_grid()?;
    put_grid(&mut run.summary, &grid);
    run.summary.put("MEDIUM", medium);
    let f0 = load_input(config, &grid)?;
    let outputs = propagate_all(grid, &f0, medium, &config.z)?;
    let records = write_outputs(run, &outputs, &f0)?;
    put_decay_fit(&mut run.summary, &records)?;

    let zmax = config.z.iter().cloned().fold(0.0, f64::max);
    let response = impulse_response(medium, zmax, &grid)?;
    run.summary.put_num("CAUSALITY_DEPTH", zmax);
    run.summary.put_num("CAUSALITY_METRIC", causality_metric(&response)?);

    // closed-form cross-check for the Gaussian input in a DC-lossless quadratic medium
    if let (Some(PulseSource::Generated(p)), MediumModel::Quadratic(q)) = (&config.pulse, medium) {
        if p.kind == PulseKind::Gaussian && q.ell_inv() == 0.0 && q.a().is_finite() {
            let mut worst: f64 = 0.0;
            for (z, out) in &outputs {
                for (t, v) in out.iter() {
                    worst = worst.max((v - analytic_gaussian_output(p.width, p.omega0, q.a(), q.v(), *z, t)?).abs());
                }
            }
            run.summary.put_num("ORACLE_MAX_ABS_ERROR", worst);
            let formula = gaussian_energy_ratio_largez(p.width, p.omega0, q.a(), zmax);
            let measured = records.iter().find(|r| r.z == zmax).expect("zmax is in the sweep").energy;
            run.summary.put_num("ENERGY_RATIO_MEASURED", measured);
            run.summary.put_num("ENERGY_RATIO_FORMULA", formula);
        }
    }
    Ok(())
}

fn max_zscore(mean: &[f64], target: &[f64], stderr: &[f64], reference: &[f64], from: f64) -> f64 {
    mean.iter()
        .zip(target)
        .zip(stderr)
        .zip(reference)
        .filter(|(_, r)| r.abs() >= from)
        .map(|(((m, t), s), _)| if *s > 0.0 { (m - t).abs() / s } else { 0.0 })
        .fold(0.0, f64::max)
}

/// Fitted log-envelope slope of the closed-form impulse over its far tail,
/// divided by `-√(b/z)`.
fn tail_slope_ratio(spec: &EnsembleSpec, z: f64) -> Result<f64, LabError> {
    let rate = (spec.b / z).sqrt();
    let m = spec.m as f64;
    let (lo, hi) = if spec.m == 0 { (1.0, 20.0) } else { (100.0 * m, 200.0 * m) };
    let ts: Vec<f64> = (0..=200).map(|i| z / spec.v + (lo + (hi - lo) * i as f64 / 200.0) / rate).collect();
    let ys: Vec<f64> = ts
        .iter()
        .map(|&t| stochastic_impulse(spec, z, t).map(|v| v.ln()))
        .collect::<Result<_, _>>()?;
    let n = ts.len() as f64;
    let (mt, my) = (ts.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    Ok(sxy / sxx / -rate)
}

fn stochastic(run: &mut Run) -> Result<(), LabError> {
    let config = run.config;
    let spec = config.ensemble.expect("validated");
    let grid = config.resolve_grid()?;
    put_grid(&mut run.summary, &grid);
    run.summary.put_num("ENSEMBLE_B", spec.b);
    run.summary.put("ENSEMBLE_M", spec.m);
    run.summary.put_num("ENSEMBLE_V", spec.v);
    run.summary.put("MC_SAMPLES", config.mc_samples);
    let f0 = load_input(config, &grid)?;
    let mut outputs = Vec::with_capacity(config.z.len());
    let (mut z_bulk, mut z_closed): (f64, f64) = (0.0, 0.0);
    for &z in &config.z {
        let observed = observed_output(&f0, &spec, z)?;
        let ensemble = direct_average_output(&f0, &spec, z)?;
        let mc = monte_carlo_ensemble(&f0, &spec, z, config.mc_samples, config.seed)?;
        let t: Vec<f64> = grid.times().collect();
        let path = run.path(&format!("stochastic_z{}.csv", z_tag(z)));
        write_table(
            &path,
            &["t", "observed", "ensemble_average", "mc_mean", "mc_stderr"],
            &[&t, observed.values(), ensemble.values(), mc.mean.values(), &mc.stderr],
        )?;
        let bulk = 1e-6 * ensemble.max_abs();
        z_bulk = z_bulk.max(max_zscore(mc.mean.values(), ensemble.values(), &mc.stderr, ensemble.values(), bulk));
        z_closed = z_closed.max(max_zscore(mc.mean.values(), observed.values(), &mc.stderr, ensemble.values(), bulk));
        run.summary.put_num(&format!("TAIL_SLOPE_RATIO_Z{}", z_tag(z)), tail_slope_ratio(&spec, z)?);
        outputs.push((z, observed));
    }
    let records = write_outputs(run, &outputs, &f0)?;
    put_decay_fit(&mut run.summary, &records)?;
    run.summary.put_num("MC_MAX_ZSCORE_VS_ENSEMBLE_AVERAGE", z_bulk);
    run.summary.put_num("MC_MAX_ZSCORE_VS_CLOSED_FORM_KERNEL", z_closed);
    Ok(())
}

fn chirp(run: &mut Run) -> Result<(), LabError> {
    let config = run.config;
    let p = match config.pulse.as_ref().expect("validated") {
        PulseSource::Generated(p) => *p,
        PulseSource::File(_) => unreachable!("validated as generated chirp"),
    };
    let grid = config.resolve_grid()?;
    put_grid(&mut run.summary, &grid);
    let f0 = p.sample(&grid)?;
    let spectrum = forward_transform(&f0);
    let path = run.path("pulse.csv");
    write_signal(&path, &f0)?;
    let omega: Vec<f64> = grid.omegas().collect();
    let re: Vec<f64> = spectrum.values().iter().map(|c| c.re).collect();
    let im: Vec<f64> = spectrum.values().iter().map(|c| c.im).collect();
    let path = run.path("spectrum.csv");
    write_table(&path, &["omega", "re", "im"], &[&omega, &re, &im])?;

    let dc = spectrum.at_zero().re;
    let plain = unchirped_dc_content(p.width, p.omega0);
    run.summary.put("CHIRP_STRONG", p.is_strong_chirp());
    run.summary.put_num("CHIRP_DC_FFT", dc);
    run.summary.put_num("CHIRP_DC_UNCHIRPED", plain);
    run.summary.put_num("CHIRP_ENHANCEMENT", dc.abs() / plain);
    match chirp_dc_content(p.width, p.omega0, p.alpha) {
        Ok(est) => {
            run.summary.put_num("CHIRP_DC_STATIONARY_PHASE", est.stationary_phase);
            run.summary.put_num("CHIRP_DC_NOMINAL_PHASE", est.nominal_phase);
            run.summary.put_num("CHIRP_STATIONARY_PHASE_REL_ERROR", (est.stationary_phase.abs() / dc.abs() - 1.0).abs());
            run.summary.put_num("CHIRP_NOMINAL_PHASE_REL_ERROR", (est.nominal_phase.abs() / dc.abs() - 1.0).abs());
        }
        Err(e) => run.summary.put("CHIRP_DC_STATIONARY_PHASE", format!("n/a ({e})")),
    }
    if let (Some(medium), false) = (&config.medium, config.z.is_empty()) {
        let outputs = propagate_all(grid, &f0, medium, &config.z)?;
        let records = write_outputs(run, &outputs, &f0)?;
        put_decay_fit(&mut run.summary, &records)?;
    }
    Ok(())
}

fn slab(run: &mut Run) -> Result<(), LabError> {
    let config = run.config;
    let medium = config.medium.as_ref().expect("validated");
    let MediumModel::Layered(stack) = medium else { unreachable!("validated as layered") };
    let ell = stack.total_thickness();
    let (a_t, v_t) = effective_params(stack, ell).map_err(|e| LabError::validation("layer", e.to_string()))?;
    let grid = config.resolve_grid()?;
    put_grid(&mut run.summary, &grid);
    run.summary.put_num("SLAB_THICKNESS", ell);
    run.summary.put_num("SLAB_A_TILDE", a_t);
    run.summary.put_num("SLAB_V_TILDE", v_t);
    let f0 = load_input(config, &grid)?;
    let dc = moment(&f0, 0)?;
    let outputs = propagate_all(grid, &f0, medium, &config.z)?;
    let (mut worst, mut unnormalized_ratio) = (0.0f64, 0.0);
    let mut widths = Vec::new();
    for (z, out) in &outputs {
        let t: Vec<f64> = grid.times().collect();
        let closed: Vec<f64> = t.iter().map(|&t| thin_slab_output(ell, a_t, v_t, *z, dc, t)).collect::<Result<_, _>>()?;
        let path = run.path(&format!("slab_z{}.csv", z_tag(*z)));
        write_table(&path, &["t", "fft", "thin_slab"], &[&t, out.values(), &closed])?;
        let (tp, amp) = peak(out)?;
        worst = worst.max((thin_slab_output(ell, a_t, v_t, *z, dc, tp)? / amp - 1.0).abs());
        unnormalized_ratio = thin_slab_output_unnormalized(ell, a_t, v_t, *z, dc, tp)? / amp;
        widths.push(rms_width(out)?);
    }
    let records = write_outputs(run, &outputs, &f0)?;
    put_decay_fit(&mut run.summary, &records)?;
    let (lo, hi) = widths.iter().fold((f64::MAX, f64::MIN), |(l, h), &w| (l.min(w), h.max(w)));
    run.summary.put_num("SLAB_PEAK_REL_ERROR_MAX", worst);
    run.summary.put_num("SLAB_WIDTH_SPREAD", hi / lo - 1.0);
    run.summary.put_num("THIN_SLAB_UNNORMALIZED_PREFACTOR_RATIO", unnormalized_ratio);
    if let Some(PulseSource::Generated(p)) = &config.pulse {
        run.summary.put_num("SLAB_THINNESS", p.width / (ell / a_t).sqrt());
    }
    Ok(())
}

fn discrepancy_reports(run: &mut Run) -> Result<(), LabError> {
    // both ratios are independent of the parameters they are evaluated at
    let zero_dc = zero_dc_rect_output(1, 1.0, 1.0, 1.0, 1e4, 1e4)?.ratio();
    run.summary.put_num("ZERO_DC_PREFACTOR_RATIO", zero_dc);
    let spec = run.config.ensemble.unwrap_or(EnsembleSpec::new(1.0, 0, 1.0)?);
    let z = run.config.z.first().copied().unwrap_or(1.0);
    run.summary.put_num("ENSEMBLE_KERNEL_SCALE_FACTOR", kernel_scale_report(&spec, z)?.scale_factor);
    Ok(())
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn random_medium(rng: &mut ChaCha8Rng) -> Result<MediumModel, LabError> {
    let homogeneous = |rng: &mut ChaCha8Rng| -> Result<MediumModel, LabError> {
        Ok(if rng.random_bool(0.5) {
            MediumModel::quadratic(rng.random_range(0.0..2.0), rng.random_range(1.0..50.0), rng.random_range(0.2..5.0))?
        } else {
            MediumModel::exp_kernel(rng.random_range(0.5..20.0), rng.random_range(0.1..20.0))?
        })
    };
    if rng.random_range(0..3) < 2 {
        return homogeneous(rng);
    }
    let layers = (0..rng.random_range(1..4))
        .map(|_| {
            Ok(precursor_core::media::Layer {
                thickness: rng.random_range(0.2..2.0),
                medium: homogeneous(rng)?,
            })
        })
        .collect::<Result<_, LabError>>()?;
    Ok(MediumModel::layered(layers, true)?)
}

fn check_semigroup(seed: u64) -> Result<Check, LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut passive): (f64, bool) = (0.0, true);
    for _ in 0..10_000 {
        let medium = random_medium(&mut rng)?;
        let (z1, z2): (f64, f64) = (rng.random_range(0.0..2.5), rng.random_range(0.0..2.5));
        let w: f64 = rng.random_range(-10.0..10.0);
        let m1 = transfer_function(&medium, z1, w)?;
        let m2 = match medium {
            MediumModel::Layered(_) => interval_transfer(&medium, z1, z1 + z2, w)?,
            _ => transfer_function(&medium, z2, w)?,
        };
        let m12 = transfer_function(&medium, z1 + z2, w)?;
        passive &= m1.norm() <= 1.0 + 1e-15 && m12.norm() <= 1.0 + 1e-15;
        let scale = m12.norm().max((m1 * m2).norm());
        if scale > 0.0 {
            worst = worst.max((m1 * m2 - m12).norm() / scale);
        }
    }
    Ok(Check {
        name: "SEMIGROUP",
        pass: worst < 1e-12 && passive,
        detail: format!("max_rel_defect={worst:e} passive={passive} triples=10000"),
    })
}

fn check_oracle() -> Result<Check, LabError> {
    let medium = MediumModel::quadratic(0.0, 1.0, 1.0)?;
    let mut worst: f64 = 0.0;
    for z in [10.0, 100.0, 1000.0] {
        for (width, omega0) in [(0.5, 0.0), (1.0, 2.0)] {
            let grid = recommend_grid(width, omega0, 1.0, 1.0, z)?;
            let f0 = precursor_core::PulseSpec::gaussian(width, omega0)?.sample(&grid)?;
            for (t, v) in propagate_fft(&f0, &medium, z)?.signal.iter() {
                worst = worst.max((v - analytic_gaussian_output(width, omega0, 1.0, 1.0, z, t)?).abs());
            }
        }
    }
    Ok(Check {
        name: "ORACLE_EQUIVALENCE",
        pass: worst < 1e-8,
        detail: format!("max_abs_error={worst:e}"),
    })
}

fn check_coefficients() -> Result<Check, LabError> {
    let mut prev = c_coefficients(0)?;
    let mut ok = true;
    for m in 1..=MAX_COEFF_ORDER {
        let table = c_coefficients(m)?;
        ok &= table.follows(&prev);
        prev = table;
    }
    let m2 = c_coefficients(2)?.as_f64();
    ok &= m2 == [3.0, 3.0, 1.0];
    Ok(Check {
        name: "COEFFICIENT_RECURRENCE",
        pass: ok,
        detail: format!("orders=0..{MAX_COEFF_ORDER} c2={m2:?}"),
    })
}

fn check_normalizations() -> Result<Check, LabError> {
    let mut worst: f64 = 0.0;
    // closed-form stochastic impulse: Simpson on each side of the kink
    for m in 0..=3 {
        let spec = EnsembleSpec::new(2.0, m, 1.0)?;
        let z = 3.0;
        let len = (60.0 + 8.0 * m as f64) / (spec.b / z).sqrt();
        let n = 20_000;
        let h = len / n as f64;
        let side: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * stochastic_impulse(&spec, z, z + i as f64 * h).unwrap_or(f64::NAN)
            })
            .sum();
        worst = worst.max((2.0 * side * h / 3.0 - 1.0).abs());
    }
    // Parseval and the Gaussian impulse response of a quadratic medium
    let grid = make_grid(4096, 0.02, -40.96)?;
    let f = precursor_core::PulseSpec::gaussian(1.0, 3.0)?.sample(&grid)?;
    let spec = forward_transform(&f);
    let freq_energy: f64 = spec.values().iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.d_omega() / (2.0 * std::f64::consts::PI);
    let parseval = (freq_energy / f.energy() - 1.0).abs();
    let impulse = impulse_response(&MediumModel::quadratic(0.0, 1.0, 1.0)?, 10.0, &grid)?;
    let area = (impulse.values().iter().sum::<f64>() * grid.dt() - 1.0).abs();
    Ok(Check {
        name: "NORMALIZATION",
        pass: worst < 1e-8 && parseval < 1e-10 && area < 1e-10,
        detail: format!("stochastic_impulse={worst:e} parseval={parseval:e} impulse_area={area:e}"),
    })
}

fn verify(run: &mut Run) -> Result<bool, LabError> {
    let checks = [
        check_semigroup(run.config.seed)?,
        check_oracle()?,
        check_coefficients()?,
        check_normalizations()?,
    ];
    let all = checks.iter().all(|c| c.pass);
    for c in &checks {
        run.summary.put(
            &format!("VERIFY_{}", c.name),
            format!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.detail),
        );
    }
    run.summary.put("VERIFY_RESULT", if all { "PASS" } else { "FAIL" });
    Ok(all)
}

/// Removes stale outputs of a previous run so a rerun leaves exactly its own
/// files behind. Only files with the names this tool writes are touched.
pub fn clean_output_dir(dir: &Path) -> Result<(), LabError> {
    let Ok(entries) = fs::read_dir(dir) else { return Ok(()) };
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        let ours = name == "summary.txt"
            || name == "sweep.csv"
            || name == "pulse.csv"
            || name == "spectrum.csv"
            || (name.ends_with(".csv")
                && ["signal_z", "stochastic_z", "slab_z"].iter().any(|p| name.starts_with(p)));
        if ours {
            fs::remove_file(entry.path()).map_err(|source| LabError::Io {
                path: entry.path(),
                source,
            })?;
        }
    }
    Ok(())
}
