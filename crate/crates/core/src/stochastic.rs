//! Propagation through a medium whose `a⁻¹` is random.
//!
//! With `A(ω) = ½a⁻¹ω² - iω/v` and `a⁻¹` gamma distributed,
//!
//! ```text
//! p(a⁻¹) = b/m! · (b a⁻¹)^m · e^{-b a⁻¹},   ⟨a⁻¹⟩ = (m+1)/b,
//! ```
//!
//! the observed signal is the inverse transform of the averaged transfer
//! function times the input spectrum. Two averaged kernels are available:
//!
//! * [`averaged_transfer`], the closed-form kernel `(1 + zω²/b)^{-(m+1)} e^{iωz/v}`,
//!   whose inverse transform is the closed form [`stochastic_impulse`];
//! * [`direct_averaged_transfer`], the ensemble average `⟨e^{-zA(ω)}⟩`
//!   computed by quadrature over `p`, which Monte Carlo converges to.
//!
//! They differ by a factor of two in the scale `b`; see
//! [`kernel_scale_report`].

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{invalid, require_positive, Result};
use crate::grid::{SampledSignal, SpectralPlan, Spectrum};
use crate::media::MediumModel;
use crate::propagate::Propagator;
use crate::quadrature;

/// Largest order accepted by [`c_coefficients`].
pub const MAX_COEFF_ORDER: u32 = 30;

/// Smallest ensemble accepted by [`monte_carlo_output`].
pub const MIN_MC_SAMPLES: usize = 100;

// Monte Carlo samples are reduced in fixed-size blocks so the result does
// not depend on how blocks are scheduled.
const MC_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    /// Scale of the density, units of `z·ω²`.
    pub b: f64,
    /// Shape; the density of `a⁻¹` is gamma with shape `m + 1` and rate `b`.
    pub m: u32,
    /// Deterministic drift speed.
    pub v: f64,
}

impl EnsembleSpec {
    pub fn new(b: f64, m: u32, v: f64) -> Result<Self> {
        require_positive("b", b)?;
        require_positive("v", v)?;
        Ok(Self { b, m, v })
    }

    /// Density of `a⁻¹` at `x > 0`.
    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (self.b.ln() + self.m as f64 * (self.b * x).ln() - self.b * x - ln_factorial(self.m)).exp()
    }
}

fn ln_factorial(m: u32) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}

fn factorial(m: u32) -> f64 {
    (2..=m).map(f64::from).product()
}

/// Coefficients `C^(m)_0 … C^(m)_m` of the polynomial factor in
/// [`stochastic_impulse`], held as exact integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffTable {
    m: u32,
    coeffs: Vec<BigUint>,
}

impl CoeffTable {
    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn exact(&self) -> &[BigUint] {
        &self.coeffs
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::INFINITY)).collect()
    }

    /// Checks the endpoints `C_m = 1`, `C_0 = (2m-1)!!` and the recurrence
    /// against the table of order `m - 1`, in exact arithmetic.
    pub fn follows(&self, prev: &CoeffTable) -> bool {
        let m = self.m;
        let c = &self.coeffs;
        if m == 0 || prev.m + 1 != m || c.len() != m as usize + 1 {
            return false;
        }
        c[m as usize] == BigUint::one()
            && c[0] == double_factorial_odd(m)
            && (1..m as usize).all(|l| c[l] == &prev.coeffs[l] * BigUint::from(2 * m - 1 - l as u32) + &prev.coeffs[l - 1])
    }
}

/// Builds the table by the recurrence
/// `C^(m)_l = (2m-1-l) C^(m-1)_l + C^(m-1)_{l-1}` between the endpoints
/// `C^(m)_m = 1` and `C^(m)_0 = (2m-1)!!`.
pub fn c_coefficients(m: u32) -> Result<CoeffTable> {
    if m > MAX_COEFF_ORDER {
        return Err(invalid("m", format!("order {m} exceeds {MAX_COEFF_ORDER}")));
    }
    let mut row = vec![BigUint::one()];
    for order in 1..=m {
        let mut next = Vec::with_capacity(order as usize + 1);
        next.push(double_factorial_odd(order));
        for l in 1..order {
            let l = l as usize;
            next.push(&row[l] * BigUint::from(2 * order - 1 - l as u32) + &row[l - 1]);
        }
        next.push(BigUint::one());
        row = next;
    }
    Ok(CoeffTable { m, coeffs: row })
}

/// `(2m-1)!!`, with `(-1)!! = 1`.
pub fn double_factorial_odd(m: u32) -> BigUint {
    let mut acc = BigUint::one();
    let mut k = 1u32;
    while k < 2 * m {
        acc *= k;
        k += 2;
    }
    acc
}

/// Observed impulse response of the stochastic medium,
///
/// ```text
/// m°_z(t) = 1/2^{m+1} · 1/m! · √(b/z) · Σ_l C^(m)_l (√(b/z)|t - z/v|)^l · e^{-√(b/z)|t - z/v|}
/// ```
pub fn stochastic_impulse(spec: &EnsembleSpec, z: f64, t: f64) -> Result<f64> {
    require_positive("z", z)?;
    let table = c_coefficients(spec.m)?;
    Ok(impulse_with(&table.as_f64(), spec, z, t))
}

fn impulse_with(coeffs: &[f64], spec: &EnsembleSpec, z: f64, t: f64) -> f64 {
    let rate = (spec.b / z).sqrt();
    let x = rate * (t - z / spec.v).abs();
    // Horner over the polynomial in x
    let poly = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let m = spec.m as i32;
    rate * poly * (-x).exp() / (2f64.powi(m + 1) * factorial(spec.m))
}

/// Samples [`stochastic_impulse`] on a grid.
pub fn stochastic_impulse_signal(spec: &EnsembleSpec, z: f64, grid: &crate::grid::TimeGrid) -> Result<SampledSignal> {
    require_positive("z", z)?;
    let coeffs = c_coefficients(spec.m)?.as_f64();
    SampledSignal::from_fn(*grid, |t| impulse_with(&coeffs, spec, z, t))
}

fn check_depth(z: f64) -> Result<()> {
    if z.is_finite() && z >= 0.0 {
        Ok(())
    } else {
        Err(invalid("z", format!("depth must be finite and >= 0, got {z}")))
    }
}

/// The closed-form averaged kernel `(1 + zω²/b)^{-(m+1)} e^{iωz/v}`.
pub fn averaged_transfer(spec: &EnsembleSpec, z: f64, omega: f64) -> Result<Complex64> {
    check_depth(z)?;
    let magnitude = (1.0 + z * omega * omega / spec.b).powi(-(spec.m as i32 + 1));
    Ok(Complex64::from_polar(magnitude, omega * z / spec.v))
}

/// `⟨e^{-zA(ω)}⟩` over the density of `a⁻¹`, by exp-sinh quadrature.
pub fn direct_averaged_transfer(spec: &EnsembleSpec, z: f64, omega: f64) -> Result<Complex64> {
    check_depth(z)?;
    let s = 0.5 * z * omega * omega;
    let magnitude = if s == 0.0 {
        1.0
    } else {
        // scale the variable by the density's rate so the rule sees O(1) features
        quadrature::half_line(|y| spec.density(y / spec.b) * (-s * y / spec.b).exp() / spec.b)
    };
    Ok(Complex64::from_polar(magnitude, omega * z / spec.v))
}

/// `⟨a⁻¹⟩ = (m+1)/b`.
pub fn mean_inverse_a(spec: &EnsembleSpec) -> f64 {
    (spec.m as f64 + 1.0) / spec.b
}

/// Draw `index` of the ensemble, a function of `(seed, index)` only.
pub fn draw_inverse_a(spec: &EnsembleSpec, seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let gamma = Gamma::new(spec.m as f64 + 1.0, 1.0 / spec.b).expect("shape and scale are positive");
    gamma.sample(&mut rng)
}

/// `count` independent draws of `a⁻¹`; draw `i` depends only on `(seed, i)`.
pub fn sample_inverse_a(spec: &EnsembleSpec, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count < 1 {
        return Err(invalid("n", "need at least one draw"));
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok((0..count as u64).into_par_iter().map(|i| draw_inverse_a(spec, seed, i)).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..count as u64).map(|i| draw_inverse_a(spec, seed, i)).collect())
    }
}

fn apply_kernel(
    f0: &SampledSignal,
    z: f64,
    kernel: impl Fn(f64) -> Result<Complex64>,
) -> Result<SampledSignal> {
    let plan = SpectralPlan::new(*f0.grid());
    let mut spectrum: Spectrum = plan.forward(f0);
    let grid = *spectrum.grid();
    for (k, value) in spectrum.values_mut().iter_mut().enumerate() {
        *value *= kernel(grid.omega(k))?;
    }
    check_depth(z)?;
    Ok(plan.inverse(&spectrum))
}

/// Inverse transform of [`averaged_transfer`] times the input spectrum.
pub fn observed_output(f0: &SampledSignal, spec: &EnsembleSpec, z: f64) -> Result<SampledSignal> {
    apply_kernel(f0, z, |w| averaged_transfer(spec, z, w))
}

/// Inverse transform of [`direct_averaged_transfer`] times the input spectrum.
pub fn direct_average_output(f0: &SampledSignal, spec: &EnsembleSpec, z: f64) -> Result<SampledSignal> {
    apply_kernel(f0, z, |w| direct_averaged_transfer(spec, z, w))
}

/// Pointwise Monte Carlo mean and its standard error.
#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub mean: SampledSignal,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

#[derive(Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((mean, m2), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *mean;
            *mean += d / self.count;
            *m2 += d * (v - *mean);
        }
    }

    // Chan et al. pairwise update
    fn merge(mut self, other: &Moments) -> Self {
        if other.count == 0.0 {
            return self;
        }
        let total = self.count + other.count;
        for j in 0..self.mean.len() {
            let d = other.mean[j] - self.mean[j];
            self.mean[j] += d * other.count / total;
            self.m2[j] += other.m2[j] + d * d * self.count * other.count / total;
        }
        self.count = total;
        self
    }
}

/// Averages [`crate::propagate::propagate_fft`] outputs over `n_samples`
/// draws of `a⁻¹`, each through `quadratic(0, 1/a⁻¹, v)`.
///
/// Results are bitwise identical for any thread count: samples are grouped
/// into fixed blocks whose partial moments are merged in block order.
pub fn monte_carlo_ensemble(
    f0: &SampledSignal,
    spec: &EnsembleSpec,
    z: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n_samples < MIN_MC_SAMPLES {
        return Err(invalid(
            "n_samples",
            format!("need at least {MIN_MC_SAMPLES} samples, got {n_samples}"),
        ));
    }
    check_depth(z)?;
    let grid = *f0.grid();
    let propagator = Propagator::new(grid);
    let spectrum = propagator.spectrum(f0);
    let blocks = n_samples.div_ceil(MC_BLOCK);

    let block = |b: usize| -> Result<Moments> {
        let mut acc = Moments::new(grid.len());
        let end = ((b + 1) * MC_BLOCK).min(n_samples);
        for i in b * MC_BLOCK..end {
            let inv_a = draw_inverse_a(spec, seed, i as u64);
            let medium = MediumModel::quadratic(0.0, 1.0 / inv_a, spec.v)?;
            let out = propagator.propagate_spectrum(&spectrum, &medium, z)?;
            acc.push(out.values());
        }
        Ok(acc)
    };

    #[cfg(feature = "parallel")]
    let partials: Vec<Moments> = {
        use rayon::prelude::*;
        (0..blocks).into_par_iter().map(block).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Moments> = (0..blocks).map(block).collect::<Result<_>>()?;

    let total = partials
        .iter()
        .fold(Moments::new(grid.len()), |acc, p| acc.merge(p));
    let n = total.count;
    let stderr = total.m2.iter().map(|m2| (m2 / (n - 1.0) / n).sqrt()).collect();
    Ok(MonteCarloEstimate {
        mean: SampledSignal::new(grid, total.mean)?,
        stderr,
        samples: n_samples,
    })
}

pub fn monte_carlo_output(
    f0: &SampledSignal,
    spec: &EnsembleSpec,
    z: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SampledSignal> {
    Ok(monte_carlo_ensemble(f0, spec, z, n_samples, seed)?.mean)
}

/// Comparison of the closed-form and the directly averaged kernels at the
/// frequency where `zω²/b = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelScaleReport {
    pub closed_form: f64,
    pub direct: f64,
    /// `b_eff / b`, where `b_eff` makes `(1 + zω²/b_eff)^{-(m+1)}` reproduce
    /// the direct average.
    pub scale_factor: f64,
}

pub fn kernel_scale_report(spec: &EnsembleSpec, z: f64) -> Result<KernelScaleReport> {
    require_positive("z", z)?;
    let omega = (spec.b / z).sqrt();
    let closed_form = averaged_transfer(spec, z, omega)?.norm();
    let direct = direct_averaged_transfer(spec, z, omega)?.norm();
    let b_eff = z * omega * omega / (direct.powf(-1.0 / (spec.m as f64 + 1.0)) - 1.0);
    Ok(KernelScaleReport {
        closed_form,
        direct,
        scale_factor: b_eff / spec.b,
    })
}
