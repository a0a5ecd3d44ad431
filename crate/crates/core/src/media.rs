//! Medium functions `A(ω) = B(ω) + iC(ω)` and transfer functions
//! `M_z(ω) = e^{-zA(ω)}`.
//!
//! Three variants are supported:
//!
//! * [`Quadratic`]: the small-frequency form `B = ℓ⁻¹ + ω²/2a`, `C = -ω/v`.
//!   `a = ∞` gives a pure delay.
//! * [`ExpKernel`]: the strictly causal medium `A(ω) = ∫₀^∞ (1 - e^{iωs}) K' e^{-Ks} ds`,
//!   evaluated with its exact rational closed form.
//! * [`LayerStack`]: piecewise-constant layers, optionally followed by free
//!   space.
//!
//! The module also carries the driven-oscillator steady states used to argue
//! that `B(0) = 0` for lossless-at-DC materials.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, require_positive, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Largest system size accepted by [`coupled_steady_state`].
pub const MAX_OSCILLATORS: usize = 32;

/// Condition number above which [`coupled_steady_state`] reports a singular matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    ell_inv: f64,
    a: f64,
    v: f64,
}

impl Quadratic {
    /// `ell_inv ≥ 0` (1/m), `a > 0` (m/s², may be `+∞`), `v > 0` (m/s).
    pub fn new(ell_inv: f64, a: f64, v: f64) -> Result<Self> {
        if !(ell_inv.is_finite() && ell_inv >= 0.0) {
            return Err(invalid("ell_inv", format!("must be finite and >= 0, got {ell_inv}")));
        }
        if !(a > 0.0) {
            return Err(invalid("a", format!("must be > 0, got {a}")));
        }
        require_positive("v", v)?;
        Ok(Self { ell_inv, a, v })
    }

    pub fn ell_inv(&self) -> f64 {
        self.ell_inv
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    fn eval(&self, omega: f64) -> Complex64 {
        Complex64::new(self.ell_inv + 0.5 * omega * omega / self.a, -omega / self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpKernel {
    k: f64,
    k_prime: f64,
}

impl ExpKernel {
    /// Kernel `k(s) = K' e^{-Ks}`; `K` in 1/s, `K'` in 1/(m·s).
    pub fn new(k: f64, k_prime: f64) -> Result<Self> {
        require_positive("K", k)?;
        require_positive("Kp", k_prime)?;
        Ok(Self { k, k_prime })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn k_prime(&self) -> f64 {
        self.k_prime
    }

    fn eval(&self, omega: f64) -> Complex64 {
        let (k, kp) = (self.k, self.k_prime);
        let denom = k * k + omega * omega;
        Complex64::new(kp * omega * omega / (k * denom), -kp * omega / denom)
    }

    /// Small-frequency `a = K³/2K'`.
    pub fn equivalent_a(&self) -> f64 {
        self.k.powi(3) / (2.0 * self.k_prime)
    }

    /// Small-frequency `v = K²/K'`.
    pub fn equivalent_v(&self) -> f64 {
        self.k * self.k / self.k_prime
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub thickness: f64,
    pub medium: MediumModel,
}

/// Ordered layers of homogeneous media. Beyond the last boundary the signal
/// continues in free space when `free_space_tail` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Layer>,
    free_space_tail: bool,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>, free_space_tail: bool) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("layers", "a stack needs at least one layer"));
        }
        for layer in &layers {
            require_positive("thickness", layer.thickness)?;
            if matches!(layer.medium, MediumModel::Layered(_)) {
                return Err(invalid("layers", "layers cannot themselves be layered"));
            }
        }
        Ok(Self {
            layers,
            free_space_tail,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn free_space_tail(&self) -> bool {
        self.free_space_tail
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    /// Cumulative boundaries `z_1 < z_2 < … < z_J`.
    pub fn boundaries(&self) -> Vec<f64> {
        self.layers
            .iter()
            .scan(0.0, |acc, l| {
                *acc += l.thickness;
                Some(*acc)
            })
            .collect()
    }

    /// Splits `[from, to]` into `(length, medium)` segments: the layers it
    /// crosses, pro rata at either end, then free space.
    fn segments(&self, from: f64, to: f64) -> Result<Vec<(f64, MediumModel)>> {
        let total = self.total_thickness();
        if to > total * (1.0 + 1e-12) && !self.free_space_tail {
            return Err(invalid(
                "z",
                format!("depth {to} is beyond the stack thickness {total} and no free-space tail is set"),
            ));
        }
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        let mut start = 0.0;
        for layer in &self.layers {
            let end = start + layer.thickness;
            let len = to.min(end) - from.max(start);
            if len > 0.0 {
                out.push((len, layer.medium.clone()));
            }
            start = end;
        }
        if to > total && self.free_space_tail {
            out.push((to - from.max(total), MediumModel::free_space()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MediumModel {
    Quadratic(Quadratic),
    ExpKernel(ExpKernel),
    Layered(LayerStack),
}

impl MediumModel {
    pub fn quadratic(ell_inv: f64, a: f64, v: f64) -> Result<Self> {
        Quadratic::new(ell_inv, a, v).map(MediumModel::Quadratic)
    }

    pub fn exp_kernel(k: f64, k_prime: f64) -> Result<Self> {
        ExpKernel::new(k, k_prime).map(MediumModel::ExpKernel)
    }

    pub fn layered(layers: Vec<Layer>, free_space_tail: bool) -> Result<Self> {
        LayerStack::new(layers, free_space_tail).map(MediumModel::Layered)
    }

    /// Lossless propagation at the speed of light.
    pub fn free_space() -> Self {
        MediumModel::Quadratic(Quadratic {
            ell_inv: 0.0,
            a: f64::INFINITY,
            v: SPEED_OF_LIGHT,
        })
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            MediumModel::Quadratic(_) => "quadratic",
            MediumModel::ExpKernel(_) => "exp-kernel",
            MediumModel::Layered(_) => "layered",
        }
    }

    /// Group delay and Gaussian spreading variance accumulated over depth
    /// `z`, from the small-frequency expansion `A ≈ ℓ⁻¹ + ω²/2a - iω/v`.
    pub fn delay_and_spread(&self, z: f64) -> Result<(f64, f64)> {
        check_depth(z)?;
        match self {
            MediumModel::Quadratic(q) => Ok((z / q.v, z / q.a)),
            MediumModel::ExpKernel(e) => Ok((z / e.equivalent_v(), z / e.equivalent_a())),
            MediumModel::Layered(stack) => stack.segments(0.0, z)?.iter().try_fold((0.0, 0.0), |(d, s), (len, m)| {
                let (dd, ds) = m.delay_and_spread(*len)?;
                Ok((d + dd, s + ds))
            }),
        }
    }

    /// `∫₀^z A_u(ω) du`, the exponent of the transfer function.
    pub fn depth_integrated_a(&self, z: f64, omega: f64) -> Result<Complex64> {
        self.interval_integrated_a(0.0, z, omega)
    }

    /// `∫_from^to A_u(ω) du` for `0 ≤ from ≤ to`.
    pub fn interval_integrated_a(&self, from: f64, to: f64, omega: f64) -> Result<Complex64> {
        check_depth(from)?;
        check_depth(to)?;
        if from > to {
            return Err(invalid("z", format!("interval [{from}, {to}] is reversed")));
        }
        match self {
            MediumModel::Layered(stack) => Ok(stack
                .segments(from, to)?
                .iter()
                .map(|(len, m)| *len * m.eval_homogeneous(omega))
                .sum()),
            _ => Ok((to - from) * self.eval_homogeneous(omega)),
        }
    }

    fn eval_homogeneous(&self, omega: f64) -> Complex64 {
        match self {
            MediumModel::Quadratic(q) => q.eval(omega),
            MediumModel::ExpKernel(e) => e.eval(omega),
            MediumModel::Layered(_) => unreachable!("layers are homogeneous"),
        }
    }
}

impl fmt::Display for MediumModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MediumModel::Quadratic(q) => write!(f, "quadratic(ell_inv={}, a={}, v={})", q.ell_inv, q.a, q.v),
            MediumModel::ExpKernel(e) => write!(f, "exp-kernel(K={}, Kp={})", e.k, e.k_prime),
            MediumModel::Layered(s) => {
                write!(f, "layered[")?;
                for (i, l) in s.layers.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{} m of {}", l.thickness, l.medium)?;
                }
                if s.free_space_tail {
                    write!(f, "; free space")?;
                }
                write!(f, "]")
            }
        }
    }
}

fn check_depth(z: f64) -> Result<()> {
    if z.is_finite() && z >= 0.0 {
        Ok(())
    } else {
        Err(invalid("z", format!("depth must be finite and >= 0, got {z}")))
    }
}

/// `A(ω)` of a homogeneous medium. Layered media have no single `A`; use
/// [`transfer_function`].
pub fn eval_a(medium: &MediumModel, omega: f64) -> Result<Complex64> {
    match medium {
        MediumModel::Layered(_) => Err(invalid(
            "medium",
            "layered media are depth dependent; evaluate transfer_function instead",
        )),
        m => Ok(m.eval_homogeneous(omega)),
    }
}

/// `M_z(ω) = exp(-∫₀^z A_u(ω) du)`.
pub fn transfer_function(medium: &MediumModel, z: f64, omega: f64) -> Result<Complex64> {
    Ok((-medium.depth_integrated_a(z, omega)?).exp())
}

/// Transfer function of the slice `[from, to]`; for homogeneous media it
/// depends only on `to - from`.
pub fn interval_transfer(medium: &MediumModel, from: f64, to: f64, omega: f64) -> Result<Complex64> {
    Ok((-medium.interval_integrated_a(from, to, omega)?).exp())
}

/// Least-squares fit of `B(ω) = ℓ⁻¹ + ω²/2a` and `C(ω) = -ω/v` over
/// `samples` evenly spaced frequencies in `(0, omega_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub ell_inv: f64,
    pub a: f64,
    pub v: f64,
}

pub fn fit_small_omega(medium: &MediumModel, omega_max: f64, samples: usize) -> Result<QuadraticFit> {
    require_positive("omega_max", omega_max)?;
    if samples < 3 {
        return Err(invalid("samples", "need at least 3 frequencies"));
    }
    let pts: Vec<(f64, Complex64)> = (1..=samples)
        .map(|i| {
            let w = omega_max * i as f64 / samples as f64;
            eval_a(medium, w).map(|a| (w, a))
        })
        .collect::<Result<_>>()?;
    // B against x = ω²
    let n = pts.len() as f64;
    let mx = pts.iter().map(|(w, _)| w * w).sum::<f64>() / n;
    let my = pts.iter().map(|(_, a)| a.re).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(w, a)| (w * w - mx) * (a.re - my)).sum();
    let sxx: f64 = pts.iter().map(|(w, _)| (w * w - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ell_inv = my - slope * mx;
    // -C against ω through the origin
    let inv_v = pts.iter().map(|(w, a)| -a.im * w).sum::<f64>() / pts.iter().map(|(w, _)| w * w).sum::<f64>();
    Ok(QuadraticFit {
        ell_inv,
        a: 1.0 / (2.0 * slope),
        v: 1.0 / inv_v,
    })
}

/// Inertial, damping and restoring constants of a driven oscillator
/// `m q̈ + b q̇ + k q = U cos ωt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzParams {
    pub m_inertial: f64,
    pub b_damp: f64,
    pub k_spring: f64,
}

impl LorentzParams {
    pub fn new(m_inertial: f64, b_damp: f64, k_spring: f64) -> Result<Self> {
        require_positive("m", m_inertial)?;
        if !(b_damp.is_finite() && b_damp >= 0.0) {
            return Err(invalid("b", "damping must be finite and >= 0"));
        }
        require_positive("k", k_spring)?;
        Ok(Self {
            m_inertial,
            b_damp,
            k_spring,
        })
    }
}

/// Steady-state response `q(t) = V cos ωt + W sin ωt` to `U cos ωt`.
pub fn lorentz_steady_state(p: &LorentzParams, u: f64, omega: f64) -> Result<(f64, f64)> {
    let detune = p.k_spring - p.m_inertial * omega * omega;
    let drag = p.b_damp * omega;
    let denom = detune * detune + drag * drag;
    if denom <= (f64::EPSILON * p.k_spring).powi(2) {
        return Err(Error::SingularInput(format!(
            "undamped resonance at omega = {omega} (k/m = {})",
            p.k_spring / p.m_inertial
        )));
    }
    Ok((detune * u / denom, drag * u / denom))
}

/// Phasor amplitudes `q` solving `(-ω² M + iω B_d + K) q = U·1` for coupled
/// oscillators driven by a common force. `masses` and `damping` are the
/// diagonals of `M` and `B_d`. The real response is `Re(q e^{iωt})`, so for
/// one oscillator `q = V - iW`.
pub fn coupled_steady_state(
    masses: &[f64],
    damping: &[f64],
    stiffness: &DMatrix<f64>,
    u: f64,
    omega: f64,
) -> Result<DVector<Complex64>> {
    let j = masses.len();
    if j == 0 || j > MAX_OSCILLATORS {
        return Err(invalid("M", format!("need 1..={MAX_OSCILLATORS} oscillators, got {j}")));
    }
    if damping.len() != j || stiffness.nrows() != j || stiffness.ncols() != j {
        return Err(invalid("Kmat", "dimensions of M, Bd and Kmat disagree"));
    }
    let w2 = omega * omega;
    let system = DMatrix::from_fn(j, j, |r, c| {
        let (m, b) = if r == c { (masses[r], damping[r]) } else { (0.0, 0.0) };
        Complex64::new(stiffness[(r, c)] - w2 * m, omega * b)
    });
    let sv = system.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularMatrix { condition });
    }
    let rhs = DVector::from_element(j, Complex64::new(u, 0.0));
    system
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularMatrix { condition })
}

/// Thickness-weighted harmonic means `(ã, ṽ)` of a stack of lossless-at-DC
/// quadratic layers of total thickness `ell`.
pub fn effective_params(stack: &LayerStack, ell: f64) -> Result<(f64, f64)> {
    require_positive("ell", ell)?;
    let total = stack.total_thickness();
    if ((ell - total) / total).abs() > 1e-9 {
        return Err(invalid("ell", format!("must equal the stack thickness {total}, got {ell}")));
    }
    let (mut inv_a, mut inv_v) = (0.0, 0.0);
    for layer in stack.layers() {
        match &layer.medium {
            MediumModel::Quadratic(q) if q.ell_inv == 0.0 => {
                inv_a += layer.thickness / q.a;
                inv_v += layer.thickness / q.v;
            }
            MediumModel::Quadratic(_) => {
                return Err(invalid("ell_inv", "layers absorbing at DC have no quadratic reduction"))
            }
            _ => return Err(invalid("layers", "effective parameters need quadratic layers")),
        }
    }
    Ok((ell / inv_a, ell / inv_v))
}
