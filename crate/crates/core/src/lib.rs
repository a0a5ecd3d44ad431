//! Linear pulse propagation through dispersive, absorbing media.
//!
//! A medium is described per unit depth by a complex exponent `A(ω)`; after
//! depth `z` a spectrum is multiplied by `M_z(ω) = exp(-z A(ω))`. The crate
//! samples input pulses on a uniform grid, propagates them by FFT or by the
//! closed forms available for quadratic media, averages over random media and
//! measures the resulting precursors.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod media;
pub mod propagate;
pub mod quadrature;
pub mod signals;
pub mod stochastic;

pub use error::{Error, Result};
pub use grid::{make_grid, SampledSignal, SpectralPlan, Spectrum, TimeGrid};
pub use media::{Layer, LayerStack, MediumModel};
pub use propagate::{propagate_fft, PropagationResult, Propagator};
pub use signals::{PulseKind, PulseSpec};
pub use stochastic::EnsembleSpec;
