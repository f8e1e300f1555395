//! Simulation of always-on ZZ crosstalk between fixed-frequency qubits and
//! its suppression by dynamical decoupling.
//!
//! The crate is organised bottom-up:
//!
//! * [`operator`]: dense Pauli algebra, exponentials, partial traces.
//! * [`device`]: lab and rotating-frame Hamiltonians, dressed frequencies.
//! * [`lindblad`]: phenomenological Lindblad dynamics and closed forms.
//! * [`redfield`]: time-convolutionless Redfield dynamics for an Ohmic bath.
//! * [`dd`]: decoupling sequences and pulse scheduling.
//! * [`magnus`]: first-order toggling-frame cancellation analysis.
//! * [`experiment`]: state-protection runs, fits, shot noise and DDPG.
//! * [`config`]: JSON schemas with unit conversion.
//!
//! Angular frequencies are in rad/ns and times in ns throughout. Qubit 0 is the
//! leftmost tensor factor.

pub mod config;
pub mod dd;
pub mod device;
pub mod error;
pub mod experiment;
pub mod lindblad;
pub mod magnus;
pub mod operator;
pub mod redfield;

pub use error::{Error, Result};
