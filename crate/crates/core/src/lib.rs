//! Simulation and analysis toolkit for teleporting a photonic polarization
//! qubit onto a surface plasmon polariton.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`]: dense complex linear algebra for few-qubit states.
//! * [`protocol`]: the two-photon three-qubit teleportation pipeline
//!   (entanglement swap, 6-mode Bell-state measurement, feed-forward).
//! * [`channel`]: Werner noise, loss, the fidelity budget and the
//!   hole-array resonance calculator.
//! * [`tomo`]: state and process tomography, Bloch maps, Monte Carlo errors.
//! * [`counts`]: coincidence-count tables, CHSH and fidelity statistics.

pub mod channel;
pub mod counts;
mod error;
pub mod protocol;
pub mod qcore;
pub mod tomo;

pub use error::{Error, Result};

pub use channel::{ChannelModel, FidelityBudget, HoleArrayGeometry};
pub use counts::{CountsTable, TableBlock, TableKind};
pub use protocol::{BellOutcome, EomModel, InputLabel, ModeVector, Port};
pub use qcore::{BlochVector, MixedState, Pauli, PureState};
pub use tomo::{AffineBlochMap, MeasurementBasis, MeasurementRecord, ProcessMatrix};
