//! Deterministic discrete-event simulator of a two-node entanglement
//! delivery service.
//!
//! The crate is organized bottom-up:
//!
//! - [`qstate`]: exact two-qubit density-matrix engine (states, gates,
//!   measurements, fidelities).
//! - [`noise`]: hardware error models and the fidelity calibration table.
//! - [`netsim`]: the discrete-event core (clock, queue, seeded RNG streams,
//!   classical channels).
//! - [`phys`]: per-node device controllers, the command/outcome interface,
//!   and the heralded-entanglement synchronization procedure.
//! - [`link`]: the link layer: request intake, TDMA scheduling, Pauli and
//!   classical corrections, entanglement IDs, latency bookkeeping.
//! - [`apps`]: the benchmark applications and the instruction processor.
//! - [`sim`]: the event loop wiring the two nodes together.
//! - [`analysis`]: charge filtering, readout unfolding, tomography, and
//!   latency aggregation.
//! - [`config`] and [`runner`]: run configuration, experiment execution and
//!   the on-disk output formats.

pub mod analysis;
pub mod apps;
pub mod config;
pub mod link;
pub mod netsim;
pub mod noise;
pub mod phys;
pub mod qstate;
pub mod runner;
pub mod sim;
