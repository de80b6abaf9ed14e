//! Power and force limiting for collaborative robots: permissible velocities
//! from the energy-transfer model, effective robot mass, analysis of measured
//! collision force traces, a one-dimensional collision simulator and
//! aggregation of measurement datasets into reference tables.

pub mod dynamics;
pub mod pfl;
pub mod report;
pub mod sim;
pub mod trace;
