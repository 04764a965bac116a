//! Simulation and analysis of on-demand single-photon frequency conversion
//! in a doubly resonant χ⁽²⁾ cavity coupled to a three-level emitter.

pub mod adiabatic;
pub mod constants;
pub mod drive;
pub mod dynamics;
pub mod model;
pub mod ode;
pub mod overlap;
pub mod presets;
pub mod pulse;
pub mod report;
pub mod scenario;
pub mod units;
