//! Deterministic cooperative-perception driving simulator.
//!
//! The pipeline per agent is sensing → perception → (V2X channel) → late
//! fusion → planning → control → kinematics, driven at a fixed tick by the
//! [`harness`]. Scenarios are declarative TOML documents; twelve ship
//! built in (see [`scenarios::builtin`]).

pub mod control;
pub mod edge_ai;
pub mod geometry;
pub mod harness;
pub mod perception;
pub mod planning;
pub mod scenarios;
pub mod sensing;
pub mod world;
