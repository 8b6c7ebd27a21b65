//! Simulation and analysis of lightweight platforms that clamp onto a shared,
//! roller-driven cable loop for motion and onto stationary cables for holding.
//!
//! - [`model`]: configuration, domain types, unit normalization
//! - [`clamping`]: cam contact force and clamp switching
//! - [`kinematics`]: along-span position from clamp timing, motion planning
//! - [`dynamics`]: vertical spring-mass dynamics and static sag
//! - [`analysis`]: sag sweeps and pretension sizing
//! - [`sim`] and [`trace`]: scenario runner and CSV traces

pub mod analysis;
pub mod clamping;
pub mod dynamics;
pub mod kinematics;
pub mod model;
pub mod noise;
pub mod sim;
pub mod trace;

pub use model::{default_paper_config, Scenario, GRAVITY};
