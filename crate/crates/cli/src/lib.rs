//! Scenario-driven front end: parse a scenario, run it, write the products.

pub mod app;
pub mod plots;
pub mod scenario;
