//! Oracles and fixtures shared by the integration and acceptance tests.
//!
//! Oracles never call the code they check; fixtures only build inputs.
#![allow(dead_code)]

pub mod fd;
pub mod pairs;
pub mod scoring;
pub mod synth;
