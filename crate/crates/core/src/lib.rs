//! Land-use optimization with evolutionary, surrogate-assisted prescription.
//!
//! The pipeline: build or load a dataset of land-use transitions and their
//! carbon emissions ([`dataset`]), fit a surrogate emission model
//! ([`predictors`]), evolve prescriptor networks that trade emissions against
//! the amount of land changed ([`prescriptor`], [`evolution`]), compare them
//! with simple baselines ([`heuristics`]) and serve what-if queries over HTTP
//! ([`service`]).

pub mod dataset;
pub mod error;
pub mod evolution;
pub mod heuristics;
pub mod land;
pub mod pipeline;
pub mod predictors;
pub mod prescriptor;
pub mod service;

pub use error::{Error, Result};
pub use land::{ActionDelta, CellContext, LandType, LandUseVector, Outcome, Recommendation};
