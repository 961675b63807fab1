//! Language-guided compact world models for instruction grounding.
//!
//! Three Distributed Correspondence Graph models read the parse of a
//! navigation instruction and infer, respectively, the scene labels it refers
//! to, the perceptual classifiers it needs, and its grounding. The first two
//! shrink the world model (observation filtering and adaptive perception);
//! the third grounds the instruction in the compact model.
//!
//! ```no_run
//! use langworld_core::{fixtures, pipeline, world, Mode};
//!
//! let registry = world::ClassifierRegistry::default();
//! let site = pipeline::SiteLog::simulate(&fixtures::site1(), &registry).unwrap();
//! # let models: pipeline::Models = unimplemented!();
//! let result = pipeline::run(
//!     "go to the nearest ball in the hallway",
//!     &site,
//!     &models,
//!     &registry,
//!     Mode::OfAp,
//! );
//! println!("{} objects, {:.1} cost units", result.object_count, result.cost_units);
//! ```

pub mod adapt;
pub mod corpus;
pub mod dcg;
pub mod fixtures;
pub mod grammar;
pub mod pipeline;
pub mod symbols;
pub mod world;

mod error;

pub use error::Error;
pub use grammar::{ParseTree, Phrase, PhraseCategory, Token};
pub use pipeline::{Mode, RunResult};
pub use symbols::{
    Domain, GroundingSymbol, PerceptionSymbol, SceneLabel, SemanticSymbol, SpatialRelation, Symbol,
    SymbolSpace,
};
pub use world::{ClassifierRegistry, ObjectId, Observation, Pose, WorldModel};

pub type Result<T, E = Error> = std::result::Result<T, E>;
