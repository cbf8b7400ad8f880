//! Laboratory for studying cross-lingual factual recall in tiny language models.
//!
//! The pipeline: [`kg`] generates a synthetic knowledge graph of birth/death
//! events, [`synthlang`] derives two template languages with disjoint surface
//! vocabularies, [`corpus`] compiles train/test splits with a controllable
//! fraction of parallel "celebrity" facts, [`tok`] + [`nanoformer`] train a
//! small decoder-only transformer from scratch on CPU, and [`evalrec`],
//! [`reprlab`], [`unify`] measure recall and the degree to which the two
//! languages share internal representations. [`toyreg`] is a companion
//! logistic-regression environment, and [`lab`] orchestrates full experiments
//! and sweeps.
//!
//! All numeric model code is generic over the scalar type (`f32` for
//! training, `f64` for gradient checking); see [`num::Scalar`].

pub mod corpus;
pub mod error;
pub mod evalrec;
pub mod ioutil;
pub mod kg;
pub mod lab;
pub mod nanoformer;
pub mod num;
pub mod plot;
pub mod reprlab;
pub mod rng;
pub mod stats;
pub mod synthlang;
pub mod tok;
pub mod toyreg;
pub mod unify;

pub use error::{Error, Result};

/// Model specialisations for the two supported scalar widths.
pub type Model32 = nanoformer::Model<f32>;
pub type Model64 = nanoformer::Model<f64>;
