//! Transition-based dependency parsing (arc-hybrid with SWAP) over
//! recurrent token representations, with optional recursive composition of
//! subtree vectors, a reparsing ensemble, and evaluation utilities.
//!
//! The numeric core is generic over the float type; the aliases below fix
//! it to `f64`.

pub mod autodiff;
pub mod composition;
pub mod conllu;
pub mod ensemble;
pub mod eval;
pub mod model;
pub mod scalar;
pub mod synth;
pub mod transition;
pub mod wordrep;

pub type ParserModel = model::ParserModel<f64>;
pub type ParameterStore = autodiff::ParameterStore<f64>;
pub type Graph<'p> = autodiff::Graph<'p, f64>;
