//! One-dimensional cellular automata with local symmetries.
//!
//! - [`rule`]: local rules, periodic configurations, evolution.
//! - [`families`]: symmetry families, exact counting, enumeration and sampling.
//! - [`rescale`]: packing, rescaling, sub-automata and bounded simulation search.
//! - [`encodings`]: the set encoding and the captive set encoding of arbitrary rules.
//! - [`density`]: constraint sets of simulation constructions, exact
//!   probabilities and density bounds.
//! - [`render`]: space-time diagrams.

pub mod density;
pub mod encodings;
pub mod error;
pub mod families;
pub mod render;
pub mod rescale;
pub mod rule;

pub use error::{Error, Result};
pub use families::{count_family, enumerate_family, family_key, is_member, sample_rule, FamilySpec, NKey, Symmetry};
pub use rule::{apply_local, evolve, parse_rule, serialize_rule, step, PConfig, Rule, State, Trace};
