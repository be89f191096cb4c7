//! Nested weighted automata, automata with monitor counters and
//! deterministic weighted automata, evaluated over labeled Markov chains
//! with exact rational arithmetic.

pub mod analysis;
pub mod automaton;
pub mod error;
pub mod gen;
pub mod json;
pub mod linalg;
pub mod markov;
pub mod mca;
pub mod nwa;
pub mod sim;
pub mod value;

pub use error::{Error, Result};
