//! Random orderings of integer-labelled cards driven by quasi-uniform
//! measures, the card shuffles they induce, and exact oracles for checking
//! both on small decks.

pub mod cli;
pub mod kernels;
pub mod measure;
pub mod oracle;
pub mod ordering;
pub mod perm;
pub mod rational;
pub mod stats;

pub use measure::{AtomSide, ConjugateSample, GapInterval, MeasureError, QuasiUniformMeasure};
pub use oracle::{PermutationDistribution, StepType};
pub use ordering::{sample_ordering, LabelSet, OrderingSample};
pub use perm::Perm;
pub use rational::Rational;
