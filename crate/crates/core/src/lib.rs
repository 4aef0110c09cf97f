pub mod constructors;
pub mod entmodel;
pub mod error;
pub mod ordinal;
pub mod rational;
pub mod realize1d;
pub mod seqalg;
pub mod transfinite;

pub use entmodel::{EntropyModel, ModelPoint};
pub use error::{AccumError, Result};
pub use ordinal::Ordinal;
pub use rational::Q;
pub use seqalg::{Limit, ScalarSeq, Sup};
