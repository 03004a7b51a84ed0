pub mod cli;
pub mod error;
pub mod families;
pub mod inference;
pub mod io;
pub mod markov;
pub mod smoothing;
pub mod sim;
pub mod splines;
pub mod uncertainty;

pub use error::{Error, Result};
