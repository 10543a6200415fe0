pub mod cadmmb;
pub mod centralized;
pub mod consensus;
pub mod error;
pub mod cli;
pub mod hydro;
pub mod io;
pub mod market;
pub mod presets;
pub mod runtime;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};
