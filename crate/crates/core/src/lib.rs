//! Cell-well data analysis: summarization, DWD classification, uncertainty
//! quantification and simulation.

pub mod classify;
pub mod datamodel;
pub mod error;
pub mod pipeline;
pub mod rng;
pub mod simulate;
pub mod summarize;
pub mod uncertainty;

pub use error::{Error, Result};
