pub mod campaign;
pub mod config;
pub mod ecqi;
pub mod error;
pub mod kpi;
pub mod link;
pub mod prob;
pub mod sim;

pub use error::{Error, Result};
