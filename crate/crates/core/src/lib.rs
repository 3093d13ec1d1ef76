pub mod acceptance;
pub mod error;
pub mod model;
pub(crate) mod par;
pub mod rd_bounds;
pub mod region;
pub mod uncoded;
pub mod vq_analytic;
pub mod vq_sim;

pub use error::{Error, Result};
