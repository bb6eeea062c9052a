//! Scrap-metal trade networks, firm ecosystems and EAF capacity extrapolation.
//!
//! The crate is organised as a set of pure analysis stages plus a pipeline
//! driver that wires them together:
//!
//! * [`trade`] parses bilateral trade records and aggregates them into
//!   time-windowed country networks.
//! * [`backbone`] applies the disparity filter to those networks.
//! * [`firms`] selects scrap-related companies from a registry export and
//!   summarises them.
//! * [`topics`] preprocesses firm descriptions and fits LDA topic models.
//! * [`regression`] fits the no-intercept OLS model of EAF capacity.
//! * [`extrapolate`] turns planned capacity into additional firms, revenue and
//!   employees by Monte Carlo.
//! * [`pipeline`] and [`export`] run everything from a config file and write
//!   the result tables.

pub mod backbone;
pub mod countries;
pub mod error;
pub mod export;
pub mod extrapolate;
pub mod firms;
pub mod pipeline;
pub mod regression;
pub mod seed;
pub mod stats;
pub mod topics;
pub mod trade;

pub use error::{Error, Result};
