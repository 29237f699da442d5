pub mod belief;
pub mod bounds;
pub mod compression;
pub mod env;
pub mod error;
pub mod game;
pub mod general_sum;
pub mod harness;
pub mod ids;
pub mod info;
pub mod lp;
pub mod mg;
pub mod rng;

pub use error::{Error, Result};
