//! Benchmark problem builders.

mod grid;
mod hotel;
mod random;
mod training;

pub use grid::{build_grid, node as grid_node};
pub use hotel::{build_hotel, room_name, HotelConfig, Layout, DORM, ITEMS, NORMAL, SUITE, UNASSIGNED};
pub use random::{random_small_instance, RandomSizes};
pub use training::{build_training_plan, slot as training_slot, Activity, TrainingConfig};

use crate::error::{Error, Result};
use crate::model::ProblemModel;

/// Names accepted by [`builtin`].
pub const BUILTIN: [&str; 3] = ["grid", "training", "hotel"];

/// A built-in benchmark with its default configuration.
pub fn builtin(name: &str) -> Result<ProblemModel> {
    match name {
        "grid" => Ok(build_grid()),
        "training" => build_training_plan(&TrainingConfig::default()),
        "hotel" => build_hotel(&HotelConfig::default()),
        other => Err(Error::invalid(
            "problem",
            format!("unknown built-in problem `{other}` (grid, training, hotel)"),
        )),
    }
}
