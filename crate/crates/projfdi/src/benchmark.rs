//! Stand-in for the laboratory three-tank system.

use projfdi_core::StateSpaceModel;

use crate::dto::ModelDto;
use crate::error::{Error, Result};

pub const THREE_TANK_JSON: &str = include_str!("../fixtures/three_tank.json");

pub fn benchmark_plant() -> StateSpaceModel {
    let dto: ModelDto = serde_json::from_str(THREE_TANK_JSON).expect("fixture parses");
    dto.to_model().expect("fixture is a valid model")
}

pub fn named_plant(name: &str) -> Result<StateSpaceModel> {
    match name {
        "benchmark" | "three-tank" => Ok(benchmark_plant()),
        other => Err(Error::Config(format!("unknown plant name {other:?}"))),
    }
}
