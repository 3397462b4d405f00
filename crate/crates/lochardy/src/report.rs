//! Report envelope shared by every subcommand.

use serde::Serialize;

use crate::formats::GridInfo;

pub const TOOL: &str = "lochardy";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub grid: GridInfo,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>, grid: GridInfo, result: T) -> Self {
        Report { tool: TOOL, version: VERSION, command: command.to_string(), config, seed, grid, result }
    }
}
