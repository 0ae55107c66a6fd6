//! Bundled logistics dataset: 27 process-model configurations with their
//! fitness, precision and generalization, plus throughput time and
//! implementation risk for the configurations that survive screening.

/// Scales consistent with the published totals (throughput medium 0.70,
/// implementation risk medium 0.75).
pub const LOGISTICS_SCENARIO: &str = include_str!("../data/logistics.scenario.json");

/// Alternative scale values (throughput medium 0.75, implementation
/// risk medium 0.70).
pub const ALT_SCALES_SCENARIO: &str = include_str!("../data/logistics_alt_scales.scenario.json");

/// `id,fitness,precision,generalization` for all 27 configurations.
pub const METRICS_CSV: &str = include_str!("../data/inductive_miner_metrics.csv");

pub const LOGISTICS_SCENARIO_FILE: &str = "logistics.scenario.json";
pub const ALT_SCALES_SCENARIO_FILE: &str = "logistics_alt_scales.scenario.json";
pub const METRICS_FILE: &str = "inductive_miner_metrics.csv";

/// Absolute path of a bundled file in the source tree.
pub fn path(file: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(file)
}
