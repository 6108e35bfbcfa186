//! Monte-Carlo harness for the hybrid beamforming and waveform design
//! toolkit: scenario presets, seeded trial runs, CSV result files with a JSON
//! header line, beampattern and waveform exports, and a self-audit that
//! recomputes every stored metric from the saved designs.

pub mod audit;
pub mod error;
pub mod export;
pub mod record;
pub mod runner;
pub mod scenario;

pub use error::HarnessError;
pub use record::{TrialMetrics, TrialRecord};
pub use runner::{run_scenario, RunOutput, SummaryRow};
pub use scenario::{CombinerMode, Scale, Scenario, ScenarioName, Sweep, SweepParam};

/// Version of the result, summary and design file layouts.
pub const FORMAT_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "HBF_OUTPUT_DIR";
