//! Scenario definitions, default sweeps and TOML overlays.

use std::fmt;

use isac_hbf::ao_driver::Receiver;
use isac_hbf::procrustes::{endfire_to_broadside, TransmitMode, DEFAULT_DIRECTIONS_ENDFIRE, DEFAULT_MAINLOBE_DEG};
use isac_hbf::{LfmParams, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ScenarioName {
    Beampattern,
    Waveform,
    Convergence,
    Pareto,
    MseVsSnr,
    MseVsUes,
    MseVsAntennas,
    MseVsRf,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 8] = [
        ScenarioName::Beampattern,
        ScenarioName::Waveform,
        ScenarioName::Convergence,
        ScenarioName::Pareto,
        ScenarioName::MseVsSnr,
        ScenarioName::MseVsUes,
        ScenarioName::MseVsAntennas,
        ScenarioName::MseVsRf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Beampattern => "beampattern",
            ScenarioName::Waveform => "waveform",
            ScenarioName::Convergence => "convergence",
            ScenarioName::Pareto => "pareto",
            ScenarioName::MseVsSnr => "mse_vs_snr",
            ScenarioName::MseVsUes => "mse_vs_ues",
            ScenarioName::MseVsAntennas => "mse_vs_antennas",
            ScenarioName::MseVsRf => "mse_vs_rf",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioName::Beampattern => "hybrid, digital and ideal transmit beampatterns",
            ScenarioName::Waveform => "designed versus reference waveform on one antenna",
            ScenarioName::Convergence => "weighted objective per outer iteration",
            ScenarioName::Pareto => "similarity versus aggregation MSE over the weight grid",
            ScenarioName::MseVsSnr => "normalized MSE versus SNR",
            ScenarioName::MseVsUes => "normalized MSE versus number of UEs",
            ScenarioName::MseVsAntennas => "normalized MSE versus AP antennas",
            ScenarioName::MseVsRf => "normalized MSE versus RF chains",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn config(self) -> SystemConfig {
        match self {
            Scale::Desk => SystemConfig::desk(),
            Scale::Paper => SystemConfig::full_size(),
        }
    }
}

/// Parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Rho,
    SnrDb,
    NumUes,
    NA,
    NRf,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Rho => "rho",
            SweepParam::SnrDb => "snr_db",
            SweepParam::NumUes => "num_ues",
            SweepParam::NA => "n_a",
            SweepParam::NRf => "n_rf",
        }
    }

    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig, HarnessError> {
        let count = || {
            if value.fract() != 0.0 || value < 1.0 {
                Err(invalid(format!("{} needs a positive integer, got {value}", self.as_str())))
            } else {
                Ok(value as usize)
            }
        };
        let mut cfg = base.clone();
        match self {
            SweepParam::Rho => cfg.rho = value,
            SweepParam::SnrDb => cfg.snr_db = value,
            SweepParam::NumUes => cfg.num_ues = count()?,
            SweepParam::NA => cfg.n_a = count()?,
            SweepParam::NRf => cfg.n_rf = count()?,
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    /// `None` runs a single point at the base configuration.
    pub parameter: Option<SweepParam>,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn none() -> Self {
        Self { parameter: None, values: Vec::new() }
    }

    pub fn over(parameter: SweepParam, values: Vec<f64>) -> Self {
        Self { parameter: Some(parameter), values }
    }

    /// Sweep points with their resolved configurations.
    pub fn points(&self, base: &SystemConfig) -> Result<Vec<(Option<f64>, SystemConfig)>, HarnessError> {
        match self.parameter {
            None => Ok(vec![(None, base.clone())]),
            Some(p) => self.values.iter().map(|&v| Ok((Some(v), p.apply(base, v)?))).collect(),
        }
    }
}

/// `0.01, 0.06, …, 0.96`.
pub fn pareto_grid() -> Vec<f64> {
    (0..).map(|i| (1 + 5 * i) as f64 / 100.0).take_while(|&r| r <= 1.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerMode {
    Hybrid,
    Digital,
    Both,
}

impl CombinerMode {
    pub fn receivers(self) -> Vec<Receiver> {
        match self {
            CombinerMode::Hybrid => vec![Receiver::Hybrid],
            CombinerMode::Digital => vec![Receiver::Digital],
            CombinerMode::Both => vec![Receiver::Hybrid, Receiver::Digital],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioName,
    pub base: SystemConfig,
    pub sweep: Sweep,
    pub trials: usize,
    pub combiner_mode: CombinerMode,
    pub transmit_mode: TransmitMode,
    /// Beam centers in radians from broadside.
    pub directions: Vec<f64>,
    pub mainlobe_deg: f64,
    pub lfm: LfmParams,
    /// Points of the beampattern export grid over `[-90°, 90°]`.
    pub grid_points: usize,
    /// Antenna shown by the waveform export.
    pub antenna: usize,
}

impl Scenario {
    pub fn preset(name: ScenarioName, scale: Scale) -> Self {
        let base = scale.config();
        let (sweep, combiner_mode) = match name {
            ScenarioName::Beampattern => (Sweep::none(), CombinerMode::Both),
            ScenarioName::Waveform | ScenarioName::Convergence => (Sweep::none(), CombinerMode::Hybrid),
            ScenarioName::Pareto => (Sweep::over(SweepParam::Rho, pareto_grid()), CombinerMode::Hybrid),
            ScenarioName::MseVsSnr => (
                Sweep::over(SweepParam::SnrDb, vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0]),
                CombinerMode::Both,
            ),
            ScenarioName::MseVsUes => (Sweep::over(SweepParam::NumUes, vec![1.0, 2.0, 4.0, 8.0]), CombinerMode::Both),
            ScenarioName::MseVsAntennas => {
                let values = match scale {
                    Scale::Desk => vec![8.0, 16.0, 24.0, 32.0],
                    Scale::Paper => vec![32.0, 48.0, 64.0, 80.0, 96.0],
                };
                (Sweep::over(SweepParam::NA, values), CombinerMode::Both)
            }
            ScenarioName::MseVsRf => {
                let values = match scale {
                    Scale::Desk => vec![4.0, 6.0, 8.0, 10.0, 12.0, 16.0],
                    Scale::Paper => vec![16.0, 24.0, 32.0, 48.0, 64.0],
                };
                (Sweep::over(SweepParam::NRf, values), CombinerMode::Both)
            }
        };
        Self {
            name,
            base,
            sweep,
            trials: 50,
            combiner_mode,
            transmit_mode: TransmitMode::Directional,
            directions: DEFAULT_DIRECTIONS_ENDFIRE.iter().map(|&d| endfire_to_broadside(d)).collect(),
            mainlobe_deg: DEFAULT_MAINLOBE_DEG,
            lfm: LfmParams::default(),
            grid_points: 181,
            antenna: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if let Some(p) = self.sweep.parameter {
            if self.sweep.values.is_empty() {
                return Err(invalid(format!("sweep over {} has no values", p.as_str())));
            }
        }
        if let Some(bad) = self.sweep.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(format!("sweep values must be nonnegative, got {bad}")));
        }
        if self.grid_points < 2 {
            return Err(invalid("beampattern grid needs at least two points"));
        }
        for (value, cfg) in self.sweep.points(&self.base)? {
            cfg.validate().map_err(|e| match value {
                Some(v) => invalid(format!("sweep value {v}: {e}")),
                None => HarnessError::Core(e),
            })?;
            if self.antenna >= cfg.n_t {
                return Err(invalid(format!("antenna {} out of range for n_t = {}", self.antenna, cfg.n_t)));
            }
        }
        Ok(())
    }

    /// Applies a TOML overlay. Top-level keys set scenario fields; a
    /// `[system]` table patches the base configuration and a `[lfm]` table
    /// the reference chirp.
    pub fn apply_overlay(&mut self, text: &str) -> Result<(), HarnessError> {
        let overlay: Overlay = toml::from_str(text)?;
        if let Some(t) = overlay.trials {
            self.trials = t;
        }
        if let Some(m) = overlay.combiner_mode {
            self.combiner_mode = m;
        }
        if let Some(m) = overlay.transmit_mode {
            self.transmit_mode = m;
        }
        if let Some(d) = overlay.directions {
            self.directions = d;
        }
        if let Some(w) = overlay.mainlobe_deg {
            self.mainlobe_deg = w;
        }
        if let Some(g) = overlay.grid_points {
            self.grid_points = g;
        }
        if let Some(a) = overlay.antenna {
            self.antenna = a;
        }
        if let Some(values) = overlay.sweep {
            if self.sweep.parameter.is_none() {
                return Err(invalid(format!("scenario {} has no sweep parameter", self.name)));
            }
            self.sweep.values = values;
        }
        if let Some(patch) = overlay.system {
            self.base = patch_table(&self.base, patch, "system")?;
        }
        if let Some(patch) = overlay.lfm {
            self.lfm = patch_table(&self.lfm, patch, "lfm")?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overlay {
    trials: Option<usize>,
    combiner_mode: Option<CombinerMode>,
    transmit_mode: Option<TransmitMode>,
    directions: Option<Vec<f64>>,
    mainlobe_deg: Option<f64>,
    grid_points: Option<usize>,
    antenna: Option<usize>,
    sweep: Option<Vec<f64>>,
    system: Option<toml::Table>,
    lfm: Option<toml::Table>,
}

fn patch_table<T>(current: &T, patch: toml::Table, section: &str) -> Result<T, HarnessError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let mut table = toml::Table::try_from(current)?;
    for (key, value) in patch {
        if !table.contains_key(&key) {
            return Err(invalid(format!("unknown key `{key}` in [{section}]")));
        }
        table.insert(key, value);
    }
    Ok(table.try_into()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pareto_grid_matches_step() {
        let g = pareto_grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[1], 0.06);
        assert_eq!(*g.last().unwrap(), 0.96);
    }

    #[test]
    fn every_preset_validates_at_desk_scale() {
        for name in ScenarioName::ALL {
            Scenario::preset(name, Scale::Desk).validate().unwrap();
        }
    }

    #[test]
    fn overlay_patches_system_and_sweep() {
        let mut sc = Scenario::preset(ScenarioName::MseVsSnr, Scale::Desk);
        sc.apply_overlay("trials = 3\nsweep = [2.0, 5.0]\ncombiner_mode = \"digital\"\n[system]\nrho = 0.5\n")
            .unwrap();
        assert_eq!(sc.trials, 3);
        assert_eq!(sc.sweep.values, vec![2.0, 5.0]);
        assert_eq!(sc.combiner_mode, CombinerMode::Digital);
        assert_eq!(sc.base.rho, 0.5);
        assert_eq!(sc.base.n_a, 16);
    }

    #[test]
    fn overlay_rejects_unknown_keys() {
        let mut sc = Scenario::preset(ScenarioName::Pareto, Scale::Desk);
        assert!(sc.apply_overlay("[system]\nrhoo = 0.5\n").is_err());
        assert!(sc.apply_overlay("trails = 5\n").is_err());
        let mut single = Scenario::preset(ScenarioName::Convergence, Scale::Desk);
        assert!(single.apply_overlay("sweep = [1.0]\n").is_err());
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut sc = Scenario::preset(ScenarioName::MseVsUes, Scale::Desk);
        sc.trials = 0;
        assert!(sc.validate().is_err());
        let mut sc = Scenario::preset(ScenarioName::MseVsUes, Scale::Desk);
        sc.sweep.values = vec![1.5];
        assert!(sc.validate().is_err());
        let mut sc = Scenario::preset(ScenarioName::MseVsSnr, Scale::Desk);
        sc.sweep.values = vec![-4.0];
        assert!(sc.validate().is_err());
        let mut sc = Scenario::preset(ScenarioName::MseVsRf, Scale::Desk);
        sc.sweep.values = vec![2.0];
        assert!(sc.validate().is_err());
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let sc = Scenario::preset(ScenarioName::MseVsAntennas, Scale::Paper);
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&sc).unwrap()).unwrap();
        assert_eq!(back, sc);
    }
}
