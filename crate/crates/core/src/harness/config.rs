//! Scenario configuration: one flat TOML table. Every key is optional and
//! falls back to the `defaults = "paper"` preset (24 sites, 10 drops).
//!
//! ```toml
//! defaults = "paper"
//! num_drops = 10
//! seed = 1
//! modes = ["subband", "subband_jd", "orthog", "no_subband"]
//! directions = ["dl", "ul"]
//! femtos_per_cell = 10
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{AntennaPattern, ShadowingModel};
use crate::error::{Error, Result};
use crate::femto_control::{ControlConfig, LoadUpdate};
use crate::radio::{Direction, RadioConfig};
use crate::rate_model::Mode;
use crate::topology::TopologyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub defaults: Preset,

    pub num_drops: usize,
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub directions: Vec<Direction>,
    /// Drops whose load-factor iterations are written as traces.
    pub trace_drops: Vec<usize>,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    /// Worker threads; 0 means the `FFR_WORKERS` variable or all cores.
    #[serde(skip_serializing)]
    pub workers: usize,

    // topology
    pub num_site_rows: usize,
    pub num_site_cols: usize,
    pub cell_radius_m: f64,
    pub sectors_per_site: usize,
    pub macro_ues_per_cell: usize,
    pub femtos_per_cell: usize,
    pub femto_link_distance_m: f64,

    // channel
    pub sigma_macro_db: f64,
    pub inter_site_corr: f64,
    pub intra_site_corr: f64,
    pub sigma_femto_db: f64,
    pub antenna_theta_3db_deg: f64,
    pub antenna_a_max_db: f64,

    // radio
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub ue_noise_figure_db: f64,
    pub bs_noise_figure_db: f64,
    pub macro_bs_power_dbm: f64,
    pub macro_ue_max_dbm: f64,
    pub femto_bs_max_dbm: f64,
    pub femto_ue_max_dbm: f64,
    pub snr_gap: f64,
    pub max_se: f64,

    // macro plan
    pub reuse1_fraction: f64,
    pub iot_target_db: f64,

    // femto control
    pub iterations: usize,
    pub lambda: f64,
    /// Non-positive disables the per-device cap.
    pub device_cap: f64,
    pub initial_load: f64,
    pub load_beta: f64,
    pub load_min: f64,
    pub load_max: f64,
    pub load_max_ratio: f64,
    pub dl_rate_loss: f64,
    pub ul_rise_db: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let t = TopologyConfig::default();
        let sh = ShadowingModel::default();
        let a = AntennaPattern::default();
        let r = RadioConfig::default();
        let c = ControlConfig::default();
        Self {
            defaults: Preset::Paper,
            num_drops: 10,
            seed: 1,
            modes: Mode::ALL.to_vec(),
            directions: Direction::ALL.to_vec(),
            trace_drops: Vec::new(),
            output_dir: PathBuf::from("out"),
            workers: 0,
            num_site_rows: t.num_site_rows,
            num_site_cols: t.num_site_cols,
            cell_radius_m: t.cell_radius_m,
            sectors_per_site: t.sectors_per_site,
            macro_ues_per_cell: t.macro_ues_per_cell,
            femtos_per_cell: t.femtos_per_cell,
            femto_link_distance_m: t.femto_link_distance_m,
            sigma_macro_db: sh.sigma_macro_db,
            inter_site_corr: sh.inter_site_corr,
            intra_site_corr: sh.intra_site_corr,
            sigma_femto_db: sh.sigma_femto_db,
            antenna_theta_3db_deg: a.theta_3db_deg,
            antenna_a_max_db: a.a_max_db,
            bandwidth_hz: r.bandwidth_hz,
            noise_density_dbm_hz: r.noise_density_dbm_hz,
            ue_noise_figure_db: r.ue_noise_figure_db,
            bs_noise_figure_db: r.bs_noise_figure_db,
            macro_bs_power_dbm: r.macro_bs_power_dbm,
            macro_ue_max_dbm: r.macro_ue_max_dbm,
            femto_bs_max_dbm: r.femto_bs_max_dbm,
            femto_ue_max_dbm: r.femto_ue_max_dbm,
            snr_gap: r.snr_gap,
            max_se: r.max_se,
            reuse1_fraction: 0.5,
            iot_target_db: 10.0,
            iterations: c.iterations,
            lambda: c.lambda,
            device_cap: c.device_cap.unwrap_or(0.0),
            initial_load: c.initial_load,
            load_beta: c.update.beta,
            load_min: c.update.s_min,
            load_max: c.update.s_max,
            load_max_ratio: c.update.max_ratio,
            dl_rate_loss: c.dl_rate_loss,
            ul_rise_db: c.ul_rise_db,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e))
    }

    pub fn topology(&self) -> TopologyConfig {
        TopologyConfig {
            num_site_rows: self.num_site_rows,
            num_site_cols: self.num_site_cols,
            cell_radius_m: self.cell_radius_m,
            sectors_per_site: self.sectors_per_site,
            macro_ues_per_cell: self.macro_ues_per_cell,
            femtos_per_cell: self.femtos_per_cell,
            femto_link_distance_m: self.femto_link_distance_m,
        }
    }

    pub fn shadowing(&self) -> ShadowingModel {
        ShadowingModel {
            sigma_macro_db: self.sigma_macro_db,
            inter_site_corr: self.inter_site_corr,
            intra_site_corr: self.intra_site_corr,
            sigma_femto_db: self.sigma_femto_db,
        }
    }

    pub fn antenna(&self) -> AntennaPattern {
        AntennaPattern {
            theta_3db_deg: self.antenna_theta_3db_deg,
            a_max_db: self.antenna_a_max_db,
        }
    }

    pub fn radio(&self) -> RadioConfig {
        RadioConfig {
            bandwidth_hz: self.bandwidth_hz,
            noise_density_dbm_hz: self.noise_density_dbm_hz,
            ue_noise_figure_db: self.ue_noise_figure_db,
            bs_noise_figure_db: self.bs_noise_figure_db,
            macro_bs_power_dbm: self.macro_bs_power_dbm,
            macro_ue_max_dbm: self.macro_ue_max_dbm,
            femto_bs_max_dbm: self.femto_bs_max_dbm,
            femto_ue_max_dbm: self.femto_ue_max_dbm,
            snr_gap: self.snr_gap,
            max_se: self.max_se,
        }
    }

    pub fn control(&self) -> ControlConfig {
        ControlConfig {
            iterations: self.iterations,
            lambda: self.lambda,
            device_cap: (self.device_cap > 0.0).then_some(self.device_cap),
            initial_load: self.initial_load,
            update: LoadUpdate {
                beta: self.load_beta,
                s_min: self.load_min,
                s_max: self.load_max,
                max_ratio: self.load_max_ratio,
            },
            dl_rate_loss: self.dl_rate_loss,
            ul_rise_db: self.ul_rise_db,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_drops == 0 {
            return err("num_drops must be at least 1");
        }
        if self.modes.is_empty() || self.directions.is_empty() {
            return err("modes and directions must not be empty");
        }
        if !(self.reuse1_fraction > 0.0 && self.reuse1_fraction < 1.0) {
            return err("reuse1_fraction must be in (0, 1)");
        }
        if !(self.lambda > 0.0) || !(self.initial_load > 0.0) {
            return err("lambda and initial_load must be positive");
        }
        if !(self.load_beta > 0.0 && self.load_min > 0.0 && self.load_min < self.load_max) {
            return err("load update parameters are out of range");
        }
        if !(self.dl_rate_loss > 0.0 && self.dl_rate_loss < 1.0) || !(self.ul_rise_db > 0.0) {
            return err("dl_rate_loss must be in (0, 1) and ul_rise_db positive");
        }
        self.topology().validate()?;
        self.shadowing().validate()?;
        self.radio().validate().map_err(Error::Config)
    }
}
