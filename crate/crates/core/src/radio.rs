//! Radio constants shared by every layer: bandwidth, thermal noise, transmit
//! power limits and the capped Shannon-gap link model.

use serde::{Deserialize, Serialize};

/// Link direction. In the downlink the macro victims are macro UEs; in the
/// uplink they are the macro cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "dl")]
    Downlink,
    #[serde(rename = "ul")]
    Uplink,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Downlink, Direction::Uplink];

    pub fn label(self) -> &'static str {
        match self {
            Direction::Downlink => "dl",
            Direction::Uplink => "ul",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dl" | "downlink" => Some(Direction::Downlink),
            "ul" | "uplink" => Some(Direction::Uplink),
            _ => None,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Radio parameters. Values are per direction (UL and DL each get the full
/// `bandwidth_hz`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub ue_noise_figure_db: f64,
    pub bs_noise_figure_db: f64,
    pub macro_bs_power_dbm: f64,
    pub macro_ue_max_dbm: f64,
    pub femto_bs_max_dbm: f64,
    pub femto_ue_max_dbm: f64,
    /// Linear SNR gap to Shannon capacity (2 = 3 dB).
    pub snr_gap: f64,
    /// Spectral efficiency ceiling, bps/Hz.
    pub max_se: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            noise_density_dbm_hz: -174.0,
            ue_noise_figure_db: 9.0,
            bs_noise_figure_db: 5.0,
            macro_bs_power_dbm: 46.0,
            macro_ue_max_dbm: 23.0,
            femto_bs_max_dbm: 20.0,
            femto_ue_max_dbm: 23.0,
            snr_gap: 2.0,
            max_se: 5.0,
        }
    }
}

impl RadioConfig {
    /// Thermal noise PSD at a UE receiver, mW/Hz.
    pub fn ue_noise_psd(&self) -> f64 {
        db_to_lin(self.noise_density_dbm_hz + self.ue_noise_figure_db)
    }

    /// Thermal noise PSD at a base-station receiver (macro or femto), mW/Hz.
    pub fn bs_noise_psd(&self) -> f64 {
        db_to_lin(self.noise_density_dbm_hz + self.bs_noise_figure_db)
    }

    pub fn gap(&self) -> f64 {
        self.snr_gap
    }

    /// Noise PSD at the receiving end of a macro-layer victim link.
    pub fn victim_noise_psd(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Downlink => self.ue_noise_psd(),
            Direction::Uplink => self.bs_noise_psd(),
        }
    }

    /// Noise PSD at a femto receiver (femto UE in DL, femto BS in UL).
    pub fn femto_rx_noise_psd(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Downlink => self.ue_noise_psd(),
            Direction::Uplink => self.bs_noise_psd(),
        }
    }

    /// Femto transmitter PSD when its maximum power is spread over the whole band.
    pub fn femto_tx_max_psd(&self, dir: Direction) -> f64 {
        let dbm = match dir {
            Direction::Downlink => self.femto_bs_max_dbm,
            Direction::Uplink => self.femto_ue_max_dbm,
        };
        db_to_lin(dbm) / self.bandwidth_hz
    }

    /// Capped gap-to-capacity spectral efficiency for a linear SINR.
    pub fn spectral_efficiency(&self, sinr: f64) -> f64 {
        capped_se(sinr, self.gap(), self.max_se)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.bandwidth_hz > 0.0) {
            return Err("bandwidth_hz must be positive".into());
        }
        if !(self.max_se > 0.0) {
            return Err("max_se must be positive".into());
        }
        if !(self.snr_gap >= 1.0) {
            return Err("snr_gap must be at least 1".into());
        }
        Ok(())
    }
}

/// `min(max_se, log2(1 + sinr / gap))`.
#[inline]
pub fn capped_se(sinr: f64, gap: f64, max_se: f64) -> f64 {
    if sinr <= 0.0 {
        return 0.0;
    }
    (1.0 + sinr / gap).log2().min(max_se)
}
