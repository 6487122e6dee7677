//! Experiment configuration file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{dbm_to_watt, noise_power, RisMode, Scene, SystemConfig, SPEED_OF_LIGHT};
use crate::estimator::{PathCounts, SearchSchedule};
use crate::vscpd::uniqueness_check;

use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrays {
    #[serde(rename = "M_y")]
    pub ris_y: usize,
    #[serde(rename = "M_z")]
    pub ris_z: usize,
    #[serde(rename = "Ntilde_y")]
    pub bs_y: usize,
    #[serde(rename = "Ntilde_z")]
    pub bs_z: usize,
    #[serde(rename = "N1")]
    pub beams_y: usize,
    #[serde(rename = "N2")]
    pub beams_z: usize,
    /// RIS element spacing in wavelengths.
    #[serde(rename = "d_R")]
    pub ris_spacing: f64,
    /// BS element spacing in wavelengths.
    #[serde(rename = "d_B")]
    pub bs_spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ofdm {
    #[serde(rename = "f_c")]
    pub carrier_freq: f64,
    pub bandwidth: f64,
    #[serde(rename = "K0")]
    pub subcarriers: usize,
    #[serde(rename = "K")]
    pub pilots: usize,
    #[serde(rename = "K1")]
    pub smoothing_len: usize,
    #[serde(rename = "G1")]
    pub slots_y: usize,
    #[serde(rename = "G2")]
    pub slots_z: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Active,
    Passive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Power {
    #[serde(rename = "P_T_dBm")]
    pub tx_dbm: f64,
    #[serde(rename = "P_R_dBm")]
    pub ris_dbm: f64,
    #[serde(rename = "noise_psd_dBm_Hz")]
    pub noise_psd_dbm_hz: f64,
    #[serde(rename = "noise_figure_dB")]
    pub noise_figure_db: f64,
    pub mode: ModeName,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Multipath {
    #[serde(rename = "L")]
    pub direct: usize,
    #[serde(rename = "P")]
    pub ue_ris: usize,
    #[serde(rename = "Q")]
    pub ris_bs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub bs: [f64; 3],
    pub ue: [f64; 3],
    pub ris: [f64; 3],
    #[serde(default)]
    pub ris_yaw_deg: f64,
    #[serde(default)]
    pub scatterers_direct: Vec<[f64; 3]>,
    #[serde(default)]
    pub scatterers_ue_ris: Vec<[f64; 3]>,
    #[serde(default)]
    pub scatterers_ris_bs: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Search {
    /// Points per correlation-search iteration (odd).
    #[serde(rename = "E")]
    pub points: usize,
    #[serde(rename = "I")]
    pub iterations: usize,
    /// Step shrink factor per iteration.
    #[serde(rename = "zeta")]
    pub shrink: f64,
    /// Grid size of the exhaustive search after VSCPD.
    pub exhaustive_vscpd: usize,
    /// Grid size of the exhaustive search after ALS-CPD.
    pub exhaustive_cpd: usize,
}

impl Default for Search {
    fn default() -> Self {
        Self { points: 201, iterations: 8, shrink: 0.5, exhaustive_vscpd: 1608, exhaustive_cpd: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub als_tol: f64,
    pub als_max_iters: usize,
    pub baseline_tol: f64,
    pub baseline_max_iters: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { als_tol: 1e-8, als_max_iters: 200, baseline_tol: 1e-15, baseline_max_iters: 150 }
    }
}

/// Parsed configuration file. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub arrays: Arrays,
    pub ofdm: Ofdm,
    pub power: Power,
    pub multipath: Multipath,
    pub scene: SceneSection,
    #[serde(default)]
    pub search: Search,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl HarnessConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reduced multipath setup: 8×8 RIS and BS, 4×4 beams, 16 pilots, 5×5 slots.
    pub fn desk() -> Self {
        Self {
            arrays: Arrays { ris_y: 8, ris_z: 8, bs_y: 8, bs_z: 8, beams_y: 4, beams_z: 4, ris_spacing: 0.1, bs_spacing: 0.5 },
            ofdm: Ofdm { carrier_freq: 28e9, bandwidth: 320e6, subcarriers: 128, pilots: 16, smoothing_len: 8, slots_y: 5, slots_z: 5 },
            power: Power {
                tx_dbm: 7.0,
                ris_dbm: 1.76,
                noise_psd_dbm_hz: -174.0,
                noise_figure_db: 10.0,
                mode: ModeName::Active,
            },
            multipath: Multipath { direct: 2, ue_ris: 2, ris_bs: 2 },
            scene: SceneSection {
                bs: [-10.0, 3.0, 2.0],
                ue: [7.0, -3.0, 0.0],
                ris: [6.0, 9.0, 4.0],
                ris_yaw_deg: 0.0,
                scatterers_direct: vec![[4.0, 4.0, 2.0]],
                scatterers_ue_ris: vec![[-2.0, -4.0, 1.0]],
                scatterers_ris_bs: vec![[-1.0, 1.0, 5.0]],
            },
            search: Search::default(),
            tolerances: Tolerances::default(),
        }
    }

    /// Full-size variant: 15×15 RIS, 10×10 BS, 5×5 beams, 32 pilots, 7×7 slots.
    pub fn full() -> Self {
        let mut c = Self::desk();
        c.arrays = Arrays { ris_y: 15, ris_z: 15, bs_y: 10, bs_z: 10, beams_y: 5, beams_z: 5, ..c.arrays };
        c.ofdm = Ofdm { pilots: 32, smoothing_len: 15, slots_y: 7, slots_z: 7, ..c.ofdm };
        c
    }

    /// The same nodes without scatterers and path counts of one.
    pub fn los(&self) -> Self {
        let mut c = self.clone();
        c.scene.scatterers_direct.clear();
        c.scene.scatterers_ue_ris.clear();
        c.scene.scatterers_ris_bs.clear();
        c.multipath = Multipath { direct: 1, ue_ris: 1, ris_bs: 1 };
        c
    }

    pub fn with_mode(&self, mode: ModeName) -> Self {
        let mut c = self.clone();
        c.power.mode = mode;
        c
    }

    /// `K` pilots with the smoothing window at `K/2`.
    pub fn with_pilots(&self, k: usize) -> Self {
        let mut c = self.clone();
        c.ofdm.pilots = k;
        c.ofdm.smoothing_len = k / 2;
        c
    }

    pub fn counts(&self) -> PathCounts {
        PathCounts { direct: self.multipath.direct, ue_ris: self.multipath.ue_ris, ris_bs: self.multipath.ris_bs }
    }

    /// Physical parameters. In passive mode the RIS budget is handed to the
    /// transmitter and the surface adds no noise.
    pub fn system(&self) -> SystemConfig {
        let spacing = self.ofdm.bandwidth / self.ofdm.subcarriers as f64;
        let lambda = SPEED_OF_LIGHT / self.ofdm.carrier_freq;
        let noise = noise_power(self.power.noise_psd_dbm_hz, self.power.noise_figure_db, spacing);
        let (tx, ris_power, ris_noise, ris_mode) = match self.power.mode {
            ModeName::Active => (dbm_to_watt(self.power.tx_dbm), dbm_to_watt(self.power.ris_dbm), noise, RisMode::Active),
            ModeName::Passive => {
                (dbm_to_watt(self.power.tx_dbm) + dbm_to_watt(self.power.ris_dbm), 0.0, 0.0, RisMode::Passive)
            }
        };
        SystemConfig {
            ris_y: self.arrays.ris_y,
            ris_z: self.arrays.ris_z,
            bs_y: self.arrays.bs_y,
            bs_z: self.arrays.bs_z,
            beams_y: self.arrays.beams_y,
            beams_z: self.arrays.beams_z,
            subcarriers: self.ofdm.subcarriers,
            pilots: self.ofdm.pilots,
            smoothing_len: self.ofdm.smoothing_len,
            slots_y: self.ofdm.slots_y,
            slots_z: self.ofdm.slots_z,
            subcarrier_spacing: spacing,
            carrier_freq: self.ofdm.carrier_freq,
            ris_spacing: self.arrays.ris_spacing * lambda,
            bs_spacing: self.arrays.bs_spacing * lambda,
            tx_power: tx,
            ris_power,
            bs_noise: noise,
            ris_noise,
            ris_mode,
        }
    }

    pub fn scene(&self) -> Scene {
        Scene {
            bs: self.scene.bs,
            ue: self.scene.ue,
            ris: self.scene.ris,
            ris_yaw: self.scene.ris_yaw_deg.to_radians(),
            scatterers_direct: self.scene.scatterers_direct.clone(),
            scatterers_ue_ris: self.scene.scatterers_ue_ris.clone(),
            scatterers_ris_bs: self.scene.scatterers_ris_bs.clone(),
        }
    }

    pub fn schedule(&self) -> SearchSchedule {
        SearchSchedule::for_config(&self.system(), self.search.points, self.search.iterations, self.search.shrink)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let cfg = self.system();
        cfg.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        let m = &self.multipath;
        let s = &self.scene;
        let from_scene = (1 + s.scatterers_direct.len(), 1 + s.scatterers_ue_ris.len(), 1 + s.scatterers_ris_bs.len());
        if (m.direct, m.ue_ris, m.ris_bs) != from_scene {
            return bad(format!(
                "multipath counts (L={}, P={}, Q={}) disagree with the scene's one LOS path plus {:?} scatterers",
                m.direct,
                m.ue_ris,
                m.ris_bs,
                (from_scene.0 - 1, from_scene.1 - 1, from_scene.2 - 1)
            ));
        }
        if self.ofdm.subcarriers == 0 || !(self.ofdm.bandwidth > 0.0) {
            return bad("bandwidth and K0 must be positive".into());
        }
        let rank = self.counts().rank();
        let dims = [cfg.smoothing_len, cfg.slots_y, cfg.slots_z, cfg.beams_y, cfg.beams_z, cfg.smoothing_rest()];
        let u = uniqueness_check(&dims, rank);
        if !u.unique {
            return bad(format!(
                "rank {rank} is not identifiable with K1={} and K2={} (bound {})",
                cfg.smoothing_len,
                cfg.smoothing_rest(),
                u.bound.min(u.generic_bound)
            ));
        }
        if cfg.slots_y < 3 || cfg.slots_z < 3 || cfg.beams_y < 3 || cfg.beams_z < 3 {
            return bad("transformed-space estimation needs at least 3 slots and beams per axis".into());
        }
        self.schedule().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.search.exhaustive_vscpd < 2 || self.search.exhaustive_cpd < 2 {
            return bad("exhaustive grids need at least 2 points".into());
        }
        let t = &self.tolerances;
        if !(t.als_tol > 0.0) || !(t.baseline_tol > 0.0) || t.als_max_iters == 0 || t.baseline_max_iters == 0 {
            return bad("ALS tolerances and iteration caps must be positive".into());
        }
        Ok(())
    }
}
