//! Ready-made configurations and the default stand-in scene.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::array::{
    dbm_to_watt, geometry_to_paths, noise_power, MultipathGroundTruth, RisMode, Scene, SystemConfig,
    SPEED_OF_LIGHT,
};

const CARRIER: f64 = 28e9;
const BANDWIDTH: f64 = 320e6;
const SUBCARRIERS: usize = 128;

/// Reduced-size multipath configuration used for fast experiments:
/// 8×8 RIS, 8×8 BS with 4×4 beams, 16 pilots (window 8), 5×5 slots.
pub fn desk_config() -> SystemConfig {
    let lambda = SPEED_OF_LIGHT / CARRIER;
    let spacing = BANDWIDTH / SUBCARRIERS as f64;
    SystemConfig {
        ris_y: 8,
        ris_z: 8,
        bs_y: 8,
        bs_z: 8,
        beams_y: 4,
        beams_z: 4,
        subcarriers: SUBCARRIERS,
        pilots: 16,
        smoothing_len: 8,
        slots_y: 5,
        slots_z: 5,
        subcarrier_spacing: spacing,
        carrier_freq: CARRIER,
        ris_spacing: 0.1 * lambda,
        bs_spacing: 0.5 * lambda,
        tx_power: dbm_to_watt(7.0),
        ris_power: dbm_to_watt(1.76),
        bs_noise: noise_power(-174.0, 10.0, spacing),
        ris_noise: noise_power(-174.0, 10.0, spacing),
        ris_mode: RisMode::Active,
    }
}

/// Full-size configuration: 15×15 RIS, 10×10 BS with 5×5 beams, 32 pilots
/// (window 15), 7×7 slots.
pub fn full_config() -> SystemConfig {
    SystemConfig {
        ris_y: 15,
        ris_z: 15,
        bs_y: 10,
        bs_z: 10,
        beams_y: 5,
        beams_z: 5,
        pilots: 32,
        smoothing_len: 15,
        slots_y: 7,
        slots_z: 7,
        ..desk_config()
    }
}

/// Stand-in geometry: BS facing +X, UE on the ground, RIS hovering above,
/// one scatterer per link. Node positions give cascaded and direct parts of
/// comparable received power.
pub fn default_scene() -> Scene {
    Scene {
        bs: [-10.0, 3.0, 2.0],
        ue: [7.0, -3.0, 0.0],
        ris: [6.0, 9.0, 4.0],
        ris_yaw: 0.0,
        scatterers_direct: vec![[4.0, 4.0, 2.0]],
        scatterers_ue_ris: vec![[-2.0, -4.0, 1.0]],
        scatterers_ris_bs: vec![[-1.0, 1.0, 5.0]],
    }
}

/// Same nodes with all scatterers removed.
pub fn los_scene() -> Scene {
    Scene {
        scatterers_direct: vec![],
        scatterers_ue_ris: vec![],
        scatterers_ris_bs: vec![],
        ..default_scene()
    }
}

/// Ground truth for the default scene with gain phases from `seed`.
pub fn default_truth(cfg: &SystemConfig, seed: u64) -> MultipathGroundTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    geometry_to_paths(&default_scene(), cfg, &mut rng).expect("default scene is valid")
}
