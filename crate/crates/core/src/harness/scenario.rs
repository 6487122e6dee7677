//! One fixed channel and probing design, plus per-trial observations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::array::{amplification_from_budget, geometry_to_paths, incident_power, MultipathGroundTruth, RisMode, SystemConfig};
use crate::crlb::{covariance_model_error, fim, CrlbReport};
use crate::estimator::{Beamspaces, ChannelParameters, PathCounts, SearchSchedule};
use crate::probing::{build_tensor, design_probing, NoiseLevels, ProbingDesign, ReceivedBlock, RxModel};
use crate::tensor::{spatial_smooth, Tensor};

use super::config::HarnessConfig;
use super::HarnessError;

/// Truth, design and noise reference shared by every trial of a sweep point.
pub struct Scenario {
    pub cfg: SystemConfig,
    pub gt: MultipathGroundTruth,
    pub truth: ChannelParameters,
    pub counts: PathCounts,
    pub design: ProbingDesign,
    pub model: RxModel,
    pub beams: Beamspaces,
    pub schedule: SearchSchedule,
    /// Physical noise powers before any SNR calibration.
    pub physical_noise: NoiseLevels,
    noise_free: ReceivedBlock,
}

impl Scenario {
    /// Gains phases and the probing design are drawn from `seed`.
    pub fn build(hc: &HarnessConfig, seed: u64) -> Result<Self, HarnessError> {
        let cfg = hc.system();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = geometry_to_paths(&hc.scene(), &cfg, &mut rng)?;
        let eta = match cfg.ris_mode {
            RisMode::Active => {
                amplification_from_budget(cfg.ris_power, incident_power(&gt, &cfg), cfg.ris_noise, cfg.ris_elements())?
            }
            RisMode::Passive => 1.0,
        };
        let design = design_probing(&cfg, eta, &mut rng)?;
        let model = RxModel::new(&gt, &cfg, &design);
        let noise_free = model.noise_free_block();
        let beams = Beamspaces::new(&design)?;
        Ok(Self {
            truth: ChannelParameters::from_truth(&gt),
            counts: PathCounts::from_truth(&gt),
            schedule: hc.schedule(),
            physical_noise: NoiseLevels { bs: cfg.bs_noise, ris: cfg.ris_noise },
            cfg,
            gt,
            design,
            model,
            beams,
            noise_free,
        })
    }

    pub fn signal_energy(&self) -> f64 {
        self.noise_free.energy()
    }

    pub fn snr_db(&self, levels: NoiseLevels) -> f64 {
        10.0 * (self.signal_energy() / self.model.noise_trace(levels)).log10()
    }

    /// Physical noise powers scaled by one common factor so that the
    /// received SNR equals `snr_db`. Infinite SNR gives no noise.
    pub fn noise_for_snr(&self, snr_db: f64) -> NoiseLevels {
        if snr_db == f64::INFINITY {
            return NoiseLevels { bs: 0.0, ris: 0.0 };
        }
        let base = self.model.noise_trace(self.physical_noise);
        let scale = self.signal_energy() / (base * 10f64.powf(snr_db / 10.0));
        NoiseLevels { bs: self.physical_noise.bs * scale, ris: self.physical_noise.ris * scale }
    }

    /// Smoothed observation tensor for one noise draw.
    pub fn observe<R: Rng + ?Sized>(&self, levels: NoiseLevels, rng: &mut R) -> Result<Tensor, HarnessError> {
        let mut block = self.noise_free.clone();
        if levels.bs > 0.0 || levels.ris > 0.0 {
            let noise = self.model.noise_block(levels, rng);
            for (row, nrow) in block.samples.iter_mut().zip(noise.samples) {
                for (y, n) in row.iter_mut().zip(nrow) {
                    *y += n;
                }
            }
            block.noise = Some(levels);
        }
        let y = build_tensor(&block, &self.cfg)?;
        Ok(spatial_smooth(&y, self.cfg.smoothing_len)?)
    }

    pub fn crlb(&self, levels: NoiseLevels) -> Result<CrlbReport, HarnessError> {
        Ok(fim(&self.cfg, &self.design, &self.gt, levels)?)
    }

    pub fn covariance_model_error(&self, levels: NoiseLevels) -> f64 {
        covariance_model_error(&self.cfg, &self.design, &self.gt, levels)
    }

    pub fn power_ratio(&self) -> f64 {
        self.model.power_ratio()
    }
}
