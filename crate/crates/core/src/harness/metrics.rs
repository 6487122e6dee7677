//! Error metrics between true and estimated parameter sets.

use crate::array::{SystemConfig, SPEED_OF_LIGHT};
use crate::estimator::ChannelParameters;
use crate::probing::{factors_from_generators, tensor_weights, ProbingDesign};
use crate::tensor::{cp_reconstruct, FactorSet, Tensor};

use super::HarnessError;

/// Squared error after sorting both vectors ascending.
pub fn sorted_sq_error(truth: &[f64], est: &[f64]) -> Result<f64, HarnessError> {
    if truth.len() != est.len() {
        return Err(HarnessError::LengthMismatch { truth: truth.len(), est: est.len() });
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    Ok(sorted(truth).iter().zip(sorted(est)).map(|(a, b)| (a - b).powi(2)).sum())
}

/// `√(mean over trials of the sorted squared error)`.
pub fn rmse_sorted(trials: &[(Vec<f64>, Vec<f64>)]) -> Result<f64, HarnessError> {
    if trials.is_empty() {
        return Ok(f64::NAN);
    }
    let mut acc = 0.0;
    for (t, e) in trials {
        acc += sorted_sq_error(t, e)?;
    }
    Ok((acc / trials.len() as f64).sqrt())
}

/// Parameter families reported by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamFamily {
    DirectDelay,
    CascadedDelay,
    PsiY,
    PsiZ,
    DirectAngle,
    RisBsAngle,
}

impl ParamFamily {
    pub const ALL: [ParamFamily; 6] = [
        ParamFamily::DirectDelay,
        ParamFamily::CascadedDelay,
        ParamFamily::PsiY,
        ParamFamily::PsiZ,
        ParamFamily::DirectAngle,
        ParamFamily::RisBsAngle,
    ];

    /// Metric suffix, e.g. `tauL` in `rmse_tauL`.
    pub fn key(&self) -> &'static str {
        match self {
            ParamFamily::DirectDelay => "tauL",
            ParamFamily::CascadedDelay => "tauR",
            ParamFamily::PsiY => "psi2",
            ParamFamily::PsiZ => "psi3",
            ParamFamily::DirectAngle => "thetaL",
            ParamFamily::RisBsAngle => "thetaR",
        }
    }

    pub fn units(&self) -> &'static str {
        match self {
            ParamFamily::DirectDelay | ParamFamily::CascadedDelay => "m",
            ParamFamily::PsiY | ParamFamily::PsiZ => "1",
            ParamFamily::DirectAngle | ParamFamily::RisBsAngle => "deg",
        }
    }
}

/// Sorted squared errors of one trial per family, in report units
/// (m², unitless, deg²). Azimuth and elevation are sorted separately.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialErrors {
    pub sq: [f64; 6],
}

impl TrialErrors {
    pub fn between(truth: &ChannelParameters, est: &ChannelParameters) -> Result<Self, HarnessError> {
        let m = |v: &[f64]| v.iter().map(|t| t * SPEED_OF_LIGHT).collect::<Vec<_>>();
        let deg = |dirs: &[crate::array::Direction]| {
            (
                dirs.iter().map(|d| d.az.to_degrees()).collect::<Vec<_>>(),
                dirs.iter().map(|d| d.el.to_degrees()).collect::<Vec<_>>(),
            )
        };
        let angle = |a: &[crate::array::Direction], b: &[crate::array::Direction]| -> Result<f64, HarnessError> {
            let (ta, te) = deg(a);
            let (ea, ee) = deg(b);
            Ok(sorted_sq_error(&ta, &ea)? + sorted_sq_error(&te, &ee)?)
        };
        Ok(Self {
            sq: [
                sorted_sq_error(&m(&truth.direct_delays), &m(&est.direct_delays))?,
                sorted_sq_error(&m(&truth.cascaded_delays), &m(&est.cascaded_delays))?,
                sorted_sq_error(&truth.psi_y, &est.psi_y)?,
                sorted_sq_error(&truth.psi_z, &est.psi_z)?,
                angle(&truth.direct_dirs, &est.direct_dirs)?,
                angle(&truth.ris_bs_dirs, &est.ris_bs_dirs)?,
            ],
        })
    }

    pub fn get(&self, f: ParamFamily) -> f64 {
        self.sq[f as usize]
    }
}

/// Noise-free signal tensor rebuilt from a parameter set.
pub fn signal_tensor(params: &ChannelParameters, cfg: &SystemConfig, design: &ProbingDesign) -> Result<Tensor, HarnessError> {
    let factors = factors_from_generators(&params.generators(cfg), cfg, design);
    let weights = tensor_weights(&params.gains(), params.direct_delays.len(), design);
    Ok(cp_reconstruct(&FactorSet::new(weights, factors)?)?)
}

/// `‖𝒴(est) − 𝒴(truth)‖² / ‖𝒴(truth)‖²`.
pub fn nmse(
    truth: &ChannelParameters,
    est: &ChannelParameters,
    cfg: &SystemConfig,
    design: &ProbingDesign,
) -> Result<f64, HarnessError> {
    let t = signal_tensor(truth, cfg, design)?;
    let e = signal_tensor(est, cfg, design)?;
    let denom = t.frobenius_norm().powi(2);
    if denom == 0.0 {
        return Err(HarnessError::ZeroTruth);
    }
    Ok(t.distance_sqr(&e)? / denom)
}
