//! The proposed three-stage estimator and the ALS-CPD baselines, run on one
//! observation.

use std::str::FromStr;
use std::time::Instant;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::estimator::{
    algebraic_estimate, delay_generators_from_factors, als_refine, refine_with_search, stage1, stage2_cbs, stage3_als,
    AlsOptions, AlsReport, ChannelEstimate, ChannelParameters, SearchKind, Stage,
};
use crate::linalg::CMat;
use crate::probing::complex_gaussian;
use crate::tensor::Tensor;
use crate::vscpd::vscpd_smoothed;

use super::config::{Search, Tolerances};
use super::scenario::Scenario;
use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    StageI,
    StageII,
    StageIII,
    VscpdCbs,
    CpdEsprit,
    CpdCbs,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::StageI, Method::StageII, Method::StageIII, Method::VscpdCbs, Method::CpdEsprit, Method::CpdCbs];

    pub fn label(&self) -> &'static str {
        match self {
            Method::StageI => "stage-I",
            Method::StageII => "stage-II",
            Method::StageIII => "stage-III",
            Method::VscpdCbs => "vscpd+cbs",
            Method::CpdEsprit => "cpd+esprit",
            Method::CpdCbs => "cpd+cbs",
        }
    }
}

/// Which estimators run in each trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MethodSelection {
    enabled: [bool; 6],
}

impl MethodSelection {
    pub fn none() -> Self {
        Self { enabled: [false; 6] }
    }

    pub fn all() -> Self {
        Self { enabled: [true; 6] }
    }

    pub fn stages_only() -> Self {
        Self::none().with(Method::StageI).with(Method::StageII).with(Method::StageIII)
    }

    pub fn with(mut self, m: Method) -> Self {
        self.enabled[m as usize] = true;
        self
    }

    pub fn contains(&self, m: Method) -> bool {
        self.enabled[m as usize]
    }

    pub fn methods(&self) -> Vec<Method> {
        Method::ALL.into_iter().filter(|m| self.contains(*m)).collect()
    }

    /// `I`, `II`, `III`, `all` or `none`, optionally comma-separated.
    pub fn parse_stages(mut self, text: &str) -> Result<Self, HarnessError> {
        for part in text.split(',').map(str::trim) {
            let ms: &[Method] = match part {
                "I" => &[Method::StageI],
                "II" => &[Method::StageII],
                "III" => &[Method::StageIII],
                "all" => &[Method::StageI, Method::StageII, Method::StageIII],
                "none" | "" => &[],
                _ => return Err(HarnessError::Config(format!("unknown stage '{part}'"))),
            };
            for &m in ms {
                self = self.with(m);
            }
        }
        Ok(self)
    }

    /// Comma-separated baseline names, `all` or `none`.
    pub fn parse_baselines(mut self, text: &str) -> Result<Self, HarnessError> {
        for part in text.split(',').map(str::trim) {
            let ms: &[Method] = match part {
                "none" | "" => &[],
                "all" => &[Method::VscpdCbs, Method::CpdEsprit, Method::CpdCbs],
                other => &[Method::from_str(other)?],
            };
            for &m in ms {
                self = self.with(m);
            }
        }
        Ok(self)
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub method: Method,
    pub success: bool,
    pub params: Option<ChannelParameters>,
    /// Wall time including all earlier steps the method depends on.
    pub runtime_ms: f64,
}

/// Six-way ALS from i.i.d. complex Gaussian factors drawn from `seed`.
pub fn baseline_als_cpd(
    y_sps: &Tensor,
    rank: usize,
    seed: u64,
    opts: AlsOptions,
) -> Result<(Vec<CMat>, AlsReport), HarnessError> {
    if rank == 0 {
        return Err(HarnessError::Config("rank must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<CMat> = y_sps
        .dims()
        .iter()
        .map(|&n| {
            let v = complex_gaussian(n * rank, 1.0, &mut rng);
            CMat::from_column_slice(n, rank, v.as_slice())
        })
        .collect();
    Ok(als_refine(y_sps, init, opts)?)
}

/// Delays from element ESPRIT on the two delay modes, then the same
/// identification and transformed-space ESPRIT as Stage I.
pub fn cpd_esprit(factors: &[CMat], y_sps: &Tensor, sc: &Scenario) -> Result<ChannelEstimate, HarnessError> {
    let delays = delay_generators_from_factors(&factors[0], &factors[5])?;
    Ok(algebraic_estimate(factors, &delays, y_sps, &sc.cfg, &sc.design, &sc.beams, sc.counts, Stage::I)?)
}

/// One uniform grid of `points` over each spatial mode's full range.
pub fn baseline_exhaustive_cbs(
    ce0: &ChannelEstimate,
    y_sps: &Tensor,
    sc: &Scenario,
    points: usize,
) -> Result<ChannelEstimate, HarnessError> {
    Ok(refine_with_search(ce0, y_sps, &sc.cfg, &sc.design, SearchKind::Exhaustive(points, &sc.schedule), ce0.stage)?)
}

fn outcome(method: Method, est: Option<&ChannelEstimate>, start: Instant) -> MethodOutcome {
    let params = est.filter(|e| e.is_success()).and_then(|e| e.params().cloned());
    MethodOutcome { method, success: params.is_some(), params, runtime_ms: start.elapsed().as_secs_f64() * 1e3 }
}

fn ok_or_log<T>(what: &str, r: Result<T, HarnessError>) -> Option<T> {
    r.map_err(|e| debug!("{what}: {e}")).ok()
}

/// Runs the selected methods on one smoothed observation. Estimator errors
/// count as failed trials for the affected methods.
pub fn run_trial(
    sc: &Scenario,
    y_sps: &Tensor,
    sel: &MethodSelection,
    search: &Search,
    tol: &Tolerances,
    als_seed: u64,
) -> Vec<MethodOutcome> {
    let mut out = Vec::new();
    let wants = |ms: &[Method]| ms.iter().any(|m| sel.contains(*m));
    let rank = sc.counts.rank();

    if wants(&[Method::StageI, Method::StageII, Method::StageIII, Method::VscpdCbs]) {
        let start = Instant::now();
        let s1 = ok_or_log(
            "stage I",
            vscpd_smoothed(y_sps, rank)
                .map_err(HarnessError::from)
                .and_then(|vr| Ok(stage1(&vr, y_sps, &sc.cfg, &sc.design, &sc.beams, sc.counts)?)),
        );
        let t1 = start.elapsed();
        if sel.contains(Method::StageI) {
            out.push(outcome(Method::StageI, s1.as_ref(), start));
        }
        let ok1 = s1.as_ref().filter(|e| e.is_success());
        let mut s2 = None;
        if wants(&[Method::StageII, Method::StageIII]) {
            s2 = ok1.and_then(|e| ok_or_log("stage II", stage2_cbs(e, y_sps, &sc.cfg, &sc.design, &sc.schedule).map_err(Into::into)));
            if sel.contains(Method::StageII) {
                out.push(outcome(Method::StageII, s2.as_ref(), start));
            }
        }
        if sel.contains(Method::StageIII) {
            let opts = AlsOptions { max_iters: tol.als_max_iters, tol: tol.als_tol };
            let s3 = s2.as_ref().and_then(|e| {
                ok_or_log(
                    "stage III",
                    stage3_als(y_sps, e, &sc.cfg, &sc.design, &sc.beams, &sc.schedule, opts).map_err(Into::into),
                )
            });
            // a failed re-identification keeps the Stage II parameters
            let s3 = match s3 {
                Some(e) if e.is_success() => Some(e),
                _ => s2.clone(),
            };
            out.push(outcome(Method::StageIII, s3.as_ref(), start));
        }
        if sel.contains(Method::VscpdCbs) {
            let start_cbs = Instant::now();
            let est = ok1.and_then(|e| ok_or_log("vscpd+cbs", baseline_exhaustive_cbs(e, y_sps, sc, search.exhaustive_vscpd)));
            let mut o = outcome(Method::VscpdCbs, est.as_ref(), start_cbs);
            o.runtime_ms += t1.as_secs_f64() * 1e3;
            out.push(o);
        }
    }

    if wants(&[Method::CpdEsprit, Method::CpdCbs]) {
        let start = Instant::now();
        let opts = AlsOptions { max_iters: tol.baseline_max_iters, tol: tol.baseline_tol };
        let ce = ok_or_log(
            "cpd",
            baseline_als_cpd(y_sps, rank, als_seed, opts).and_then(|(f, _)| cpd_esprit(&f, y_sps, sc)),
        );
        let t_cpd = start.elapsed();
        if sel.contains(Method::CpdEsprit) {
            out.push(outcome(Method::CpdEsprit, ce.as_ref(), start));
        }
        if sel.contains(Method::CpdCbs) {
            let start_cbs = Instant::now();
            let est = ce
                .as_ref()
                .filter(|e| e.is_success())
                .and_then(|e| ok_or_log("cpd+cbs", baseline_exhaustive_cbs(e, y_sps, sc, search.exhaustive_cpd)));
            let mut o = outcome(Method::CpdCbs, est.as_ref(), start_cbs);
            o.runtime_ms += t_cpd.as_secs_f64() * 1e3;
            out.push(o);
        }
    }
    out
}
