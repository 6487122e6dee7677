//! Monte Carlo sweeps and their CSV output.

use std::fmt::Write as _;
use std::str::FromStr;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::array::SPEED_OF_LIGHT;
use crate::crlb::{CrlbReport, Family};

use super::config::{HarnessConfig, ModeName};
use super::metrics::{nmse, ParamFamily, TrialErrors};
use super::pipeline::{run_trial, Method, MethodOutcome, MethodSelection};
use super::scenario::Scenario;
use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Los,
    SnrSweep,
    KSweep,
    ActiveVsPassive,
    CrlbOnly,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Los,
        ExperimentKind::SnrSweep,
        ExperimentKind::KSweep,
        ExperimentKind::ActiveVsPassive,
        ExperimentKind::CrlbOnly,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::Los => "los",
            ExperimentKind::SnrSweep => "snr-sweep",
            ExperimentKind::KSweep => "k-sweep",
            ExperimentKind::ActiveVsPassive => "active-vs-passive",
            ExperimentKind::CrlbOnly => "crlb-only",
        }
    }

    /// Default sweep grid: SNRs in dB, or pilot counts for `k-sweep`.
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            ExperimentKind::Los => vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            ExperimentKind::KSweep => vec![16.0, 24.0, 32.0, 40.0, 48.0],
            ExperimentKind::ActiveVsPassive => vec![30.0],
            ExperimentKind::SnrSweep | ExperimentKind::CrlbOnly => vec![10.0, 15.0, 20.0, 25.0, 30.0],
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

/// RIS budget of the active-versus-passive comparison, lower than the
/// multipath default so the amplifier draws from a smaller budget.
pub const COMPARISON_RIS_DBM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// SNRs in dB, or pilot counts for `k-sweep`. For `active-vs-passive`
    /// each SNR is run in both modes.
    pub grid: Vec<f64>,
    /// SNR used by `k-sweep`.
    pub fixed_snr_db: f64,
    /// Replaces the configured RIS power budget (dBm) at every point.
    pub ris_dbm: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: MethodSelection,
    pub per_trial: bool,
    /// Emit `runtime_ms` rows. Off makes the output a pure function of the spec.
    pub timing: bool,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            grid: kind.default_grid(),
            fixed_snr_db: 15.0,
            ris_dbm: (kind == ExperimentKind::ActiveVsPassive).then_some(COMPARISON_RIS_DBM),
            trials: 100,
            seed: 1,
            methods: MethodSelection::all(),
            per_trial: false,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(HarnessError::Config("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|v| v.is_nan()) {
            return Err(HarnessError::Config("sweep grid contains NaN".into()));
        }
        if self.kind == ExperimentKind::KSweep && self.grid.iter().any(|&k| k < 2.0 || k.fract() != 0.0) {
            return Err(HarnessError::Config("k-sweep grid must hold integer pilot counts".into()));
        }
        Ok(())
    }

    fn points(&self, hc: &HarnessConfig) -> Result<Vec<SweepPoint>, HarnessError> {
        let mut pts = Vec::new();
        for &v in &self.grid {
            match self.kind {
                ExperimentKind::Los => pts.push(SweepPoint::new(fmt_value(v), hc.los(), v)),
                ExperimentKind::SnrSweep | ExperimentKind::CrlbOnly => pts.push(SweepPoint::new(fmt_value(v), hc.clone(), v)),
                ExperimentKind::KSweep => {
                    pts.push(SweepPoint::new(fmt_value(v), hc.with_pilots(v as usize), self.fixed_snr_db))
                }
                ExperimentKind::ActiveVsPassive => {
                    for (mode, name) in [(ModeName::Active, "active"), (ModeName::Passive, "passive")] {
                        let label = if self.grid.len() == 1 { name.to_string() } else { format!("{name}@{}", fmt_value(v)) };
                        pts.push(SweepPoint::new(label, hc.with_mode(mode), v));
                    }
                }
            }
        }
        for p in pts.iter_mut() {
            if let Some(dbm) = self.ris_dbm {
                p.config.power.ris_dbm = dbm;
            }
            p.config.validate()?;
        }
        Ok(pts)
    }
}

struct SweepPoint {
    label: String,
    config: HarnessConfig,
    snr_db: f64,
}

impl SweepPoint {
    fn new(label: String, config: HarnessConfig, snr_db: f64) -> Self {
        Self { label, config, snr_db }
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

/// One CSV line.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub experiment: String,
    pub sweep_value: String,
    /// `aggregate` or `trial-<index>`.
    pub marker: String,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub units: String,
}

pub const CSV_HEADER: &str = "experiment,sweep_value,marker,method,metric,value,units";

impl MetricRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.experiment, self.sweep_value, self.marker, self.method, self.metric, self.value, self.units
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Root mean sorted squared error per family, in report units.
    pub rmse: [f64; 6],
    pub nmse: f64,
    pub runtime_ms: f64,
}

impl MethodSummary {
    pub fn rmse_of(&self, f: ParamFamily) -> f64 {
        self.rmse[f as usize]
    }
}

#[derive(Clone, Debug)]
pub struct PointSummary {
    pub label: String,
    pub snr_db: f64,
    pub methods: Vec<MethodSummary>,
    /// Root of the summed bound per family, in report units.
    pub crlb: Option<[f64; 6]>,
    pub crlb_report: Option<CrlbReport>,
    /// Worst relative gap between the exact and the modelled noise covariance.
    pub cov_model_error: Option<f64>,
    pub amp_coef: f64,
    pub power_ratio: f64,
    pub cfg_hash: String,
    pub design_hash: String,
}

impl PointSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub points: Vec<PointSummary>,
    pub rows: Vec<MetricRow>,
}

impl ExperimentReport {
    /// Comment lines with the seed and per-point hashes, then the header and rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# experiment={} seed={} trials={}", self.spec.kind.label(), self.spec.seed, self.spec.trials);
        for p in &self.points {
            let _ = writeln!(s, "# point={} snr_db={} cfg_sha256={} design_sha256={}", p.label, p.snr_db, p.cfg_hash, p.design_hash);
        }
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }

    pub fn point(&self, label: &str) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.label == label)
    }
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn crlb_family(f: ParamFamily) -> Family {
    match f {
        ParamFamily::DirectDelay => Family::DirectDelay,
        ParamFamily::CascadedDelay => Family::CascadedDelay,
        ParamFamily::PsiY => Family::PsiY,
        ParamFamily::PsiZ => Family::PsiZ,
        ParamFamily::DirectAngle => Family::DirectAngle,
        ParamFamily::RisBsAngle => Family::RisBsAngle,
    }
}

/// `√(Σ CRLB)` per family in m, unitless or degrees.
pub fn crlb_roots(rep: &CrlbReport) -> [f64; 6] {
    ParamFamily::ALL.map(|f| {
        let sum = rep.family_sum(crlb_family(f));
        match f {
            ParamFamily::DirectDelay | ParamFamily::CascadedDelay => sum.sqrt() * SPEED_OF_LIGHT,
            ParamFamily::PsiY | ParamFamily::PsiZ => sum.sqrt(),
            ParamFamily::DirectAngle | ParamFamily::RisBsAngle => sum.sqrt().to_degrees(),
        }
    })
}

struct TrialRecord {
    outcomes: Vec<MethodOutcome>,
    errors: Vec<Option<(TrialErrors, f64)>>,
}

fn run_point(
    spec: &ExperimentSpec,
    index: usize,
    pt: &SweepPoint,
    rows: &mut Vec<MetricRow>,
) -> Result<PointSummary, HarnessError> {
    let sc = Scenario::build(&pt.config, spec.seed)?;
    let levels = sc.noise_for_snr(pt.snr_db);
    let crlb_report = if levels.bs > 0.0 { Some(sc.crlb(levels)?) } else { None };
    let crlb = crlb_report.as_ref().map(crlb_roots);
    let cov_model_error = crlb_report.as_ref().map(|_| sc.covariance_model_error(levels));
    if let Some(e) = cov_model_error {
        info!("point {}: slot-independent noise covariance off by at most {e:.3e} (relative)", pt.label);
    }
    let row = |marker: &str, method: &str, metric: String, value: f64, units: &str| MetricRow {
        experiment: spec.kind.label().to_string(),
        sweep_value: pt.label.clone(),
        marker: marker.to_string(),
        method: method.to_string(),
        metric,
        value,
        units: units.to_string(),
    };

    let mut methods = Vec::new();
    if spec.kind != ExperimentKind::CrlbOnly {
        let search = &pt.config.search;
        let tol = &pt.config.tolerances;
        let records: Vec<TrialRecord> = (0..spec.trials)
            .into_par_iter()
            .map(|t| -> Result<TrialRecord, HarnessError> {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(((index as u64) << 32) | t as u64);
                let y = sc.observe(levels, &mut rng)?;
                let als_seed: u64 = rng.random();
                let outcomes = run_trial(&sc, &y, &spec.methods, search, tol, als_seed);
                let errors = outcomes
                    .iter()
                    .map(|o| match &o.params {
                        Some(p) => Ok(Some((TrialErrors::between(&sc.truth, p)?, nmse(&sc.truth, p, &sc.cfg, &sc.design)?))),
                        None => Ok(None),
                    })
                    .collect::<Result<Vec<_>, HarnessError>>()?;
                Ok(TrialRecord { outcomes, errors })
            })
            .collect::<Result<Vec<_>, _>>()?;

        for (mi, m) in spec.methods.methods().into_iter().enumerate() {
            let all: Vec<(&MethodOutcome, &Option<(TrialErrors, f64)>)> =
                records.iter().map(|r| (&r.outcomes[mi], &r.errors[mi])).collect();
            let ok: Vec<&(TrialErrors, f64)> = all.iter().filter_map(|(_, e)| e.as_ref()).collect();
            let n_ok = ok.len();
            let mean = |f: &dyn Fn(&(TrialErrors, f64)) -> f64| {
                if n_ok == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|e| f(e)).sum::<f64>() / n_ok as f64
                }
            };
            let summary = MethodSummary {
                method: m,
                trials: all.len(),
                successes: n_ok,
                success_rate: n_ok as f64 / all.len() as f64,
                rmse: ParamFamily::ALL.map(|f| mean(&|e| e.0.get(f)).sqrt()),
                nmse: mean(&|e| e.1),
                runtime_ms: all.iter().map(|(o, _)| o.runtime_ms).sum::<f64>() / all.len() as f64,
            };
            for f in ParamFamily::ALL {
                rows.push(row("aggregate", m.label(), format!("rmse_{}", f.key()), summary.rmse_of(f), f.units()));
            }
            rows.push(row("aggregate", m.label(), "nmse".into(), summary.nmse, "1"));
            rows.push(row("aggregate", m.label(), "success_rate".into(), summary.success_rate, "1"));
            if spec.timing {
                rows.push(row("aggregate", m.label(), "runtime_ms".into(), summary.runtime_ms, "ms"));
            }
            if spec.per_trial {
                for (t, (o, e)) in all.iter().enumerate() {
                    let marker = format!("trial-{t}");
                    rows.push(row(&marker, m.label(), "success".into(), if o.success { 1.0 } else { 0.0 }, "1"));
                    if let Some((errs, nm)) = e {
                        for f in ParamFamily::ALL {
                            rows.push(row(&marker, m.label(), format!("rmse_{}", f.key()), errs.get(f).sqrt(), f.units()));
                        }
                        rows.push(row(&marker, m.label(), "nmse".into(), *nm, "1"));
                    }
                    if spec.timing {
                        rows.push(row(&marker, m.label(), "runtime_ms".into(), o.runtime_ms, "ms"));
                    }
                }
            }
            methods.push(summary);
        }
    }

    if let Some(c) = &crlb {
        for f in ParamFamily::ALL {
            rows.push(row("aggregate", "crlb", format!("crlb_{}", f.key()), c[f as usize], f.units()));
        }
    }
    if let Some(e) = cov_model_error {
        rows.push(row("aggregate", "crlb", "cov_model_error".into(), e, "1"));
    }
    let power_ratio = sc.power_ratio();
    rows.push(row("aggregate", "scenario", "amp_coef".into(), sc.design.eta, "1"));
    rows.push(row("aggregate", "scenario", "power_ratio".into(), power_ratio, "1"));
    rows.push(row("aggregate", "scenario", "snr".into(), pt.snr_db, "dB"));

    let cfg_hash = sha256_hex(&format!("{:?}", sc.cfg));
    let design_hash = sha256_hex(&format!("{}|{:?}", sc.design.fingerprint(), sc.gt));
    Ok(PointSummary {
        label: pt.label.clone(),
        snr_db: pt.snr_db,
        methods,
        crlb,
        crlb_report,
        cov_model_error,
        amp_coef: sc.design.eta,
        power_ratio,
        cfg_hash,
        design_hash,
    })
}

/// Runs every sweep point. Each trial draws from its own counter-derived
/// stream, so results do not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec, hc: &HarnessConfig) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    hc.validate()?;
    let points = spec.points(hc)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (i, pt) in points.iter().enumerate() {
        summaries.push(run_point(spec, i, pt, &mut rows)?);
    }
    Ok(ExperimentReport { spec: spec.clone(), points: summaries, rows })
}
