//! Three-stage recovery of path parameters from decomposed tensor factors.
//!
//! Stage I identifies direct and cascaded columns, groups cascaded columns
//! that share a RIS-BS path, and maps transformed-space ESPRIT generators to
//! physical parameters. Stage II refines every spatial generator with a
//! shrinking one-dimensional correlation search. Stage III polishes all six
//! factors with ALS and runs identification and search again.

use std::f64::consts::PI;

use log::{debug, warn};
use thiserror::Error;

use crate::array::{uniform_steering, Direction, Generators, MultipathGroundTruth, SystemConfig, SPEED_OF_LIGHT};
use crate::esprit::{build_beamspace, element_esprit_column, BeamspaceTransform, EspritError};
use crate::linalg::{matmul, pinv, wrap_phase, CMat, CVec, C64};
use crate::probing::{factors_from_generators, tensor_weights, ProbingDesign};
use crate::tensor::{fit_weights, gram_hadamard, khatri_rao_rev, FactorSet, Tensor, TensorError};
use crate::vscpd::VscpdResult;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("{what} argument {value} outside [-1, 1]")]
    AngleOutOfRange { what: &'static str, value: f64 },
    #[error("expected {expected} factor columns, got {got}")]
    RankMismatch { expected: usize, got: usize },
    #[error("expected 6 factor matrices, got {0}")]
    FactorCount(usize),
    #[error("invalid search schedule: {0}")]
    Schedule(String),
    #[error(transparent)]
    Esprit(#[from] EspritError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

/// Number of direct, UE-RIS and RIS-BS paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathCounts {
    pub direct: usize,
    pub ue_ris: usize,
    pub ris_bs: usize,
}

impl PathCounts {
    pub fn from_truth(gt: &MultipathGroundTruth) -> Self {
        Self { direct: gt.num_direct(), ue_ris: gt.num_ue_ris(), ris_bs: gt.num_ris_bs() }
    }

    pub fn cascaded(&self) -> usize {
        self.ue_ris * self.ris_bs
    }

    pub fn rank(&self) -> usize {
        self.direct + self.cascaded()
    }
}

/// Which decomposition columns are direct, which cascaded, and how the
/// cascaded ones group by RIS-BS path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathIndexSets {
    pub direct: Vec<usize>,
    pub cascaded: Vec<usize>,
    pub groups: Vec<Vec<usize>>,
}

impl PathIndexSets {
    /// Column order used by every estimate: direct first, then groups.
    pub fn order(&self) -> Vec<usize> {
        self.direct.iter().chain(self.groups.iter().flatten()).copied().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    IdentificationMismatch,
    GroupingMismatch,
}

impl Failure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Failure::IdentificationMismatch => "identification-mismatch",
            Failure::GroupingMismatch => "grouping-mismatch",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    I,
    II,
    III,
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::I => "I",
            Stage::II => "II",
            Stage::III => "III",
        }
    }
}

/// Physical path parameters, ordered like the ground truth: direct paths,
/// then cascaded paths with the UE-RIS index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelParameters {
    /// Seconds.
    pub direct_delays: Vec<f64>,
    pub cascaded_delays: Vec<f64>,
    pub psi_y: Vec<f64>,
    pub psi_z: Vec<f64>,
    pub direct_dirs: Vec<Direction>,
    /// One arrival direction per RIS-BS path.
    pub ris_bs_dirs: Vec<Direction>,
    pub direct_gains: Vec<C64>,
    pub cascaded_gains: Vec<C64>,
    pub ue_ris: usize,
}

impl ChannelParameters {
    pub fn from_truth(gt: &MultipathGroundTruth) -> Self {
        Self {
            direct_delays: gt.direct.iter().map(|p| p.delay).collect(),
            cascaded_delays: gt.cascaded.iter().map(|c| c.delay).collect(),
            psi_y: gt.cascaded.iter().map(|c| c.psi_y).collect(),
            psi_z: gt.cascaded.iter().map(|c| c.psi_z).collect(),
            direct_dirs: gt.direct.iter().map(|p| p.arrival).collect(),
            ris_bs_dirs: gt.ris_bs.iter().map(|p| p.arrival).collect(),
            direct_gains: gt.direct.iter().map(|p| p.gain).collect(),
            cascaded_gains: gt.cascaded.iter().map(|c| c.gain).collect(),
            ue_ris: gt.num_ue_ris(),
        }
    }

    pub fn counts(&self) -> PathCounts {
        PathCounts { direct: self.direct_delays.len(), ue_ris: self.ue_ris, ris_bs: self.ris_bs_dirs.len() }
    }

    pub fn rank(&self) -> usize {
        self.direct_delays.len() + self.cascaded_delays.len()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.direct_delays.iter().chain(&self.cascaded_delays).copied().collect()
    }

    pub fn gains(&self) -> Vec<C64> {
        self.direct_gains.iter().chain(&self.cascaded_gains).copied().collect()
    }

    pub fn set_gains(&mut self, gains: &[C64]) {
        let l = self.direct_delays.len();
        self.direct_gains = gains[..l].to_vec();
        self.cascaded_gains = gains[l..].to_vec();
    }

    pub fn bs_direction(&self, r: usize) -> Direction {
        let l = self.direct_dirs.len();
        if r < l {
            self.direct_dirs[r]
        } else {
            self.ris_bs_dirs[(r - l) / self.ue_ris.max(1)]
        }
    }

    pub fn generators(&self, cfg: &SystemConfig) -> Generators {
        let delay = self.delays().iter().map(|&t| cfg.delay_generator(t)).collect();
        let ris_y = self.psi_y.iter().map(|&p| cfg.ris_generator(p)).collect();
        let ris_z = self.psi_z.iter().map(|&p| cfg.ris_generator(p)).collect();
        let (bs_y, bs_z) = (0..self.rank()).map(|r| cfg.bs_generators(self.bs_direction(r))).unzip();
        Generators { delay, ris_y, ris_z, bs_y, bs_z }
    }
}

/// Recovered columns and parameters of a successful estimate.
#[derive(Clone, Debug)]
pub struct PathEstimate {
    pub sets: PathIndexSets,
    /// `[B1, …, B6]` with columns in the estimate order.
    pub columns: Vec<CMat>,
    /// Per-column generators before group averaging.
    pub generators: Generators,
    pub params: ChannelParameters,
}

#[derive(Clone, Debug)]
pub struct AlsReport {
    pub iterations: usize,
    pub converged: bool,
    pub relative_change: f64,
    /// `‖Y − model‖_F` after each sweep.
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ChannelEstimate {
    pub stage: Stage,
    pub failure: Option<Failure>,
    pub paths: Option<PathEstimate>,
    pub als: Option<AlsReport>,
}

impl ChannelEstimate {
    pub fn failed(stage: Stage, failure: Failure) -> Self {
        Self { stage, failure: Some(failure), paths: None, als: None }
    }

    pub fn is_success(&self) -> bool {
        self.failure.is_none()
    }

    pub fn params(&self) -> Option<&ChannelParameters> {
        self.paths.as_ref().map(|p| &p.params)
    }
}

/// Shrinking-grid settings for one tensor mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSchedule {
    /// Odd number of grid points per sweep.
    pub points: usize,
    pub iterations: usize,
    pub shrink: f64,
    pub initial_step: f64,
    /// Half-width of the admissible generator range.
    pub half_range: f64,
}

impl ModeSchedule {
    pub fn new(points: usize, iterations: usize, shrink: f64, half_range: f64) -> Self {
        let half = (points.saturating_sub(1) / 2).max(1) as f64;
        Self { points, iterations, shrink, initial_step: half_range / (10.0 * half), half_range }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points % 2 == 0 {
            return Err(EstimatorError::Schedule(format!("points must be odd, got {}", self.points)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(EstimatorError::Schedule(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if self.iterations == 0 {
            return Err(EstimatorError::Schedule("iterations must be at least 1".into()));
        }
        if !(self.initial_step > 0.0 && self.half_range > 0.0) {
            return Err(EstimatorError::Schedule("step and range must be positive".into()));
        }
        Ok(())
    }

    pub fn final_step(&self) -> f64 {
        self.initial_step * self.shrink.powi(self.iterations as i32 - 1)
    }
}

/// Search settings for modes 2 to 5 (RIS y, RIS z, BS y, BS z).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchSchedule {
    pub modes: [ModeSchedule; 4],
}

impl SearchSchedule {
    pub fn for_config(cfg: &SystemConfig, points: usize, iterations: usize, shrink: f64) -> Self {
        // |ψ| ≤ 2 at the RIS, |sin| ≤ 1 at the BS
        let ris = 2.0 * PI * cfg.ris_spacing * 2.0 / cfg.wavelength();
        let bs = 2.0 * PI * cfg.bs_spacing / cfg.wavelength();
        let m = |u| ModeSchedule::new(points, iterations, shrink, u);
        Self { modes: [m(ris), m(ris), m(bs), m(bs)] }
    }

    pub fn default_for(cfg: &SystemConfig) -> Self {
        Self::for_config(cfg, 201, 8, 0.5)
    }

    /// Schedule of tensor mode `mode` in 1..=4.
    pub fn mode(&self, mode: usize) -> &ModeSchedule {
        &self.modes[mode - 1]
    }

    pub fn validate(&self) -> Result<()> {
        self.modes.iter().try_for_each(|m| m.validate())
    }
}

/// Transformed-space ESPRIT operators for the four spatial modes.
#[derive(Clone, Debug)]
pub struct Beamspaces {
    modes: Vec<BeamspaceTransform>,
}

impl Beamspaces {
    pub fn new(design: &ProbingDesign) -> Result<Self> {
        let modes = (1..=4).map(|m| build_beamspace(design.transform(m))).collect::<std::result::Result<_, _>>()?;
        Ok(Self { modes })
    }

    /// Operators of tensor mode `mode` in 1..=4.
    pub fn mode(&self, mode: usize) -> &BeamspaceTransform {
        &self.modes[mode - 1]
    }
}

/// Complex sample variance of the unit-normalized column.
pub fn column_variance(col: &CVec) -> f64 {
    let n = col.norm();
    if n == 0.0 || col.is_empty() {
        return 0.0;
    }
    let u = col / C64::new(n, 0.0);
    let mean = u.sum() / C64::new(u.len() as f64, 0.0);
    u.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / u.len() as f64
}

fn smallest(values: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut out = idx[..count.min(idx.len())].to_vec();
    out.sort_unstable();
    out
}

/// Variance principle: direct paths carry constant columns in both RIS modes.
/// Returns `(direct, cascaded)` column indices.
pub fn identify_direct(
    b2: &CMat,
    b3: &CMat,
    num_direct: usize,
) -> std::result::Result<(Vec<usize>, Vec<usize>), Failure> {
    let var = |m: &CMat| -> Vec<f64> { m.column_iter().map(|c| column_variance(&c.into_owned())).collect() };
    let from_y = smallest(&var(b2), num_direct);
    let from_z = smallest(&var(b3), num_direct);
    if from_y != from_z || b2.ncols() != b3.ncols() {
        return Err(Failure::IdentificationMismatch);
    }
    let cascaded = (0..b2.ncols()).filter(|c| !from_y.contains(c)).collect();
    Ok((from_y, cascaded))
}

fn similarity(u: &CVec, v: &CVec) -> f64 {
    let d = u.norm() * v.norm();
    if d == 0.0 {
        0.0
    } else {
        u.dotc(v).norm() / d
    }
}

/// Greedy grouping of `columns` (indices into `cols`) into `groups` sets of `size`.
pub fn similarity_groups(cols: &CMat, columns: &[usize], size: usize, groups: usize) -> Vec<Vec<usize>> {
    let vecs: Vec<CVec> = columns.iter().map(|&c| cols.column(c).into_owned()).collect();
    let n = vecs.len();
    let sim: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| similarity(&vecs[i], &vecs[j])).collect()).collect();
    let mut free = vec![true; n];
    let mut out = Vec::with_capacity(groups);
    for _ in 0..groups {
        let mass = |u: usize| (0..n).filter(|&v| v != u && free[v]).map(|v| sim[u][v]).sum::<f64>();
        let Some(seed) = (0..n).filter(|&u| free[u]).fold(None, |best: Option<(usize, f64)>, u| {
            let m = mass(u);
            match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((u, m)),
            }
        }) else {
            break;
        };
        let seed = seed.0;
        free[seed] = false;
        let mut others: Vec<usize> = (0..n).filter(|&v| free[v]).collect();
        others.sort_by(|&a, &b| sim[seed][b].total_cmp(&sim[seed][a]).then(a.cmp(&b)));
        let mut group = vec![seed];
        for &v in others.iter().take(size.saturating_sub(1)) {
            free[v] = false;
            group.push(v);
        }
        let mut group: Vec<usize> = group.into_iter().map(|i| columns[i]).collect();
        group.sort_unstable();
        out.push(group);
    }
    out
}

fn canonical_partition(groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut p: Vec<Vec<usize>> = groups.to_vec();
    p.sort();
    p
}

/// Similarity principle on both BS modes; the two partitions must agree.
pub fn group_cascaded(
    b4: &CMat,
    b5: &CMat,
    cascaded: &[usize],
    ue_ris: usize,
    ris_bs: usize,
) -> std::result::Result<Vec<Vec<usize>>, Failure> {
    if cascaded.len() != ue_ris * ris_bs {
        return Err(Failure::GroupingMismatch);
    }
    let by_y = similarity_groups(b4, cascaded, ue_ris, ris_bs);
    let by_z = similarity_groups(b5, cascaded, ue_ris, ris_bs);
    if canonical_partition(&by_y) != canonical_partition(&by_z) {
        return Err(Failure::GroupingMismatch);
    }
    Ok(by_y)
}

fn checked_asin(x: f64, what: &'static str) -> Result<f64> {
    if x.abs() <= 1.0 {
        Ok(x.asin())
    } else if x.abs() <= 1.0 + 1e-6 {
        warn!("{what} argument {x} clamped to the unit interval");
        Ok(x.clamp(-1.0, 1.0).asin())
    } else {
        Err(EstimatorError::AngleOutOfRange { what, value: x })
    }
}

/// Delay in `[0, 1/Δf)` from a delay-mode generator.
pub fn delay_from_generator(cfg: &SystemConfig, omega: f64) -> f64 {
    let phase = (-omega).rem_euclid(2.0 * PI);
    let tau = phase / (2.0 * PI * cfg.subcarrier_spacing);
    if tau >= cfg.max_delay() {
        0.0
    } else {
        tau
    }
}

/// BS arrival direction from the y/z spatial generators.
pub fn direction_from_generators(cfg: &SystemConfig, omega_y: f64, omega_z: f64) -> Result<Direction> {
    let k = 2.0 * PI * cfg.bs_spacing / cfg.wavelength();
    let el = checked_asin(omega_z / k, "elevation")?;
    let az = checked_asin(omega_y / (k * el.cos()), "azimuth")?;
    Ok(Direction { az, el })
}

/// Maps per-column generators (estimate order) to physical parameters,
/// averaging the RIS-BS angles over each group. Gains are left at zero.
pub fn map_parameters(gens: &Generators, counts: PathCounts, cfg: &SystemConfig) -> Result<ChannelParameters> {
    let (l, p, q) = (counts.direct, counts.ue_ris, counts.ris_bs);
    let r = counts.rank();
    if gens.delay.len() != r || gens.bs_y.len() != r || gens.ris_y.len() != r - l {
        return Err(EstimatorError::RankMismatch { expected: r, got: gens.delay.len() });
    }
    let delays: Vec<f64> = gens.delay.iter().map(|&w| delay_from_generator(cfg, w)).collect();
    let dirs = (0..r).map(|i| direction_from_generators(cfg, gens.bs_y[i], gens.bs_z[i])).collect::<Result<Vec<_>>>()?;
    let ris_bs_dirs = (0..q)
        .map(|g| {
            let members = &dirs[l + g * p..l + (g + 1) * p];
            let n = members.len() as f64;
            Direction {
                az: members.iter().map(|d| d.az).sum::<f64>() / n,
                el: members.iter().map(|d| d.el).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(ChannelParameters {
        direct_delays: delays[..l].to_vec(),
        cascaded_delays: delays[l..].to_vec(),
        psi_y: gens.ris_y.iter().map(|&w| cfg.ris_psi(w)).collect(),
        psi_z: gens.ris_z.iter().map(|&w| cfg.ris_psi(w)).collect(),
        direct_dirs: dirs[..l].to_vec(),
        ris_bs_dirs,
        direct_gains: vec![C64::new(0.0, 0.0); l],
        cascaded_gains: vec![C64::new(0.0, 0.0); r - l],
        ue_ris: p,
    })
}

/// Analytic factors of the smoothed tensor `[B1, …, B6]` for given generators.
pub fn smoothed_factors(gens: &Generators, cfg: &SystemConfig, design: &ProbingDesign) -> Vec<CMat> {
    let r = gens.delay.len();
    let (k1, k2) = (cfg.smoothing_len, cfg.smoothing_rest());
    let steer = |rows: usize| {
        let mut m = CMat::zeros(rows, r);
        for (i, &w) in gens.delay.iter().enumerate() {
            m.set_column(i, &uniform_steering(rows, w));
        }
        m
    };
    let mut f = factors_from_generators(gens, cfg, design);
    f[0] = steer(k1);
    f.push(steer(k2));
    f
}

/// Least-squares path gains for fixed parameters, de-scaled by the pilot
/// amplitude and (for cascaded paths) the RIS amplification.
pub fn estimate_gains(
    y_sps: &Tensor,
    params: &ChannelParameters,
    cfg: &SystemConfig,
    design: &ProbingDesign,
) -> Result<Vec<C64>> {
    let factors = smoothed_factors(&params.generators(cfg), cfg, design);
    let w = fit_weights(y_sps, &factors, 1e-10)?;
    let s = design.weight_scale();
    let l = params.direct_delays.len();
    Ok(w.iter().enumerate().map(|(i, z)| z / if i < l { s.direct } else { s.cascaded }).collect())
}

fn select_columns(m: &CMat, order: &[usize]) -> CMat {
    CMat::from_fn(m.nrows(), order.len(), |i, j| m[(i, order[j])])
}

/// Identification, transformed-space ESPRIT, mapping and gains on a set of
/// six factors with known per-column delay generators.
#[allow(clippy::too_many_arguments)]
pub fn algebraic_estimate(
    factors: &[CMat],
    delay_generators: &[f64],
    y_sps: &Tensor,
    cfg: &SystemConfig,
    design: &ProbingDesign,
    beams: &Beamspaces,
    counts: PathCounts,
    stage: Stage,
) -> Result<ChannelEstimate> {
    if factors.len() != 6 {
        return Err(EstimatorError::FactorCount(factors.len()));
    }
    let r = counts.rank();
    if factors.iter().any(|f| f.ncols() != r) || delay_generators.len() != r {
        return Err(EstimatorError::RankMismatch { expected: r, got: factors[0].ncols() });
    }
    let (direct, cascaded) = match identify_direct(&factors[1], &factors[2], counts.direct) {
        Ok(s) => s,
        Err(f) => return Ok(ChannelEstimate::failed(stage, f)),
    };
    let groups = match group_cascaded(&factors[3], &factors[4], &cascaded, counts.ue_ris, counts.ris_bs) {
        Ok(g) => g,
        Err(f) => return Ok(ChannelEstimate::failed(stage, f)),
    };
    let sets = PathIndexSets { direct, cascaded, groups };
    let order = sets.order();
    let columns: Vec<CMat> = factors.iter().map(|f| select_columns(f, &order)).collect();
    let l = counts.direct;
    let esprit = |mode: usize, range: std::ops::Range<usize>| -> Result<Vec<f64>> {
        range.map(|c| Ok(beams.mode(mode).estimate(&columns[mode].column(c).into_owned())?)).collect()
    };
    let generators = Generators {
        delay: order.iter().map(|&c| delay_generators[c]).collect(),
        ris_y: esprit(1, l..r)?,
        ris_z: esprit(2, l..r)?,
        bs_y: esprit(3, 0..r)?,
        bs_z: esprit(4, 0..r)?,
    };
    let mut params = map_parameters(&generators, counts, cfg)?;
    params.set_gains(&estimate_gains(y_sps, &params, cfg, design)?);
    Ok(ChannelEstimate { stage, failure: None, paths: Some(PathEstimate { sets, columns, generators, params }), als: None })
}

/// Stage I on a VSCPD result.
pub fn stage1(
    vr: &VscpdResult,
    y_sps: &Tensor,
    cfg: &SystemConfig,
    design: &ProbingDesign,
    beams: &Beamspaces,
    counts: PathCounts,
) -> Result<ChannelEstimate> {
    algebraic_estimate(&vr.factors, &vr.delay_generators, y_sps, cfg, design, beams, counts, Stage::I)
}

/// `ω ↦ |b̂ᴴ Tᴴ a(ω)| / (‖b̂‖ ‖Tᴴ a(ω)‖)`, evaluated in the element domain.
pub struct CorrelationObjective {
    projected: CVec,
    gram: CMat,
    norm: f64,
}

impl CorrelationObjective {
    pub fn new(column: &CVec, transform: &CMat) -> Self {
        Self { projected: transform * column, gram: transform * transform.adjoint(), norm: column.norm() }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let a = uniform_steering(self.projected.len(), omega);
        let num = self.projected.dotc(&a).norm();
        let den_sq = a.dotc(&(&self.gram * &a)).re;
        if self.norm == 0.0 || den_sq <= 0.0 {
            return 0.0;
        }
        num / (self.norm * den_sq.sqrt())
    }
}

/// Shrinking-grid search around `start`.
pub fn cbs_search(mut objective: impl FnMut(f64) -> f64, start: f64, sched: &ModeSchedule) -> f64 {
    let half = (sched.points / 2) as f64;
    let mut center = start;
    let mut step = sched.initial_step;
    for _ in 0..sched.iterations {
        let mut best = (center, f64::NEG_INFINITY);
        for e in 0..sched.points {
            let w = center + (e as f64 - half) * step;
            let v = objective(w);
            if v > best.1 {
                best = (w, v);
            }
        }
        center = best.0;
        step *= sched.shrink;
    }
    wrap_phase(center)
}

/// Uniform grid of `points` over `[−half_range, half_range]`.
pub fn grid_search(mut objective: impl FnMut(f64) -> f64, half_range: f64, points: usize) -> f64 {
    let n = points.max(2);
    let mut best = (0.0, f64::NEG_INFINITY);
    for s in 0..n {
        let w = -half_range + 2.0 * half_range * s as f64 / (n - 1) as f64;
        let v = objective(w);
        if v > best.1 {
            best = (w, v);
        }
    }
    best.0
}

/// How spatial generators are refined after the algebraic step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SearchKind<'a> {
    Iterative(&'a SearchSchedule),
    /// One uniform grid with this many points per mode.
    Exhaustive(usize, &'a SearchSchedule),
}

fn refine_generators(
    paths: &PathEstimate,
    design: &ProbingDesign,
    search: SearchKind<'_>,
) -> Generators {
    let l = paths.params.direct_delays.len();
    let r = paths.params.rank();
    let mut gens = paths.generators.clone();
    let run = |mode: usize, col: usize, start: f64| -> f64 {
        let obj = CorrelationObjective::new(&paths.columns[mode].column(col).into_owned(), design.transform(mode));
        match search {
            SearchKind::Iterative(s) => cbs_search(|w| obj.eval(w), start, s.mode(mode)),
            SearchKind::Exhaustive(points, s) => grid_search(|w| obj.eval(w), s.mode(mode).half_range, points),
        }
    };
    for c in 0..r - l {
        gens.ris_y[c] = run(1, l + c, gens.ris_y[c]);
        gens.ris_z[c] = run(2, l + c, gens.ris_z[c]);
    }
    for i in 0..r {
        gens.bs_y[i] = run(3, i, gens.bs_y[i]);
        gens.bs_z[i] = run(4, i, gens.bs_z[i]);
    }
    gens
}

/// Correlation search over modes 2 to 5 followed by re-mapping and gains.
/// Delays are left unchanged.
pub fn refine_with_search(
    ce: &ChannelEstimate,
    y_sps: &Tensor,
    cfg: &SystemConfig,
    design: &ProbingDesign,
    search: SearchKind<'_>,
    stage: Stage,
) -> Result<ChannelEstimate> {
    let Some(paths) = &ce.paths else {
        return Ok(ChannelEstimate { stage, ..ce.clone() });
    };
    let generators = refine_generators(paths, design, search);
    let mut params = map_parameters(&generators, paths.params.counts(), cfg)?;
    params.set_gains(&estimate_gains(y_sps, &params, cfg, design)?);
    Ok(ChannelEstimate {
        stage,
        failure: None,
        paths: Some(PathEstimate { sets: paths.sets.clone(), columns: paths.columns.clone(), generators, params }),
        als: ce.als.clone(),
    })
}

/// Stage II.
pub fn stage2_cbs(
    ce: &ChannelEstimate,
    y_sps: &Tensor,
    cfg: &SystemConfig,
    design: &ProbingDesign,
    sched: &SearchSchedule,
) -> Result<ChannelEstimate> {
    refine_with_search(ce, y_sps, cfg, design, SearchKind::Iterative(sched), Stage::II)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlsOptions {
    pub max_iters: usize,
    pub tol: f64,
}

/// ALS over all factors of a CP model of `y`, starting from `init`. Stops
/// when the relative change of the model tensor drops below `tol`.
pub fn als_refine(y: &Tensor, init: Vec<CMat>, opts: AlsOptions) -> Result<(Vec<CMat>, AlsReport)> {
    let order = y.order();
    if init.len() != order {
        return Err(EstimatorError::FactorCount(init.len()));
    }
    FactorSet::from_factors(init.clone())?;
    let unfoldings = (0..order).map(|n| y.mode_unfold(n)).collect::<std::result::Result<Vec<_>, _>>()?;
    // mode-0 unfolding of the model, A_0 (⊙ others)ᵀ
    let model = |f: &[CMat]| -> Result<CMat> {
        let others: Vec<&CMat> = f[1..].iter().collect();
        Ok(matmul(&f[0], &khatri_rao_rev(&others)?.transpose()))
    };
    let mut factors = init;
    let mut previous = model(&factors)?;
    let mut report = AlsReport { iterations: 0, converged: false, relative_change: f64::INFINITY, residuals: Vec::new() };
    for it in 1..=opts.max_iters {
        for n in 0..order {
            let others: Vec<&CMat> = (0..order).filter(|&m| m != n).map(|m| &factors[m]).collect();
            let kr = khatri_rao_rev(&others)?.map(|z| z.conj());
            let gram = gram_hadamard(&factors, Some(n)).map(|z| z.conj());
            let (gram_inv, _) = pinv(&gram, 1e-13);
            factors[n] = matmul(&unfoldings[n], &kr) * gram_inv;
        }
        balance_columns(&mut factors);
        let current = model(&factors)?;
        let change = (&current - &previous).norm() / current.norm().max(f64::MIN_POSITIVE);
        report.residuals.push((&unfoldings[0] - &current).norm());
        report.iterations = it;
        report.relative_change = change;
        previous = current;
        if change < opts.tol {
            report.converged = true;
            break;
        }
    }
    Ok((factors, report))
}

/// Unit-norm columns in all modes but the last, which absorbs the scale.
fn balance_columns(factors: &mut [CMat]) {
    let last = factors.len() - 1;
    for r in 0..factors[0].ncols() {
        let mut scale = 1.0;
        for f in factors[..last].iter_mut() {
            let n = f.column(r).norm();
            if n > 0.0 {
                f.column_mut(r).unscale_mut(n);
                scale *= n;
            }
        }
        factors[last].column_mut(r).scale_mut(scale);
    }
}

fn average_phase(a: f64, b: f64) -> f64 {
    wrap_phase(a + wrap_phase(b - a) / 2.0)
}

/// Per-column delay generators from the two delay modes, averaged.
pub fn delay_generators_from_factors(first: &CMat, last: &CMat) -> Result<Vec<f64>> {
    (0..first.ncols())
        .map(|r| {
            let a = element_esprit_column(&first.column(r).into_owned())?;
            let b = element_esprit_column(&last.column(r).into_owned())?;
            Ok(average_phase(a, b))
        })
        .collect()
}

/// Stage III: ALS from the Stage II model, then identification, ESPRIT,
/// correlation search and gains on the refined factors.
pub fn stage3_als(
    y_sps: &Tensor,
    ce: &ChannelEstimate,
    cfg: &SystemConfig,
    design: &ProbingDesign,
    beams: &Beamspaces,
    sched: &SearchSchedule,
    opts: AlsOptions,
) -> Result<ChannelEstimate> {
    let Some(paths) = &ce.paths else {
        return Ok(ChannelEstimate { stage: Stage::III, ..ce.clone() });
    };
    let params = &paths.params;
    let mut init = smoothed_factors(&params.generators(cfg), cfg, design);
    let weights = tensor_weights(&params.gains(), params.direct_delays.len(), design);
    for (r, w) in weights.iter().enumerate() {
        for v in init[5].column_mut(r).iter_mut() {
            *v *= w;
        }
    }
    let (factors, report) = als_refine(y_sps, init, opts)?;
    if !report.converged {
        debug!("ALS stopped at {} sweeps with relative change {:e}", report.iterations, report.relative_change);
    }
    let delays = delay_generators_from_factors(&factors[0], &factors[5])?;
    let mut est = algebraic_estimate(&factors, &delays, y_sps, cfg, design, beams, params.counts(), Stage::III)?;
    if est.is_success() {
        est = refine_with_search(&est, y_sps, cfg, design, SearchKind::Iterative(sched), Stage::III)?;
    }
    est.als = Some(report);
    Ok(est)
}

/// Delay in meters.
pub fn delay_to_meters(tau: f64) -> f64 {
    tau * SPEED_OF_LIGHT
}
