//! Cramér-Rao bound for the path parameters under the amplified-noise
//! covariance of an active RIS.
//!
//! Each `(k, g)` observation is a real Gaussian vector `[Re y; Im y]` with
//! parameter-dependent mean and covariance. The covariance keeps only the
//! same-path terms of the RIS noise, which makes it identical for every
//! subcarrier and slot.

use std::f64::consts::PI;

use log::warn;

use crate::array::{
    bs_steering, subcarrier_freq, upa_positions, Direction, MultipathGroundTruth, SystemConfig, SPEED_OF_LIGHT,
};
use crate::estimator::PathCounts;
use crate::linalg::{real_block, real_stack, spd_inverse, CMat, CVec, RMat, C64, J};
use crate::probing::{NoiseLevels, ProbingDesign, RxModel};

/// Index ranges of each parameter family inside the full vector.
///
/// Order: `τ_L (L), τ_R (C), ψ_y (C), ψ_z (C), θ_L (az, el per direct path),
/// θ_R (az, el per RIS-BS path), Re β_L, Im β_L, Re β_R, Im β_R`, then the
/// nuisance RIS-BS power gains `|β_{R,2}|²` (Q).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub counts: PathCounts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    DirectDelay,
    CascadedDelay,
    PsiY,
    PsiZ,
    DirectAngle,
    RisBsAngle,
    DirectGainRe,
    DirectGainIm,
    CascadedGainRe,
    CascadedGainIm,
    Nuisance,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::DirectDelay,
        Family::CascadedDelay,
        Family::PsiY,
        Family::PsiZ,
        Family::DirectAngle,
        Family::RisBsAngle,
        Family::DirectGainRe,
        Family::DirectGainIm,
        Family::CascadedGainRe,
        Family::CascadedGainIm,
        Family::Nuisance,
    ];
}

impl Layout {
    pub fn new(counts: PathCounts) -> Self {
        Self { counts }
    }

    fn len_of(&self, f: Family) -> usize {
        let (l, c, q) = (self.counts.direct, self.counts.cascaded(), self.counts.ris_bs);
        match f {
            Family::DirectDelay | Family::DirectGainRe | Family::DirectGainIm => l,
            Family::CascadedDelay | Family::PsiY | Family::PsiZ => c,
            Family::CascadedGainRe | Family::CascadedGainIm => c,
            Family::DirectAngle => 2 * l,
            Family::RisBsAngle => 2 * q,
            Family::Nuisance => q,
        }
    }

    pub fn range(&self, f: Family) -> std::ops::Range<usize> {
        let mut start = 0;
        for g in Family::ALL {
            let n = self.len_of(g);
            if g == f {
                return start..start + n;
            }
            start += n;
        }
        unreachable!()
    }

    /// `5R + 3Q`.
    pub fn dim(&self) -> usize {
        Family::ALL.iter().map(|&f| self.len_of(f)).sum()
    }

    /// `5R + 2Q`.
    pub fn interest_dim(&self) -> usize {
        self.dim() - self.counts.ris_bs
    }
}

/// Full parameter vector of the cascaded-form signal model.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn from_truth(gt: &MultipathGroundTruth) -> Self {
        let layout = Layout::new(PathCounts::from_truth(gt));
        let mut v = Vec::with_capacity(layout.dim());
        v.extend(gt.direct.iter().map(|p| p.delay));
        v.extend(gt.cascaded.iter().map(|c| c.delay));
        v.extend(gt.cascaded.iter().map(|c| c.psi_y));
        v.extend(gt.cascaded.iter().map(|c| c.psi_z));
        v.extend(gt.direct.iter().flat_map(|p| [p.arrival.az, p.arrival.el]));
        v.extend(gt.ris_bs.iter().flat_map(|p| [p.arrival.az, p.arrival.el]));
        v.extend(gt.direct.iter().map(|p| p.gain.re));
        v.extend(gt.direct.iter().map(|p| p.gain.im));
        v.extend(gt.cascaded.iter().map(|c| c.gain.re));
        v.extend(gt.cascaded.iter().map(|c| c.gain.im));
        v.extend(gt.ris_bs.iter().map(|p| p.gain.norm_sqr()));
        Self { layout, values: v }
    }

    pub fn family(&self, f: Family) -> &[f64] {
        &self.values[self.layout.range(f)]
    }

    fn at(&self, f: Family, i: usize) -> f64 {
        self.values[self.layout.range(f).start + i]
    }

    fn direct_dir(&self, l: usize) -> Direction {
        Direction { az: self.at(Family::DirectAngle, 2 * l), el: self.at(Family::DirectAngle, 2 * l + 1) }
    }

    fn ris_bs_dir(&self, q: usize) -> Direction {
        Direction { az: self.at(Family::RisBsAngle, 2 * q), el: self.at(Family::RisBsAngle, 2 * q + 1) }
    }

    fn direct_gain(&self, l: usize) -> C64 {
        C64::new(self.at(Family::DirectGainRe, l), self.at(Family::DirectGainIm, l))
    }

    fn cascaded_gain(&self, c: usize) -> C64 {
        C64::new(self.at(Family::CascadedGainRe, c), self.at(Family::CascadedGainIm, c))
    }
}

/// `ḋ` for azimuth and elevation.
fn direction_derivs(d: Direction) -> [[f64; 3]; 2] {
    let (sa, ca) = d.az.sin_cos();
    let (se, ce) = d.el.sin_cos();
    [[-sa * ce, ca * ce, 0.0], [-ca * se, -sa * se, ce]]
}

/// Steering vector and its azimuth/elevation derivatives at the BS.
fn bs_response(cfg: &SystemConfig, dir: Direction) -> (CVec, [CVec; 2]) {
    let a = bs_steering(cfg, dir);
    let pos = upa_positions(cfg.bs_y, cfg.bs_z, cfg.bs_spacing);
    let k = 2.0 * PI / cfg.wavelength();
    let derivs = direction_derivs(dir).map(|dd| {
        CVec::from_fn(a.len(), |i, _| {
            let p = pos[i];
            J * k * (p[0] * dd[0] + p[1] * dd[1] + p[2] * dd[2]) * a[i]
        })
    });
    (a, derivs)
}

/// RIS response `γ_gᵀ ă(ψ)` and its ψ_y, ψ_z derivatives.
fn ris_response(cfg: &SystemConfig, design: &ProbingDesign, g: usize, psi_y: f64, psi_z: f64) -> [C64; 3] {
    let k = 2.0 * PI * cfg.ris_spacing / cfg.wavelength();
    let mut out = [C64::new(0.0, 0.0); 3];
    for iy in 0..cfg.ris_y {
        for iz in 0..cfg.ris_z {
            let m = iy * cfg.ris_z + iz;
            let term = design.profile[(g, m)] * C64::from_polar(1.0, k * (iy as f64 * psi_y + iz as f64 * psi_z));
            out[0] += term;
            out[1] += J * k * iy as f64 * term;
            out[2] += J * k * iz as f64 * term;
        }
    }
    out
}

/// Noise-free combiner output on subcarrier `k`, slot `g`, from the
/// cascaded-form parameters.
pub fn mean_vector(cfg: &SystemConfig, design: &ProbingDesign, phi: &ParamVector, k: usize, g: usize) -> CVec {
    let counts = phi.layout.counts;
    let f = subcarrier_freq(cfg, k);
    let x = design.pilot;
    let mut h = CVec::zeros(cfg.bs_elements());
    for l in 0..counts.direct {
        let tau = phi.at(Family::DirectDelay, l);
        h += bs_steering(cfg, phi.direct_dir(l)) * (phi.direct_gain(l) * C64::from_polar(x, -2.0 * PI * f * tau));
    }
    for c in 0..counts.cascaded() {
        let q = c / counts.ue_ris;
        let tau = phi.at(Family::CascadedDelay, c);
        let rho = ris_response(cfg, design, g, phi.at(Family::PsiY, c), phi.at(Family::PsiZ, c))[0];
        h += bs_steering(cfg, phi.ris_bs_dir(q)) * (phi.cascaded_gain(c) * rho * C64::from_polar(x, -2.0 * PI * f * tau));
    }
    design.combiner.adjoint() * h
}

/// Complex noise covariance `σ_B² RᴴR + σ_R² η² M Σ_q |β_{R,2}|² Rᴴa aᴴR`.
fn complex_covariance(cfg: &SystemConfig, design: &ProbingDesign, phi: &ParamVector, noise: NoiseLevels) -> CMat {
    let r = &design.combiner;
    let mut c = r.adjoint() * r * C64::new(noise.bs, 0.0);
    if noise.ris > 0.0 {
        let scale = noise.ris * design.eta * design.eta * cfg.ris_elements() as f64;
        for q in 0..phi.layout.counts.ris_bs {
            let ra = r.adjoint() * bs_steering(cfg, phi.ris_bs_dir(q));
            c += &ra * ra.adjoint() * C64::new(scale * phi.at(Family::Nuisance, q), 0.0);
        }
    }
    c
}

/// Real covariance of `[Re n; Im n]`.
pub fn noise_covariance(cfg: &SystemConfig, design: &ProbingDesign, phi: &ParamVector, noise: NoiseLevels) -> RMat {
    real_block(&complex_covariance(cfg, design, phi, noise)) * 0.5
}

/// `∂[Re μ; Im μ]/∂φ` on subcarrier `k`, slot `g`. Nuisance columns are zero.
pub fn mean_jacobian(cfg: &SystemConfig, design: &ProbingDesign, phi: &ParamVector, k: usize, g: usize) -> RMat {
    let layout = phi.layout;
    let counts = layout.counts;
    let n = design.combiner.ncols();
    let rh = design.combiner.adjoint();
    let f = subcarrier_freq(cfg, k);
    let x = design.pilot;
    let mut cols = vec![CVec::zeros(n); layout.dim()];
    let idx = |fam: Family, i: usize| layout.range(fam).start + i;

    for l in 0..counts.direct {
        let (a, da) = bs_response(cfg, phi.direct_dir(l));
        let phase = C64::from_polar(x, -2.0 * PI * f * phi.at(Family::DirectDelay, l));
        let unit = &rh * a * phase;
        let beta = phi.direct_gain(l);
        cols[idx(Family::DirectDelay, l)] = &unit * (beta * C64::new(0.0, -2.0 * PI * f));
        for (t, d) in da.iter().enumerate() {
            cols[idx(Family::DirectAngle, 2 * l + t)] = &rh * d * (phase * beta);
        }
        cols[idx(Family::DirectGainIm, l)] = &unit * J;
        cols[idx(Family::DirectGainRe, l)] = unit;
    }
    for c in 0..counts.cascaded() {
        let q = c / counts.ue_ris;
        let (a, da) = bs_response(cfg, phi.ris_bs_dir(q));
        let [rho, drho_y, drho_z] = ris_response(cfg, design, g, phi.at(Family::PsiY, c), phi.at(Family::PsiZ, c));
        let phase = C64::from_polar(x, -2.0 * PI * f * phi.at(Family::CascadedDelay, c));
        let beta = phi.cascaded_gain(c);
        let ra = &rh * a * phase;
        cols[idx(Family::CascadedDelay, c)] = &ra * (beta * rho * C64::new(0.0, -2.0 * PI * f));
        cols[idx(Family::PsiY, c)] = &ra * (beta * drho_y);
        cols[idx(Family::PsiZ, c)] = &ra * (beta * drho_z);
        for (t, d) in da.iter().enumerate() {
            cols[idx(Family::RisBsAngle, 2 * q + t)] += &rh * d * (phase * beta * rho);
        }
        cols[idx(Family::CascadedGainRe, c)] = &ra * rho;
        cols[idx(Family::CascadedGainIm, c)] = &ra * (rho * J);
    }
    let mut out = RMat::zeros(2 * n, layout.dim());
    for (j, col) in cols.iter().enumerate() {
        out.set_column(j, &real_stack(col));
    }
    out
}

/// Azimuth and elevation derivatives of `a aᴴ` at the BS.
fn outer_derivs(cfg: &SystemConfig, dir: Direction) -> [CMat; 2] {
    let a = bs_steering(cfg, dir);
    let pos = upa_positions(cfg.bs_y, cfg.bs_z, cfg.bs_spacing);
    let k = 2.0 * PI / cfg.wavelength();
    direction_derivs(dir).map(|dd| {
        let proj: Vec<f64> = pos.iter().map(|p| k * (p[0] * dd[0] + p[1] * dd[1] + p[2] * dd[2])).collect();
        CMat::from_fn(a.len(), a.len(), |i, j| J * (proj[i] - proj[j]) * a[i] * a[j].conj())
    })
}

/// Non-zero `∂C/∂φ_i` as `(index, matrix)` pairs: RIS-BS angles and the
/// nuisance power gains, present only when the RIS adds noise.
pub fn cov_jacobian(
    cfg: &SystemConfig,
    design: &ProbingDesign,
    phi: &ParamVector,
    noise: NoiseLevels,
) -> Vec<(usize, RMat)> {
    let layout = phi.layout;
    let mut out = Vec::new();
    if noise.ris <= 0.0 {
        return out;
    }
    let r = &design.combiner;
    let scale = noise.ris * design.eta * design.eta * cfg.ris_elements() as f64;
    for q in 0..layout.counts.ris_bs {
        let dir = phi.ris_bs_dir(q);
        let a = bs_steering(cfg, dir);
        let power = phi.at(Family::Nuisance, q);
        for (t, da) in outer_derivs(cfg, dir).into_iter().enumerate() {
            let dc = r.adjoint() * da * r * C64::new(scale * power, 0.0);
            out.push((layout.range(Family::RisBsAngle).start + 2 * q + t, real_block(&dc) * 0.5));
        }
        let ra = r.adjoint() * &a;
        let dc = &ra * ra.adjoint() * C64::new(scale, 0.0);
        out.push((layout.range(Family::Nuisance).start + q, real_block(&dc) * 0.5));
    }
    out
}

#[derive(Clone, Debug)]
pub struct CrlbReport {
    pub layout: Layout,
    /// Full FIM, `(5R+3Q)²`.
    pub fim: RMat,
    /// Mean-derivative part of the FIM alone.
    pub fim_mean_term: RMat,
    /// Interest block after removing the nuisance parameters, `(5R+2Q)²`.
    pub equivalent: RMat,
    /// Diagonal of the inverse equivalent FIM.
    pub crlb: Vec<f64>,
    /// False when the nuisance block was singular and the plain interest
    /// block was inverted instead.
    pub nuisance_reduced: bool,
    pub condition: f64,
}

impl CrlbReport {
    /// Summed bound of one family, in its native units (s², unitless, rad²).
    pub fn family_sum(&self, f: Family) -> f64 {
        self.crlb[self.layout.range(f)].iter().sum()
    }

    /// Summed delay bound in m².
    pub fn delay_sum_m2(&self, f: Family) -> f64 {
        self.family_sum(f) * SPEED_OF_LIGHT * SPEED_OF_LIGHT
    }
}

/// Inverse of a symmetric positive definite matrix after scaling it to a
/// unit diagonal, so that parameters in very different units do not
/// dominate the conditioning. The condition number is that of the scaled
/// matrix.
fn scaled_spd_inverse(m: &RMat) -> Option<(RMat, f64)> {
    let d: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)]).collect();
    if d.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let s: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let scaled = RMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s[i] * s[j]);
    let (inv, cond) = spd_inverse(&scaled)?;
    Some((RMat::from_fn(m.nrows(), m.ncols(), |i, j| inv[(i, j)] * s[i] * s[j]), cond))
}

#[derive(Debug, thiserror::Error)]
pub enum CrlbError {
    #[error("Fisher information is singular (condition {0:e})")]
    Singular(f64),
    #[error("BS noise power must be positive")]
    NoNoise,
}

/// FIM contributions summed over all subcarriers and slots, returned as
/// `(mean term, covariance term)`.
pub fn fim_terms(
    cfg: &SystemConfig,
    design: &ProbingDesign,
    phi: &ParamVector,
    noise: NoiseLevels,
) -> Result<(RMat, RMat), CrlbError> {
    if !(noise.bs > 0.0) {
        return Err(CrlbError::NoNoise);
    }
    let dim = phi.layout.dim();
    let cov = noise_covariance(cfg, design, phi, noise);
    let (cinv, cond) = scaled_spd_inverse(&cov).ok_or(CrlbError::Singular(f64::INFINITY))?;
    let mut mean_term = RMat::zeros(dim, dim);
    let slots = design.profile.nrows();
    for k in 0..cfg.pilots {
        for g in 0..slots {
            let d = mean_jacobian(cfg, design, phi, k, g);
            mean_term += d.transpose() * &cinv * &d;
        }
    }
    let dcov = cov_jacobian(cfg, design, phi, noise);
    let prods: Vec<(usize, RMat)> = dcov.iter().map(|(i, m)| (*i, &cinv * m)).collect();
    let mut cov_term = RMat::zeros(dim, dim);
    for (i, a) in &prods {
        for (j, b) in &prods {
            cov_term[(*i, *j)] = 0.5 * (a * b).trace();
        }
    }
    cov_term *= (cfg.pilots * slots) as f64;
    if cond > 1e12 {
        warn!("noise covariance condition number {cond:e}");
    }
    Ok((mean_term, cov_term))
}

/// FIM, nuisance reduction and per-parameter bounds.
pub fn fim(
    cfg: &SystemConfig,
    design: &ProbingDesign,
    gt: &MultipathGroundTruth,
    noise: NoiseLevels,
) -> Result<CrlbReport, CrlbError> {
    let phi = ParamVector::from_truth(gt);
    fim_at(cfg, design, &phi, noise)
}

/// Largest `‖C_exact − C‖_F / ‖C_exact‖_F` over all subcarriers and slots,
/// i.e. the size of what the slot-independent covariance leaves out.
pub fn covariance_model_error(
    cfg: &SystemConfig,
    design: &ProbingDesign,
    gt: &MultipathGroundTruth,
    noise: NoiseLevels,
) -> f64 {
    let model = RxModel::new(gt, cfg, design);
    let approx = complex_covariance(cfg, design, &ParamVector::from_truth(gt), noise);
    let mut worst: f64 = 0.0;
    for k in 0..cfg.pilots {
        for g in 0..design.profile.nrows() {
            let exact = model.noise_covariance(k, g, noise);
            let norm = exact.norm();
            if norm > 0.0 {
                worst = worst.max((&exact - &approx).norm() / norm);
            }
        }
    }
    worst
}

pub fn fim_at(cfg: &SystemConfig, design: &ProbingDesign, phi: &ParamVector, noise: NoiseLevels) -> Result<CrlbReport, CrlbError> {
    let layout = phi.layout;
    let (mean_term, cov_term) = fim_terms(cfg, design, phi, noise)?;
    let full = &mean_term + &cov_term;
    let full = (&full + full.transpose()) * 0.5;
    let p = layout.interest_dim();
    let q = layout.dim() - p;
    let j1 = full.view((0, 0), (p, p)).into_owned();
    let j2 = full.view((0, p), (p, q)).into_owned();
    let j3 = full.view((p, p), (q, q)).into_owned();
    let (equivalent, reduced) = match scaled_spd_inverse(&j3) {
        Some((j3_inv, _)) if q > 0 => (&j1 - &j2 * j3_inv * j2.transpose(), true),
        _ => {
            if q > 0 {
                warn!("nuisance block singular; using the interest block without reduction");
            }
            (j1, false)
        }
    };
    let (inv, condition) = scaled_spd_inverse(&equivalent).ok_or(CrlbError::Singular(f64::INFINITY))?;
    Ok(CrlbReport {
        layout,
        fim: full,
        fim_mean_term: mean_term,
        crlb: (0..p).map(|i| inv[(i, i)]).collect(),
        equivalent,
        nuisance_reduced: reduced,
        condition,
    })
}
