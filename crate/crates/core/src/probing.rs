//! Probing design, received-signal synthesis and signal-tensor assembly.
//!
//! Physical magnitudes are kept (`|x|² = P_T`, RIS entries of modulus η), so
//! the CP weights of the signal tensor are `x·β` for direct paths and
//! `x·η·β` for cascaded paths. [`WeightScale`] records this convention.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::array::{
    bs_steering, channel_frequency_response, uniform_steering, Generators, MultipathGroundTruth, SystemConfig,
};
use crate::linalg::{kron, CMat, CVec, C64};
use crate::tensor::{FactorSet, Tensor, TensorError};

#[derive(Debug, Error, PartialEq)]
pub enum ProbingError {
    #[error("slot count {slots} does not factor as {slots_y} x {slots_z}")]
    SlotFactorization { slots: usize, slots_y: usize, slots_z: usize },
    #[error("block shape mismatch: {0}")]
    Shape(String),
    #[error("noise covariance trace must be positive")]
    ZeroNoise,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, ProbingError>;

/// `T[i, c] = e^{j i ν_c}`.
pub fn vandermonde(rows: usize, generators: &[f64]) -> CMat {
    CMat::from_fn(rows, generators.len(), |i, c| C64::from_polar(1.0, i as f64 * generators[c]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbingDesign {
    /// Real positive pilot with `pilot² = P_T`.
    pub pilot: f64,
    /// RIS amplification (1 for a passive surface).
    pub eta: f64,
    pub ris_y_generators: Vec<f64>,
    pub ris_z_generators: Vec<f64>,
    pub bs_y_generators: Vec<f64>,
    pub bs_z_generators: Vec<f64>,
    /// `ris_y × slots_y`.
    pub ris_y_transform: CMat,
    /// `ris_z × slots_z`.
    pub ris_z_transform: CMat,
    /// `bs_y × beams_y`.
    pub bs_y_transform: CMat,
    /// `bs_z × beams_z`.
    pub bs_z_transform: CMat,
    /// RIS profile, `slots × ris elements`, row `g = gy * slots_z + gz`.
    pub profile: CMat,
    /// Combiner `T_bs_y ⊗ T_bs_z`, `bs elements × beams`.
    pub combiner: CMat,
}

/// Factors relating CP weights to path gains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightScale {
    pub direct: f64,
    pub cascaded: f64,
}

impl ProbingDesign {
    pub fn weight_scale(&self) -> WeightScale {
        WeightScale { direct: self.pilot, cascaded: self.pilot * self.eta }
    }

    /// Transform matrix of tensor mode `mode` in 1..=4 (ris y, ris z, bs y, bs z).
    pub fn transform(&self, mode: usize) -> &CMat {
        match mode {
            1 => &self.ris_y_transform,
            2 => &self.ris_z_transform,
            3 => &self.bs_y_transform,
            4 => &self.bs_z_transform,
            _ => panic!("no transform for mode {mode}"),
        }
    }

    /// Design hash input: a stable textual fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut s = format!("pilot={:e};eta={:e}", self.pilot, self.eta);
        for g in [&self.ris_y_generators, &self.ris_z_generators, &self.bs_y_generators, &self.bs_z_generators] {
            s.push(';');
            for v in g {
                s.push_str(&format!("{v:e},"));
            }
        }
        s
    }
}

/// Draws Vandermonde transforms with i.i.d. uniform generators and builds
/// the matching RIS profile and combiner.
pub fn design_probing<R: Rng + ?Sized>(cfg: &SystemConfig, eta: f64, rng: &mut R) -> Result<ProbingDesign> {
    if cfg.slots_y == 0 || cfg.slots_z == 0 {
        return Err(ProbingError::SlotFactorization { slots: cfg.slots(), slots_y: cfg.slots_y, slots_z: cfg.slots_z });
    }
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                // (−π, π]
                PI - rng.random::<f64>() * 2.0 * PI
            })
            .collect()
    };
    let ris_y_generators = draw(cfg.slots_y);
    let ris_z_generators = draw(cfg.slots_z);
    let bs_y_generators = draw(cfg.beams_y);
    let bs_z_generators = draw(cfg.beams_z);
    Ok(design_from_generators(
        cfg,
        eta,
        ris_y_generators,
        ris_z_generators,
        bs_y_generators,
        bs_z_generators,
    ))
}

pub fn design_from_generators(
    cfg: &SystemConfig,
    eta: f64,
    ris_y_generators: Vec<f64>,
    ris_z_generators: Vec<f64>,
    bs_y_generators: Vec<f64>,
    bs_z_generators: Vec<f64>,
) -> ProbingDesign {
    let ris_y_transform = vandermonde(cfg.ris_y, &ris_y_generators);
    let ris_z_transform = vandermonde(cfg.ris_z, &ris_z_generators);
    let bs_y_transform = vandermonde(cfg.bs_y, &bs_y_generators);
    let bs_z_transform = vandermonde(cfg.bs_z, &bs_z_generators);
    let unit = kron(&ris_y_transform.adjoint(), &ris_z_transform.adjoint());
    let profile = unit.map(|z| C64::from_polar(eta, z.arg()));
    let combiner = kron(&bs_y_transform, &bs_z_transform);
    ProbingDesign {
        pilot: cfg.tx_power.sqrt(),
        eta,
        ris_y_generators,
        ris_z_generators,
        bs_y_generators,
        bs_z_generators,
        ris_y_transform,
        ris_z_transform,
        bs_y_transform,
        bs_z_transform,
        profile,
        combiner,
    }
}

/// Noise powers applied during synthesis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseLevels {
    pub bs: f64,
    pub ris: f64,
}

/// Received vectors `y[k][g]`, each of length `beams`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceivedBlock {
    pub samples: Vec<Vec<CVec>>,
    pub noise: Option<NoiseLevels>,
}

impl ReceivedBlock {
    pub fn energy(&self) -> f64 {
        self.samples.iter().flatten().map(|v| v.norm_squared()).sum()
    }
}

/// Precomputed per-subcarrier quantities for repeated synthesis.
#[derive(Clone, Debug)]
pub struct RxModel {
    /// `x·Rᴴ h_L^(k)`.
    direct: Vec<CVec>,
    /// `Rᴴ H_R2^(k)`.
    ris_bs: Vec<CMat>,
    /// `x·h_R1^(k)`.
    ue_ris: Vec<CVec>,
    combiner_adj: CMat,
    profile: CMat,
}

impl RxModel {
    pub fn new(gt: &MultipathGroundTruth, cfg: &SystemConfig, design: &ProbingDesign) -> Self {
        let combiner_adj = design.combiner.adjoint();
        let x = C64::new(design.pilot, 0.0);
        let mut direct = Vec::with_capacity(cfg.pilots);
        let mut ris_bs = Vec::with_capacity(cfg.pilots);
        let mut ue_ris = Vec::with_capacity(cfg.pilots);
        for k in 0..cfg.pilots {
            let h = channel_frequency_response(gt, cfg, k);
            direct.push(&combiner_adj * h.direct * x);
            ris_bs.push(&combiner_adj * h.ris_bs);
            ue_ris.push(h.ue_ris * x);
        }
        Self { direct, ris_bs, ue_ris, combiner_adj, profile: design.profile.clone() }
    }

    pub fn pilots(&self) -> usize {
        self.direct.len()
    }

    pub fn slots(&self) -> usize {
        self.profile.nrows()
    }

    fn gamma(&self, g: usize) -> CVec {
        self.profile.row(g).transpose()
    }

    /// Noise-free `x·Rᴴ(h_L + H_R2 Γ h_R1)` on subcarrier `k`, slot `g`.
    pub fn signal(&self, k: usize, g: usize) -> CVec {
        let cascaded = self.ue_ris[k].component_mul(&self.gamma(g));
        &self.direct[k] + &self.ris_bs[k] * cascaded
    }

    /// One draw of `Rᴴ(w_B + H_R2 Γ w_R)`.
    pub fn noise<R: Rng + ?Sized>(&self, k: usize, g: usize, levels: NoiseLevels, rng: &mut R) -> CVec {
        let w_b = complex_gaussian(self.combiner_adj.ncols(), levels.bs, rng);
        let mut out = &self.combiner_adj * w_b;
        if levels.ris > 0.0 {
            let w_r = complex_gaussian(self.profile.ncols(), levels.ris, rng);
            out += &self.ris_bs[k] * w_r.component_mul(&self.gamma(g));
        }
        out
    }

    /// Exact complex noise covariance on subcarrier `k`, slot `g`.
    pub fn noise_covariance(&self, k: usize, g: usize, levels: NoiseLevels) -> CMat {
        let mut c = &self.combiner_adj * self.combiner_adj.adjoint() * C64::new(levels.bs, 0.0);
        if levels.ris > 0.0 {
            let gamma = self.gamma(g);
            let mut hg = self.ris_bs[k].clone();
            for (mut col, z) in hg.column_iter_mut().zip(gamma.iter()) {
                col *= *z;
            }
            c += &hg * hg.adjoint() * C64::new(levels.ris, 0.0);
        }
        c
    }

    /// `Σ_{k,g} tr(C^(k,g))` of the exact noise covariance
    /// `σ_B² RᴴR + σ_R² Rᴴ H_R2 Γ Γᴴ H_R2ᴴ R`.
    pub fn noise_trace(&self, levels: NoiseLevels) -> f64 {
        let bs = self.combiner_adj.norm_squared() * levels.bs * (self.pilots() * self.slots()) as f64;
        let mut ris = 0.0;
        if levels.ris > 0.0 {
            for h in &self.ris_bs {
                let col_power: Vec<f64> = h.column_iter().map(|c| c.norm_squared()).collect();
                for g in 0..self.slots() {
                    ris += self.profile.row(g).iter().zip(&col_power).map(|(z, p)| z.norm_sqr() * p).sum::<f64>();
                }
            }
        }
        bs + levels.ris * ris
    }

    /// Energy of the cascaded part over the energy of the direct part.
    pub fn power_ratio(&self) -> f64 {
        let mut direct = 0.0;
        let mut cascaded = 0.0;
        for k in 0..self.pilots() {
            direct += self.direct[k].norm_squared() * self.slots() as f64;
            for g in 0..self.slots() {
                cascaded += (&self.ris_bs[k] * self.ue_ris[k].component_mul(&self.gamma(g))).norm_squared();
            }
        }
        cascaded / direct
    }

    pub fn noise_free_block(&self) -> ReceivedBlock {
        let samples =
            (0..self.pilots()).map(|k| (0..self.slots()).map(|g| self.signal(k, g)).collect()).collect();
        ReceivedBlock { samples, noise: None }
    }

    /// Noise-only block, drawn subcarrier-major then slot.
    pub fn noise_block<R: Rng + ?Sized>(&self, levels: NoiseLevels, rng: &mut R) -> ReceivedBlock {
        let samples = (0..self.pilots())
            .map(|k| (0..self.slots()).map(|g| self.noise(k, g, levels, rng)).collect())
            .collect();
        ReceivedBlock { samples, noise: Some(levels) }
    }
}

/// Circularly-symmetric Gaussian vector with per-entry variance `power`.
pub fn complex_gaussian<R: Rng + ?Sized>(n: usize, power: f64, rng: &mut R) -> CVec {
    let s = (power / 2.0).sqrt();
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

/// Synthesizes the received block, optionally with noise.
pub fn synthesize_rx<R: Rng + ?Sized>(
    gt: &MultipathGroundTruth,
    cfg: &SystemConfig,
    design: &ProbingDesign,
    noise: Option<NoiseLevels>,
    rng: &mut R,
) -> ReceivedBlock {
    let model = RxModel::new(gt, cfg, design);
    let mut block = model.noise_free_block();
    if let Some(levels) = noise {
        let w = model.noise_block(levels, rng);
        for (ys, ws) in block.samples.iter_mut().zip(&w.samples) {
            for (y, n) in ys.iter_mut().zip(ws) {
                *y += n;
            }
        }
        block.noise = Some(levels);
    }
    block
}

/// Arranges `y[k][g]` into the `(K, G1, G2, N1, N2)` signal tensor.
pub fn build_tensor(block: &ReceivedBlock, cfg: &SystemConfig) -> Result<Tensor> {
    let (k_n, g1, g2, n1, n2) = (cfg.pilots, cfg.slots_y, cfg.slots_z, cfg.beams_y, cfg.beams_z);
    if block.samples.len() != k_n
        || block.samples.iter().any(|s| s.len() != g1 * g2 || s.iter().any(|v| v.len() != n1 * n2))
    {
        return Err(ProbingError::Shape(format!(
            "expected {k_n} subcarriers x {} slots x {} beams",
            g1 * g2,
            n1 * n2
        )));
    }
    Ok(Tensor::from_fn(vec![k_n, g1, g2, n1, n2], |i| {
        block.samples[i[0]][i[1] * g2 + i[2]][i[3] * n2 + i[4]]
    })?)
}

/// Cascaded-path group of each overall path index `r ≥ L`.
pub fn ris_group_of(num_direct: usize, ue_ris: usize, r: usize) -> Option<usize> {
    r.checked_sub(num_direct).map(|c| c / ue_ris)
}

/// Analytic CP factors `(A1, B2, B3, B4, B5)` for the given generators,
/// with unit weights. Direct-path columns of B2 and B3 are all ones.
pub fn factors_from_generators(
    gens: &Generators,
    cfg: &SystemConfig,
    design: &ProbingDesign,
) -> Vec<CMat> {
    let r = gens.delay.len();
    let num_direct = r - gens.ris_y.len();
    let col = |m: usize, t: &CMat, w: f64| t.adjoint() * uniform_steering(m, w);
    let mut a1 = CMat::zeros(cfg.pilots, r);
    let mut b2 = CMat::from_element(cfg.slots_y, r, C64::new(1.0, 0.0));
    let mut b3 = CMat::from_element(cfg.slots_z, r, C64::new(1.0, 0.0));
    let mut b4 = CMat::zeros(cfg.beams_y, r);
    let mut b5 = CMat::zeros(cfg.beams_z, r);
    for i in 0..r {
        a1.set_column(i, &uniform_steering(cfg.pilots, gens.delay[i]));
        if i >= num_direct {
            let c = i - num_direct;
            b2.set_column(i, &col(cfg.ris_y, &design.ris_y_transform, gens.ris_y[c]));
            b3.set_column(i, &col(cfg.ris_z, &design.ris_z_transform, gens.ris_z[c]));
        }
        b4.set_column(i, &col(cfg.bs_y, &design.bs_y_transform, gens.bs_y[i]));
        b5.set_column(i, &col(cfg.bs_z, &design.bs_z_transform, gens.bs_z[i]));
    }
    vec![a1, b2, b3, b4, b5]
}

/// Tensor weights `x·β_L` and `x·η·β_R` from path gains.
pub fn tensor_weights(gains: &[C64], num_direct: usize, design: &ProbingDesign) -> CVec {
    let s = design.weight_scale();
    CVec::from_fn(gains.len(), |i, _| gains[i] * if i < num_direct { s.direct } else { s.cascaded })
}

/// The analytic CP model of the noise-free signal tensor.
pub fn model_factor_set(gt: &MultipathGroundTruth, cfg: &SystemConfig, design: &ProbingDesign) -> FactorSet {
    let gens = gt.generators(cfg);
    FactorSet {
        weights: tensor_weights(&gt.gains(), gt.num_direct(), design),
        factors: factors_from_generators(&gens, cfg, design),
    }
}

/// Received SNR in dB: total signal energy over total noise-covariance trace.
pub fn snr_db(signal_energy: f64, noise_trace: f64) -> Result<f64> {
    if !(noise_trace > 0.0) {
        return Err(ProbingError::ZeroNoise);
    }
    Ok(10.0 * (signal_energy / noise_trace).log10())
}

/// Combiner output `Rᴴ a_B(θ)` for a BS arrival direction.
pub fn combined_bs_response(cfg: &SystemConfig, design: &ProbingDesign, dir: crate::array::Direction) -> CVec {
    design.combiner.adjoint() * bs_steering(cfg, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{desk_config, desk_truth};
    use crate::linalg::real_stack;
    use crate::tensor::cp_reconstruct;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn profile_and_transform_structure() {
        let cfg = desk_config();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = design_probing(&cfg, 37.5, &mut rng).unwrap();
        assert!(d.profile.iter().all(|z| (z.norm() - 37.5).abs() < 1e-12));
        for c in 0..d.bs_y_transform.ncols() {
            let ratio = C64::from_polar(1.0, d.bs_y_generators[c]);
            for i in 0..d.bs_y_transform.nrows() - 1 {
                assert!((d.bs_y_transform[(i + 1, c)] / d.bs_y_transform[(i, c)] - ratio).norm() < 1e-12);
            }
        }
        // x·Υ equals (x·η)·(T2ᴴ ⊗ T3ᴴ)
        let direct = kron(&d.ris_y_transform.adjoint(), &d.ris_z_transform.adjoint());
        let lhs = &d.profile * C64::new(d.pilot, 0.0);
        let rhs = direct * C64::new(d.pilot * d.eta, 0.0);
        assert!((lhs - rhs).norm() < 1e-10);
        for v in d.ris_y_generators.iter().chain(&d.bs_z_generators) {
            assert!(*v > -PI && *v <= PI);
        }
    }

    #[test]
    fn zero_gains_noise_free_is_zero() {
        let cfg = desk_config();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut gt = desk_truth(&cfg, 3);
        for p in gt.direct.iter_mut().chain(gt.ue_ris.iter_mut()).chain(gt.ris_bs.iter_mut()) {
            p.gain = C64::new(0.0, 0.0);
        }
        let gt = MultipathGroundTruth::new(gt.direct, gt.ue_ris, gt.ris_bs);
        let d = design_probing(&cfg, 2.0, &mut rng).unwrap();
        let block = synthesize_rx(&gt, &cfg, &d, None, &mut rng);
        assert_eq!(block.energy(), 0.0);
    }

    #[test]
    fn los_only_matches_scalar_expansion() {
        let cfg = desk_config();
        let full = desk_truth(&cfg, 4);
        let gt = MultipathGroundTruth::new(
            vec![full.direct[0].clone()],
            vec![full.ue_ris[0].clone()],
            vec![full.ris_bs[0].clone()],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = design_probing(&cfg, 3.0, &mut rng).unwrap();
        let block = synthesize_rx(&gt, &cfg, &d, None, &mut rng);
        let lambda = cfg.wavelength();
        let bs_pos = crate::array::upa_positions(cfg.bs_y, cfg.bs_z, cfg.bs_spacing);
        let ris_pos = crate::array::upa_positions(cfg.ris_y, cfg.ris_z, cfg.ris_spacing);
        let phase = |p: [f64; 3], dir: crate::array::Direction| {
            let u = dir.unit_vector();
            2.0 * PI / lambda * (p[1] * u[1] + p[2] * u[2])
        };
        for &(k, g) in &[(0usize, 0usize), (3, 7), (15, 24)] {
            let f = k as f64 * cfg.subcarrier_spacing;
            for n in 0..cfg.beams() {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..cfg.bs_elements() {
                    let rc = d.combiner[(i, n)].conj();
                    let dl = &gt.direct[0];
                    acc += rc
                        * d.pilot
                        * dl.gain
                        * C64::from_polar(1.0, phase(bs_pos[i], dl.arrival) - 2.0 * PI * f * dl.delay);
                    let (ur, rb) = (&gt.ue_ris[0], &gt.ris_bs[0]);
                    for m in 0..cfg.ris_elements() {
                        let ph = phase(bs_pos[i], rb.arrival)
                            + phase(ris_pos[m], rb.departure.unwrap())
                            + phase(ris_pos[m], ur.arrival)
                            - 2.0 * PI * f * (ur.delay + rb.delay);
                        acc += rc * d.pilot * ur.gain * rb.gain * d.profile[(g, m)] * C64::from_polar(1.0, ph);
                    }
                }
                let got = block.samples[k][g][n];
                assert!((got - acc).norm() < 1e-9 * acc.norm(), "k={k} g={g} n={n}");
            }
        }
    }

    #[test]
    fn noise_only_covariance_matches_bs_term() {
        let mut cfg = desk_config();
        cfg.beams_y = 2;
        cfg.beams_z = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gt0 = desk_truth(&cfg, 6);
        let zero = |mut v: Vec<crate::array::PathComponent>| {
            for p in v.iter_mut() {
                p.gain = C64::new(0.0, 0.0);
            }
            v
        };
        let gt = MultipathGroundTruth::new(zero(gt0.direct), zero(gt0.ue_ris), zero(gt0.ris_bs));
        let d = design_probing(&cfg, 2.0, &mut rng).unwrap();
        let model = RxModel::new(&gt, &cfg, &d);
        let levels = NoiseLevels { bs: 0.7, ris: 0.3 };
        let n = 2 * cfg.beams();
        let draws = 10_000;
        let mut acc = crate::linalg::RMat::zeros(n, n);
        for _ in 0..draws {
            let w = real_stack(&model.noise(2, 3, levels, &mut rng));
            acc += &w * w.transpose();
        }
        acc /= draws as f64;
        let g = d.combiner.adjoint();
        let expected = crate::linalg::real_block(&(&g * g.adjoint())) * (levels.bs / 2.0);
        let rel = (acc - &expected).norm() / expected.norm();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn noise_trace_matches_sampled_energy() {
        let cfg = desk_config();
        let gt = desk_truth(&cfg, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = design_probing(&cfg, 3.0, &mut rng).unwrap();
        let model = RxModel::new(&gt, &cfg, &d);
        let levels = NoiseLevels { bs: 1.0, ris: 2.0 };
        let draws = 400;
        let mut energy = 0.0;
        for _ in 0..draws {
            energy += model.noise_block(levels, &mut rng).energy();
        }
        let expected = model.noise_trace(levels);
        let rel = (energy / draws as f64 - expected).abs() / expected;
        assert!(rel < 0.02, "{rel}");
        let bs_only = model.noise_trace(NoiseLevels { bs: 1.0, ris: 0.0 });
        let direct: f64 = (cfg.pilots * cfg.slots()) as f64 * d.combiner.norm_squared();
        assert!((bs_only - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn tensor_dims_and_cp_equivalence() {
        let cfg = desk_config();
        let gt = desk_truth(&cfg, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = design_probing(&cfg, 40.0, &mut rng).unwrap();
        let block = synthesize_rx(&gt, &cfg, &d, None, &mut rng);
        let t = build_tensor(&block, &cfg).unwrap();
        assert_eq!(t.dims(), &[cfg.pilots, cfg.slots_y, cfg.slots_z, cfg.beams_y, cfg.beams_z]);
        let model = cp_reconstruct(&model_factor_set(&gt, &cfg, &d)).unwrap();
        let rel = t.distance_sqr(&model).unwrap().sqrt() / model.frobenius_norm();
        assert!(rel < 1e-10, "{rel}");
        let fs = model_factor_set(&gt, &cfg, &d);
        for r in 0..gt.num_direct() {
            assert!(fs.factors[1].column(r).iter().all(|z| *z == C64::new(1.0, 0.0)));
            assert!(fs.factors[2].column(r).iter().all(|z| *z == C64::new(1.0, 0.0)));
        }
    }

    #[test]
    fn synthesis_is_reproducible() {
        let cfg = desk_config();
        let gt = desk_truth(&cfg, 9);
        let d = design_probing(&cfg, 5.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let lv = Some(NoiseLevels { bs: 1e-12, ris: 1e-12 });
        let a = synthesize_rx(&gt, &cfg, &d, lv, &mut ChaCha8Rng::seed_from_u64(42));
        let b = synthesize_rx(&gt, &cfg, &d, lv, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn snr_simple_cases() {
        assert_eq!(snr_db(2.0, 2.0).unwrap(), 0.0);
        assert!((snr_db(4.0, 1.0).unwrap() - snr_db(2.0, 1.0).unwrap() - 3.0103).abs() < 1e-4);
        assert_eq!(snr_db(1.0, 0.0), Err(ProbingError::ZeroNoise));
    }

    #[test]
    fn snr_matches_two_pass_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ys: Vec<CVec> = (0..20).map(|_| complex_gaussian(6, 1.3, &mut rng)).collect();
        let traces: Vec<f64> = (0..20).map(|i| 0.1 + i as f64 * 0.01).collect();
        let block = ReceivedBlock { samples: vec![ys.clone()], noise: None };
        let got = snr_db(block.energy(), traces.iter().sum()).unwrap();
        let mut num = 0.0;
        for y in &ys {
            for z in y.iter() {
                num += z.re * z.re + z.im * z.im;
            }
        }
        let mut den = 0.0;
        for t in traces.iter().rev() {
            den += t;
        }
        assert!((got - 10.0 * (num / den).log10()).abs() < 1e-12);
    }
}
