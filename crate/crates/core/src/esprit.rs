//! Shift-invariance (ESPRIT) estimators for Vandermonde generators.
//!
//! Transformed-space estimation works on `b = Tᴴ a(ω)` where `T[m, g] =
//! e^{j m ν_g}`. Summing the geometric series gives
//!
//! ```text
//! b − e^{jω}·F b = 1 − e^{jMω}·m,   F = diag(e^{−jν_g}),  m_g = e^{−jMν_g}
//! ```
//!
//! so projecting onto the complement of `span{1, m}` leaves
//! `Q b = e^{jω} Q F b`, which holds for any scaling of `b`.

use thiserror::Error;

use crate::linalg::{eig, pinv, wrap_phase, CMat, CVec, C64};

#[derive(Debug, Error, PartialEq)]
pub enum EspritError {
    #[error("shift-selected subspace has rank {rank} < {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("eigen-decomposition did not converge")]
    EigenFailure,
    #[error("vector must have at least {needed} entries, got {got}")]
    TooShort { got: usize, needed: usize },
    #[error("input vector is zero")]
    ZeroVector,
    #[error("transform needs at least 3 columns, got {0}")]
    TooFewBeams(usize),
    #[error("column {column} of the transform is not Vandermonde (residual {residual:e})")]
    NotVandermonde { column: usize, residual: f64 },
    #[error("projected shift vector vanishes")]
    DegenerateProjection,
    #[error("row maps of unequal length {0} and {1}")]
    UnequalShift(usize, usize),
}

pub type Result<T> = std::result::Result<T, EspritError>;

/// Row-selection maps for a shift along one mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftPair {
    pub up: Vec<usize>,
    pub down: Vec<usize>,
}

impl ShiftPair {
    pub fn new(up: Vec<usize>, down: Vec<usize>) -> Result<Self> {
        if up.len() != down.len() {
            return Err(EspritError::UnequalShift(up.len(), down.len()));
        }
        Ok(Self { up, down })
    }

    /// Shift along the fastest index of rows laid out as
    /// `row = i + len * j` with `j < inner`.
    pub fn fastest(len: usize, inner: usize) -> Self {
        let mut up = Vec::new();
        let mut down = Vec::new();
        for j in 0..inner {
            for i in 0..len.saturating_sub(1) {
                up.push(i + len * j);
                down.push(i + 1 + len * j);
            }
        }
        Self { up, down }
    }

    fn select(rows: &[usize], m: &CMat) -> CMat {
        CMat::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
    }
}

/// Generators recovered jointly with the eigenvector mixing matrix.
#[derive(Clone, Debug)]
pub struct JointEstimate {
    /// Sorted ascending, in (−π, π].
    pub generators: Vec<f64>,
    /// Columns permuted consistently with `generators`.
    pub mixing: CMat,
    /// Raw eigenvalues in the same order.
    pub eigenvalues: CVec,
}

/// Joint element-space ESPRIT: eigen-decomposition of `(J↑U)†(J↓U)`.
pub fn element_esprit_joint(u: &CMat, pair: &ShiftPair, rcond: f64) -> Result<JointEstimate> {
    let r = u.ncols();
    let up = ShiftPair::select(&pair.up, u);
    let down = ShiftPair::select(&pair.down, u);
    let (up_inv, rank) = pinv(&up, rcond);
    if rank < r {
        return Err(EspritError::RankDeficient { rank, needed: r });
    }
    let phi = up_inv * down;
    let (vals, vecs) = eig(&phi).ok_or(EspritError::EigenFailure)?;
    let mut order: Vec<usize> = (0..r).collect();
    let gens: Vec<f64> = vals.iter().map(|z| wrap_phase(z.arg())).collect();
    order.sort_by(|&a, &b| gens[a].total_cmp(&gens[b]));
    Ok(JointEstimate {
        generators: order.iter().map(|&i| gens[i]).collect(),
        mixing: CMat::from_fn(r, r, |i, j| vecs[(i, order[j])]),
        eigenvalues: CVec::from_fn(r, |i, _| vals[order[i]]),
    })
}

/// One-lag least-squares phase of a single Vandermonde-like column.
pub fn element_esprit_column(b: &CVec) -> Result<f64> {
    let n = b.len();
    if n < 2 {
        return Err(EspritError::TooShort { got: n, needed: 2 });
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n - 1 {
        acc += b[i].conj() * b[i + 1];
    }
    if acc.norm() == 0.0 {
        return Err(EspritError::ZeroVector);
    }
    Ok(wrap_phase(acc.arg()))
}

/// Precomputed operators for transformed-space ESPRIT with a fixed
/// Vandermonde transform.
#[derive(Clone, Debug)]
pub struct BeamspaceTransform {
    pub transform: CMat,
    pub generators: Vec<f64>,
    /// Diagonal of the shift operator, `e^{−jν_g}`.
    pub shift: CVec,
    pub projector: CMat,
}

/// Builds the shift diagonal and the projector for `t` (`M × G`).
pub fn build_beamspace(t: &CMat) -> Result<BeamspaceTransform> {
    let (m, g) = t.shape();
    if g < 3 {
        return Err(EspritError::TooFewBeams(g));
    }
    if m < 2 {
        return Err(EspritError::TooShort { got: m, needed: 2 });
    }
    let mut generators = Vec::with_capacity(g);
    for c in 0..g {
        let col = t.column(c).into_owned();
        let nu = element_esprit_column(&col)?;
        let scale = col[0];
        let residual = (0..m)
            .map(|i| (col[i] - scale * C64::from_polar(1.0, i as f64 * nu)).norm())
            .fold(0.0, f64::max)
            / scale.norm().max(f64::MIN_POSITIVE);
        if residual > 1e-8 {
            return Err(EspritError::NotVandermonde { column: c, residual });
        }
        generators.push(nu);
    }
    let shift = CVec::from_fn(g, |i, _| C64::from_polar(1.0, -generators[i]));
    let v = CMat::from_fn(g, 2, |i, j| {
        if j == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::from_polar(1.0, -(m as f64) * generators[i])
        }
    });
    let (gram_inv, _) = pinv(&(v.adjoint() * &v), 1e-12);
    let projector = CMat::identity(g, g) - &v * gram_inv * v.adjoint();
    Ok(BeamspaceTransform { transform: t.clone(), generators, shift, projector })
}

impl BeamspaceTransform {
    /// Residual of `J↑T = J↓T·F`.
    pub fn shift_residual(&self) -> f64 {
        let t = &self.transform;
        let m = t.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..m - 1 {
            for c in 0..t.ncols() {
                worst = worst.max((t[(i, c)] - t[(i + 1, c)] * self.shift[c]).norm());
            }
        }
        worst
    }

    /// Transformed-space column estimator.
    pub fn estimate(&self, b: &CVec) -> Result<f64> {
        if b.norm() == 0.0 {
            return Err(EspritError::ZeroVector);
        }
        let qb = &self.projector * b;
        let qfb = &self.projector * b.component_mul(&self.shift);
        let den = qfb.norm_squared();
        if den <= 1e-24 * b.norm_squared() {
            return Err(EspritError::DegenerateProjection);
        }
        let z = qfb.dotc(&qb);
        Ok(wrap_phase(z.arg()))
    }
}

/// Convenience wrapper: builds the transform operators and estimates once.
pub fn transformed_esprit_column(b: &CVec, bt: &BeamspaceTransform) -> Result<f64> {
    bt.estimate(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::uniform_steering;
    use crate::probing::vandermonde;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rand_gens(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-PI..PI)).collect()
    }

    #[test]
    fn joint_recovers_two_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = vandermonde(6, &[-0.3, 0.7]);
        let mix = CMat::from_fn(2, 2, |_, _| C64::new(rng.random(), rng.random()));
        let u = crate::linalg::svd(&(a * mix)).u_r(2);
        let est = element_esprit_joint(&u, &ShiftPair::fastest(6, 1), 1e-10).unwrap();
        assert!((est.generators[0] + 0.3).abs() < 1e-10);
        assert!((est.generators[1] - 0.7).abs() < 1e-10);
    }

    #[test]
    fn joint_rank_one_and_rank_deficiency() {
        let u = uniform_steering(5, 1.1).normalize();
        let u = CMat::from_column_slice(5, 1, u.as_slice());
        let est = element_esprit_joint(&u, &ShiftPair::fastest(5, 1), 1e-10).unwrap();
        assert!((est.generators[0] - 1.1).abs() < 1e-12);
        // K1 − 1 = 2 < R = 3
        let a = vandermonde(3, &[0.1, 0.5, -1.0]);
        let err = element_esprit_joint(&a, &ShiftPair::fastest(3, 1), 1e-10).unwrap_err();
        assert!(matches!(err, EspritError::RankDeficient { needed: 3, .. }));
    }

    #[test]
    fn column_simple_cases() {
        let b = uniform_steering(8, 0.5);
        assert!((element_esprit_column(&b).unwrap() - 0.5).abs() < 1e-15);
        let scaled = &b * C64::new(-2.0, 3.0);
        assert!((element_esprit_column(&scaled).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(element_esprit_column(&CVec::zeros(4)), Err(EspritError::ZeroVector));
    }

    #[test]
    fn column_noisy_median_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = 16;
        let power = 10f64.powf(-3.0);
        let mut errs = Vec::new();
        for _ in 0..100 {
            let w = rng.random_range(-3.0..3.0);
            let b = uniform_steering(m, w) + crate::probing::complex_gaussian(m, power, &mut rng);
            errs.push((element_esprit_column(&b).unwrap() - w).abs());
        }
        errs.sort_by(f64::total_cmp);
        assert!(errs[50] < 0.01, "median {}", errs[50]);
    }

    #[test]
    fn beamspace_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = vandermonde(8, &rand_gens(&mut rng, 5));
        let bt = build_beamspace(&t).unwrap();
        assert!(bt.shift_residual() < 1e-10);
        let q = &bt.projector;
        assert!((q * q - q).norm() < 1e-12);
        assert!((q - q.adjoint()).norm() < 1e-12);
        assert!((q * CVec::from_element(5, C64::new(1.0, 0.0))).norm() < 1e-12);
        let mut bad = t.clone();
        bad[(3, 1)] *= C64::new(1.5, 0.0);
        assert!(matches!(build_beamspace(&bad), Err(EspritError::NotVandermonde { column: 1, .. })));
        assert_eq!(build_beamspace(&vandermonde(8, &[0.1, 0.2])).unwrap_err(), EspritError::TooFewBeams(2));
    }

    #[test]
    fn transformed_exact_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..100 {
            let m = rng.random_range(4..16);
            let g = rng.random_range(3..8);
            let nu = rand_gens(&mut rng, g);
            let t = vandermonde(m, &nu);
            let bt = build_beamspace(&t).unwrap();
            let w = if trial % 10 == 0 { nu[0] } else { rng.random_range(-PI..PI) };
            let b = t.adjoint() * uniform_steering(m, w);
            let got = bt.estimate(&b).unwrap();
            assert!(wrap_phase(got - w).abs() < 1e-9, "trial {trial}: {got} vs {w}");
            let scaled = &b * C64::from_polar(3.7, 1.2);
            let got2 = bt.estimate(&scaled).unwrap();
            assert!((got2 - got).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_and_column_agree_on_rank_one() {
        let b = uniform_steering(9, -2.2) * C64::new(0.3, -0.8);
        let col = element_esprit_column(&b).unwrap();
        let u = CMat::from_column_slice(9, 1, b.normalize().as_slice());
        let joint = element_esprit_joint(&u, &ShiftPair::fastest(9, 1), 1e-10).unwrap();
        assert!((col - joint.generators[0]).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn transformed_invariant_to_global_phase(w in -3.1f64..3.1, ph in -3.1f64..3.1, s in 0.01f64..100.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = vandermonde(10, &rand_gens(&mut rng, 4));
            let bt = build_beamspace(&t).unwrap();
            let b = t.adjoint() * uniform_steering(10, w) + crate::probing::complex_gaussian(4, 0.01, &mut rng);
            let a = bt.estimate(&b).unwrap();
            let c = bt.estimate(&(&b * C64::from_polar(s, ph))).unwrap();
            prop_assert!((a - c).abs() < 1e-10);
            prop_assert!(a > -PI && a <= PI);
        }
    }
}
