//! Algebraic CP decomposition of the smoothed six-way tensor.
//!
//! The smoothed tensor has dims `(K1, G1, G2, N1, N2, K2)` and is split as
//! `Y = (B3⊙B2⊙B1) diag(w) (B6⊙B5⊙B4)ᵀ`. The Vandermonde structure of the
//! first mode gives the column mixing through one eigen-decomposition; the
//! remaining factors come out of rank-one fits.

use log::warn;
use thiserror::Error;

use crate::array::uniform_steering;
use crate::esprit::{element_esprit_joint, EspritError, ShiftPair};
use crate::linalg::{svd, CMat, CVec, RVec, C64};
use crate::tensor::{spatial_smooth, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum VscpdError {
    #[error("rank {rank} not identifiable: min(K1-1, K2) = {bound}")]
    NotUnique { rank: usize, bound: usize },
    #[error("expected a 6-way smoothed tensor, got order {0}")]
    BadOrder(usize),
    #[error("rank must be positive")]
    ZeroRank,
    #[error("eigenvector matrix is singular")]
    SingularMixing,
    #[error(transparent)]
    Esprit(#[from] EspritError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, VscpdError>;

/// Outcome of the identifiability test for a given smoothing split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniquenessReport {
    pub unique: bool,
    /// `min(K1 − 1, K2)`, the largest rank this split can resolve.
    pub bound: usize,
    /// Largest rank permitted by the matrix dimensions alone.
    pub generic_bound: usize,
}

/// Identifiability for smoothed dims `(K1, G1, G2, N1, N2, K2)`.
pub fn uniqueness_check(dims: &[usize; 6], rank: usize) -> UniquenessReport {
    let [k1, g1, g2, n1, n2, k2] = *dims;
    let bound = k1.saturating_sub(1).min(k2);
    let generic_bound = (k1 * g1 * g2).min(n1 * n2 * k2);
    UniquenessReport { unique: rank >= 1 && rank <= bound && rank <= generic_bound, bound, generic_bound }
}

#[derive(Clone, Debug)]
pub struct VscpdResult {
    /// Delay-mode generators, ascending.
    pub delay_generators: Vec<f64>,
    /// `[B1, …, B6]`, unit-norm columns with first nonzero entry real positive.
    pub factors: Vec<CMat>,
    /// All singular values of the split matricization, descending.
    pub singular_values: RVec,
    /// Eigenvector matrix relating the signal subspace to `B3⊙B2⊙B1`.
    pub mixing: CMat,
}

/// Unit norm and first significant entry rotated onto the positive real axis.
pub fn normalize_column(v: &CVec) -> CVec {
    let n = v.norm();
    if n == 0.0 {
        return v.clone();
    }
    let pivot = v.iter().find(|z| z.norm() > 1e-12 * n).copied().unwrap_or(C64::new(1.0, 0.0));
    let rot = C64::from_polar(1.0 / n, -pivot.arg());
    v * rot
}

/// Leading rank-one pair of a matrix: `(u, conj(v))` so that `M ≈ σ u (conj v)ᵀ`.
fn rank_one(m: &CMat) -> (CVec, CVec) {
    let s = svd(m);
    (s.u.column(0).into_owned(), s.v_t.row(0).transpose())
}

/// Smooths the raw `(K, G1, G2, N1, N2)` tensor and decomposes it.
pub fn vscpd(y: &Tensor, rank: usize, k1: usize) -> Result<VscpdResult> {
    if y.order() != 5 {
        return Err(VscpdError::BadOrder(y.order()));
    }
    let smoothed = spatial_smooth(y, k1)?;
    vscpd_smoothed(&smoothed, rank)
}

pub fn vscpd_smoothed(y: &Tensor, rank: usize) -> Result<VscpdResult> {
    if y.order() != 6 {
        return Err(VscpdError::BadOrder(y.order()));
    }
    if rank == 0 {
        return Err(VscpdError::ZeroRank);
    }
    let d = y.dims();
    let dims = [d[0], d[1], d[2], d[3], d[4], d[5]];
    let report = uniqueness_check(&dims, rank);
    if !report.unique {
        return Err(VscpdError::NotUnique { rank, bound: report.bound.min(report.generic_bound) });
    }
    let [k1, g1, g2, n1, n2, k2] = dims;

    let mat = y.matricize_split(3)?;
    let dec = svd(&mat);
    let s = dec.s.clone();
    if s[rank - 1] <= 1e-13 * s[0] {
        warn!("signal subspace nearly degenerate: s[{}]/s[0] = {:e}", rank - 1, s[rank - 1] / s[0]);
    }
    let u = dec.u_r(rank);
    let v = dec.v_r(rank);

    let joint = element_esprit_joint(&u, &ShiftPair::fastest(k1, g1 * g2), 1e-12)?;
    let mixing = joint.mixing;
    let mixing_inv_t = mixing.clone().try_inverse().ok_or(VscpdError::SingularMixing)?.transpose();

    // conj(V) Σ, columns scaled by the singular values
    let mut right = v.map(|z| z.conj());
    for (r, mut col) in right.column_iter_mut().enumerate() {
        col *= C64::new(s[r], 0.0);
    }

    let mut factors: Vec<CMat> = [k1, g1, g2, n1, n2, k2].iter().map(|&n| CMat::zeros(n, rank)).collect();
    for r in 0..rank {
        let omega = joint.generators[r];
        let b1 = uniform_steering(k1, omega);
        let b6 = uniform_steering(k2, omega);

        let left = &u * mixing.column(r);
        let m = CMat::from_column_slice(k1, g1 * g2, left.as_slice());
        let row = b1.adjoint() * m / C64::new(k1 as f64, 0.0);
        let (b2, b3) = rank_one(&CMat::from_column_slice(g1, g2, row.as_slice()));

        let col = &right * mixing_inv_t.column(r);
        let m = CMat::from_column_slice(n1 * n2, k2, col.as_slice());
        let inner = m * b6.map(|z| z.conj()) / C64::new(k2 as f64, 0.0);
        let (b4, b5) = rank_one(&CMat::from_column_slice(n1, n2, inner.as_slice()));

        for (n, b) in [b1, b2, b3, b4, b5, b6].iter().enumerate() {
            factors[n].set_column(r, &normalize_column(b));
        }
    }
    Ok(VscpdResult { delay_generators: joint.generators, factors, singular_values: s, mixing })
}
