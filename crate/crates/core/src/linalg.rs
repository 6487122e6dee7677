//! Small dense complex linear-algebra helpers. Matrices are stored as
//! `nalgebra` types; the SVD and eigen kernels run on `faer`.

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const J: C64 = C64::new(0.0, 1.0);

fn to_faer(m: &CMat) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `a · b` through faer's blocked kernels; much faster than the generic
/// nalgebra product for complex matrices with a large inner dimension.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let fa = faer::MatRef::from_column_major_slice(a.as_slice(), a.nrows(), a.ncols());
    let fb = faer::MatRef::from_column_major_slice(b.as_slice(), b.nrows(), b.ncols());
    let prod = fa * fb;
    from_faer(prod.as_ref())
}

/// Thin SVD with singular values in descending order.
pub struct SortedSvd {
    pub u: CMat,
    pub s: RVec,
    pub v_t: CMat,
}

pub fn svd(m: &CMat) -> SortedSvd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return SortedSvd { u: CMat::zeros(r, 0), s: RVec::zeros(0), v_t: CMat::zeros(0, c) };
    }
    let dec = to_faer(m).thin_svd().expect("svd converges");
    let s = dec.S().column_vector();
    SortedSvd {
        u: from_faer(dec.U()),
        s: RVec::from_fn(s.nrows(), |i, _| s[i].re),
        v_t: from_faer(dec.V()).adjoint(),
    }
}

impl SortedSvd {
    /// Leading `r` left singular vectors.
    pub fn u_r(&self, r: usize) -> CMat {
        self.u.columns(0, r).into_owned()
    }

    /// Leading `r` right singular vectors as columns (V, not Vᴴ).
    pub fn v_r(&self, r: usize) -> CMat {
        self.v_t.rows(0, r).adjoint()
    }
}

/// Pseudo-inverse that discards singular values below `rcond * s_max`.
/// Returns the inverse together with the retained rank.
pub fn pinv(m: &CMat, rcond: f64) -> (CMat, usize) {
    let SortedSvd { u, s, v_t } = svd(m);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cutoff = rcond * smax;
    let k = s.len();
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    let mut rank = 0;
    for i in 0..k {
        if s[i] > cutoff && s[i] > 0.0 {
            rank += 1;
            let vi = v_t.row(i).adjoint();
            let ui = u.column(i).adjoint();
            out += (vi * ui) * C64::new(1.0 / s[i], 0.0);
        }
    }
    (out, rank)
}

/// Eigen-decomposition of a general (non-Hermitian) complex square matrix.
/// Eigenvectors have unit norm.
pub fn eig(m: &CMat) -> Option<(CVec, CMat)> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n || m.iter().any(|z| !z.is_finite()) {
        return None;
    }
    let dec = to_faer(m).eigen().ok()?;
    let vals = dec.S().column_vector();
    let mut vecs = from_faer(dec.U());
    for mut col in vecs.column_iter_mut() {
        let nv = col.norm();
        if nv > 0.0 {
            col /= C64::new(nv, 0.0);
        }
    }
    Some((CVec::from_fn(n, |i, _| vals[i]), vecs))
}

/// Inverse of a real symmetric positive-definite matrix with its 2-norm
/// condition number, via symmetric eigen-decomposition.
pub fn spd_inverse(m: &RMat) -> Option<(RMat, f64)> {
    let n = m.nrows();
    if n == 0 {
        return Some((RMat::zeros(0, 0), 1.0));
    }
    let sym = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let dec = sym.self_adjoint_eigen(Side::Lower).ok()?;
    let evals = dec.S().column_vector();
    let values = RVec::from_fn(n, |i, _| evals[i]);
    let vecs = RMat::from_fn(n, n, |i, j| dec.U()[(i, j)]);
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > 0.0) || !(max.is_finite()) {
        return None;
    }
    let cond = max / min;
    if cond > 1e16 {
        return None;
    }
    let inv_diag = RMat::from_diagonal(&values.map(|x| 1.0 / x));
    Some((&vecs * inv_diag * vecs.transpose(), cond))
}

/// Kronecker product of two complex vectors, `b` varying fastest.
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// Kronecker product of two complex matrices.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Phase angle wrapped to (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Real block form `[[Re S, Im Sᵀ], [Im S, Re S]]` of a complex matrix.
pub fn real_block(s: &CMat) -> RMat {
    let n = s.nrows();
    let m = s.ncols();
    let mut out = RMat::zeros(2 * n, 2 * m);
    for i in 0..n {
        for j in 0..m {
            let z = s[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + m)] = z.re;
            out[(i + n, j)] = z.im;
        }
    }
    // upper-right block is Im(S)ᵀ, which needs the transposed index
    for i in 0..m {
        for j in 0..n {
            out[(i, j + m)] = s[(j, i)].im;
        }
    }
    out
}

/// Stacks `[Re v; Im v]`.
pub fn real_stack(v: &CVec) -> RVec {
    let n = v.len();
    RVec::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn matmul_matches_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (r, k, c) in [(1, 1, 1), (3, 700, 6), (8, 5, 0), (17, 9, 4)] {
            let a = rand_mat(&mut rng, r, k);
            let b = rand_mat(&mut rng, k, c);
            let want = &a * &b;
            assert!((matmul(&a, &b) - &want).norm() <= 1e-12 * want.norm().max(1.0));
        }
    }

    #[test]
    fn eig_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..7 {
            let m = rand_mat(&mut rng, n, n);
            let (vals, vecs) = eig(&m).unwrap();
            for k in 0..n {
                let lhs = &m * vecs.column(k);
                let rhs = vecs.column(k) * vals[k];
                assert!((lhs - rhs).norm() < 1e-10, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn pinv_of_full_rank_is_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = rand_mat(&mut rng, 4, 4);
        let (pi, rank) = pinv(&m, 1e-12);
        assert_eq!(rank, 4);
        assert!((pi * m - CMat::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn pinv_reports_rank_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = rand_mat(&mut rng, 4, 2);
        let m = &a * a.adjoint();
        let (_, rank) = pinv(&m, 1e-10);
        assert_eq!(rank, 2);
    }

    #[test]
    fn real_block_matches_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = rand_mat(&mut rng, 3, 3);
        let s = &g * g.adjoint();
        let b = real_block(&s);
        assert!((b.clone() - b.transpose()).norm() < 1e-14);
        let v = CVec::from_fn(3, |_, _| C64::new(rng.random(), rng.random()));
        let quad = (v.adjoint() * &s * &v)[(0, 0)].re;
        let rv = real_stack(&v);
        let quad_r = (rv.transpose() * &b * &rv)[(0, 0)];
        assert!((quad - quad_r).abs() < 1e-12);
    }

    #[test]
    fn wrap_phase_range() {
        use std::f64::consts::PI;
        assert!((wrap_phase(PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn svd_recomposes_structured_rank_one() {
        // outer products of Vandermonde-transformed steering vectors with
        // many tiny trailing singular values
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(2..7);
            let t1 = CMat::from_fn(8, n, |i, _| C64::from_polar(1.0, i as f64 * rng.random::<f64>() * 6.0));
            let t2 = CMat::from_fn(8, n, |i, _| C64::from_polar(1.0, i as f64 * rng.random::<f64>() * 6.0));
            let a = CVec::from_fn(8, |i, _| C64::from_polar(1.0, i as f64 * 1.1));
            let b = CVec::from_fn(8, |i, _| C64::from_polar(1.0, i as f64 * -0.4));
            let m = (t1.adjoint() * a) * (t2.adjoint() * b).transpose() * C64::new(3e-4, 1e-4);
            let d = svd(&m);
            let rec = &d.u * CMat::from_diagonal(&d.s.map(|x| C64::new(x, 0.0))) * &d.v_t;
            assert!((rec - &m).norm() < 1e-12 * m.norm());
            assert!(d.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
