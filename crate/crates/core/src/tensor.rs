//! Dense complex N-way tensors and CP (canonical polyadic) algebra.
//!
//! Layout convention used throughout the crate: tensor data is stored
//! column-major over the modes in ascending order, so mode 0 varies fastest.
//! Under this layout the identities are
//!
//! ```text
//! vec(T)  = (A_{N-1} ⊙ … ⊙ A_1 ⊙ A_0) · w
//! T_(n)   = A_n · diag(w) · (A_{N-1} ⊙ … ⊙ A_{n+1} ⊙ A_{n-1} ⊙ … ⊙ A_0)ᵀ
//! ```
//!
//! where `⊙` is the column-wise Kronecker (Khatri-Rao) product with the right
//! operand varying fastest. Modes are 0-based.

use thiserror::Error;

use crate::linalg::{pinv, CMat, CVec, C64};

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("dimension list must be non-empty with positive extents, got {0:?}")]
    BadDims(Vec<usize>),
    #[error("data length {data} does not match product of dims {expected}")]
    LengthMismatch { data: usize, expected: usize },
    #[error("mode {mode} out of range for order-{order} tensor")]
    InvalidMode { mode: usize, order: usize },
    #[error("column-count mismatch: {0} vs {1}")]
    ColumnMismatch(usize, usize),
    #[error("inconsistent factor set: {0}")]
    InconsistentFactors(String),
    #[error("smoothing length {k1} out of range 1..={k}")]
    SmoothingOutOfRange { k1: usize, k: usize },
    #[error("cannot reshape length {len} into {rows}x{cols}")]
    ReshapeMismatch { len: usize, rows: usize, cols: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("gram matrix singular: rank {rank} < {needed}")]
    SingularGram { rank: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Immutable dense complex tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(TensorError::BadDims(dims));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(TensorError::LengthMismatch { data: data.len(), expected });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, vec![C64::new(0.0, 0.0); n])
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Result<Self> {
        let n: usize = dims.iter().product();
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for (i, d) in idx.iter_mut().zip(&dims) {
                *i += 1;
                if *i < *d {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(dims, data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        let mut lin = 0;
        let mut stride = 1;
        for (i, d) in idx.iter().zip(&self.dims) {
            lin += i * stride;
            stride *= d;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.linear_index(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Squared Frobenius distance to another tensor of identical shape.
    pub fn distance_sqr(&self, other: &Tensor) -> Result<f64> {
        if self.dims != other.dims {
            return Err(TensorError::ShapeMismatch(self.dims.clone(), other.dims.clone()));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum())
    }

    /// Elementwise sum.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.dims != other.dims {
            return Err(TensorError::ShapeMismatch(self.dims.clone(), other.dims.clone()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Tensor::new(self.dims.clone(), data)
    }

    pub fn scale(&self, s: C64) -> Tensor {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|z| z * s).collect() }
    }

    /// Canonical-layout flattening.
    pub fn vec(&self) -> CVec {
        CVec::from_column_slice(&self.data)
    }

    /// Mode-`mode` unfolding: rows indexed by that mode, columns by the
    /// remaining modes with the lowest mode varying fastest.
    pub fn mode_unfold(&self, mode: usize) -> Result<CMat> {
        if mode >= self.order() {
            return Err(TensorError::InvalidMode { mode, order: self.order() });
        }
        let left: usize = self.dims[..mode].iter().product();
        let dn = self.dims[mode];
        let right: usize = self.dims[mode + 1..].iter().product();
        let mut out = CMat::zeros(dn, left * right);
        for r in 0..right {
            for i in 0..dn {
                let base = left * (i + dn * r);
                for l in 0..left {
                    out[(i, l + left * r)] = self.data[base + l];
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::mode_unfold`].
    pub fn fold(m: &CMat, mode: usize, dims: &[usize]) -> Result<Tensor> {
        if mode >= dims.len() {
            return Err(TensorError::InvalidMode { mode, order: dims.len() });
        }
        let left: usize = dims[..mode].iter().product();
        let dn = dims[mode];
        let right: usize = dims[mode + 1..].iter().product();
        if m.nrows() != dn || m.ncols() != left * right {
            return Err(TensorError::ShapeMismatch(vec![m.nrows(), m.ncols()], dims.to_vec()));
        }
        let mut data = vec![C64::new(0.0, 0.0); left * dn * right];
        for r in 0..right {
            for i in 0..dn {
                let base = left * (i + dn * r);
                for l in 0..left {
                    data[base + l] = m[(i, l + left * r)];
                }
            }
        }
        Tensor::new(dims.to_vec(), data)
    }

    /// Matricization with modes `[0, split)` combined into rows and the rest
    /// into columns. In canonical layout this is a pure reshape.
    pub fn matricize_split(&self, split: usize) -> Result<CMat> {
        if split == 0 || split >= self.order() {
            return Err(TensorError::InvalidMode { mode: split, order: self.order() });
        }
        let rows: usize = self.dims[..split].iter().product();
        let cols: usize = self.dims[split..].iter().product();
        Ok(CMat::from_column_slice(rows, cols, &self.data))
    }
}

/// Reshapes a vector into a `rows × cols` matrix, column-major.
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(TensorError::ReshapeMismatch { len: v.len(), rows, cols });
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

/// Column-wise Kronecker product; row index of `b` varies fastest.
pub fn khatri_rao(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.ncols() != b.ncols() {
        return Err(TensorError::ColumnMismatch(a.ncols(), b.ncols()));
    }
    let (ar, br) = (a.nrows(), b.nrows());
    let mut out = CMat::zeros(ar * br, a.ncols());
    for r in 0..a.ncols() {
        for i in 0..ar {
            let ai = a[(i, r)];
            for j in 0..br {
                out[(i * br + j, r)] = ai * b[(j, r)];
            }
        }
    }
    Ok(out)
}

/// `A_{k-1} ⊙ … ⊙ A_0` for the given list, i.e. the first matrix varies
/// fastest. This is the order appearing in `vec` and unfolding identities.
pub fn khatri_rao_rev(mats: &[&CMat]) -> Result<CMat> {
    let (first, rest) = mats
        .split_first()
        .ok_or_else(|| TensorError::InconsistentFactors("empty factor list".into()))?;
    let mut acc = (*first).clone();
    for m in rest {
        acc = khatri_rao(m, &acc)?;
    }
    Ok(acc)
}

/// Weighted list of factor matrices describing a CP tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet {
    pub weights: CVec,
    pub factors: Vec<CMat>,
}

impl FactorSet {
    pub fn new(weights: CVec, factors: Vec<CMat>) -> Result<Self> {
        let fs = Self { weights, factors };
        fs.validate()?;
        Ok(fs)
    }

    /// Unit weights.
    pub fn from_factors(factors: Vec<CMat>) -> Result<Self> {
        let r = factors.first().map(|f| f.ncols()).unwrap_or(0);
        Self::new(CVec::from_element(r, C64::new(1.0, 0.0)), factors)
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(TensorError::InconsistentFactors("no factors".into()));
        }
        let r = self.weights.len();
        for (n, f) in self.factors.iter().enumerate() {
            if f.ncols() != r {
                return Err(TensorError::InconsistentFactors(format!(
                    "factor {n} has {} columns, weights have {r}",
                    f.ncols()
                )));
            }
            if f.nrows() == 0 {
                return Err(TensorError::InconsistentFactors(format!("factor {n} has no rows")));
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    /// Absorbs the weights into factor `mode`, leaving unit weights.
    pub fn absorb_weights(&self, mode: usize) -> FactorSet {
        let mut factors = self.factors.clone();
        for r in 0..self.rank() {
            let w = self.weights[r];
            for v in factors[mode].column_mut(r).iter_mut() {
                *v *= w;
            }
        }
        FactorSet { weights: CVec::from_element(self.rank(), C64::new(1.0, 0.0)), factors }
    }
}

/// Evaluates the CP model: `T[i…] = Σ_r w_r Π_n A_n[i_n, r]`.
pub fn cp_reconstruct(fs: &FactorSet) -> Result<Tensor> {
    fs.validate()?;
    let dims = fs.dims();
    let total: usize = dims.iter().product();
    let mut data = vec![C64::new(0.0, 0.0); total];
    let mut col = Vec::with_capacity(total);
    let mut next = Vec::with_capacity(total);
    for r in 0..fs.rank() {
        col.clear();
        col.push(fs.weights[r]);
        for f in &fs.factors {
            next.clear();
            for i in 0..f.nrows() {
                let a = f[(i, r)];
                next.extend(col.iter().map(|c| c * a));
            }
            std::mem::swap(&mut col, &mut next);
        }
        for (d, c) in data.iter_mut().zip(&col) {
            *d += c;
        }
    }
    Tensor::new(dims, data)
}

/// Spatial smoothing along mode 0.
///
/// A tensor with dims `(K, d_1, …, d_m)` becomes `(K1, d_1, …, d_m, K2)` with
/// `K2 = K − K1 + 1` and `out[k1, …, k2] = in[k1 + k2, …]`.
pub fn spatial_smooth(t: &Tensor, k1: usize) -> Result<Tensor> {
    let k = t.dims()[0];
    if k1 == 0 || k1 > k {
        return Err(TensorError::SmoothingOutOfRange { k1, k });
    }
    let k2 = k - k1 + 1;
    let inner: usize = t.dims()[1..].iter().product();
    let mut dims = Vec::with_capacity(t.order() + 1);
    dims.push(k1);
    dims.extend_from_slice(&t.dims()[1..]);
    dims.push(k2);
    let mut data = Vec::with_capacity(k1 * inner * k2);
    for kk2 in 0..k2 {
        for m in 0..inner {
            for kk1 in 0..k1 {
                data.push(t.data()[(kk1 + kk2) + k * m]);
            }
        }
    }
    Tensor::new(dims, data)
}

/// Hadamard product of the factor Gram matrices `⊛_n A_nᴴ A_n`, skipping
/// `skip` if given.
pub fn gram_hadamard(factors: &[CMat], skip: Option<usize>) -> CMat {
    let r = factors[0].ncols();
    let mut g = CMat::from_element(r, r, C64::new(1.0, 0.0));
    for (n, f) in factors.iter().enumerate() {
        if Some(n) == skip {
            continue;
        }
        g.component_mul_assign(&(f.adjoint() * f));
    }
    g
}

/// `(⊙ factors)ᴴ vec(T)` computed without forming the Khatri-Rao product.
pub fn kr_adjoint_apply(t: &Tensor, factors: &[CMat]) -> Result<CVec> {
    let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    if dims != t.dims() {
        return Err(TensorError::ShapeMismatch(dims, t.dims().to_vec()));
    }
    let r = factors[0].ncols();
    let mut out = CVec::zeros(r);
    // Contract modes from the slowest (last) to the fastest.
    for c in 0..r {
        let mut cur: Vec<C64> = t.data().to_vec();
        for n in (0..factors.len()).rev() {
            let dn = dims[n];
            let left = cur.len() / dn;
            let mut next = vec![C64::new(0.0, 0.0); left];
            for i in 0..dn {
                let a = factors[n][(i, c)].conj();
                let slice = &cur[i * left..(i + 1) * left];
                for (o, v) in next.iter_mut().zip(slice) {
                    *o += a * v;
                }
            }
            cur = next;
        }
        out[c] = cur[0];
    }
    Ok(out)
}

/// Least-squares CP weights for fixed factors:
/// `w = (⊛ A_nᴴA_n)^† (⊙ A_n)ᴴ vec(T)`.
///
/// Fails if the Gram Hadamard product has rank below `R` at relative
/// tolerance `rcond`.
pub fn fit_weights(t: &Tensor, factors: &[CMat], rcond: f64) -> Result<CVec> {
    let gram = gram_hadamard(factors, None);
    let (inv, rank) = pinv(&gram, rcond);
    if rank < gram.nrows() {
        return Err(TensorError::SingularGram { rank, needed: gram.nrows() });
    }
    Ok(inv * kr_adjoint_apply(t, factors)?)
}
