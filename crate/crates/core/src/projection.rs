//! Euclidean projection onto `{x : Φx = y}`.
//!
//! `Φ = [Diag(vec M₁), …, Diag(vec M_T)]`, so `ΦΦᵀ = Diag(q)` with `q = Σ_t M_t²` and
//! the projection `x = v + Φᵀ(ΦΦᵀ)⁻¹(y − Φv)` is a per-pixel update. Pixels with
//! `q ≤ ε` are left untouched (pseudo-inverse convention). Nothing is clipped here.

use crate::error::{dim_err, Result, VcsError};
use crate::kernels::{Real, Tensor};
use crate::sensing::{check_mask_dims, ColorSpace, MaskCube, Measurement, VideoCube, COVERAGE_EPS};

/// Largest `W·H·T` [`dense_phi`] will materialize.
pub const DENSE_PHI_LIMIT: usize = 1 << 16;

/// Diagonal of `ΦΦᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QDiagonal {
    pub width: usize,
    pub height: usize,
    pub q: Vec<f64>,
}

pub fn q_diagonal(m: &MaskCube) -> QDiagonal {
    let mut q = vec![0.0; m.pixels()];
    for t in 0..m.frames() {
        for (acc, &v) in q.iter_mut().zip(m.frame(t)) {
            *acc += v * v;
        }
    }
    QDiagonal { width: m.width(), height: m.height(), q }
}

/// In-place projection of `frames` stacked planes `v` (`frames × pixels`).
pub(crate) fn project_planes<T: Real>(v: &mut [T], y: &[T], m: &[T], q: &[T]) {
    let p = y.len();
    let eps = T::from_f64_lossy(COVERAGE_EPS);
    let mut r = y.to_vec();
    for (vt, mt) in v.chunks(p).zip(m.chunks(p)) {
        for ((ri, &vi), &mi) in r.iter_mut().zip(vt).zip(mt) {
            *ri = *ri - mi * vi;
        }
    }
    for (ri, &qi) in r.iter_mut().zip(q) {
        *ri = if qi > eps { *ri / qi } else { T::zero() };
    }
    for (vt, mt) in v.chunks_mut(p).zip(m.chunks(p)) {
        for ((vi, &mi), &ri) in vt.iter_mut().zip(mt).zip(&r) {
            *vi = *vi + mi * ri;
        }
    }
}

/// Vector-Jacobian product of the projection (it is self-adjoint):
/// `g_t ← g_t − m_t · (Σ_s m_s g_s) / q`.
pub(crate) fn project_planes_vjp<T: Real>(g: &mut [T], m: &[T], q: &[T]) {
    let p = q.len();
    let eps = T::from_f64_lossy(COVERAGE_EPS);
    let mut s = vec![T::zero(); p];
    for (gt, mt) in g.chunks(p).zip(m.chunks(p)) {
        for ((si, &gi), &mi) in s.iter_mut().zip(gt).zip(mt) {
            *si = *si + mi * gi;
        }
    }
    for (si, &qi) in s.iter_mut().zip(q) {
        *si = if qi > eps { *si / qi } else { T::zero() };
    }
    for (gt, mt) in g.chunks_mut(p).zip(m.chunks(p)) {
        for ((gi, &mi), &si) in gt.iter_mut().zip(mt).zip(&s) {
            *gi = *gi - mi * si;
        }
    }
}

/// GAP projection of a grayscale estimate onto the measurement-consistent set.
pub fn gap_project(v: &VideoCube, y: &Measurement, m: &MaskCube) -> Result<VideoCube> {
    if v.colorspace() != ColorSpace::Gray {
        return Err(dim_err!("gap_project works on single-channel cubes"));
    }
    check_mask_dims("estimate", v.width(), v.height(), Some(v.frames()), m)?;
    check_mask_dims("measurement", y.width(), y.height(), None, m)?;
    let q = q_diagonal(m);
    let mut out = v.clone();
    project_planes(out.data_mut(), y.data(), m.data(), &q.q);
    Ok(out)
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data.chunks(self.cols).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Explicit `WH × WHT` sensing matrix, columns ordered frame-major then row-major
/// over `(row, col)`; meant for verification on small problems.
pub fn dense_phi(m: &MaskCube) -> Result<DenseMatrix> {
    let p = m.pixels();
    let n = p * m.frames();
    if n > DENSE_PHI_LIMIT {
        return Err(VcsError::Capacity(format!("dense Φ for W·H·T = {n} exceeds the limit {DENSE_PHI_LIMIT}")));
    }
    let mut data = vec![0.0; p * n];
    for t in 0..m.frames() {
        for (i, &v) in m.frame(t).iter().enumerate() {
            data[i * n + t * p + i] = v;
        }
    }
    Ok(DenseMatrix { rows: p, cols: n, data })
}

/// Masks, `q`, and measurements for a batch, in network layout.
#[derive(Clone, Debug)]
pub struct BatchSensing<T: Real> {
    /// `[B, 1, T, H, W]`
    pub masks: Tensor<T>,
    /// `[B, 1, 1, H, W]`
    pub q: Tensor<T>,
    /// `[B, 1, 1, H, W]`
    pub y: Tensor<T>,
}

impl<T: Real> BatchSensing<T> {
    pub fn new(items: &[(&Measurement, &MaskCube)]) -> Result<Self> {
        let (_, m0) = items.first().ok_or_else(|| dim_err!("empty sensing batch"))?;
        let (t, h, w) = (m0.frames(), m0.height(), m0.width());
        let b = items.len();
        let mut masks = Vec::with_capacity(b * t * h * w);
        let mut q = Vec::with_capacity(b * h * w);
        let mut y = Vec::with_capacity(b * h * w);
        for (meas, m) in items {
            if (m.frames(), m.height(), m.width()) != (t, h, w) {
                return Err(dim_err!("all masks in a batch must share dimensions"));
            }
            check_mask_dims("measurement", meas.width(), meas.height(), None, m)?;
            masks.extend(m.data().iter().map(|&v| T::from_f64_lossy(v)));
            q.extend(q_diagonal(m).q.into_iter().map(T::from_f64_lossy));
            y.extend(meas.data().iter().map(|&v| T::from_f64_lossy(v)));
        }
        Ok(BatchSensing {
            masks: Tensor::from_vec(vec![b, 1, t, h, w], masks)?,
            q: Tensor::from_vec(vec![b, 1, 1, h, w], q)?,
            y: Tensor::from_vec(vec![b, 1, 1, h, w], y)?,
        })
    }

    pub fn batch(&self) -> usize {
        self.masks.shape()[0]
    }

    fn check(&self, v: &Tensor<T>) -> Result<()> {
        if v.shape() != self.masks.shape() {
            return Err(dim_err!("projection input {:?} does not match masks {:?}", v.shape(), self.masks.shape()));
        }
        Ok(())
    }

    pub fn project(&self, v: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(v)?;
        let mut out = v.clone();
        let b = self.batch();
        let n = v.len() / b;
        let p = self.q.len() / b;
        for i in 0..b {
            project_planes(
                &mut out.data_mut()[i * n..(i + 1) * n],
                &self.y.data()[i * p..(i + 1) * p],
                &self.masks.data()[i * n..(i + 1) * n],
                &self.q.data()[i * p..(i + 1) * p],
            );
        }
        Ok(out)
    }

    pub fn project_vjp(&self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(grad)?;
        let mut out = grad.clone();
        let b = self.batch();
        let n = grad.len() / b;
        let p = self.q.len() / b;
        for i in 0..b {
            project_planes_vjp(
                &mut out.data_mut()[i * n..(i + 1) * n],
                &self.masks.data()[i * n..(i + 1) * n],
                &self.q.data()[i * p..(i + 1) * p],
            );
        }
        Ok(out)
    }

    /// `Ȳ ⊙ M` per batch item, `[B, 1, T, H, W]`.
    pub fn reference_frames(&self) -> Tensor<T> {
        let b = self.batch();
        let n = self.masks.len() / b;
        let p = self.q.len() / b;
        let eps = T::from_f64_lossy(COVERAGE_EPS);
        let mut out = self.masks.clone();
        for i in 0..b {
            let mslice = &self.masks.data()[i * n..(i + 1) * n];
            let mut cover = vec![T::zero(); p];
            for mt in mslice.chunks(p) {
                for (c, &v) in cover.iter_mut().zip(mt) {
                    *c = *c + v;
                }
            }
            let ybar: Vec<T> = self.y.data()[i * p..(i + 1) * p]
                .iter()
                .zip(&cover)
                .map(|(&y, &c)| if c > eps { y / c } else { T::zero() })
                .collect();
            for plane in out.data_mut()[i * n..(i + 1) * n].chunks_mut(p) {
                for (v, &yb) in plane.iter_mut().zip(&ybar) {
                    *v = *v * yb;
                }
            }
        }
        out
    }
}
