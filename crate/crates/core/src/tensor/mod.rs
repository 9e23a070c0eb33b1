//! Dense row-major tensors.
//!
//! [`Tensor`] is a plain value: a shape and a flat `f64` buffer. Gradient
//! tracking lives in [`crate::autodiff`], which records operations on
//! tensors and owns the gradient buffers.

mod complex;

pub use complex::ComplexTensor;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if shape.contains(&0) {
            return Err(Error::arg(format!("zero-sized dimension in shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::arg(format!(
                "shape {shape:?} holds {numel} elements, data has {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Self {
        let shape = shape.into();
        assert!(shape.iter().all(|&d| d > 0), "zero-sized dimension");
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; numel],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_fn(shape: impl Into<Vec<usize>>, mut f: impl FnMut(usize) -> f64) -> Self {
        let shape = shape.into();
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: (0..numel).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::arg(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reorders axes; `perm[i]` names the source axis of output axis `i`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::arg(format!("invalid permutation {perm:?} for rank {rank}")));
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides = strides(&self.shape);
        let perm_strides: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let mut data = Vec::with_capacity(self.numel());
        let mut index = vec![0usize; rank];
        for _ in 0..self.numel() {
            let offset: usize = index.iter().zip(&perm_strides).map(|(i, s)| i * s).sum();
            data.push(self.data[offset]);
            for axis in (0..rank).rev() {
                index[axis] += 1;
                if index[axis] < out_shape[axis] {
                    break;
                }
                index[axis] = 0;
            }
        }
        Ok(Tensor { shape: out_shape, data })
    }

    /// Contiguous sub-range `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        if axis >= self.rank() {
            return Err(Error::arg(format!("axis {axis} out of range for {:?}", self.shape)));
        }
        if len == 0 || start + len > self.shape[axis] {
            return Err(Error::arg(format!(
                "narrow [{start}, {}) out of bounds for axis {axis} of extent {}",
                start + len,
                self.shape[axis]
            )));
        }
        let (outer, inner) = outer_inner(&self.shape, axis);
        let extent = self.shape[axis];
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * extent + start) * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        let mut shape = self.shape.clone();
        shape[axis] = len;
        Ok(Tensor { shape, data })
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| Error::arg("concat of zero tensors"))?;
        if axis >= first.rank() {
            return Err(Error::arg(format!("axis {axis} out of range for {:?}", first.shape)));
        }
        for p in parts {
            if p.rank() != first.rank() {
                return Err(Error::Rank {
                    op: "concat",
                    expected: first.rank(),
                    got: p.shape.clone(),
                });
            }
            for (ax, (&a, &b)) in first.shape.iter().zip(&p.shape).enumerate() {
                if ax != axis && a != b {
                    return Err(Error::Dimension {
                        op: "concat",
                        axis: ax,
                        expected: a,
                        got: b,
                    });
                }
            }
        }
        let (outer, inner) = outer_inner(&first.shape, axis);
        let total: usize = parts.iter().map(|p| p.shape[axis]).sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let chunk = p.shape[axis] * inner;
                data.extend_from_slice(&p.data[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first.shape.clone();
        shape[axis] = total;
        Ok(Tensor { shape, data })
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Row-major strides for `shape`.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Products of the extents before and after `axis`.
pub(crate) fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, inner)
}

/// Inverse of pixel shuffle: `[N, C, H*ds, W*df] -> [N, C*ds*df, H, W]`.
pub fn pixel_unshuffle(x: &Tensor, ds: usize, df: usize) -> Result<Tensor> {
    if x.rank() != 4 {
        return Err(Error::Rank {
            op: "pixel_unshuffle",
            expected: 4,
            got: x.shape.clone(),
        });
    }
    let [n, c, hh, ww] = [x.shape[0], x.shape[1], x.shape[2], x.shape[3]];
    if ds == 0 || df == 0 || hh % ds != 0 || ww % df != 0 {
        return Err(Error::arg(format!(
            "pixel_unshuffle factors ({ds}, {df}) do not divide spatial dims ({hh}, {ww})"
        )));
    }
    let (h, w) = (hh / ds, ww / df);
    let oc = c * ds * df;
    let mut out = vec![0.0; x.numel()];
    for b in 0..n {
        for ch in 0..c {
            for i in 0..ds {
                for j in 0..df {
                    let o_ch = ch * ds * df + i * df + j;
                    for y in 0..h {
                        for xw in 0..w {
                            let src = ((b * c + ch) * hh + y * ds + i) * ww + xw * df + j;
                            out[((b * oc + o_ch) * h + y) * w + xw] = x.data[src];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, oc, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_data() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn permute_transposes_matrix() {
        let t = Tensor::new(vec![2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let p = t.permute(&[1, 0]).unwrap();
        assert_eq!(p.shape(), &[3, 2]);
        assert_eq!(p.data(), &[1., 4., 2., 5., 3., 6.]);
        assert!(t.permute(&[0, 0]).is_err());
    }

    #[test]
    fn narrow_and_concat_are_inverse() {
        let t = Tensor::from_fn(vec![2, 4, 3], |i| i as f64);
        let a = t.narrow(1, 0, 1).unwrap();
        let b = t.narrow(1, 1, 3).unwrap();
        assert_eq!(Tensor::concat(&[&a, &b], 1).unwrap(), t);
    }
}
