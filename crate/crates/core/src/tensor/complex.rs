use super::{outer_inner, Tensor};
use crate::error::{Error, Result};
use crate::fft::FftPlan;

/// Split-storage complex tensor: separate real and imaginary buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexTensor {
    pub fn new(shape: impl Into<Vec<usize>>, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        let numel: usize = shape.iter().product();
        if shape.contains(&0) || re.len() != numel || im.len() != numel {
            return Err(Error::arg(format!(
                "complex tensor {shape:?} needs {numel} re/im values, got {}/{}",
                re.len(),
                im.len()
            )));
        }
        Ok(ComplexTensor { shape, re, im })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        ComplexTensor {
            shape,
            re: vec![0.0; n],
            im: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.re.len()
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.re, &mut self.im)
    }

    /// Packs into a real tensor with a new leading axis of size 2 (re, im).
    pub fn to_channels(&self) -> Tensor {
        let mut shape = vec![2];
        shape.extend_from_slice(&self.shape);
        let mut data = Vec::with_capacity(2 * self.numel());
        data.extend_from_slice(&self.re);
        data.extend_from_slice(&self.im);
        Tensor::new(shape, data).expect("shape consistent by construction")
    }

    /// Inverse of [`ComplexTensor::to_channels`].
    pub fn from_channels(t: &Tensor) -> Result<Self> {
        if t.rank() < 1 || t.dim(0) != 2 {
            return Err(Error::Dimension {
                op: "from_channels",
                axis: 0,
                expected: 2,
                got: t.shape().first().copied().unwrap_or(0),
            });
        }
        let half = t.numel() / 2;
        let shape = t.shape()[1..].to_vec();
        let shape = if shape.is_empty() { vec![1] } else { shape };
        ComplexTensor::new(shape, t.data()[..half].to_vec(), t.data()[half..].to_vec())
    }

    /// Unnormalized forward DFT along `axis`:
    /// `X[f] = sum_m x[m] * exp(-2 pi i f m / len)`.
    pub fn fft_1d(&self, axis: usize) -> Result<ComplexTensor> {
        self.transform(axis, false)
    }

    /// Unnormalized inverse DFT (positive exponent, no `1/len` factor).
    pub fn ifft_1d_unnormalized(&self, axis: usize) -> Result<ComplexTensor> {
        self.transform(axis, true)
    }

    fn transform(&self, axis: usize, inverse: bool) -> Result<ComplexTensor> {
        if axis >= self.shape.len() {
            return Err(Error::arg(format!(
                "fft axis {axis} out of range for shape {:?}",
                self.shape
            )));
        }
        let len = self.shape[axis];
        let (outer, inner) = outer_inner(&self.shape, axis);
        let plan = FftPlan::new(len);
        let mut out = ComplexTensor::zeros(self.shape.clone());
        let mut line_re = vec![0.0; len];
        let mut line_im = vec![0.0; len];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                for k in 0..len {
                    line_re[k] = self.re[base + k * inner];
                    // Inverse via conjugation: ifft(x) = conj(fft(conj(x))).
                    line_im[k] = if inverse {
                        -self.im[base + k * inner]
                    } else {
                        self.im[base + k * inner]
                    };
                }
                plan.forward(&mut line_re, &mut line_im);
                for k in 0..len {
                    out.re[base + k * inner] = line_re[k];
                    out.im[base + k * inner] = if inverse { -line_im[k] } else { line_im[k] };
                }
            }
        }
        Ok(out)
    }

    /// Elementwise magnitude `sqrt(re^2 + im^2)`.
    pub fn abs(&self) -> Tensor {
        let data = self.re.iter().zip(&self.im).map(|(r, i)| r.hypot(*i)).collect();
        Tensor::new(self.shape.clone(), data).expect("shape consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_goes_to_dc() {
        let x = ComplexTensor::new(vec![4], vec![1.0; 4], vec![0.0; 4]).unwrap();
        let y = x.fft_1d(0).unwrap();
        assert_eq!(y.re(), &[4.0, 0.0, 0.0, 0.0]);
        assert!(y.im().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn delta_goes_flat() {
        let x = ComplexTensor::new(vec![4], vec![1.0, 0.0, 0.0, 0.0], vec![0.0; 4]).unwrap();
        let y = x.fft_1d(0).unwrap();
        assert_eq!(y.re(), &[1.0; 4]);
    }

    #[test]
    fn inverse_roundtrip_scales_by_length() {
        let re: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let im: Vec<f64> = (0..12).map(|i| (i as f64 * 0.3).cos()).collect();
        let x = ComplexTensor::new(vec![3, 4], re, im).unwrap();
        let back = x.fft_1d(0).unwrap().ifft_1d_unnormalized(0).unwrap();
        for (a, b) in back.re().iter().zip(x.re()) {
            assert!((a / 3.0 - b).abs() < 1e-12);
        }
        for (a, b) in back.im().iter().zip(x.im()) {
            assert!((a / 3.0 - b).abs() < 1e-12);
        }
    }

    #[test]
    fn channels_roundtrip() {
        let x = ComplexTensor::new(vec![2, 2], vec![1., 2., 3., 4.], vec![5., 6., 7., 8.]).unwrap();
        let t = x.to_channels();
        assert_eq!(t.shape(), &[2, 2, 2]);
        assert_eq!(ComplexTensor::from_channels(&t).unwrap(), x);
    }
}
