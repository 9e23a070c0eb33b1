//! Degradation of high-resolution cubes and the LR pre-processing chain.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::radar::ComplexCube;
use crate::tensor::{ComplexTensor, Tensor};

pub const DEFAULT_NOISE_SIGMA_REL: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegradeSpec {
    /// Slow-time (pulse) decimation factor.
    pub ds: usize,
    /// Fast-time (range) decimation factor.
    pub df: usize,
    /// Complex noise std relative to the cube RMS.
    pub noise_sigma_rel: f64,
}

impl DegradeSpec {
    pub fn uniform(d: usize) -> Self {
        DegradeSpec {
            ds: d,
            df: d,
            noise_sigma_rel: DEFAULT_NOISE_SIGMA_REL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ds == 0 || self.df == 0 {
            return Err(Error::config(format!(
                "down-sampling factors must be at least 1, got ds={} df={}",
                self.ds, self.df
            )));
        }
        if !(self.noise_sigma_rel.is_finite() && self.noise_sigma_rel >= 0.0) {
            return Err(Error::config(format!(
                "noise must be non-negative, got {}",
                self.noise_sigma_rel
            )));
        }
        Ok(())
    }
}

/// Keeps every `ds`-th pulse and `df`-th sample; remainders are dropped.
pub fn downsample(cube: &ComplexCube, ds: usize, df: usize) -> Result<ComplexCube> {
    let (k, m, n) = cube.dims();
    if ds == 0 || ds > m {
        return Err(Error::arg(format!("slow-time factor {ds} invalid for {m} pulses")));
    }
    if df == 0 || df > n {
        return Err(Error::arg(format!("fast-time factor {df} invalid for {n} samples")));
    }
    let (mo, no) = (m / ds, n / df);
    let mut re = Vec::with_capacity(k * mo * no);
    let mut im = Vec::with_capacity(k * mo * no);
    for f in 0..k {
        for p in 0..mo {
            for s in 0..no {
                let (a, b) = cube.get(f, p * ds, s * df);
                re.push(a);
                im.push(b);
            }
        }
    }
    ComplexCube::new(k, mo, no, re, im)
}

/// Root mean square of the complex magnitudes.
pub fn rms(cube: &ComplexCube) -> f64 {
    let power: f64 = cube.re().iter().chain(cube.im()).map(|v| v * v).sum();
    (power / cube.len() as f64).sqrt()
}

/// Adds independent Gaussian noise with std `sigma_rel * rms(cube)` to both parts.
pub fn add_complex_noise<R: Rng + ?Sized>(cube: &ComplexCube, sigma_rel: f64, rng: &mut R) -> Result<ComplexCube> {
    if !(sigma_rel.is_finite() && sigma_rel >= 0.0) {
        return Err(Error::arg(format!("noise sigma must be non-negative, got {sigma_rel}")));
    }
    let sigma = sigma_rel * rms(cube);
    let mut out = cube.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::arg(e.to_string()))?;
    let (re, im) = out.parts_mut();
    for (a, b) in re.iter_mut().zip(im.iter_mut()) {
        *a += normal.sample(rng);
        *b += normal.sample(rng);
    }
    Ok(out)
}

/// Decimation followed by additive noise.
pub fn degrade<R: Rng + ?Sized>(cube: &ComplexCube, spec: &DegradeSpec, rng: &mut R) -> Result<ComplexCube> {
    spec.validate()?;
    let low = downsample(cube, spec.ds, spec.df)?;
    add_complex_noise(&low, spec.noise_sigma_rel, rng)
}

/// Affine map `x -> (x - offset) / scale` shared by real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormTransform {
    pub offset: f64,
    pub scale: f64,
}

impl NormTransform {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * self.scale + self.offset
    }

    pub fn invert_cube(&self, cube: &ComplexCube) -> ComplexCube {
        map_cube(cube, |v| self.invert(v))
    }
}

fn map_cube(cube: &ComplexCube, f: impl Fn(f64) -> f64) -> ComplexCube {
    let mut out = cube.clone();
    let (re, im) = out.parts_mut();
    re.iter_mut().chain(im.iter_mut()).for_each(|v| *v = f(*v));
    out
}

/// Min-max normalisation over both parts. A constant cube maps to 0.5 with unit scale.
pub fn normalize01(cube: &ComplexCube) -> (ComplexCube, NormTransform) {
    let (lo, hi) = cube
        .re()
        .iter()
        .chain(cube.im())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let t = if hi > lo {
        NormTransform {
            offset: lo,
            scale: hi - lo,
        }
    } else {
        NormTransform {
            offset: lo - 0.5,
            scale: 1.0,
        }
    };
    (map_cube(cube, |v| t.apply(v).clamp(0.0, 1.0)), t)
}

/// `(K, M, N)` complex -> `(2, K, M, N)` real with channel 0 = re, 1 = im.
pub fn complex_to_channels(cube: &ComplexCube) -> Tensor {
    cube.as_tensor().to_channels()
}

pub fn channels_to_complex(t: &Tensor) -> Result<ComplexCube> {
    ComplexCube::from_tensor(ComplexTensor::from_channels(t)?)
}

/// Catmull-Rom weights for fractional offset `t` in [0, 1).
fn catmull_rom(t: f64) -> [f64; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Interpolates `len` samples spaced `stride` apart in `src` to `len * factor` outputs.
fn upsample_line(src: &[f64], stride: usize, len: usize, factor: usize, dst: &mut [f64], dst_stride: usize) {
    let last = len as isize - 1;
    for o in 0..len * factor {
        let i = o / factor;
        let w = catmull_rom((o % factor) as f64 / factor as f64);
        let mut acc = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let idx = (i as isize + j as isize - 1).clamp(0, last) as usize;
            acc += wj * src[idx * stride];
        }
        dst[o * dst_stride] = acc;
    }
}

/// Separable bicubic (Catmull-Rom) interpolation of each frame, edge-clamped.
pub fn cubic_upsample(cube: &ComplexCube, ds: usize, df: usize) -> Result<ComplexCube> {
    let (k, m, n) = cube.dims();
    if ds == 0 || df == 0 {
        return Err(Error::arg(format!(
            "upsampling factors must be at least 1, got {ds}x{df}"
        )));
    }
    if (ds > 1 && m < 2) || (df > 1 && n < 2) {
        return Err(Error::arg(format!(
            "cubic interpolation needs axes of length 2, got {m}x{n}"
        )));
    }
    let (mo, no) = (m * ds, n * df);
    let mut re = vec![0.0; k * mo * no];
    let mut im = vec![0.0; k * mo * no];
    let mut wide = vec![0.0; m * no];
    for (src, dst) in [(cube.re(), &mut re), (cube.im(), &mut im)] {
        for f in 0..k {
            let frame = &src[f * m * n..(f + 1) * m * n];
            for p in 0..m {
                upsample_line(&frame[p * n..], 1, n, df, &mut wide[p * no..], 1);
            }
            let out = &mut dst[f * mo * no..(f + 1) * mo * no];
            for s in 0..no {
                upsample_line(&wide[s..], no, m, ds, &mut out[s..], no);
            }
        }
    }
    ComplexCube::new(k, mo, no, re, im)
}
