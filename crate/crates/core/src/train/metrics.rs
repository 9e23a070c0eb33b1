//! Image-quality metrics on normalised SR outputs.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn check_same(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::arg(format!(
            "{op}: shape mismatch {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    check_same("mse", a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.numel() as f64)
}

pub fn l1(a: &Tensor, b: &Tensor) -> Result<f64> {
    check_same("l1", a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    Ok(s / a.numel() as f64)
}

/// Peak signal-to-noise ratio in dB; identical inputs give `+inf`.
pub fn psnr(sr: &Tensor, hr: &Tensor, max_val: f64) -> Result<f64> {
    let e = mse(sr, hr)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / e).log10())
}

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable valid-mode Gaussian filter of an `h x w` image.
fn blur(img: &[f64], h: usize, w: usize, g: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = g.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = g.iter().enumerate().map(|(i, gi)| gi * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = g.iter().enumerate().map(|(i, gi)| gi * rows[(y + i) * ow + x]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean SSIM and mean contrast-structure term of one image pair.
fn ssim_cs(a: &[f64], b: &[f64], h: usize, w: usize, data_range: f64) -> (f64, f64) {
    let g = gaussian_window();
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let prod = |f: &dyn Fn(f64, f64) -> f64| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>();
    let (mu1, _, _) = blur(a, h, w, &g);
    let (mu2, _, _) = blur(b, h, w, &g);
    let (s11, _, _) = blur(&prod(&|x, _| x * x), h, w, &g);
    let (s22, _, _) = blur(&prod(&|_, y| y * y), h, w, &g);
    let (s12, _, _) = blur(&prod(&|x, y| x * y), h, w, &g);
    let n = mu1.len() as f64;
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..mu1.len() {
        let (m1, m2) = (mu1[i], mu2[i]);
        let v1 = s11[i] - m1 * m1;
        let v2 = s22[i] - m2 * m2;
        let v12 = s12[i] - m1 * m2;
        let c = (2.0 * v12 + c2) / (v1 + v2 + c2);
        cs += c;
        ssim += (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1) * c;
    }
    (ssim / n, cs / n)
}

fn avg_pool2(img: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out.push(0.25 * (img[i] + img[i + 1] + img[i + w] + img[i + w + 1]));
        }
    }
    (out, oh, ow)
}

/// Number of scales usable for an `h x w` image (at most five).
pub fn ms_ssim_scales(h: usize, w: usize) -> usize {
    let side = h.min(w);
    (1..=MS_SSIM_WEIGHTS.len())
        .take_while(|&s| side >= SSIM_WINDOW << (s - 1))
        .last()
        .unwrap_or(0)
}

/// Multi-scale SSIM of a single `h x w` image pair.
pub fn ms_ssim_image(a: &[f64], b: &[f64], h: usize, w: usize, data_range: f64) -> Result<f64> {
    let scales = ms_ssim_scales(h, w);
    if scales == 0 {
        return Err(Error::arg(format!(
            "ms_ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let total: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();
    let (mut x, mut y, mut hh, mut ww) = (a.to_vec(), b.to_vec(), h, w);
    let mut value = 1.0;
    for (s, weight) in MS_SSIM_WEIGHTS[..scales].iter().enumerate() {
        let (ssim, cs) = ssim_cs(&x, &y, hh, ww, data_range);
        let term = if s + 1 == scales { ssim } else { cs };
        value *= term.max(0.0).powf(weight / total);
        if s + 1 < scales {
            let (nx, nh, nw) = avg_pool2(&x, hh, ww);
            y = avg_pool2(&y, hh, ww).0;
            x = nx;
            hh = nh;
            ww = nw;
        }
    }
    Ok(value)
}

/// MS-SSIM averaged over every `H x W` plane of two equally shaped tensors.
pub fn ms_ssim(sr: &Tensor, hr: &Tensor) -> Result<f64> {
    check_same("ms_ssim", sr, hr)?;
    if sr.rank() < 2 {
        return Err(Error::arg("ms_ssim needs at least two dimensions"));
    }
    let r = sr.rank();
    let (h, w) = (sr.dim(r - 2), sr.dim(r - 1));
    let planes = sr.numel() / (h * w);
    let mut acc = 0.0;
    for p in 0..planes {
        let range = p * h * w..(p + 1) * h * w;
        acc += ms_ssim_image(&sr.data()[range.clone()], &hr.data()[range], h, w, 1.0)?;
    }
    Ok(acc / planes as f64)
}
