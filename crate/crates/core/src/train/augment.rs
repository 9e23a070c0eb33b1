use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Number of patches masked out of `total` at `percent`.
pub fn masked_count(total: usize, percent: f64) -> usize {
    (percent / 100.0 * total as f64).round() as usize
}

/// Patch grid `(rows, cols)` covering an `h x w` plane; edge patches may be partial.
pub fn patch_grid(h: usize, w: usize, patch: usize) -> (usize, usize) {
    (h.div_ceil(patch), w.div_ceil(patch))
}

/// Picks the patch indices to zero, uniformly without replacement.
pub fn sample_masked_patches<R: Rng + ?Sized>(total: usize, percent: f64, rng: &mut R) -> Vec<usize> {
    let k = masked_count(total, percent);
    if k == 0 {
        return Vec::new();
    }
    let mut idx = rand::seq::index::sample(rng, total, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Zeroes `percent`% of the `patch x patch` tiles of the trailing two axes.
/// Every leading index shares one mask.
pub fn patch_mask_augment<R: Rng + ?Sized>(x: &Tensor, percent: f64, patch: usize, rng: &mut R) -> Result<Tensor> {
    if !(0.0..100.0).contains(&percent) {
        return Err(Error::arg(format!("mask ratio must be in [0, 100), got {percent}")));
    }
    if patch == 0 || x.rank() < 2 {
        return Err(Error::arg("patch masking needs a positive patch size and a 2-D plane"));
    }
    let r = x.rank();
    let (h, w) = (x.dim(r - 2), x.dim(r - 1));
    let (gh, gw) = patch_grid(h, w, patch);
    let masked = sample_masked_patches(gh * gw, percent, rng);
    let mut out = x.clone();
    if masked.is_empty() {
        return Ok(out);
    }
    let plane = h * w;
    for img in out.data_mut().chunks_mut(plane) {
        zero_patches(img, h, w, patch, &masked);
    }
    Ok(out)
}

fn zero_patches(img: &mut [f64], h: usize, w: usize, patch: usize, masked: &[usize]) {
    let gw = w.div_ceil(patch);
    for &idx in masked {
        let (py, px) = (idx / gw * patch, idx % gw * patch);
        for y in py..(py + patch).min(h) {
            img[y * w + px..y * w + (px + patch).min(w)].fill(0.0);
        }
    }
}

/// Masks a recording `[C, F, H, W]` with an independent draw per frame, shared across channels.
pub fn mask_frames<R: Rng + ?Sized>(x: &Tensor, percent: f64, patch: usize, rng: &mut R) -> Result<Tensor> {
    if x.rank() != 4 {
        return Err(Error::Rank {
            op: "mask_frames",
            expected: 4,
            got: x.shape().to_vec(),
        });
    }
    if !(0.0..100.0).contains(&percent) || patch == 0 {
        return Err(Error::arg(format!(
            "invalid mask ratio {percent} or patch size {patch}"
        )));
    }
    let (c, f, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let (gh, gw) = patch_grid(h, w, patch);
    let mut out = x.clone();
    let data = out.data_mut();
    for frame in 0..f {
        let masked = sample_masked_patches(gh * gw, percent, rng);
        for ch in 0..c {
            let start = (ch * f + frame) * h * w;
            zero_patches(&mut data[start..start + h * w], h, w, patch, &masked);
        }
    }
    Ok(out)
}
