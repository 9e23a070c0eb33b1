use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lowres::{complex_to_channels, cubic_upsample, degrade, normalize01, DegradeSpec};
use crate::radar::ComplexCube;
use crate::tensor::Tensor;

/// RNG streams derived from a run seed.
pub(crate) mod stream {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const MASK: u64 = 4;
    pub const CLASSIFIER_INIT: u64 = 5;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Noise stream for record `index` degraded by `(ds, df)`.
pub fn noise_rng(seed: u64, ds: usize, df: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_6500_0000);
    rng.set_stream(((ds as u64) << 48) | ((df as u64) << 32) | index as u64);
    rng
}

/// Normalised `[2, K, M, N]` channels of a cube.
pub fn normalized_channels(cube: &ComplexCube) -> Tensor {
    complex_to_channels(&normalize01(cube).0)
}

/// Degrades record `index`, then normalises it with its own transform.
pub fn prepare_lr(cube: &ComplexCube, spec: &DegradeSpec, seed: u64, index: usize) -> Result<Tensor> {
    let mut rng = noise_rng(seed, spec.ds, spec.df, index);
    Ok(normalized_channels(&degrade(cube, spec, &mut rng)?))
}

/// Seeded partition into (train, validation) index lists.
pub fn split_indices(n: usize, seed: u64, val_fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = (n as f64 * val_fraction).round() as usize;
    if n < 2 || n_val == 0 || n_val >= n {
        return Err(Error::arg(format!(
            "cannot split {n} records with validation fraction {val_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed, stream::SPLIT));
    let val = idx.split_off(n - n_val);
    Ok((idx, val))
}

/// `[2, K, h, w]` recordings to a frame batch `[B * K, 2, h, w]`.
pub fn stack_frames(parts: &[&Tensor]) -> Result<Tensor> {
    let permuted = parts
        .iter()
        .map(|t| t.permute(&[1, 0, 2, 3]))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Tensor> = permuted.iter().collect();
    Tensor::concat(&refs, 0)
}

/// Keeps the leading `h x w` corner of the trailing two axes.
pub fn crop_to(t: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let r = t.rank();
    if t.dim(r - 2) == h && t.dim(r - 1) == w {
        return Ok(t.clone());
    }
    t.narrow(r - 2, 0, h)?.narrow(r - 1, 0, w)
}

/// Normalised HR targets and LR inputs for every factor a run needs.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub hr: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub lr: BTreeMap<(usize, usize), Vec<Tensor>>,
}

impl Prepared {
    pub fn new(
        data: &[(ComplexCube, usize)],
        factors: &[(usize, usize)],
        noise_sigma_rel: f64,
        seed: u64,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::arg("dataset is empty"));
        }
        let hr = data.iter().map(|(c, _)| normalized_channels(c)).collect();
        let labels = data.iter().map(|&(_, l)| l).collect();
        let mut lr = BTreeMap::new();
        for &(ds, df) in factors {
            let spec = DegradeSpec {
                ds,
                df,
                noise_sigma_rel,
            };
            spec.validate()?;
            let set = data
                .iter()
                .enumerate()
                .map(|(i, (c, _))| prepare_lr(c, &spec, seed, i))
                .collect::<Result<Vec<_>>>()?;
            lr.insert((ds, df), set);
        }
        Ok(Prepared { hr, labels, lr })
    }

    /// Uses externally degraded cubes as the LR inputs for one factor.
    pub fn with_lr_cubes(
        hr: &[(ComplexCube, usize)],
        lr: &[(ComplexCube, usize)],
        factor: (usize, usize),
    ) -> Result<Self> {
        if hr.len() != lr.len() {
            return Err(Error::config(format!(
                "HR file has {} records but LR file has {}",
                hr.len(),
                lr.len()
            )));
        }
        for (i, ((h, hl), (l, ll))) in hr.iter().zip(lr).enumerate() {
            let (k, m, n) = h.dims();
            if hl != ll || l.dims() != (k, m / factor.0, n / factor.1) {
                return Err(Error::config(format!(
                    "LR record {i} ({:?}, label {ll}) does not match HR {:?} at factor {factor:?}",
                    l.dims(),
                    h.dims()
                )));
            }
        }
        let mut out = Prepared::new(hr, &[], 0.0, 0)?;
        out.lr
            .insert(factor, lr.iter().map(|(c, _)| normalized_channels(c)).collect());
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.hr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hr.is_empty()
    }

    pub fn lr_for(&self, factor: (usize, usize)) -> Result<&[Tensor]> {
        self.lr
            .get(&factor)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::State(format!("no LR data prepared for factor {factor:?}")))
    }

    /// Catmull-Rom upsampled LR inputs.
    pub fn cubic(&self, factor: (usize, usize)) -> Result<Vec<Tensor>> {
        self.lr_for(factor)?
            .iter()
            .map(|t| cubic_channels(t, factor.0, factor.1))
            .collect()
    }
}

pub fn cubic_channels(lr: &Tensor, ds: usize, df: usize) -> Result<Tensor> {
    let cube = crate::lowres::channels_to_complex(lr)?;
    Ok(complex_to_channels(&cubic_upsample(&cube, ds, df)?))
}
