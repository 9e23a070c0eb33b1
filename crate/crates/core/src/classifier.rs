//! Range-Doppler pre-processing and the CNN + TCN gesture classifier.

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::ops::conv::Conv2dOpts;
use crate::params::{Bound, ParamStore};
use crate::radar::ComplexCube;
use crate::safmn::conv;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub num_classes: usize,
    pub cnn_channels: [usize; 2],
    pub tcn_dim: usize,
    pub tcn_kernel: usize,
    pub dilations: Vec<usize>,
    pub hidden: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            num_classes: 12,
            cnn_channels: [8, 16],
            tcn_dim: 32,
            tcn_kernel: 3,
            dilations: vec![1, 2, 4],
            hidden: 64,
        }
    }
}

impl ClassifierConfig {
    pub fn with_classes(mut self, n: usize) -> Self {
        self.num_classes = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            )));
        }
        if self.cnn_channels.contains(&0) || self.tcn_dim == 0 || self.tcn_kernel == 0 || self.hidden == 0 {
            return Err(Error::config("classifier widths must be positive"));
        }
        let powers = self.dilations.iter().all(|d| d.is_power_of_two());
        let increasing = self.dilations.windows(2).all(|w| w[0] < w[1]);
        if self.dilations.is_empty() || !powers || !increasing {
            return Err(Error::config(format!(
                "dilations must be strictly increasing powers of two, got {:?}",
                self.dilations
            )));
        }
        Ok(())
    }

    /// Dilation actually used for a sequence of `frames` steps.
    pub fn effective_dilation(d: usize, frames: usize) -> usize {
        d.min(frames.saturating_sub(1).max(1))
    }

    pub fn param_count(&self) -> usize {
        let [c1, c2] = self.cnn_channels;
        let mut n = 9 * c1 + c1 + 9 * c1 * c2 + c2;
        let mut cin = c2;
        for _ in &self.dilations {
            n += self.tcn_kernel * cin * self.tcn_dim + self.tcn_dim;
            cin = self.tcn_dim;
        }
        n + self.tcn_dim * self.hidden + self.hidden + self.hidden * self.num_classes + self.num_classes
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub params: ParamStore,
}

impl Classifier {
    pub fn new<R: Rng + ?Sized>(config: ClassifierConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut p = ParamStore::new();
        let [c1, c2] = config.cnn_channels;
        p.insert_uniform("cnn1.weight", vec![c1, 1, 3, 3], 9, rng)?;
        p.insert_uniform("cnn1.bias", vec![c1], 9, rng)?;
        p.insert_uniform("cnn2.weight", vec![c2, c1, 3, 3], 9 * c1, rng)?;
        p.insert_uniform("cnn2.bias", vec![c2], 9 * c1, rng)?;
        let mut cin = c2;
        for i in 0..config.dilations.len() {
            let fan_in = cin * config.tcn_kernel;
            p.insert_uniform(
                format!("tcn{i}.weight"),
                vec![config.tcn_dim, cin, config.tcn_kernel],
                fan_in,
                rng,
            )?;
            p.insert_uniform(format!("tcn{i}.bias"), vec![config.tcn_dim], fan_in, rng)?;
            cin = config.tcn_dim;
        }
        p.insert_uniform("fc1.weight", vec![config.hidden, config.tcn_dim], config.tcn_dim, rng)?;
        p.insert_uniform("fc1.bias", vec![config.hidden], config.tcn_dim, rng)?;
        p.insert_uniform(
            "fc2.weight",
            vec![config.num_classes, config.hidden],
            config.hidden,
            rng,
        )?;
        p.insert_uniform("fc2.bias", vec![config.num_classes], config.hidden, rng)?;
        Ok(Classifier { config, params: p })
    }

    /// Logits `[batch, num_classes]` from maps `[batch * frames, 1, M, N]`, frame-minor.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, maps: Var, batch: usize) -> Result<Var> {
        let cfg = &self.config;
        let shape = tape.value(maps).shape().to_vec();
        if shape.len() != 4 || shape[1] != 1 {
            return Err(Error::Rank {
                op: "classifier",
                expected: 4,
                got: shape,
            });
        }
        let (h, w) = (shape[2], shape[3]);
        if h < 4 || w < 4 {
            return Err(Error::config(format!(
                "range-Doppler maps of {h}x{w} are too small for two 2x2 pools"
            )));
        }
        if batch == 0 || !shape[0].is_multiple_of(batch) {
            return Err(Error::arg(format!(
                "{} maps do not split into {batch} recordings",
                shape[0]
            )));
        }
        let frames = shape[0] / batch;
        let same = Conv2dOpts::same3x3();
        let x = conv(tape, bound, "cnn1", maps, same, true)?;
        let x = tape.gelu(x);
        let x = tape.adaptive_max_pool2d(x, h / 2, w / 2)?;
        let x = conv(tape, bound, "cnn2", x, same, true)?;
        let x = tape.gelu(x);
        let x = tape.adaptive_max_pool2d(x, h / 4, w / 4)?;
        let feat = tape.spatial_mean(x)?;
        let seq = tape.reshape(feat, vec![batch, frames, cfg.cnn_channels[1]])?;
        let mut seq = tape.permute(seq, &[0, 2, 1])?;
        for (i, &d) in cfg.dilations.iter().enumerate() {
            let w = bound.var(&format!("tcn{i}.weight"))?;
            let b = bound.var(&format!("tcn{i}.bias"))?;
            let dil = ClassifierConfig::effective_dilation(d, frames);
            let y = tape.dilated_conv1d(seq, w, Some(b), dil, true)?;
            let y = tape.gelu(y);
            seq = if tape.value(y).shape() == tape.value(seq).shape() {
                tape.add(y, seq)?
            } else {
                y
            };
        }
        let last = tape.narrow(seq, 2, frames - 1, 1)?;
        let last = tape.reshape(last, vec![batch, cfg.tcn_dim])?;
        let hdn = tape.linear(last, bound.var("fc1.weight")?, Some(bound.var("fc1.bias")?))?;
        let hdn = tape.gelu(hdn);
        tape.linear(hdn, bound.var("fc2.weight")?, Some(bound.var("fc2.bias")?))
    }

    /// Logits for a single recording's maps.
    pub fn classify(&self, maps: &RangeDopplerStack) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let x = tape.constant(maps.to_tensor());
        let y = self.forward(&mut tape, &bound, x, 1)?;
        Ok(tape.value(y).data().to_vec())
    }
}

/// Slow-time DFT magnitude of images `[N, 2, M, R]`, giving `[N, 1, M, R]`.
pub fn range_doppler(tape: &mut Tape, x: Var) -> Result<Var> {
    let f = tape.complex_dft(x, 2)?;
    tape.complex_abs(f)
}

/// Magnitude maps of F frames, each M Doppler bins by N range bins.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeDopplerStack {
    pub frames: usize,
    pub doppler: usize,
    pub range: usize,
    pub data: Vec<f64>,
}

impl RangeDopplerStack {
    pub fn frame(&self, f: usize) -> &[f64] {
        let plane = self.doppler * self.range;
        &self.data[f * plane..(f + 1) * plane]
    }

    /// `[F, 1, M, N]`.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.frames, 1, self.doppler, self.range], self.data.clone()).expect("stack shape")
    }
}

/// Range-Doppler maps of an SR output or HR recording `[2, F, M, N]`.
pub fn to_range_doppler(x: &Tensor) -> Result<RangeDopplerStack> {
    if x.rank() != 4 || x.dim(0) != 2 {
        return Err(Error::Rank {
            op: "to_range_doppler",
            expected: 4,
            got: x.shape().to_vec(),
        });
    }
    let mut tape = Tape::new();
    let v = tape.constant(x.permute(&[1, 0, 2, 3])?);
    let maps = range_doppler(&mut tape, v)?;
    let t = tape.value(maps);
    Ok(RangeDopplerStack {
        frames: t.dim(0),
        doppler: t.dim(2),
        range: t.dim(3),
        data: t.data().to_vec(),
    })
}

/// Exact magnitude maps of a complex cube (no smoothing term).
pub fn cube_range_doppler(cube: &ComplexCube) -> Result<RangeDopplerStack> {
    let (k, m, n) = cube.dims();
    let spec = cube.as_tensor().fft_1d(1)?;
    Ok(RangeDopplerStack {
        frames: k,
        doppler: m,
        range: n,
        data: spec.abs().into_data(),
    })
}

/// Arg-max with the lowest index winning ties.
pub fn predict(logits: &[f64]) -> Result<usize> {
    if logits.is_empty() {
        return Err(Error::arg("cannot predict from empty logits"));
    }
    Ok(logits
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > logits[best] { i } else { best }))
}
