//! Spatially-adaptive feature modulation network for radar frame super-resolution.

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::ops::conv::Conv2dOpts;
use crate::params::{Bound, ParamStore};
use crate::tensor::Tensor;

/// Scale groups inside one SAFM layer.
pub const SAFM_LEVELS: usize = 4;
pub const LN_EPS: f64 = 1e-6;
/// Channel expansion inside the convolutional channel mixer.
pub const CCM_EXPANSION: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct SafmnConfig {
    pub channels: usize,
    pub blocks: usize,
    pub ds: usize,
    pub df: usize,
    pub input_channels: usize,
    pub bias: bool,
}

impl Default for SafmnConfig {
    fn default() -> Self {
        SafmnConfig {
            channels: 36,
            blocks: 8,
            ds: 2,
            df: 2,
            input_channels: 2,
            bias: true,
        }
    }
}

impl SafmnConfig {
    pub fn with_factors(mut self, ds: usize, df: usize) -> Self {
        self.ds = ds;
        self.df = df;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || !self.channels.is_multiple_of(SAFM_LEVELS) {
            return Err(Error::config(format!(
                "sr_channels must be a positive multiple of {SAFM_LEVELS}, got {}",
                self.channels
            )));
        }
        if self.ds == 0 || self.df == 0 || self.input_channels == 0 {
            return Err(Error::config(format!(
                "scale factors and input channels must be at least 1, got ds={} df={} in={}",
                self.ds, self.df, self.input_channels
            )));
        }
        Ok(())
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let (c, cin, b) = (self.channels, self.input_channels, self.bias as usize);
        let e = CCM_EXPANSION * c;
        let out = cin * self.ds * self.df;
        let shallow = 9 * cin * c + b * c;
        let norms = 4 * c;
        let safm = 9 * c + b * c + c * c + b * c;
        let ccm = 9 * c * e + b * e + e * c + b * c;
        let up = 9 * c * out + b * out;
        shallow + self.blocks * (norms + safm + ccm) + up
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SafmnModel {
    pub config: SafmnConfig,
    pub params: ParamStore,
}

fn conv_param<R: Rng + ?Sized>(
    store: &mut ParamStore,
    name: &str,
    shape: [usize; 4],
    bias: bool,
    rng: &mut R,
) -> Result<()> {
    let fan_in = shape[1] * shape[2] * shape[3];
    store.insert_uniform(format!("{name}.weight"), shape.to_vec(), fan_in, rng)?;
    if bias {
        store.insert_uniform(format!("{name}.bias"), vec![shape[0]], fan_in, rng)?;
    }
    Ok(())
}

fn norm_param(store: &mut ParamStore, name: &str, c: usize) -> Result<()> {
    store.insert(format!("{name}.gamma"), Tensor::full(vec![c], 1.0))?;
    store.insert(format!("{name}.beta"), Tensor::zeros(vec![c]))
}

impl SafmnModel {
    pub fn new<R: Rng + ?Sized>(config: SafmnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (c, cin, b) = (config.channels, config.input_channels, config.bias);
        let g = c / SAFM_LEVELS;
        let e = CCM_EXPANSION * c;
        let mut p = ParamStore::new();
        conv_param(&mut p, "shallow", [c, cin, 3, 3], b, rng)?;
        for i in 0..config.blocks {
            let pre = format!("fmm.{i}");
            norm_param(&mut p, &format!("{pre}.ln1"), c)?;
            for j in 0..SAFM_LEVELS {
                conv_param(&mut p, &format!("{pre}.safm.dw{j}"), [g, 1, 3, 3], b, rng)?;
            }
            conv_param(&mut p, &format!("{pre}.safm.fuse"), [c, c, 1, 1], b, rng)?;
            norm_param(&mut p, &format!("{pre}.ln2"), c)?;
            conv_param(&mut p, &format!("{pre}.ccm.expand"), [e, c, 3, 3], b, rng)?;
            conv_param(&mut p, &format!("{pre}.ccm.compress"), [c, e, 1, 1], b, rng)?;
        }
        conv_param(&mut p, "up", [cin * config.ds * config.df, c, 3, 3], b, rng)?;
        Ok(SafmnModel { config, params: p })
    }

    /// Forward pass over a batch of images `[N, input_channels, h, w]`.
    pub fn forward(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let cfg = &self.config;
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 4 {
            return Err(Error::Rank {
                op: "safmn",
                expected: 4,
                got: shape,
            });
        }
        if shape[1] != cfg.input_channels {
            return Err(Error::config(format!(
                "SR model expects {} input channels, got {}",
                cfg.input_channels, shape[1]
            )));
        }
        let shallow = conv(tape, bound, "shallow", x, Conv2dOpts::same3x3(), cfg.bias)?;
        let mut h = shallow;
        for i in 0..cfg.blocks {
            h = fmm_block(tape, bound, &format!("fmm.{i}"), h, cfg.bias)?;
        }
        let h = tape.add(h, shallow)?;
        let up = conv(tape, bound, "up", h, Conv2dOpts::same3x3(), cfg.bias)?;
        tape.pixel_shuffle(up, cfg.ds, cfg.df)
    }

    /// Applies the model `applications` times with shared weights.
    pub fn recursive_forward(&self, tape: &mut Tape, bound: &Bound, x: Var, applications: usize) -> Result<Var> {
        if applications == 0 {
            return Err(Error::arg("recursive application count must be at least 1"));
        }
        (0..applications).try_fold(x, |h, _| self.forward(tape, bound, h))
    }

    /// Super-resolves a recording `[2, F, h, w]` to `[2, F, h*ds, w*df]`.
    pub fn super_resolve(&self, lr: &Tensor) -> Result<Tensor> {
        self.super_resolve_n(lr, 1)
    }

    pub fn super_resolve_n(&self, lr: &Tensor, applications: usize) -> Result<Tensor> {
        if lr.rank() != 4 {
            return Err(Error::Rank {
                op: "super_resolve",
                expected: 4,
                got: lr.shape().to_vec(),
            });
        }
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let x = tape.constant(lr.permute(&[1, 0, 2, 3])?);
        let y = self.recursive_forward(&mut tape, &bound, x, applications)?;
        tape.value(y).permute(&[1, 0, 2, 3])
    }
}

pub(crate) fn conv(tape: &mut Tape, bound: &Bound, name: &str, x: Var, opts: Conv2dOpts, bias: bool) -> Result<Var> {
    let w = bound.var(&format!("{name}.weight"))?;
    let b = if bias {
        Some(bound.var(&format!("{name}.bias"))?)
    } else {
        None
    };
    tape.conv2d(x, w, b, opts)
}

fn layer_norm(tape: &mut Tape, bound: &Bound, name: &str, x: Var) -> Result<Var> {
    let g = bound.var(&format!("{name}.gamma"))?;
    let b = bound.var(&format!("{name}.beta"))?;
    tape.layer_norm(x, 1, g, b, LN_EPS)
}

/// Multi-scale depthwise modulation; the output gates the input elementwise.
pub fn safm_layer(tape: &mut Tape, bound: &Bound, prefix: &str, x: Var, bias: bool) -> Result<Var> {
    let shape = tape.value(x).shape().to_vec();
    let (c, h, w) = (shape[1], shape[2], shape[3]);
    if c % SAFM_LEVELS != 0 {
        return Err(Error::config(format!(
            "SAFM needs channels divisible by {SAFM_LEVELS}, got {c}"
        )));
    }
    let groups = tape.split_channels(x, SAFM_LEVELS)?;
    let dw = Conv2dOpts::depthwise3x3(c / SAFM_LEVELS);
    let mut outs = Vec::with_capacity(SAFM_LEVELS);
    for (i, &g) in groups.iter().enumerate() {
        let name = format!("{prefix}.dw{i}");
        let s = if i == 0 {
            conv(tape, bound, &name, g, dw, bias)?
        } else {
            let (ph, pw) = ((h >> i).max(1), (w >> i).max(1));
            let pooled = tape.adaptive_max_pool2d(g, ph, pw)?;
            let s = conv(tape, bound, &name, pooled, dw, bias)?;
            tape.interpolate_nearest(s, h, w)?
        };
        outs.push(s);
    }
    let cat = tape.concat_channels(&outs)?;
    let fused = conv(tape, bound, &format!("{prefix}.fuse"), cat, Conv2dOpts::default(), bias)?;
    let gate = tape.gelu(fused);
    tape.mul(gate, x)
}

/// 3x3 expansion, GELU, 1x1 compression.
pub fn ccm_layer(tape: &mut Tape, bound: &Bound, prefix: &str, x: Var, bias: bool) -> Result<Var> {
    let e = conv(tape, bound, &format!("{prefix}.expand"), x, Conv2dOpts::same3x3(), bias)?;
    let e = tape.gelu(e);
    conv(
        tape,
        bound,
        &format!("{prefix}.compress"),
        e,
        Conv2dOpts::default(),
        bias,
    )
}

/// `Y = SAFM(LN(X)) + X`, `Z = CCM(LN(Y)) + Y`.
pub fn fmm_block(tape: &mut Tape, bound: &Bound, prefix: &str, x: Var, bias: bool) -> Result<Var> {
    let n1 = layer_norm(tape, bound, &format!("{prefix}.ln1"), x)?;
    let s = safm_layer(tape, bound, &format!("{prefix}.safm"), n1, bias)?;
    let y = tape.add(s, x)?;
    let n2 = layer_norm(tape, bound, &format!("{prefix}.ln2"), y)?;
    let m = ccm_layer(tape, bound, &format!("{prefix}.ccm"), n2, bias)?;
    tape.add(m, y)
}
