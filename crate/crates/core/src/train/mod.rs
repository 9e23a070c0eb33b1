//! Losses, metrics, optimisation and the training regimes.

mod augment;
mod data;
mod metrics;
mod optim;

pub use augment::{mask_frames, masked_count, patch_grid, patch_mask_augment, sample_masked_patches};
pub use data::{
    crop_to, cubic_channels, noise_rng, normalized_channels, prepare_lr, seeded, split_indices, stack_frames, Prepared,
};
pub use metrics::{l1, ms_ssim, ms_ssim_image, ms_ssim_scales, mse, psnr, MS_SSIM_WEIGHTS};
pub use optim::{round_to_f32, Adam, AdamConfig};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::autodiff::{Tape, Var};
use crate::classifier::{predict, range_doppler, to_range_doppler, Classifier, ClassifierConfig};
use crate::error::{Error, Result};
use crate::ops::loss::cross_entropy_forward;
use crate::params::ParamStore;
use crate::radar::ComplexCube;
use crate::safmn::{SafmnConfig, SafmnModel};
use crate::tensor::Tensor;
use data::stream;

/// `gamma * l1 + ce` on the tape.
pub fn combined_loss(tape: &mut Tape, sr: Var, hr: Var, logits: Var, labels: &[usize], gamma: f64) -> Result<Var> {
    let l1 = tape.l1_loss(sr, hr)?;
    let ce = tape.cross_entropy(logits, labels)?;
    let weighted = tape.scale(l1, gamma);
    tape.add(weighted, ce)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// Cubic interpolation feeding the classifier.
    Cubic,
    /// SR trained alone, then frozen while the classifier trains.
    Frozen,
    /// SR and classifier trained jointly.
    Joint,
    /// One SR model per factor with a shared classifier.
    Multi,
    /// One x2 SR model applied recursively.
    Recursive,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::Cubic,
        Regime::Frozen,
        Regime::Joint,
        Regime::Multi,
        Regime::Recursive,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Regime::Cubic => "C",
            Regime::Frozen => "FM",
            Regime::Joint => "M",
            Regime::Multi => "SM",
            Regime::Recursive => "RM",
        }
    }

    /// Factor set trained by the multi-factor regimes.
    pub fn factor_set(self) -> Option<&'static [usize]> {
        match self {
            Regime::Multi => Some(&[2, 3, 4]),
            Regime::Recursive => Some(&[2, 4, 8]),
            _ => None,
        }
    }

    pub fn default_gamma(self) -> f64 {
        match self {
            Regime::Cubic | Regime::Frozen => 0.0,
            Regime::Joint => 1.0,
            Regime::Multi | Regime::Recursive => 2.0,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown regime {s:?}; expected one of C, FM, M, SM, RM")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub regime: Regime,
    pub ds: usize,
    pub df: usize,
    /// SR loss weight; `None` takes the regime default.
    pub gamma: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub noise_sigma_rel: f64,
    /// Percentage of LR patches zeroed during training.
    pub mask_ratio: f64,
    pub mask_patch: usize,
    /// Drops the L1 term from the optimised loss (it is still reported).
    pub ablate_sr_loss: bool,
    pub val_fraction: f64,
    pub sr: SafmnConfig,
    pub classifier: ClassifierConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regime: Regime::Joint,
            ds: 2,
            df: 2,
            gamma: None,
            epochs: 30,
            batch_size: 16,
            adam: AdamConfig {
                round_f32: true,
                ..AdamConfig::default()
            },
            seed: 0,
            noise_sigma_rel: crate::lowres::DEFAULT_NOISE_SIGMA_REL,
            mask_ratio: 0.0,
            mask_patch: 2,
            ablate_sr_loss: false,
            val_fraction: 0.2,
            sr: SafmnConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or_else(|| self.regime.default_gamma())
    }

    /// Degradation factors seen during training.
    pub fn train_factors(&self) -> Vec<(usize, usize)> {
        match self.regime.factor_set() {
            Some(set) => set.iter().map(|&d| (d, d)).collect(),
            None => vec![(self.ds, self.df)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ds == 0 || self.df == 0 {
            return Err(Error::config("d must be at least 1"));
        }
        if let Some(set) = self.regime.factor_set() {
            if self.ds != self.df || !set.contains(&self.ds) {
                return Err(Error::config(format!(
                    "regime {} supports d in {set:?}, got ds={} df={}",
                    self.regime, self.ds, self.df
                )));
            }
        }
        let gamma = self.gamma();
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::config(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("epochs and batch_size must be at least 1"));
        }
        if !(0.0..100.0).contains(&self.mask_ratio) || self.mask_patch == 0 {
            return Err(Error::config(format!(
                "mask_ratio must be in [0, 100) and mask_patch >= 1, got {} / {}",
                self.mask_ratio, self.mask_patch
            )));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config(format!(
                "val_fraction must be in (0, 1), got {}",
                self.val_fraction
            )));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::config(format!("invalid optimizer settings {a:?}")));
        }
        if !(self.noise_sigma_rel.is_finite() && self.noise_sigma_rel >= 0.0) {
            return Err(Error::config(format!(
                "noise must be >= 0, got {}",
                self.noise_sigma_rel
            )));
        }
        self.sr.validate()?;
        self.classifier.validate()
    }
}

/// One evaluation row.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub regime: Regime,
    pub ds: usize,
    pub df: usize,
    pub gamma: f64,
    pub accuracy: f64,
    pub l1: f64,
    pub ms_ssim: f64,
    pub psnr: f64,
    pub ce_loss: f64,
    pub sr_loss: f64,
}

#[derive(Clone, Debug)]
pub struct Inference {
    /// SR output `[2, K, H, W]`.
    pub sr: Tensor,
    pub logits: Vec<f64>,
}

/// Anything that maps an LR recording to an SR reconstruction and class logits.
pub trait CascadeModel {
    fn regime(&self) -> Regime;
    fn infer(&self, lr: &Tensor, ds: usize, df: usize) -> Result<Inference>;
}

/// SR models keyed by factor, plus the classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub regime: Regime,
    pub sr: Vec<((usize, usize), SafmnModel)>,
    pub classifier: Classifier,
}

impl ModelBundle {
    pub fn init(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded(config.seed, stream::INIT);
        let factors: Vec<(usize, usize)> = match config.regime {
            Regime::Cubic => Vec::new(),
            Regime::Recursive => vec![(2, 2)],
            _ => config.train_factors(),
        };
        let sr = factors
            .into_iter()
            .map(|f| {
                let cfg = config.sr.clone().with_factors(f.0, f.1);
                Ok((f, SafmnModel::new(cfg, &mut rng)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let classifier = Classifier::new(
            config.classifier.clone(),
            &mut seeded(config.seed, stream::CLASSIFIER_INIT),
        )?;
        let mut bundle = ModelBundle {
            regime: config.regime,
            sr,
            classifier,
        };
        if config.adam.round_f32 {
            bundle.for_each_store(round_to_f32);
        }
        Ok(bundle)
    }

    fn for_each_store(&mut self, mut f: impl FnMut(&mut ParamStore)) {
        for (_, m) in &mut self.sr {
            f(&mut m.params);
        }
        f(&mut self.classifier.params);
    }

    fn sr_prefix(f: (usize, usize)) -> String {
        format!("sr.x{}x{}.", f.0, f.1)
    }

    /// All parameters under `sr.x<ds>x<df>.` and `cls.` prefixes.
    pub fn to_store(&self) -> Result<ParamStore> {
        let mut out = ParamStore::new();
        for (f, m) in &self.sr {
            out.extend_prefixed(&Self::sr_prefix(*f), &m.params)?;
        }
        out.extend_prefixed("cls.", &self.classifier.params)?;
        Ok(out)
    }

    /// Rebuilds a bundle for `config` from a checkpoint store.
    pub fn from_store(config: &TrainConfig, store: &ParamStore) -> Result<Self> {
        let mut bundle = ModelBundle::init(config)?;
        store.check_layout(&bundle.to_store()?)?;
        for (f, m) in &mut bundle.sr {
            m.params = store.strip_prefix(&Self::sr_prefix(*f));
        }
        bundle.classifier.params = store.strip_prefix("cls.");
        Ok(bundle)
    }

    /// SR model and application count for a factor.
    pub fn sr_for(&self, ds: usize, df: usize) -> Result<(&SafmnModel, usize)> {
        if self.regime == Regime::Recursive {
            if ds != df || !ds.is_power_of_two() || ds < 2 {
                return Err(Error::config(format!("recursive model cannot upscale by {ds}x{df}")));
            }
            return Ok((&self.sr[0].1, ds.trailing_zeros() as usize));
        }
        self.sr
            .iter()
            .find(|(f, _)| *f == (ds, df))
            .map(|(_, m)| (m, 1))
            .ok_or_else(|| Error::config(format!("no SR model for factor {ds}x{df}")))
    }

    pub fn sr_param_count(&self) -> usize {
        self.sr.iter().map(|(_, m)| m.params.num_scalars()).sum()
    }
}

impl CascadeModel for ModelBundle {
    fn regime(&self) -> Regime {
        self.regime
    }

    fn infer(&self, lr: &Tensor, ds: usize, df: usize) -> Result<Inference> {
        let sr = if self.regime == Regime::Cubic {
            cubic_channels(lr, ds, df)?
        } else {
            let (model, apps) = self.sr_for(ds, df)?;
            model.super_resolve_n(lr, apps)?
        };
        let logits = self.classifier.classify(&to_range_doppler(&sr)?)?;
        Ok(Inference { sr, logits })
    }
}

/// A validation item: normalised LR input, HR target and label.
#[derive(Clone, Copy, Debug)]
pub struct EvalItem<'a> {
    pub lr: &'a Tensor,
    pub hr: &'a Tensor,
    pub label: usize,
}

/// Accuracy and SR metrics averaged over recordings; `epoch` is left at 0.
pub fn evaluate(
    model: &dyn CascadeModel,
    items: &[EvalItem<'_>],
    ds: usize,
    df: usize,
    gamma: f64,
) -> Result<MetricsRecord> {
    if items.is_empty() {
        return Err(Error::arg("cannot evaluate an empty dataset"));
    }
    let (mut correct, mut l1s, mut ssims, mut psnrs, mut ces) = (0usize, 0.0, 0.0, 0.0, 0.0);
    for item in items {
        let inf = model.infer(item.lr, ds, df)?;
        let r = inf.sr.rank();
        let hr = crop_to(item.hr, inf.sr.dim(r - 2), inf.sr.dim(r - 1))?;
        if item.label >= inf.logits.len() {
            return Err(Error::arg(format!(
                "label {} outside {} classes",
                item.label,
                inf.logits.len()
            )));
        }
        correct += usize::from(predict(&inf.logits)? == item.label);
        l1s += l1(&inf.sr, &hr)?;
        ssims += ms_ssim(&inf.sr, &hr)?;
        psnrs += psnr(&inf.sr, &hr, 1.0)?;
        let logits = Tensor::new(vec![1, inf.logits.len()], inf.logits)?;
        ces += cross_entropy_forward(&logits, &[item.label]);
    }
    let n = items.len() as f64;
    Ok(MetricsRecord {
        epoch: 0,
        regime: model.regime(),
        ds,
        df,
        gamma,
        accuracy: correct as f64 / n,
        l1: l1s / n,
        ms_ssim: ssims / n,
        psnr: psnrs / n,
        ce_loss: ces / n,
        sr_loss: l1s / n,
    })
}

/// Per-epoch record of a training run.
#[derive(Clone, Debug, Default)]
pub struct TrainHistory {
    pub records: Vec<MetricsRecord>,
    /// Mean optimised loss over the steps of each epoch.
    pub train_loss: Vec<f64>,
    pub steps_per_epoch: usize,
    /// SR parameters at the end of the L1-only stage (FM only).
    pub pretrained_sr: Option<ParamStore>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum StepMode {
    SrOnly,
    ClassifierOnly,
    Joint,
}

struct Trainer<'a> {
    config: &'a TrainConfig,
    data: &'a Prepared,
    train: Vec<usize>,
    val: Vec<usize>,
    bundle: ModelBundle,
    sr_opts: Vec<Adam>,
    cls_opt: Adam,
    shuffle_rng: rand_chacha::ChaCha8Rng,
    mask_rng: rand_chacha::ChaCha8Rng,
    /// Fixed classifier inputs (cubic or frozen SR outputs), keyed by record.
    fixed_inputs: Option<Vec<Tensor>>,
}

impl<'a> Trainer<'a> {
    fn new(config: &'a TrainConfig, data: &'a Prepared) -> Result<Self> {
        let (train, val) = split_indices(data.len(), config.seed, config.val_fraction)?;
        let bundle = ModelBundle::init(config)?;
        let sr_opts = bundle
            .sr
            .iter()
            .map(|(_, m)| Adam::new(config.adam, &m.params))
            .collect();
        let cls_opt = Adam::new(config.adam, &bundle.classifier.params);
        Ok(Trainer {
            config,
            data,
            train,
            val,
            bundle,
            sr_opts,
            cls_opt,
            shuffle_rng: seeded(config.seed, stream::SHUFFLE),
            mask_rng: seeded(config.seed, stream::MASK),
            fixed_inputs: None,
        })
    }

    /// Shuffled (batch, factor) steps for one epoch.
    fn schedule(&mut self) -> Vec<(Vec<usize>, (usize, usize))> {
        let mut order = self.train.clone();
        order.shuffle(&mut self.shuffle_rng);
        let factors = self.config.train_factors();
        let mut steps: Vec<_> = order
            .chunks(self.config.batch_size)
            .flat_map(|b| factors.iter().map(move |&f| (b.to_vec(), f)))
            .collect();
        if factors.len() > 1 {
            steps.shuffle(&mut self.shuffle_rng);
        }
        steps
    }

    fn step(&mut self, batch: &[usize], factor: (usize, usize), mode: StepMode) -> Result<f64> {
        let cfg = self.config;
        let mut tape = Tape::new();
        let labels: Vec<usize> = batch.iter().map(|&i| self.data.labels[i]).collect();
        let sr_index = match self.bundle.regime {
            Regime::Cubic => None,
            Regime::Recursive => Some(0),
            _ => self.bundle.sr.iter().position(|(f, _)| *f == factor),
        };
        let mut sr_bound = None;
        let sr = if let Some(fixed) = &self.fixed_inputs {
            let parts: Vec<&Tensor> = batch.iter().map(|&i| &fixed[i]).collect();
            tape.constant(stack_frames(&parts)?)
        } else {
            let lr_set = self.data.lr_for(factor)?;
            let mut lrs = Vec::with_capacity(batch.len());
            for &i in batch {
                let lr = if cfg.mask_ratio > 0.0 {
                    mask_frames(&lr_set[i], cfg.mask_ratio, cfg.mask_patch, &mut self.mask_rng)?
                } else {
                    lr_set[i].clone()
                };
                lrs.push(match self.bundle.regime {
                    Regime::Cubic => cubic_channels(&lr, factor.0, factor.1)?,
                    _ => lr,
                });
            }
            let refs: Vec<&Tensor> = lrs.iter().collect();
            let x = tape.constant(stack_frames(&refs)?);
            if self.bundle.regime == Regime::Cubic {
                x
            } else {
                let (model, apps) = self.bundle.sr_for(factor.0, factor.1)?;
                let bound = model.params.bind(&mut tape, mode != StepMode::ClassifierOnly);
                let y = model.recursive_forward(&mut tape, &bound, x, apps)?;
                sr_bound = Some(bound);
                y
            }
        };
        let (h, w) = {
            let s = tape.value(sr).shape();
            (s[2], s[3])
        };
        let hr_parts = batch
            .iter()
            .map(|&i| crop_to(&self.data.hr[i], h, w))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor> = hr_parts.iter().collect();
        let hr = tape.constant(stack_frames(&refs)?);

        let mut cls_bound = None;
        let loss = match mode {
            StepMode::SrOnly => tape.l1_loss(sr, hr)?,
            StepMode::ClassifierOnly | StepMode::Joint => {
                let bound = self.bundle.classifier.params.bind(&mut tape, true);
                let maps = range_doppler(&mut tape, sr)?;
                let logits = self.bundle.classifier.forward(&mut tape, &bound, maps, batch.len())?;
                cls_bound = Some(bound);
                if mode == StepMode::Joint && !cfg.ablate_sr_loss {
                    combined_loss(&mut tape, sr, hr, logits, &labels, cfg.gamma())?
                } else {
                    tape.cross_entropy(logits, &labels)?
                }
            }
        };
        let value = tape.value(loss).item();
        let mut grads = tape.backward(loss)?;
        if let (Some(bound), Some(idx), true) = (&sr_bound, sr_index, mode != StepMode::ClassifierOnly) {
            let g = bound.gradients(&tape, &mut grads);
            self.sr_opts[idx].step(&mut self.bundle.sr[idx].1.params, &g)?;
        }
        if let Some(bound) = &cls_bound {
            let g = bound.gradients(&tape, &mut grads);
            self.cls_opt.step(&mut self.bundle.classifier.params, &g)?;
        }
        Ok(value)
    }

    fn epoch(&mut self, mode: StepMode) -> Result<(f64, usize)> {
        let steps = self.schedule();
        let mut total = 0.0;
        for (batch, factor) in &steps {
            total += self.step(batch, *factor, mode)?;
        }
        Ok((total / steps.len() as f64, steps.len()))
    }

    fn validate(&self, epoch: usize) -> Result<MetricsRecord> {
        let cfg = self.config;
        let lr = self.data.lr_for((cfg.ds, cfg.df))?;
        let items: Vec<EvalItem<'_>> = self
            .val
            .iter()
            .map(|&i| EvalItem {
                lr: &lr[i],
                hr: &self.data.hr[i],
                label: self.data.labels[i],
            })
            .collect();
        let mut rec = evaluate(&self.bundle, &items, cfg.ds, cfg.df, cfg.gamma())?;
        rec.epoch = epoch;
        Ok(rec)
    }

    /// Inputs that stay fixed while only the classifier trains.
    fn freeze_inputs(&mut self) -> Result<()> {
        if self.config.mask_ratio > 0.0 {
            return Ok(());
        }
        let factor = (self.config.ds, self.config.df);
        let lr = self.data.lr_for(factor)?;
        let inputs = if self.bundle.regime == Regime::Cubic {
            self.data.cubic(factor)?
        } else {
            let (model, apps) = self.bundle.sr_for(factor.0, factor.1)?;
            lr.iter()
                .map(|t| model.super_resolve_n(t, apps))
                .collect::<Result<Vec<_>>>()?
        };
        self.fixed_inputs = Some(inputs);
        Ok(())
    }

    fn run(mut self) -> Result<(ModelBundle, TrainHistory)> {
        let mut history = TrainHistory::default();
        let mode = match self.bundle.regime {
            Regime::Cubic => {
                self.freeze_inputs()?;
                StepMode::ClassifierOnly
            }
            Regime::Frozen => {
                for e in 0..self.config.epochs {
                    let (loss, _) = self.epoch(StepMode::SrOnly)?;
                    log::info!("FM stage 1 epoch {} sr l1 {loss:.5}", e + 1);
                }
                history.pretrained_sr = Some(self.bundle.sr[0].1.params.clone());
                self.freeze_inputs()?;
                StepMode::ClassifierOnly
            }
            _ => StepMode::Joint,
        };
        for e in 0..self.config.epochs {
            let (loss, steps) = self.epoch(mode)?;
            history.train_loss.push(loss);
            history.steps_per_epoch = steps;
            let rec = self.validate(e + 1)?;
            log::info!(
                "{} epoch {} loss {loss:.5} acc {:.3} psnr {:.2}",
                rec.regime,
                e + 1,
                rec.accuracy,
                rec.psnr
            );
            history.records.push(rec);
        }
        Ok((self.bundle, history))
    }
}

/// Trains one regime on a prepared dataset.
pub fn train_prepared(data: &Prepared, config: &TrainConfig) -> Result<(ModelBundle, TrainHistory)> {
    config.validate()?;
    if let Some(&l) = data.labels.iter().find(|&&l| l >= config.classifier.num_classes) {
        return Err(Error::config(format!(
            "label {l} exceeds num_classes {}",
            config.classifier.num_classes
        )));
    }
    Trainer::new(config, data)?.run()
}

/// Degrades `dataset` for every factor the regime needs, then trains.
pub fn train_regime(dataset: &[(ComplexCube, usize)], config: &TrainConfig) -> Result<(ModelBundle, TrainHistory)> {
    config.validate()?;
    let mut factors = config.train_factors();
    if !factors.contains(&(config.ds, config.df)) {
        factors.push((config.ds, config.df));
    }
    let data = Prepared::new(dataset, &factors, config.noise_sigma_rel, config.seed)?;
    train_prepared(&data, config)
}

/// Evaluates `bundle` on the validation split that `config` trains against.
pub fn evaluate_split(bundle: &ModelBundle, data: &Prepared, config: &TrainConfig) -> Result<MetricsRecord> {
    let (_, val) = split_indices(data.len(), config.seed, config.val_fraction)?;
    let lr = data.lr_for((config.ds, config.df))?;
    let items: Vec<EvalItem<'_>> = val
        .iter()
        .map(|&i| EvalItem {
            lr: &lr[i],
            hr: &data.hr[i],
            label: data.labels[i],
        })
        .collect();
    let mut rec = evaluate(bundle, &items, config.ds, config.df, config.gamma())?;
    rec.epoch = config.epochs;
    Ok(rec)
}
