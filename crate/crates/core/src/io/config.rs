use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use super::read_all;
use crate::error::{Error, Result};
use crate::train::{Regime, TrainConfig};

/// One run-config key with its default and meaning.
#[derive(Clone, Copy, Debug)]
pub struct ConfigKey {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> ConfigKey {
    ConfigKey { name, default, help }
}

pub const RUN_CONFIG_KEYS: &[ConfigKey] = &[
    key("regime", "M", "training regime: C, FM, M, SM or RM"),
    key("d", "2", "sets ds and df together"),
    key("ds", "2", "slow-time down-sampling factor"),
    key("df", "2", "fast-time down-sampling factor"),
    key(
        "gamma",
        "regime default",
        "L1 weight in the joint loss (C/FM 0, M 1, SM/RM 2)",
    ),
    key("epochs", "30", "training epochs"),
    key("batch_size", "16", "recordings per step"),
    key("lr", "0.001", "Adam learning rate"),
    key("beta1", "0.9", "Adam first-moment decay"),
    key("beta2", "0.999", "Adam second-moment decay"),
    key("eps", "1e-8", "Adam denominator epsilon"),
    key("round_f32", "true", "round parameters to f32 after every update"),
    key("seed", "0", "split, init, shuffle, mask and noise seed"),
    key("noise", "0.01", "LR noise std relative to the cube RMS"),
    key("mask_ratio", "0", "percentage of LR patches zeroed during training"),
    key("mask_patch", "2", "patch side for masking"),
    key("ablate_sr_loss", "false", "drop the L1 term from the optimised loss"),
    key("val_fraction", "0.2", "fraction of records held out for validation"),
    key("sr_channels", "36", "SR feature channels (multiple of 4)"),
    key("sr_blocks", "8", "feature mixing blocks"),
    key("sr_bias", "true", "bias terms in SR convolutions"),
    key("num_classes", "12", "gesture classes"),
    key("cnn_channels", "8,16", "channels of the two classifier conv layers"),
    key("tcn_dim", "32", "TCN channels"),
    key("tcn_kernel", "3", "TCN kernel size"),
    key("dilations", "1,2,4", "TCN dilations, one layer each"),
    key("hidden", "64", "classifier hidden units"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value {value:?} for key {key}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn apply(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "regime" => cfg.regime = Regime::from_str(value)?,
        "d" => {
            cfg.ds = parse(key, value)?;
            cfg.df = cfg.ds;
        }
        "ds" => cfg.ds = parse(key, value)?,
        "df" => cfg.df = parse(key, value)?,
        "gamma" => cfg.gamma = Some(parse(key, value)?),
        "epochs" => cfg.epochs = parse(key, value)?,
        "batch_size" => cfg.batch_size = parse(key, value)?,
        "lr" => cfg.adam.lr = parse(key, value)?,
        "beta1" => cfg.adam.beta1 = parse(key, value)?,
        "beta2" => cfg.adam.beta2 = parse(key, value)?,
        "eps" => cfg.adam.eps = parse(key, value)?,
        "round_f32" => cfg.adam.round_f32 = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "noise" => cfg.noise_sigma_rel = parse(key, value)?,
        "mask_ratio" => cfg.mask_ratio = parse(key, value)?,
        "mask_patch" => cfg.mask_patch = parse(key, value)?,
        "ablate_sr_loss" => cfg.ablate_sr_loss = parse(key, value)?,
        "val_fraction" => cfg.val_fraction = parse(key, value)?,
        "sr_channels" => cfg.sr.channels = parse(key, value)?,
        "sr_blocks" => cfg.sr.blocks = parse(key, value)?,
        "sr_bias" => cfg.sr.bias = parse(key, value)?,
        "num_classes" => cfg.classifier.num_classes = parse(key, value)?,
        "cnn_channels" => {
            let v = parse_list(key, value)?;
            cfg.classifier.cnn_channels = v
                .try_into()
                .map_err(|_| Error::config("key cnn_channels takes exactly two values"))?;
        }
        "tcn_dim" => cfg.classifier.tcn_dim = parse(key, value)?,
        "tcn_kernel" => cfg.classifier.tcn_kernel = parse(key, value)?,
        "dilations" => cfg.classifier.dilations = parse_list(key, value)?,
        "hidden" => cfg.classifier.hidden = parse(key, value)?,
        _ => return Err(Error::config(format!("unknown config key {key:?}"))),
    }
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment. Missing keys keep their defaults.
pub fn parse_run_config(text: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !seen.insert(k.to_string()) {
            return Err(Error::config(format!("line {}: duplicate key {k}", i + 1)));
        }
        apply(&mut cfg, k, v)?;
    }
    if seen.contains("d") && (seen.contains("ds") || seen.contains("df")) {
        return Err(Error::config("key d conflicts with ds/df; give one or the other"));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_run_config(path: &Path) -> Result<TrainConfig> {
    let bytes = read_all(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::format(format!("{} is not UTF-8", path.display())))?;
    parse_run_config(&text)
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Serialises every key; `parse_run_config` reads it back to an equal config.
pub fn run_config_text(cfg: &TrainConfig) -> String {
    let mut lines = vec![
        format!("regime = {}", cfg.regime),
        format!("ds = {}", cfg.ds),
        format!("df = {}", cfg.df),
    ];
    if let Some(g) = cfg.gamma {
        lines.push(format!("gamma = {g}"));
    }
    lines.extend([
        format!("epochs = {}", cfg.epochs),
        format!("batch_size = {}", cfg.batch_size),
        format!("lr = {}", cfg.adam.lr),
        format!("beta1 = {}", cfg.adam.beta1),
        format!("beta2 = {}", cfg.adam.beta2),
        format!("eps = {}", cfg.adam.eps),
        format!("round_f32 = {}", cfg.adam.round_f32),
        format!("seed = {}", cfg.seed),
        format!("noise = {}", cfg.noise_sigma_rel),
        format!("mask_ratio = {}", cfg.mask_ratio),
        format!("mask_patch = {}", cfg.mask_patch),
        format!("ablate_sr_loss = {}", cfg.ablate_sr_loss),
        format!("val_fraction = {}", cfg.val_fraction),
        format!("sr_channels = {}", cfg.sr.channels),
        format!("sr_blocks = {}", cfg.sr.blocks),
        format!("sr_bias = {}", cfg.sr.bias),
        format!("num_classes = {}", cfg.classifier.num_classes),
        format!("cnn_channels = {}", join(&cfg.classifier.cnn_channels)),
        format!("tcn_dim = {}", cfg.classifier.tcn_dim),
        format!("tcn_kernel = {}", cfg.classifier.tcn_kernel),
        format!("dilations = {}", join(&cfg.classifier.dilations)),
        format!("hidden = {}", cfg.classifier.hidden),
    ]);
    lines.join("\n") + "\n"
}
