//! Finite-difference gradient checks shared by the op tests and the acceptance suite.

use radgest_core::classifier::{Classifier, ClassifierConfig};
use radgest_core::ops::conv::Conv2dOpts;
use radgest_core::params::{Bound, ParamStore};
use radgest_core::safmn::{SafmnConfig, SafmnModel};
use radgest_core::{Result, Tape, Tensor, Var};

use super::{gradient_check, random_tensor, rng, weighted_sum};

/// Worst relative error of every differentiable op for one seed.
pub fn op_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut r = rng(seed);
    let x4 = random_tensor(&[2, 4, 6, 5], &mut r);
    let w33 = random_tensor(&[3, 4, 3, 3], &mut r);
    let bias = random_tensor(&[3], &mut r);
    vec![
        (
            "conv2d",
            gradient_check(&[x4.clone(), w33.clone(), bias.clone()], |t, v| {
                let y = t.conv2d(v[0], v[1], Some(v[2]), Conv2dOpts::same3x3())?;
                weighted_sum(t, y, seed)
            }),
        ),
        (
            "conv2d strided",
            gradient_check(&[x4.clone(), random_tensor(&[2, 2, 3, 2], &mut r)], |t, v| {
                let opts = Conv2dOpts {
                    stride: 2,
                    padding: 1,
                    groups: 2,
                };
                let y = t.conv2d(v[0], v[1], None, opts)?;
                weighted_sum(t, y, seed)
            }),
        ),
        (
            "depthwise",
            gradient_check(&[x4.clone(), random_tensor(&[4, 1, 3, 3], &mut r)], |t, v| {
                let y = t.conv2d(v[0], v[1], None, Conv2dOpts::depthwise3x3(4))?;
                weighted_sum(t, y, seed)
            }),
        ),
        (
            "adaptive_max_pool2d",
            gradient_check(std::slice::from_ref(&x4), |t, v| {
                let y = t.adaptive_max_pool2d(v[0], 3, 2)?;
                weighted_sum(t, y, seed)
            }),
        ),
        (
            "interpolate_nearest",
            gradient_check(&[random_tensor(&[1, 2, 3, 2], &mut r)], |t, v| {
                let y = t.interpolate_nearest(v[0], 7, 5)?;
                weighted_sum(t, y, seed)
            }),
        ),
        (
            "pixel_shuffle",
            gradient_check(&[random_tensor(&[1, 12, 2, 3], &mut r)], |t, v| {
                let y = t.pixel_shuffle(v[0], 2, 3)?;
                weighted_sum(t, y, seed)
            }),
        ),
        (
            "layer_norm",
            gradient_check(
                &[x4.clone(), random_tensor(&[4], &mut r), random_tensor(&[4], &mut r)],
                |t, v| {
                    let y = t.layer_norm(v[0], 1, v[1], v[2], 1e-6)?;
                    weighted_sum(t, y, seed)
                },
            ),
        ),
        (
            "gelu",
            gradient_check(&[x4.map(|v| 3.0 * v)], |t, v| {
                let y = t.gelu(v[0]);
                weighted_sum(t, y, seed)
            }),
        ),
        (
            "split/concat",
            gradient_check(std::slice::from_ref(&x4), |t, v| {
                let parts = t.split_channels(v[0], 2)?;
                let y = t.concat_channels(&[parts[1], parts[0]])?;
                weighted_sum(t, y, seed)
            }),
        ),
        (
            "dilated_conv1d",
            gradient_check(
                &[
                    random_tensor(&[2, 3, 8], &mut r),
                    random_tensor(&[4, 3, 3], &mut r),
                    random_tensor(&[4], &mut r),
                ],
                |t, v| {
                    let y = t.dilated_conv1d(v[0], v[1], Some(v[2]), 2, true)?;
                    weighted_sum(t, y, seed)
                },
            ),
        ),
        (
            "linear",
            gradient_check(
                &[
                    random_tensor(&[3, 5], &mut r),
                    random_tensor(&[4, 5], &mut r),
                    random_tensor(&[4], &mut r),
                ],
                |t, v| {
                    let y = t.linear(v[0], v[1], Some(v[2]))?;
                    weighted_sum(t, y, seed)
                },
            ),
        ),
        (
            "spatial_mean/permute/reshape/narrow",
            gradient_check(std::slice::from_ref(&x4), |t, v| {
                let m = t.spatial_mean(v[0])?;
                let m = t.reshape(m, vec![2, 2, 2])?;
                let m = t.permute(m, &[2, 0, 1])?;
                let m = t.narrow(m, 1, 1, 1)?;
                weighted_sum(t, m, seed)
            }),
        ),
        (
            "complex_dft + abs",
            gradient_check(&[random_tensor(&[2, 2, 5, 4], &mut r)], |t, v| {
                let f = t.complex_dft(v[0], 2)?;
                let g = t.complex_dft(f, 3)?;
                let a = t.complex_abs(g)?;
                weighted_sum(t, a, seed)
            }),
        ),
        (
            "l1_loss",
            gradient_check(&[x4.clone(), random_tensor(&[2, 4, 6, 5], &mut r)], |t, v| {
                t.l1_loss(v[0], v[1])
            }),
        ),
        (
            "cross_entropy",
            gradient_check(&[random_tensor(&[3, 5], &mut r)], |t, v| {
                t.cross_entropy(v[0], &[4, 0, 2])
            }),
        ),
        (
            "add/sub/mul/scale/mean",
            gradient_check(&[x4.clone(), x4.map(|v| v * 0.5 + 0.1)], |t, v| {
                let a = t.add(v[0], v[1])?;
                let b = t.sub(a, v[1])?;
                let c = t.mul(b, v[1])?;
                let d = t.scale(c, -1.5);
                Ok(t.mean(d))
            }),
        ),
    ]
}

/// Gradient check over an input and every tensor of a parameter store.
pub fn store_gradient_check(store: &ParamStore, x: &Tensor, f: impl Fn(&mut Tape, &Bound, Var) -> Result<Var>) -> f64 {
    let names: Vec<String> = store.names().map(str::to_string).collect();
    let mut inputs = vec![x.clone()];
    inputs.extend(store.iter().map(|(_, t)| t.clone()));
    gradient_check(&inputs, move |tape, vars| {
        let bound = Bound::from_pairs(names.iter().cloned().zip(vars[1..].iter().copied()));
        f(tape, &bound, vars[0])
    })
}

pub fn tiny_sr_config() -> SafmnConfig {
    SafmnConfig {
        channels: 4,
        blocks: 1,
        ds: 2,
        df: 2,
        input_channels: 2,
        bias: true,
    }
}

pub fn reduced_classifier_config() -> ClassifierConfig {
    ClassifierConfig {
        num_classes: 3,
        cnn_channels: [4, 8],
        tcn_dim: 8,
        tcn_kernel: 3,
        dilations: vec![1, 2, 4],
        hidden: 16,
    }
}

/// Full SR and classifier models (reduced sizes) checked end to end for one seed.
pub fn model_gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let sr = SafmnModel::new(tiny_sr_config(), &mut rng(seed + 1000)).expect("sr");
    let x = random_tensor(&[1, 2, 6, 8], &mut rng(seed + 2000));
    let sr_err = store_gradient_check(&sr.params, &x, |t, b, v| {
        let y = sr.forward(t, b, v)?;
        weighted_sum(t, y, seed)
    });
    let cls = Classifier::new(reduced_classifier_config(), &mut rng(seed + 3000)).expect("classifier");
    let maps = random_tensor(&[6, 1, 8, 16], &mut rng(seed + 4000));
    let cls_err = store_gradient_check(&cls.params, &maps, |t, b, v| {
        let logits = cls.forward(t, b, v, 2)?;
        t.cross_entropy(logits, &[2, 0])
    });
    vec![("safmn", sr_err), ("classifier", cls_err)]
}
