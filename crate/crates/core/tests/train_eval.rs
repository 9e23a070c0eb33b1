mod common;

use std::cell::RefCell;

use common::{gradient_check, random_tensor, rng};
use radgest_core::classifier::ClassifierConfig;
use radgest_core::params::ParamStore;
use radgest_core::radar::{generate_dataset, standard_templates, ComplexCube, RadarParams};
use radgest_core::safmn::SafmnConfig;
use radgest_core::train::{
    combined_loss, evaluate, l1, masked_count, ms_ssim, ms_ssim_image, patch_mask_augment, psnr, sample_masked_patches,
    train_prepared, Adam, AdamConfig, CascadeModel, EvalItem, Inference, ModelBundle, Prepared, Regime, TrainConfig,
};
use radgest_core::{Tape, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn cross_entropy_of_uniform_logits_is_log_classes() {
    let mut tape = Tape::new();
    let logits = tape.constant(Tensor::zeros(vec![4, 12]));
    let ce = tape.cross_entropy(logits, &[0, 3, 7, 11]).unwrap();
    assert!((tape.value(ce).item() - 12f64.ln()).abs() < 1e-12);
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let logits = random_tensor(&[3, 5], &mut rng(seed));
        let err = gradient_check(&[logits.map(|v| 4.0 * v)], |t, v| t.cross_entropy(v[0], &[4, 0, 2]));
        assert!(err < 1e-6, "seed {seed}: {err}");
    }
}

#[test]
fn l1_examples() {
    let a = Tensor::new(vec![4], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    let b = Tensor::new(vec![4], vec![1.0, 1.0, 0.0, 3.5]).unwrap();
    assert!((l1(&a, &b).unwrap() - 3.5 / 4.0).abs() < 1e-15);
    assert_eq!(l1(&a, &a).unwrap(), 0.0);
    let mut tape = Tape::new();
    let (va, vb) = (tape.constant(a), tape.constant(b));
    let loss = tape.l1_loss(va, vb).unwrap();
    assert!((tape.value(loss).item() - 0.875).abs() < 1e-15);
}

#[test]
fn combined_loss_decomposes() {
    let sr = random_tensor(&[2, 2, 4, 4], &mut rng(1));
    let hr = random_tensor(&[2, 2, 4, 4], &mut rng(2));
    let logits = random_tensor(&[2, 3], &mut rng(3));
    let labels = [2, 0];
    for gamma in [0.0, 0.5, 1.0, 2.0, 7.5] {
        let mut tape = Tape::new();
        let s = tape.param(sr.clone());
        let h = tape.constant(hr.clone());
        let z = tape.param(logits.clone());
        let loss = combined_loss(&mut tape, s, h, z, &labels, gamma).unwrap();
        let total = tape.value(loss).item();
        let l1v = tape.l1_loss(s, h).unwrap();
        let cev = tape.cross_entropy(z, &labels).unwrap();
        let want = gamma * tape.value(l1v).item() + tape.value(cev).item();
        assert!((total - want).abs() < 1e-13);
        if gamma == 0.0 {
            assert_eq!(total, tape.value(cev).item());
            let grads = tape.backward(loss).unwrap();
            assert!(grads.get(s).is_none_or(|g| g.data().iter().all(|&v| v == 0.0)));
        }
    }
}

#[test]
fn psnr_of_uniform_offset() {
    let hr = random_tensor(&[2, 3, 8, 8], &mut rng(4)).map(|v| 0.5 + 0.3 * v);
    let sr = hr.map(|v| v + 0.1);
    assert!((psnr(&sr, &hr, 1.0).unwrap() - 20.0).abs() < 1e-9);
    assert_eq!(psnr(&hr, &hr, 1.0).unwrap(), f64::INFINITY);
}

fn gaussian_window() -> Vec<f64> {
    let g: Vec<f64> = (0..11)
        .map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * 1.5 * 1.5)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.iter().map(|v| v / s).collect()
}

/// Mean SSIM over valid 11x11 Gaussian windows, computed directly in 2-D.
fn naive_ssim(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let g = gaussian_window();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (oh, ow) = (h - 10, w - 10);
    let mut acc = 0.0;
    for y in 0..oh {
        for x in 0..ow {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let k = g[i] * g[j];
                    let (va, vb) = (a[(y + i) * w + x + j], b[(y + i) * w + x + j]);
                    ma += k * va;
                    mb += k * vb;
                    saa += k * va * va;
                    sbb += k * vb * vb;
                    sab += k * va * vb;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    acc / (oh * ow) as f64
}

#[test]
fn single_scale_ms_ssim_matches_naive_ssim() {
    let mut r = rng(5);
    for (h, w) in [(16, 64), (12, 20), (21, 17)] {
        let a: Vec<f64> = (0..h * w).map(|_| r.gen::<f64>()).collect();
        let b: Vec<f64> = a.iter().map(|v| (v + 0.2 * r.gen::<f64>()).min(1.0)).collect();
        let got = ms_ssim_image(&a, &b, h, w, 1.0).unwrap();
        assert!((got - naive_ssim(&a, &b, h, w)).abs() < 1e-10, "{h}x{w}");
    }
}

#[test]
fn ms_ssim_identity_symmetry_and_noise() {
    let mut r = rng(6);
    let hr = Tensor::from_fn(vec![2, 3, 48, 64], |i| {
        let (y, x) = ((i / 64) % 48, i % 64);
        0.5 + 0.4 * ((y as f64 / 5.0).sin() * (x as f64 / 7.0).cos())
    });
    let jitter = Tensor::from_fn(vec![2, 3, 48, 64], |_| 0.05 * (r.gen::<f64>() - 0.5));
    let noisy = Tensor::from_fn(vec![2, 3, 48, 64], |i| {
        (hr.data()[i] + jitter.data()[i]).clamp(0.0, 1.0)
    });
    let noise = Tensor::from_fn(vec![2, 3, 48, 64], |_| r.gen::<f64>());
    assert!((ms_ssim(&hr, &hr).unwrap() - 1.0).abs() < 1e-12);
    let ab = ms_ssim(&hr, &noisy).unwrap();
    let ba = ms_ssim(&noisy, &hr).unwrap();
    assert!((ab - ba).abs() < 1e-12);
    assert!(ab < 1.0 && ab > 0.5);
    assert!(ms_ssim(&hr, &noise).unwrap() < 0.2);
    assert!(ms_ssim(&Tensor::zeros(vec![1, 8, 8]), &Tensor::zeros(vec![1, 8, 8])).is_err());
}

fn store_with(values: &[f64]) -> ParamStore {
    let mut s = ParamStore::new();
    s.insert("w", Tensor::new(vec![values.len()], values.to_vec()).unwrap())
        .unwrap();
    s
}

#[test]
fn adam_ignores_zero_gradient() {
    let mut store = store_with(&[0.3, -1.2]);
    let mut opt = Adam::new(AdamConfig::default(), &store);
    opt.step(&mut store, &[Tensor::zeros(vec![2])]).unwrap();
    assert_eq!(store.get("w").unwrap().data(), &[0.3, -1.2]);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut store = store_with(&[1.0, 1.0, 1.0]);
    let cfg = AdamConfig {
        lr: 0.01,
        ..AdamConfig::default()
    };
    let mut opt = Adam::new(cfg, &store);
    let g = Tensor::new(vec![3], vec![0.5, -3.0, 1e-3]).unwrap();
    opt.step(&mut store, std::slice::from_ref(&g)).unwrap();
    for (p, gi) in store.get("w").unwrap().data().iter().zip(g.data()) {
        let want = 1.0 - 0.01 * gi / (gi.abs() + 1e-8);
        assert!((p - want).abs() < 1e-15);
    }
}

#[test]
fn adam_two_step_trace() {
    let cfg = AdamConfig {
        lr: 0.1,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
        round_f32: false,
    };
    let mut store = store_with(&[2.0]);
    let mut opt = Adam::new(cfg, &store);
    opt.step(&mut store, &[Tensor::new(vec![1], vec![0.5]).unwrap()])
        .unwrap();
    opt.step(&mut store, &[Tensor::new(vec![1], vec![-1.0]).unwrap()])
        .unwrap();
    let (m1, v1) = (0.1 * 0.5, 0.001 * 0.25);
    let p1 = 2.0 - 0.1 * (m1 / 0.1) / ((v1 / 0.001f64).sqrt() + 1e-8);
    let (m2, v2) = (0.9 * m1 - 0.1, 0.999 * v1 + 0.001);
    let (bc1, bc2) = (1.0 - 0.81, 1.0 - 0.999f64 * 0.999);
    let p2 = p1 - 0.1 * (m2 / bc1) / ((v2 / bc2).sqrt() + 1e-8);
    assert!((store.get("w").unwrap().data()[0] - p2).abs() < 1e-14);
    assert_eq!(opt.steps_taken(), 2);
}

#[test]
fn adam_rounding_keeps_f32_values() {
    let mut store = store_with(&[0.1, 0.2]);
    let cfg = AdamConfig {
        round_f32: true,
        ..AdamConfig::default()
    };
    let mut opt = Adam::new(cfg, &store);
    opt.step(&mut store, &[Tensor::new(vec![2], vec![0.3, -0.7]).unwrap()])
        .unwrap();
    for &v in store.get("w").unwrap().data() {
        assert_eq!(v, v as f32 as f64);
    }
}

#[test]
fn patch_mask_counts() {
    assert_eq!(masked_count(64, 25.0), 16);
    assert_eq!(masked_count(10, 15.0), 2);
    let x = Tensor::full(vec![2, 8, 8], 1.0);
    let mut r = rng(7);
    let none = patch_mask_augment(&x, 0.0, 2, &mut r).unwrap();
    assert_eq!(none, x);
    for p in [10.0, 25.0, 50.0, 75.0] {
        let y = patch_mask_augment(&x, p, 2, &mut r).unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count();
        assert_eq!(zeros, 2 * 4 * masked_count(16, p));
        let (a, b) = y.data().split_at(64);
        assert_eq!(a, b, "leading slices share the mask");
    }
    assert!(patch_mask_augment(&x, 100.0, 2, &mut r).is_err());
}

#[test]
fn patch_selection_is_uniform() {
    let (total, draws) = (16, 10_000);
    let mut counts = vec![0usize; total];
    let mut r = rng(8);
    for _ in 0..draws {
        let picked = sample_masked_patches(total, 25.0, &mut r);
        assert_eq!(picked.len(), 4);
        for i in picked {
            counts[i] += 1;
        }
    }
    let expected = draws as f64 * 4.0 / total as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((total - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

/// Stub that returns a scripted SR output and logits per call.
struct Scripted {
    kind: &'static str,
    classes: usize,
    labels: Vec<usize>,
    next: RefCell<usize>,
    rng: RefCell<ChaCha8Rng>,
}

impl CascadeModel for Scripted {
    fn regime(&self) -> Regime {
        Regime::Joint
    }

    fn infer(&self, lr: &Tensor, _ds: usize, _df: usize) -> radgest_core::Result<Inference> {
        let i = {
            let mut n = self.next.borrow_mut();
            *n += 1;
            *n - 1
        };
        let mut logits = vec![0.0; self.classes];
        match self.kind {
            "perfect" => logits[self.labels[i]] = 5.0,
            _ => logits.iter_mut().for_each(|v| *v = self.rng.borrow_mut().gen()),
        }
        Ok(Inference { sr: lr.clone(), logits })
    }
}

fn scripted(kind: &'static str, labels: Vec<usize>) -> Scripted {
    Scripted {
        kind,
        classes: 4,
        labels,
        next: RefCell::new(0),
        rng: RefCell::new(rng(9)),
    }
}

#[test]
fn evaluate_with_perfect_and_identity_stubs() {
    let data: Vec<Tensor> = (0..8)
        .map(|i| random_tensor(&[2, 1, 12, 12], &mut rng(i)).map(|v| v.abs()))
        .collect();
    let labels: Vec<usize> = (0..8).map(|i| i % 4).collect();
    let items: Vec<EvalItem<'_>> = data
        .iter()
        .zip(&labels)
        .map(|(t, &label)| EvalItem { lr: t, hr: t, label })
        .collect();
    let rec = evaluate(&scripted("perfect", labels.clone()), &items, 1, 1, 2.0).unwrap();
    assert_eq!(rec.accuracy, 1.0);
    assert_eq!(rec.l1, 0.0);
    assert!((rec.ms_ssim - 1.0).abs() < 1e-12);
    assert_eq!(rec.psnr, f64::INFINITY);
    assert_eq!((rec.epoch, rec.ds, rec.df, rec.gamma), (0, 1, 1, 2.0));
    assert!(evaluate(&scripted("perfect", vec![]), &[], 1, 1, 0.0).is_err());
}

#[test]
fn evaluate_random_stub_is_at_chance() {
    let t = Tensor::full(vec![2, 1, 12, 12], 0.5);
    let n = 2000;
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let items: Vec<EvalItem<'_>> = labels.iter().map(|&label| EvalItem { lr: &t, hr: &t, label }).collect();
    let rec = evaluate(&scripted("random", labels), &items, 1, 1, 0.0).unwrap();
    let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
    assert!((rec.accuracy - 0.25).abs() < 3.0 * sigma, "{}", rec.accuracy);
}

fn tiny_data(classes: usize, per_class: usize) -> Vec<(ComplexCube, usize)> {
    let templates = standard_templates(classes).unwrap();
    generate_dataset(&templates, &RadarParams::desk(), per_class, 3).unwrap()
}

fn tiny_config(regime: Regime, d: usize) -> TrainConfig {
    TrainConfig {
        regime,
        ds: d,
        df: d,
        epochs: 2,
        batch_size: 4,
        sr: SafmnConfig {
            channels: 4,
            blocks: 1,
            ..SafmnConfig::default()
        },
        classifier: ClassifierConfig::default().with_classes(3),
        ..TrainConfig::default()
    }
}

fn prepared(data: &[(ComplexCube, usize)], config: &TrainConfig) -> Prepared {
    let mut factors = config.train_factors();
    if !factors.contains(&(config.ds, config.df)) {
        factors.push((config.ds, config.df));
    }
    Prepared::new(data, &factors, config.noise_sigma_rel, config.seed).unwrap()
}

#[test]
fn frozen_regime_keeps_pretrained_sr() {
    let data = tiny_data(3, 5);
    let cfg = tiny_config(Regime::Frozen, 2);
    let (bundle, history) = train_prepared(&prepared(&data, &cfg), &cfg).unwrap();
    let pre = history.pretrained_sr.expect("FM records its stage-1 weights");
    assert_eq!(bundle.sr[0].1.params, pre);
    let init = ModelBundle::init(&cfg).unwrap();
    assert_ne!(init.sr[0].1.params, pre, "stage 1 trained the SR model");
    assert_eq!(history.records.len(), 2);
}

#[test]
fn recursive_regime_uses_one_x2_model() {
    let cfg = tiny_config(Regime::Recursive, 4);
    let bundle = ModelBundle::init(&cfg).unwrap();
    let joint = ModelBundle::init(&tiny_config(Regime::Joint, 2)).unwrap();
    assert_eq!(bundle.sr.len(), 1);
    assert_eq!(bundle.sr_param_count(), joint.sr_param_count());
    assert_eq!(bundle.sr_for(8, 8).unwrap().1, 3);
    assert!(bundle.sr_for(3, 3).is_err());
    assert!(tiny_config(Regime::Recursive, 3).validate().is_err());
    assert!(tiny_config(Regime::Multi, 8).validate().is_err());
    assert_eq!(ModelBundle::init(&tiny_config(Regime::Multi, 2)).unwrap().sr.len(), 3);
    assert!(ModelBundle::init(&tiny_config(Regime::Cubic, 2)).unwrap().sr.is_empty());
}

#[test]
fn multi_factor_regimes_take_three_times_the_steps() {
    let data = tiny_data(3, 6);
    let mut single = tiny_config(Regime::Joint, 2);
    single.epochs = 1;
    let mut multi = tiny_config(Regime::Multi, 2);
    multi.epochs = 1;
    let mut rec = tiny_config(Regime::Recursive, 2);
    rec.epochs = 1;
    let (_, h1) = train_prepared(&prepared(&data, &single), &single).unwrap();
    let (_, h3) = train_prepared(&prepared(&data, &multi), &multi).unwrap();
    let (_, hr) = train_prepared(&prepared(&data, &rec), &rec).unwrap();
    assert_eq!(h3.steps_per_epoch, 3 * h1.steps_per_epoch);
    assert_eq!(hr.steps_per_epoch, 3 * h1.steps_per_epoch);
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = tiny_data(3, 4);
    let cfg = tiny_config(Regime::Joint, 2);
    let p = prepared(&data, &cfg);
    let (a, ha) = train_prepared(&p, &cfg).unwrap();
    let (b, hb) = train_prepared(&p, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha.records, hb.records);
    let mut other = cfg.clone();
    other.seed = 1;
    let (c, _) = train_prepared(&prepared(&data, &other), &other).unwrap();
    assert_ne!(a, c);
}

#[test]
fn zero_gamma_matches_ablated_sr_loss() {
    let data = tiny_data(3, 4);
    let mut cfg = tiny_config(Regime::Joint, 2);
    cfg.gamma = Some(0.0);
    let p = prepared(&data, &cfg);
    let (a, ha) = train_prepared(&p, &cfg).unwrap();
    cfg.gamma = Some(2.0);
    cfg.ablate_sr_loss = true;
    let (b, hb) = train_prepared(&p, &cfg).unwrap();
    assert_eq!(a.to_store().unwrap(), b.to_store().unwrap());
    for (x, y) in ha.records.iter().zip(&hb.records) {
        assert_eq!(
            (x.accuracy, x.l1, x.psnr, x.ce_loss),
            (y.accuracy, y.l1, y.psnr, y.ce_loss)
        );
    }
}

#[test]
fn labels_beyond_class_count_are_rejected() {
    let data = tiny_data(4, 2);
    let cfg = tiny_config(Regime::Cubic, 2);
    assert!(train_prepared(&prepared(&data, &cfg), &cfg).is_err());
}

#[test]
fn checkpoint_store_round_trips_bundle() {
    let cfg = tiny_config(Regime::Multi, 3);
    let bundle = ModelBundle::init(&cfg).unwrap();
    let store = bundle.to_store().unwrap();
    assert_eq!(ModelBundle::from_store(&cfg, &store).unwrap(), bundle);
    let other = tiny_config(Regime::Joint, 2);
    assert!(ModelBundle::from_store(&other, &store).is_err());
}
