//! Independent oracles shared by the integration tests: central finite
//! differences, a naive O(N^2) DFT and seeded random tensors.

#![allow(dead_code)]

pub mod suite;

use radgest_core::{Result, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| rng.gen_range(-1.0..1.0))
}

/// Builds a scalar from the inputs. Implementations must be pure.
pub trait ScalarFn: Fn(&mut Tape, &[Var]) -> Result<Var> {}
impl<F: Fn(&mut Tape, &[Var]) -> Result<Var>> ScalarFn for F {}

fn evaluate(inputs: &[Tensor], f: &impl ScalarFn) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = f(&mut tape, &vars).expect("forward");
    tape.value(out).item()
}

/// Autodiff gradient of `f` with respect to every input.
pub fn autodiff_grads(inputs: &[Tensor], f: &impl ScalarFn) -> Vec<Tensor> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars).expect("forward");
    let mut grads = tape.backward(out).expect("backward");
    vars.iter()
        .zip(inputs)
        .map(|(&v, t)| grads.take(v).unwrap_or_else(|| Tensor::zeros(t.shape().to_vec())))
        .collect()
}

/// Central finite differences `(f(x + h) - f(x - h)) / 2h` per element.
pub fn numeric_grads(inputs: &[Tensor], f: &impl ScalarFn) -> Vec<Tensor> {
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[i].shape().to_vec());
        for k in 0..inputs[i].numel() {
            let orig = work[i].data()[k];
            work[i].data_mut()[k] = orig + FD_STEP;
            let up = evaluate(&work, f);
            work[i].data_mut()[k] = orig - FD_STEP;
            let down = evaluate(&work, f);
            work[i].data_mut()[k] = orig;
            g.data_mut()[k] = (up - down) / (2.0 * FD_STEP);
        }
        out.push(g);
    }
    out
}

/// Largest elementwise discrepancy relative to the larger of the two
/// gradients' max-norms.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let scale = analytic
        .data()
        .iter()
        .chain(numeric.data())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale < 1e-12 {
        return analytic.max_abs_diff(numeric);
    }
    analytic.max_abs_diff(numeric) / scale
}

/// Worst relative error over all inputs of `f`.
pub fn gradient_check(inputs: &[Tensor], f: impl ScalarFn) -> f64 {
    let a = autodiff_grads(inputs, &f);
    let n = numeric_grads(inputs, &f);
    a.iter().zip(&n).map(|(a, n)| relative_error(a, n)).fold(0.0, f64::max)
}

/// Contracts a tensor to a scalar with fixed pseudo-random weights so that
/// no gradient is trivially constant.
pub fn weighted_sum(tape: &mut Tape, x: Var, seed: u64) -> Result<Var> {
    let mut r = rng(seed ^ 0x5eed);
    let w = random_tensor(tape.value(x).shape(), &mut r);
    let w = tape.constant(w);
    let p = tape.mul(x, w)?;
    Ok(tape.sum(p))
}

/// Textbook DFT with the exp(-2 pi i f m / n) kernel.
pub fn naive_dft(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = re.len();
    let mut out_re = vec![0.0; n];
    let mut out_im = vec![0.0; n];
    for f in 0..n {
        for m in 0..n {
            let angle = -2.0 * std::f64::consts::PI * ((f * m) % n) as f64 / n as f64;
            let (s, c) = angle.sin_cos();
            out_re[f] += re[m] * c - im[m] * s;
            out_im[f] += re[m] * s + im[m] * c;
        }
    }
    (out_re, out_im)
}
