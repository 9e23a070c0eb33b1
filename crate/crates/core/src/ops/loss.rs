use crate::tensor::Tensor;

/// Softmax rows of `[N, C]` logits, stabilized by max-subtraction.
pub fn softmax_rows(logits: &Tensor) -> Vec<f64> {
    let c = logits.dim(1);
    let mut out = Vec::with_capacity(logits.numel());
    for row in logits.data().chunks(c) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / z));
    }
    out
}

/// Mean over the batch of `-log softmax(logits)[label]`.
pub fn cross_entropy_forward(logits: &Tensor, labels: &[usize]) -> f64 {
    let c = logits.dim(1);
    let total: f64 = logits
        .data()
        .chunks(c)
        .zip(labels)
        .map(|(row, &y)| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[y]
        })
        .sum();
    total / labels.len() as f64
}

/// Mean absolute difference.
pub fn l1_forward(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.numel() as f64
}

/// Subgradient of `|a - b|` with respect to `a`; zero at equality.
#[inline]
pub fn abs_diff_sign(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else if a < b {
        -1.0
    } else {
        0.0
    }
}
