use crate::tensor::{outer_inner, Tensor};

pub struct LayerNormCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

/// Normalizes over `axis` independently at every other index, then applies
/// a per-position affine map `gamma[c] * xhat + beta[c]` along that axis.
/// Variance is the biased (divide-by-count) estimate.
pub fn layer_norm_forward(
    x: &Tensor,
    axis: usize,
    gamma: &Tensor,
    beta: &Tensor,
    eps: f64,
) -> (Tensor, LayerNormCache) {
    let c = x.dim(axis);
    let (outer, inner) = outer_inner(x.shape(), axis);
    let xd = x.data();
    let mut out = vec![0.0; x.numel()];
    let mut xhat = vec![0.0; x.numel()];
    let mut rstd = vec![0.0; outer * inner];
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * c + k) * inner + i;
            let mean = (0..c).map(|k| xd[at(k)]).sum::<f64>() / c as f64;
            let var = (0..c).map(|k| (xd[at(k)] - mean).powi(2)).sum::<f64>() / c as f64;
            let r = 1.0 / (var + eps).sqrt();
            rstd[o * inner + i] = r;
            for k in 0..c {
                let xh = (xd[at(k)] - mean) * r;
                xhat[at(k)] = xh;
                out[at(k)] = xh * gamma.data()[k] + beta.data()[k];
            }
        }
    }
    (
        Tensor::new(x.shape().to_vec(), out).expect("shape"),
        LayerNormCache { xhat, rstd },
    )
}

pub fn layer_norm_backward(
    shape: &[usize],
    axis: usize,
    gamma: &Tensor,
    cache: &LayerNormCache,
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let c = shape[axis];
    let (outer, inner) = outer_inner(shape, axis);
    let gy = grad_out.data();
    let mut gx = vec![0.0; gy.len()];
    let mut gg = vec![0.0; c];
    let mut gb = vec![0.0; c];
    let cf = c as f64;
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * c + k) * inner + i;
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for k in 0..c {
                let g = gy[at(k)];
                let xh = cache.xhat[at(k)];
                gg[k] += g * xh;
                gb[k] += g;
                let gh = g * gamma.data()[k];
                sum_g += gh;
                sum_gx += gh * xh;
            }
            let r = cache.rstd[o * inner + i];
            for k in 0..c {
                let gh = gy[at(k)] * gamma.data()[k];
                gx[at(k)] = r / cf * (cf * gh - sum_g - cache.xhat[at(k)] * sum_gx);
            }
        }
    }
    (
        Tensor::new(shape.to_vec(), gx).expect("shape"),
        Tensor::new(vec![c], gg).expect("shape"),
        Tensor::new(vec![c], gb).expect("shape"),
    )
}
