use crate::tensor::Tensor;

/// Row window `[floor(i*len/out), ceil((i+1)*len/out))` of adaptive pooling.
#[inline]
pub fn adaptive_window(i: usize, len: usize, out: usize) -> (usize, usize) {
    let start = i * len / out;
    let end = ((i + 1) * len).div_ceil(out);
    (start, end)
}

/// Adaptive max pooling over the two trailing axes of `[N, C, H, W]`.
/// Returns the pooled tensor and the flat input index of every maximum
/// (first occurrence wins ties).
pub fn adaptive_max_pool2d_forward(x: &Tensor, oh: usize, ow: usize) -> (Tensor, Vec<usize>) {
    let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let planes = n * c;
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut argmax = Vec::with_capacity(planes * oh * ow);
    let xd = x.data();
    for p in 0..planes {
        let base = p * h * w;
        for i in 0..oh {
            let (r0, r1) = adaptive_window(i, h, oh);
            for j in 0..ow {
                let (c0, c1) = adaptive_window(j, w, ow);
                let mut best = base + r0 * w + c0;
                for r in r0..r1 {
                    for col in c0..c1 {
                        let idx = base + r * w + col;
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                }
                out.push(xd[best]);
                argmax.push(best);
            }
        }
    }
    (Tensor::new(vec![n, c, oh, ow], out).expect("pool shape"), argmax)
}

pub fn scatter_argmax(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Tensor {
    let mut gx = Tensor::zeros(input_shape.to_vec());
    let gd = gx.data_mut();
    for (&src, &g) in argmax.iter().zip(grad_out.data()) {
        gd[src] += g;
    }
    gx
}

/// Nearest-neighbour resize: `out[i, j] = in[floor(i*H/oh), floor(j*W/ow)]`.
pub fn nearest_forward(x: &Tensor, oh: usize, ow: usize) -> Tensor {
    let (n, c, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let cols: Vec<usize> = (0..ow).map(|j| j * w / ow).collect();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for p in 0..n * c {
        for i in 0..oh {
            let row = &x.data()[(p * h + i * h / oh) * w..][..w];
            out.extend(cols.iter().map(|&j| row[j]));
        }
    }
    Tensor::new(vec![n, c, oh, ow], out).expect("nearest shape")
}

pub fn nearest_backward(input_shape: &[usize], grad_out: &Tensor) -> Tensor {
    let (n, c, h, w) = (input_shape[0], input_shape[1], input_shape[2], input_shape[3]);
    let (oh, ow) = (grad_out.dim(2), grad_out.dim(3));
    let mut gx = Tensor::zeros(input_shape.to_vec());
    let gd = gx.data_mut();
    let gy = grad_out.data();
    for p in 0..n * c {
        for i in 0..oh {
            let src_row = (p * h + i * h / oh) * w;
            for j in 0..ow {
                gd[src_row + j * w / ow] += gy[(p * oh + i) * ow + j];
            }
        }
    }
    gx
}

/// `[N, C*ds*df, H, W] -> [N, C, H*ds, W*df]` with
/// `out[c, h*ds + i, w*df + j] = in[c*ds*df + i*df + j, h, w]`.
pub fn pixel_shuffle_forward(x: &Tensor, ds: usize, df: usize) -> Tensor {
    let (n, cin, h, w) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    let c = cin / (ds * df);
    let (oh, ow) = (h * ds, w * df);
    let mut out = vec![0.0; x.numel()];
    let xd = x.data();
    for b in 0..n {
        for ch in 0..c {
            for i in 0..ds {
                for j in 0..df {
                    let src_plane = (b * cin + ch * ds * df + i * df + j) * h * w;
                    for y in 0..h {
                        let dst_row = ((b * c + ch) * oh + y * ds + i) * ow;
                        for xw in 0..w {
                            out[dst_row + xw * df + j] = xd[src_plane + y * w + xw];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, c, oh, ow], out).expect("pixel shuffle shape")
}

/// `[N, C, H, W] -> [N, C]` mean over the spatial plane.
pub fn spatial_mean_forward(x: &Tensor) -> Tensor {
    let (n, c) = (x.dim(0), x.dim(1));
    let plane = x.numel() / (n * c);
    let data = x
        .data()
        .chunks(plane)
        .map(|p| p.iter().sum::<f64>() / plane as f64)
        .collect();
    Tensor::new(vec![n, c], data).expect("mean shape")
}
