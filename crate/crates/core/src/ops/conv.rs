use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dOpts {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for Conv2dOpts {
    fn default() -> Self {
        Conv2dOpts {
            stride: 1,
            padding: 0,
            groups: 1,
        }
    }
}

impl Conv2dOpts {
    pub fn same3x3() -> Self {
        Conv2dOpts {
            padding: 1,
            ..Default::default()
        }
    }

    pub fn depthwise3x3(channels: usize) -> Self {
        Conv2dOpts {
            padding: 1,
            groups: channels,
            ..Default::default()
        }
    }
}

pub fn conv2d_out_dim(input: usize, kernel: usize, opts: Conv2dOpts) -> Option<usize> {
    let padded = input + 2 * opts.padding;
    (padded >= kernel).then(|| (padded - kernel) / opts.stride + 1)
}

/// Range of output columns whose tap `k` lands inside `[0, input)`.
#[inline]
fn valid_range(out_len: usize, input: usize, k: usize, opts: Conv2dOpts) -> (usize, usize) {
    let (s, p) = (opts.stride, opts.padding);
    let lo = if p > k { (p - k).div_ceil(s) } else { 0 };
    let hi = if input + p > k {
        (input + p - k).div_ceil(s).min(out_len)
    } else {
        0
    };
    (lo, hi.max(lo))
}

struct Geometry {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    cin_g: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    cout_g: usize,
}

fn geometry(x: &[usize], w: &[usize], opts: Conv2dOpts) -> Geometry {
    let (n, cin, h, wd) = (x[0], x[1], x[2], x[3]);
    let (cout, cin_g, kh, kw) = (w[0], w[1], w[2], w[3]);
    let ho = conv2d_out_dim(h, kh, opts).expect("validated");
    let wo = conv2d_out_dim(wd, kw, opts).expect("validated");
    Geometry {
        n,
        cin,
        h,
        w: wd,
        cout,
        cin_g,
        kh,
        kw,
        ho,
        wo,
        cout_g: cout / opts.groups,
    }
}

/// Visits every (output row, input row, weight) triple of a 2-D
/// cross-correlation. The callback receives flat offsets of the output row,
/// input row, weight element and the valid output column range.
#[inline]
fn visit(g: &Geometry, opts: Conv2dOpts, mut f: impl FnMut(usize, usize, usize, usize, (usize, usize))) {
    for b in 0..g.n {
        for oc in 0..g.cout {
            let group = oc / g.cout_g;
            for icl in 0..g.cin_g {
                let ic = group * g.cin_g + icl;
                for ky in 0..g.kh {
                    let (oy_lo, oy_hi) = valid_range(g.ho, g.h, ky, opts);
                    for kx in 0..g.kw {
                        let w_idx = ((oc * g.cin_g + icl) * g.kh + ky) * g.kw + kx;
                        let cols = valid_range(g.wo, g.w, kx, opts);
                        if cols.0 >= cols.1 {
                            continue;
                        }
                        for oy in oy_lo..oy_hi {
                            let iy = oy * opts.stride + ky - opts.padding;
                            let out_row = ((b * g.cout + oc) * g.ho + oy) * g.wo;
                            // Column offset of tap kx is applied by the callback.
                            let in_row = ((b * g.cin + ic) * g.h + iy) * g.w;
                            f(out_row, in_row, w_idx, kx, cols);
                        }
                    }
                }
            }
        }
    }
}

/// `c = op(a) * op(b) + beta * c` for row-major `op(a): m x k`, `op(b): k x n`.
/// A transposed operand is stored in its untransposed row-major layout.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    let (rsa, csa) = if a_t { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_t { (1, k) } else { (n, 1) };
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the strides above address exactly the m*k, k*n and m*n
    // elements whose presence the assertion checks.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn is_pointwise(g: &Geometry, opts: Conv2dOpts) -> bool {
    g.kh == 1 && g.kw == 1 && opts.stride == 1 && opts.padding == 0
}

/// Unfolds sample `b` into `[cin * kh * kw, ho * wo]` patch columns.
fn im2col(xd: &[f64], g: &Geometry, opts: Conv2dOpts, b: usize, cols: &mut [f64]) {
    let plane = g.ho * g.wo;
    for ic in 0..g.cin {
        let img = &xd[(b * g.cin + ic) * g.h * g.w..][..g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = &mut cols[((ic * g.kh + ky) * g.kw + kx) * plane..][..plane];
                row.fill(0.0);
                let (ylo, yhi) = valid_range(g.ho, g.h, ky, opts);
                let (xlo, xhi) = valid_range(g.wo, g.w, kx, opts);
                for oy in ylo..yhi {
                    let iy = oy * opts.stride + ky - opts.padding;
                    for ox in xlo..xhi {
                        row[oy * g.wo + ox] = img[iy * g.w + ox * opts.stride + kx - opts.padding];
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patch columns back into sample `b`.
fn col2im(cols: &[f64], g: &Geometry, opts: Conv2dOpts, b: usize, gx: &mut [f64]) {
    let plane = g.ho * g.wo;
    for ic in 0..g.cin {
        let img = &mut gx[(b * g.cin + ic) * g.h * g.w..][..g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = &cols[((ic * g.kh + ky) * g.kw + kx) * plane..][..plane];
                let (ylo, yhi) = valid_range(g.ho, g.h, ky, opts);
                let (xlo, xhi) = valid_range(g.wo, g.w, kx, opts);
                for oy in ylo..yhi {
                    let iy = oy * opts.stride + ky - opts.padding;
                    for ox in xlo..xhi {
                        img[iy * g.w + ox * opts.stride + kx - opts.padding] += row[oy * g.wo + ox];
                    }
                }
            }
        }
    }
}

fn dense_forward(x: &Tensor, w: &Tensor, g: &Geometry, opts: Conv2dOpts, out: &mut [f64]) {
    let (plane, kdim) = (g.ho * g.wo, g.cin * g.kh * g.kw);
    let mut cols = vec![0.0; kdim * plane];
    for b in 0..g.n {
        let src = if is_pointwise(g, opts) {
            &x.data()[b * g.cin * plane..][..kdim * plane]
        } else {
            im2col(x.data(), g, opts, b, &mut cols);
            &cols
        };
        let dst = &mut out[b * g.cout * plane..][..g.cout * plane];
        gemm(g.cout, kdim, plane, w.data(), false, src, false, 1.0, dst);
    }
}

fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    gy: &[f64],
    g: &Geometry,
    opts: Conv2dOpts,
    gx: Option<&mut [f64]>,
    gw: Option<&mut [f64]>,
) {
    let (plane, kdim) = (g.ho * g.wo, g.cin * g.kh * g.kw);
    let pointwise = is_pointwise(g, opts);
    let mut cols = vec![0.0; kdim * plane];
    if let Some(gw) = gw {
        for b in 0..g.n {
            let src = if pointwise {
                &x.data()[b * g.cin * plane..][..kdim * plane]
            } else {
                im2col(x.data(), g, opts, b, &mut cols);
                &cols
            };
            let gyb = &gy[b * g.cout * plane..][..g.cout * plane];
            gemm(g.cout, plane, kdim, gyb, false, src, true, 1.0, gw);
        }
    }
    if let Some(gx) = gx {
        for b in 0..g.n {
            let gyb = &gy[b * g.cout * plane..][..g.cout * plane];
            if pointwise {
                let dst = &mut gx[b * g.cin * plane..][..kdim * plane];
                gemm(kdim, g.cout, plane, w.data(), true, gyb, false, 1.0, dst);
            } else {
                gemm(kdim, g.cout, plane, w.data(), true, gyb, false, 0.0, &mut cols);
                col2im(&cols, g, opts, b, gx);
            }
        }
    }
}

pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>, opts: Conv2dOpts) -> Tensor {
    let g = geometry(x.shape(), w.shape(), opts);
    let mut out = vec![0.0; g.n * g.cout * g.ho * g.wo];
    if let Some(b) = b {
        let plane = g.ho * g.wo;
        for (i, chunk) in out.chunks_mut(plane).enumerate() {
            chunk.fill(b.data()[i % g.cout]);
        }
    }
    if opts.groups == 1 {
        dense_forward(x, w, &g, opts, &mut out);
        return Tensor::new(vec![g.n, g.cout, g.ho, g.wo], out).expect("conv2d output shape");
    }
    let (xd, wd) = (x.data(), w.data());
    let (s, p) = (opts.stride, opts.padding);
    visit(&g, opts, |out_row, in_row, w_idx, kx, (lo, hi)| {
        let wv = wd[w_idx];
        if s == 1 {
            let shift = in_row + kx;
            let src = &xd[shift + lo - p..shift + hi - p];
            for (o, &v) in out[out_row + lo..out_row + hi].iter_mut().zip(src) {
                *o += wv * v;
            }
        } else {
            for ox in lo..hi {
                out[out_row + ox] += wv * xd[in_row + ox * s + kx - p];
            }
        }
    });
    Tensor::new(vec![g.n, g.cout, g.ho, g.wo], out).expect("conv2d output shape")
}

/// Gradients of conv2d with respect to input, weight and bias.
pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
    opts: Conv2dOpts,
    need_x: bool,
    need_w: bool,
    need_b: bool,
) -> (Option<Tensor>, Option<Tensor>, Option<Tensor>) {
    let g = geometry(x.shape(), w.shape(), opts);
    let (xd, wd, gy) = (x.data(), w.data(), grad_out.data());
    let (s, p) = (opts.stride, opts.padding);
    let dense = opts.groups == 1;
    let mut gx = need_x.then(|| vec![0.0; x.numel()]);
    let mut gw = need_w.then(|| vec![0.0; w.numel()]);
    if dense {
        dense_backward(x, w, gy, &g, opts, gx.as_deref_mut(), gw.as_deref_mut());
    }
    let gx = gx.map(|mut gx| {
        if dense {
            return Tensor::new(x.shape().to_vec(), gx).expect("shape");
        }
        visit(&g, opts, |out_row, in_row, w_idx, kx, (lo, hi)| {
            let wv = wd[w_idx];
            if s == 1 {
                let shift = in_row + kx;
                let dst = &mut gx[shift + lo - p..shift + hi - p];
                for (d, &v) in dst.iter_mut().zip(&gy[out_row + lo..out_row + hi]) {
                    *d += wv * v;
                }
            } else {
                for ox in lo..hi {
                    gx[in_row + ox * s + kx - p] += wv * gy[out_row + ox];
                }
            }
        });
        Tensor::new(x.shape().to_vec(), gx).expect("shape")
    });
    let gw = gw.map(|mut gw| {
        if dense {
            return Tensor::new(w.shape().to_vec(), gw).expect("shape");
        }
        visit(&g, opts, |out_row, in_row, w_idx, kx, (lo, hi)| {
            let mut acc = 0.0;
            if s == 1 {
                let shift = in_row + kx;
                let src = &xd[shift + lo - p..shift + hi - p];
                for (&a, &v) in gy[out_row + lo..out_row + hi].iter().zip(src) {
                    acc += a * v;
                }
            } else {
                for ox in lo..hi {
                    acc += gy[out_row + ox] * xd[in_row + ox * s + kx - p];
                }
            }
            gw[w_idx] += acc;
        });
        Tensor::new(w.shape().to_vec(), gw).expect("shape")
    });
    let gb = need_b.then(|| {
        let plane = g.ho * g.wo;
        let mut gb = vec![0.0; g.cout];
        for (i, chunk) in gy.chunks(plane).enumerate() {
            gb[i % g.cout] += chunk.iter().sum::<f64>();
        }
        Tensor::new(vec![g.cout], gb).expect("shape")
    });
    (gx, gw, gb)
}

/// Dilated 1-D cross-correlation over `[N, C, T]`. With `causal` the input
/// is left-padded by `(k - 1) * dilation` so the output keeps length `T`.
pub fn conv1d_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>, dilation: usize, causal: bool) -> Tensor {
    let (n, cin, t) = (x.dim(0), x.dim(1), x.dim(2));
    let (cout, k) = (w.dim(0), w.dim(2));
    let reach = (k - 1) * dilation;
    let tout = if causal { t } else { t - reach };
    let pad = if causal { reach } else { 0 };
    let mut out = vec![0.0; n * cout * tout];
    for bi in 0..n {
        for o in 0..cout {
            let row = &mut out[(bi * cout + o) * tout..(bi * cout + o + 1) * tout];
            if let Some(b) = b {
                row.fill(b.data()[o]);
            }
            for c in 0..cin {
                let xrow = &x.data()[(bi * cin + c) * t..(bi * cin + c + 1) * t];
                for j in 0..k {
                    let wv = w.data()[(o * cin + c) * k + j];
                    // input index = to + j*dilation - pad
                    let offset = j * dilation;
                    let lo = pad.saturating_sub(offset);
                    for to in lo..tout {
                        row[to] += wv * xrow[to + offset - pad];
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, cout, tout], out).expect("conv1d shape")
}

pub fn conv1d_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
    dilation: usize,
    causal: bool,
) -> (Tensor, Tensor, Tensor) {
    let (n, cin, t) = (x.dim(0), x.dim(1), x.dim(2));
    let (cout, k) = (w.dim(0), w.dim(2));
    let tout = grad_out.dim(2);
    let pad = if causal { (k - 1) * dilation } else { 0 };
    let mut gx = vec![0.0; x.numel()];
    let mut gw = vec![0.0; w.numel()];
    let mut gb = vec![0.0; cout];
    let gy = grad_out.data();
    for bi in 0..n {
        for o in 0..cout {
            let grow = &gy[(bi * cout + o) * tout..(bi * cout + o + 1) * tout];
            gb[o] += grow.iter().sum::<f64>();
            for c in 0..cin {
                let base = (bi * cin + c) * t;
                for j in 0..k {
                    let widx = (o * cin + c) * k + j;
                    let wv = w.data()[widx];
                    let offset = j * dilation;
                    let lo = pad.saturating_sub(offset);
                    let mut acc = 0.0;
                    for to in lo..tout {
                        let ti = base + to + offset - pad;
                        acc += grow[to] * x.data()[ti];
                        gx[ti] += wv * grow[to];
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
    (
        Tensor::new(x.shape().to_vec(), gx).expect("shape"),
        Tensor::new(w.shape().to_vec(), gw).expect("shape"),
        Tensor::new(vec![cout], gb).expect("shape"),
    )
}

/// `y = x w^T + b` for `x: [N, in]`, `w: [out, in]`.
pub fn linear_forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Tensor {
    let (n, fin) = (x.dim(0), x.dim(1));
    let fout = w.dim(0);
    let mut out = vec![0.0; n * fout];
    for i in 0..n {
        let xr = &x.data()[i * fin..(i + 1) * fin];
        for o in 0..fout {
            let wr = &w.data()[o * fin..(o + 1) * fin];
            let dot: f64 = xr.iter().zip(wr).map(|(a, b)| a * b).sum();
            out[i * fout + o] = dot + b.map_or(0.0, |b| b.data()[o]);
        }
    }
    Tensor::new(vec![n, fout], out).expect("linear shape")
}

pub fn linear_backward(x: &Tensor, w: &Tensor, grad_out: &Tensor) -> (Tensor, Tensor, Tensor) {
    let (n, fin) = (x.dim(0), x.dim(1));
    let fout = w.dim(0);
    let gy = grad_out.data();
    let mut gx = vec![0.0; n * fin];
    let mut gw = vec![0.0; fout * fin];
    let mut gb = vec![0.0; fout];
    for i in 0..n {
        let xr = &x.data()[i * fin..(i + 1) * fin];
        for o in 0..fout {
            let g = gy[i * fout + o];
            gb[o] += g;
            let wr = &w.data()[o * fin..(o + 1) * fin];
            for f in 0..fin {
                gx[i * fin + f] += g * wr[f];
                gw[o * fin + f] += g * xr[f];
            }
        }
    }
    (
        Tensor::new(vec![n, fin], gx).expect("shape"),
        Tensor::new(vec![fout, fin], gw).expect("shape"),
        Tensor::new(vec![fout], gb).expect("shape"),
    )
}
