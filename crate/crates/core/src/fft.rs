//! Complex FFT kernels on split re/im buffers.
//!
//! Power-of-two lengths use an iterative radix-2 transform; every other
//! length goes through Bluestein's chirp-z algorithm on a padded radix-2
//! convolution.

use std::f64::consts::PI;

pub struct FftPlan {
    len: usize,
    kind: PlanKind,
}

enum PlanKind {
    Trivial,
    Radix2(Radix2),
    Bluestein(Box<Bluestein>),
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        let kind = if len <= 1 {
            PlanKind::Trivial
        } else if len.is_power_of_two() {
            PlanKind::Radix2(Radix2::new(len))
        } else {
            PlanKind::Bluestein(Box::new(Bluestein::new(len)))
        };
        FftPlan { len, kind }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform with the `exp(-2 pi i k n / len)` kernel.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        assert_eq!(re.len(), self.len);
        assert_eq!(im.len(), self.len);
        match &self.kind {
            PlanKind::Trivial => {}
            PlanKind::Radix2(r) => r.forward(re, im),
            PlanKind::Bluestein(b) => b.forward(re, im),
        }
    }
}

struct Radix2 {
    len: usize,
    // twiddles[k] = exp(-2 pi i k / len) for k < len / 2
    tw_re: Vec<f64>,
    tw_im: Vec<f64>,
}

impl Radix2 {
    fn new(len: usize) -> Self {
        let half = len / 2;
        let (tw_re, tw_im) = (0..half)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / len as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        Radix2 { len, tw_re, tw_im }
    }

    fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.len;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let step = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let (wr, wi) = (self.tw_re[k * step], self.tw_im[k * step]);
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            size *= 2;
        }
    }
}

struct Bluestein {
    len: usize,
    inner: Radix2,
    // chirp[k] = exp(-i pi k^2 / len)
    chirp_re: Vec<f64>,
    chirp_im: Vec<f64>,
    // forward FFT of the conjugate chirp filter, padded to inner.len
    filt_re: Vec<f64>,
    filt_im: Vec<f64>,
}

impl Bluestein {
    fn new(len: usize) -> Self {
        let m = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(m);
        let two_n = 2 * len as u128;
        let (chirp_re, chirp_im): (Vec<f64>, Vec<f64>) = (0..len)
            .map(|k| {
                // Reduce k^2 mod 2n before scaling so large k keep full precision.
                let k2 = (k as u128 * k as u128) % two_n;
                let a = -PI * k2 as f64 / len as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        let mut filt_re = vec![0.0; m];
        let mut filt_im = vec![0.0; m];
        filt_re[0] = chirp_re[0];
        filt_im[0] = -chirp_im[0];
        for k in 1..len {
            filt_re[k] = chirp_re[k];
            filt_im[k] = -chirp_im[k];
            filt_re[m - k] = chirp_re[k];
            filt_im[m - k] = -chirp_im[k];
        }
        inner.forward(&mut filt_re, &mut filt_im);
        Bluestein {
            len,
            inner,
            chirp_re,
            chirp_im,
            filt_re,
            filt_im,
        }
    }

    fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let m = self.inner.len;
        let mut a_re = vec![0.0; m];
        let mut a_im = vec![0.0; m];
        for k in 0..self.len {
            let (cr, ci) = (self.chirp_re[k], self.chirp_im[k]);
            a_re[k] = re[k] * cr - im[k] * ci;
            a_im[k] = re[k] * ci + im[k] * cr;
        }
        self.inner.forward(&mut a_re, &mut a_im);
        for k in 0..m {
            let (fr, fi) = (self.filt_re[k], self.filt_im[k]);
            let (ar, ai) = (a_re[k], a_im[k]);
            // Multiply, then conjugate so the next forward pass acts as an inverse.
            a_re[k] = ar * fr - ai * fi;
            a_im[k] = -(ar * fi + ai * fr);
        }
        self.inner.forward(&mut a_re, &mut a_im);
        let scale = 1.0 / m as f64;
        for k in 0..self.len {
            let cr = a_re[k] * scale;
            let ci = -a_im[k] * scale;
            let (wr, wi) = (self.chirp_re[k], self.chirp_im[k]);
            re[k] = cr * wr - ci * wi;
            im[k] = cr * wi + ci * wr;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = re.len();
        let mut or = vec![0.0; n];
        let mut oi = vec![0.0; n];
        for f in 0..n {
            for m in 0..n {
                let a = -2.0 * PI * ((f * m) % n) as f64 / n as f64;
                or[f] += re[m] * a.cos() - im[m] * a.sin();
                oi[f] += re[m] * a.sin() + im[m] * a.cos();
            }
        }
        (or, oi)
    }

    #[test]
    fn matches_naive_for_small_lengths() {
        for n in 1..=20 {
            let mut re: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
            let mut im: Vec<f64> = (0..n).map(|i| ((i * 5 + 1) % 7) as f64 * 0.5).collect();
            let (nr, ni) = naive(&re, &im);
            FftPlan::new(n).forward(&mut re, &mut im);
            for k in 0..n {
                assert!((re[k] - nr[k]).abs() < 1e-9, "n={n} k={k}");
                assert!((im[k] - ni[k]).abs() < 1e-9, "n={n} k={k}");
            }
        }
    }
}
