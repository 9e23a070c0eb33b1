//! Pulse-radar echo simulation for hands modelled as a handful of point scatterers.

mod templates;

pub use templates::{generate_dataset, standard_templates, ClassTemplate, GestureKind};

use crate::error::{Error, Result};
use crate::tensor::ComplexTensor;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radar front-end and acquisition geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct RadarParams {
    /// Carrier frequency in Hz.
    pub f_c: f64,
    /// Pulse repetition frequency in Hz.
    pub prf: f64,
    /// Pulses per frame.
    pub m: usize,
    /// Fast-time samples per pulse.
    pub n: usize,
    /// Frames per recording.
    pub k: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Pulse duration in seconds.
    pub pulse_duration: f64,
    pub a_tx: f64,
}

impl Default for RadarParams {
    fn default() -> Self {
        RadarParams::with_geometry(70e9, 256.0, 5, 32, 492, 0.10, 0.30)
    }
}

impl RadarParams {
    /// Builds parameters whose pulse spans three range bins.
    pub fn with_geometry(f_c: f64, prf: f64, k: usize, m: usize, n: usize, r_min: f64, r_max: f64) -> Self {
        let mut p = RadarParams {
            f_c,
            prf,
            m,
            n,
            k,
            r_min,
            r_max,
            pulse_duration: 0.0,
            a_tx: 1.0,
        };
        p.pulse_duration = 3.0 * p.range_bin() * 2.0 / SPEED_OF_LIGHT;
        p
    }

    /// Small cube used for CPU-scale experiments: (3, 16, 64) over 10-30 cm.
    pub fn desk() -> Self {
        RadarParams::with_geometry(70e9, 256.0, 3, 16, 64, 0.10, 0.30)
    }

    pub fn range_bin(&self) -> f64 {
        (self.r_max - self.r_min) / self.n as f64
    }

    pub fn pulse_interval(&self) -> f64 {
        1.0 / self.prf
    }

    pub fn range_of_bin(&self, n: usize) -> f64 {
        self.r_min + n as f64 * self.range_bin()
    }

    /// Range extent covered by the transmitted pulse, `d * c / 2`.
    pub fn pulse_range_width(&self) -> f64 {
        self.pulse_duration * SPEED_OF_LIGHT / 2.0
    }

    /// Doppler shift in Hz of a target moving at radial velocity `v` (positive = receding).
    pub fn doppler_hz(&self, v: f64) -> f64 {
        -2.0 * v * self.f_c / SPEED_OF_LIGHT
    }

    /// Slow-time DFT bin where a target at velocity `v` appears.
    pub fn doppler_bin(&self, v: f64) -> usize {
        let bins = (self.doppler_hz(v) / (self.prf / self.m as f64)).round() as i64;
        bins.rem_euclid(self.m as i64) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("f_c", self.f_c)?;
        positive("prf", self.prf)?;
        positive("pulse_duration", self.pulse_duration)?;
        if !(self.a_tx.is_finite() && self.a_tx >= 0.0) {
            return Err(Error::config(format!("a_tx must be non-negative, got {}", self.a_tx)));
        }
        for (name, v) in [("m", self.m), ("n", self.n), ("k", self.k)] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if !(self.r_min.is_finite() && self.r_max.is_finite() && self.r_min < self.r_max) {
            return Err(Error::config(format!(
                "r_min ({}) must be below r_max ({})",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }
}

/// Time-varying scalar used for scatterer range and reflectivity.
#[derive(Clone, Debug, PartialEq)]
pub enum Motion {
    Constant(f64),
    Linear {
        start: f64,
        rate: f64,
    },
    Sinusoid {
        center: f64,
        amplitude: f64,
        freq_hz: f64,
        phase: f64,
    },
    /// Segment `i` is active from `starts[i]` (absolute time) until the next start.
    Piecewise {
        starts: Vec<f64>,
        segments: Vec<Motion>,
    },
}

impl Motion {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Motion::Constant(v) => *v,
            Motion::Linear { start, rate } => start + rate * t,
            Motion::Sinusoid {
                center,
                amplitude,
                freq_hz,
                phase,
            } => center + amplitude * (2.0 * std::f64::consts::PI * freq_hz * t + phase).sin(),
            Motion::Piecewise { starts, segments } => {
                let i = starts.iter().rposition(|&s| s <= t).unwrap_or(0);
                segments.get(i).map_or(0.0, |m| m.eval(t))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scatterer {
    pub range: Motion,
    pub rcs: Motion,
}

impl Scatterer {
    pub fn fixed(range: f64, rcs: f64) -> Self {
        Scatterer {
            range: Motion::Constant(range),
            rcs: Motion::Constant(rcs),
        }
    }

    pub fn moving(start: f64, velocity: f64, rcs: f64) -> Self {
        Scatterer {
            range: Motion::Linear { start, rate: velocity },
            rcs: Motion::Constant(rcs),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GestureScene {
    pub radar: RadarParams,
    pub scatterers: Vec<Scatterer>,
    pub label: usize,
    pub rng_seed: u64,
}

/// Complex baseband recording of shape (K, M, N), frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexCube {
    data: ComplexTensor,
}

impl ComplexCube {
    pub fn zeros(k: usize, m: usize, n: usize) -> Self {
        ComplexCube {
            data: ComplexTensor::zeros(vec![k, m, n]),
        }
    }

    pub fn new(k: usize, m: usize, n: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        Ok(ComplexCube {
            data: ComplexTensor::new(vec![k, m, n], re, im)?,
        })
    }

    pub fn from_tensor(data: ComplexTensor) -> Result<Self> {
        if data.shape().len() != 3 {
            return Err(Error::Rank {
                op: "ComplexCube",
                expected: 3,
                got: data.shape().to_vec(),
            });
        }
        Ok(ComplexCube { data })
    }

    /// `(K, M, N)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.data.shape();
        (s[0], s[1], s[2])
    }

    pub fn len(&self) -> usize {
        self.data.numel()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, k: usize, m: usize, n: usize) -> usize {
        let (_, mm, nn) = self.dims();
        (k * mm + m) * nn + n
    }

    pub fn get(&self, k: usize, m: usize, n: usize) -> (f64, f64) {
        let i = self.index(k, m, n);
        (self.data.re()[i], self.data.im()[i])
    }

    pub fn re(&self) -> &[f64] {
        self.data.re()
    }

    pub fn im(&self) -> &[f64] {
        self.data.im()
    }

    pub fn parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        self.data.parts_mut()
    }

    pub fn as_tensor(&self) -> &ComplexTensor {
        &self.data
    }

    pub fn into_tensor(self) -> ComplexTensor {
        self.data
    }

    pub fn all_finite(&self) -> bool {
        self.re().iter().chain(self.im()).all(|v| v.is_finite())
    }
}

/// Renders the baseband echo of every scatterer onto the (K, M, N) sampling grid.
pub fn synthesize_cube(scene: &GestureScene) -> Result<ComplexCube> {
    let p = &scene.radar;
    p.validate()?;
    let (k, m, n) = (p.k, p.m, p.n);
    let mut cube = ComplexCube::zeros(k, m, n);
    let dr = p.range_bin();
    let half = p.pulse_range_width() / 2.0;
    let tp = p.pulse_interval();
    let wavenumber = 2.0 * std::f64::consts::PI * p.f_c * 2.0 / SPEED_OF_LIGHT;
    let (re, im) = cube.parts_mut();
    for (si, s) in scene.scatterers.iter().enumerate() {
        for pulse in 0..k * m {
            let t = pulse as f64 * tp;
            let raw = s.range.eval(t);
            if !(raw > 0.0) {
                return Err(Error::arg(format!(
                    "scatterer {si} has non-positive range {raw} at t={t}s"
                )));
            }
            let r = raw.clamp(p.r_min, p.r_max);
            let rcs = s.rcs.eval(t).max(0.0);
            let amp = rcs * (p.a_tx / r.powi(4));
            if amp == 0.0 {
                continue;
            }
            let (sin, cos) = (-wavenumber * r).sin_cos();
            let (a_re, a_im) = (amp * cos, amp * sin);
            // Bins whose offset from the scatterer lies in [-half, half).
            let lo = ((r - half - p.r_min) / dr).floor().max(0.0) as usize;
            let base = pulse * n;
            for bin in lo..n {
                let offset = p.range_of_bin(bin) - r;
                if offset >= half {
                    break;
                }
                if offset < -half {
                    continue;
                }
                re[base + bin] += a_re;
                im[base + bin] += a_im;
            }
        }
    }
    Ok(cube)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(scatterers: Vec<Scatterer>) -> GestureScene {
        GestureScene {
            radar: RadarParams::default(),
            scatterers,
            label: 0,
            rng_seed: 0,
        }
    }

    #[test]
    fn default_geometry() {
        let p = RadarParams::default();
        assert!((p.range_bin() - 0.2 / 492.0).abs() < 1e-15);
        assert!((p.pulse_range_width() - 3.0 * p.range_bin()).abs() < 1e-15);
        assert_eq!((p.k, p.m, p.n), (5, 32, 492));
    }

    #[test]
    fn point_scatterer_spans_three_bins() {
        let cube = synthesize_cube(&scene(vec![Scatterer::fixed(0.15, 1.0)])).unwrap();
        let lit: Vec<usize> = (0..492).filter(|&b| cube.get(0, 0, b) != (0.0, 0.0)).collect();
        assert_eq!(lit, vec![122, 123, 124]);
    }

    #[test]
    fn rejects_non_positive_range() {
        let err = synthesize_cube(&scene(vec![Scatterer::moving(0.01, -1.0, 1.0)]));
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn piecewise_motion_switches_segments() {
        let m = Motion::Piecewise {
            starts: vec![0.0, 1.0],
            segments: vec![Motion::Constant(2.0), Motion::Linear { start: 0.0, rate: 3.0 }],
        };
        assert_eq!(m.eval(0.5), 2.0);
        assert_eq!(m.eval(2.0), 6.0);
    }

    #[test]
    fn doppler_bin_sign() {
        let p = RadarParams::default();
        assert_eq!(p.doppler_bin(-0.1), 6);
        assert_eq!(p.doppler_bin(0.1), 26);
        assert_eq!(p.doppler_bin(0.0), 0);
    }
}
