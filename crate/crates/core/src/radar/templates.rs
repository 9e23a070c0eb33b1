use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{synthesize_cube, ComplexCube, GestureScene, Motion, RadarParams, Scatterer};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GestureKind {
    /// Hand approaches the sensor.
    Push,
    /// Hand recedes.
    Pull,
    /// Range oscillates while the hand circles.
    Circle,
    /// Static hand with flickering reflectivity.
    Hold,
    /// Hand crosses the beam: reflectivity rises then falls.
    Swipe,
    NoHand,
}

/// Parameter distribution for one gesture class. Ranges are sampled uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassTemplate {
    pub name: String,
    pub kind: GestureKind,
    pub scatterers: (usize, usize),
    /// Centre range of the hand at t = 0, meters.
    pub start_range: (f64, f64),
    /// Radial speed magnitude, m/s.
    pub speed: (f64, f64),
    /// Oscillation amplitude in meters (range) or relative units (reflectivity).
    pub amplitude: (f64, f64),
    pub rate_hz: (f64, f64),
    pub rcs: (f64, f64),
    /// Spread of individual scatterers around the hand centre, meters.
    pub extent: f64,
}

impl ClassTemplate {
    pub fn new(name: &str, kind: GestureKind) -> Self {
        let (start_range, speed, amplitude, rate_hz) = match kind {
            GestureKind::Push => ((0.20, 0.24), (0.08, 0.20), (0.0, 0.0), (0.0, 0.0)),
            GestureKind::Pull => ((0.15, 0.19), (0.08, 0.20), (0.0, 0.0), (0.0, 0.0)),
            GestureKind::Circle => ((0.17, 0.23), (0.0, 0.0), (0.004, 0.006), (5.0, 6.5)),
            GestureKind::Hold => ((0.15, 0.25), (0.0, 0.0), (0.2, 0.5), (3.0, 6.0)),
            GestureKind::Swipe => ((0.16, 0.24), (0.0, 0.03), (0.0, 0.0), (0.0, 0.0)),
            GestureKind::NoHand => ((0.2, 0.2), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)),
        };
        let scatterers = if kind == GestureKind::NoHand { (0, 0) } else { (2, 4) };
        ClassTemplate {
            name: name.to_string(),
            kind,
            scatterers,
            start_range,
            speed,
            amplitude,
            rate_hz,
            rcs: (0.5, 1.0),
            extent: 0.01,
        }
    }

    /// Draws one scene from the template.
    pub fn sample(&self, radar: &RadarParams, label: usize, rng: &mut ChaCha8Rng) -> GestureScene {
        let duration = (radar.k * radar.m) as f64 / radar.prf;
        let count = rng.gen_range(self.scatterers.0..=self.scatterers.1);
        let r0 = uniform(rng, self.start_range);
        let speed = uniform(rng, self.speed);
        let amp = uniform(rng, self.amplitude);
        let rate = uniform(rng, self.rate_hz);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let swipe_sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let peak = rng.gen_range(0.3..0.7) * duration;
        let scatterers = (0..count)
            .map(|_| {
                let offset = rng.gen_range(-self.extent..=self.extent);
                let rcs = uniform(rng, self.rcs);
                let start = r0 + offset;
                let (range, rcs) = match self.kind {
                    GestureKind::Push => (Motion::Linear { start, rate: -speed }, Motion::Constant(rcs)),
                    GestureKind::Pull => (Motion::Linear { start, rate: speed }, Motion::Constant(rcs)),
                    GestureKind::Circle => (
                        Motion::Sinusoid {
                            center: start,
                            amplitude: amp,
                            freq_hz: rate,
                            phase,
                        },
                        Motion::Constant(rcs),
                    ),
                    GestureKind::Hold => (
                        Motion::Constant(start),
                        Motion::Sinusoid {
                            center: rcs,
                            amplitude: amp * rcs,
                            freq_hz: rate,
                            phase: rng.gen_range(0.0..2.0 * PI),
                        },
                    ),
                    GestureKind::Swipe => (
                        Motion::Linear {
                            start,
                            rate: swipe_sign * speed,
                        },
                        Motion::Piecewise {
                            starts: vec![0.0, peak],
                            segments: vec![
                                Motion::Linear {
                                    start: 0.1 * rcs,
                                    rate: 0.9 * rcs / peak,
                                },
                                Motion::Linear {
                                    start: rcs + 0.9 * rcs * peak / (duration - peak),
                                    rate: -0.9 * rcs / (duration - peak),
                                },
                            ],
                        },
                    ),
                    GestureKind::NoHand => (Motion::Constant(start), Motion::Constant(0.0)),
                };
                Scatterer { range, rcs }
            })
            .collect();
        GestureScene {
            radar: radar.clone(),
            scatterers,
            label,
            rng_seed: 0,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Gesture classes in a fixed order; beyond six, faster or wider variants follow.
pub fn standard_templates(num_classes: usize) -> Result<Vec<ClassTemplate>> {
    use GestureKind::*;
    let base = [
        ("push", Push),
        ("pull", Pull),
        ("circle", Circle),
        ("hold", Hold),
        ("swipe", Swipe),
        ("nohand", NoHand),
    ];
    if !(2..=12).contains(&num_classes) {
        return Err(Error::config(format!("classes must be in 2..=12, got {num_classes}")));
    }
    let mut out: Vec<ClassTemplate> = base.iter().map(|&(n, k)| ClassTemplate::new(n, k)).collect();
    for &(name, kind) in base.iter().take(5) {
        let mut t = ClassTemplate::new(&format!("{name}-fast"), kind);
        t.speed = (t.speed.0 * 1.8, t.speed.1 * 1.8);
        t.rate_hz = (t.rate_hz.0 * 1.8, t.rate_hz.1 * 1.8);
        out.push(t);
    }
    let mut wide = ClassTemplate::new("circle-wide", Circle);
    wide.amplitude = (0.02, 0.03);
    out.push(wide);
    out.truncate(num_classes);
    Ok(out)
}

/// Balanced labelled dataset; record `i` has label `i % classes` and its own RNG stream.
pub fn generate_dataset(
    templates: &[ClassTemplate],
    radar: &RadarParams,
    per_class: usize,
    seed: u64,
) -> Result<Vec<(ComplexCube, usize)>> {
    if templates.len() < 2 {
        return Err(Error::arg(format!(
            "need at least 2 class templates, got {}",
            templates.len()
        )));
    }
    radar.validate()?;
    let classes = templates.len();
    (0..classes * per_class)
        .map(|i| {
            let label = i % classes;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut scene = templates[label].sample(radar, label, &mut rng);
            scene.rng_seed = seed;
            Ok((synthesize_cube(&scene)?, label))
        })
        .collect()
}
