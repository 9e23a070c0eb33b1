mod common;

use common::{random_tensor, rng};
use proptest::prelude::*;
use radgest_core::lowres::{
    add_complex_noise, channels_to_complex, complex_to_channels, cubic_upsample, downsample, normalize01, rms,
};
use radgest_core::radar::ComplexCube;

fn random_cube(k: usize, m: usize, n: usize, seed: u64) -> ComplexCube {
    let mut r = rng(seed);
    let re = random_tensor(&[k * m * n], &mut r).into_data();
    let im = random_tensor(&[k * m * n], &mut r).into_data();
    ComplexCube::new(k, m, n, re, im).unwrap()
}

#[test]
fn downsample_shapes() {
    let c = ComplexCube::zeros(5, 32, 492);
    assert_eq!(downsample(&c, 2, 2).unwrap().dims(), (5, 16, 246));
    assert_eq!(downsample(&c, 8, 8).unwrap().dims(), (5, 4, 61));
    assert!(downsample(&c, 33, 1).is_err());
    assert!(downsample(&c, 1, 0).is_err());
    let r = random_cube(2, 6, 7, 1);
    assert_eq!(downsample(&r, 1, 1).unwrap(), r);
}

#[test]
fn downsample_keeps_strided_samples() {
    let c = random_cube(2, 9, 10, 2);
    let d = downsample(&c, 3, 4).unwrap();
    assert_eq!(d.dims(), (2, 3, 2));
    for f in 0..2 {
        for p in 0..3 {
            for s in 0..2 {
                assert_eq!(d.get(f, p, s), c.get(f, 3 * p, 4 * s));
            }
        }
    }
}

#[test]
fn noise_examples() {
    let c = random_cube(1, 4, 5, 3);
    assert_eq!(add_complex_noise(&c, 0.0, &mut rng(0)).unwrap(), c);
    let z = ComplexCube::zeros(1, 3, 3);
    assert_eq!(add_complex_noise(&z, 0.5, &mut rng(0)).unwrap(), z);
    assert!(add_complex_noise(&c, -1.0, &mut rng(0)).is_err());
}

#[test]
fn noise_variance_matches_target() {
    let c = random_cube(1, 100, 1000, 4);
    let sigma_rel = 0.2;
    let noisy = add_complex_noise(&c, sigma_rel, &mut rng(5)).unwrap();
    let n = c.len() as f64;
    let var: f64 = (0..c.len())
        .map(|i| (noisy.re()[i] - c.re()[i]).powi(2) + (noisy.im()[i] - c.im()[i]).powi(2))
        .sum::<f64>()
        / n;
    let target = 2.0 * (sigma_rel * rms(&c)).powi(2);
    assert!((var / target - 1.0).abs() < 0.05, "{var} vs {target}");
    let again = add_complex_noise(&c, sigma_rel, &mut rng(5)).unwrap();
    assert_eq!(again, noisy);
}

#[test]
fn normalize_constant_and_inverse() {
    let c = ComplexCube::new(1, 2, 2, vec![3.0; 4], vec![3.0; 4]).unwrap();
    let (y, t) = normalize01(&c);
    assert!(y.re().iter().chain(y.im()).all(|&v| v == 0.5));
    assert_eq!(t.scale, 1.0);
    let r = random_cube(2, 5, 6, 6);
    let (y, t) = normalize01(&r);
    let back = t.invert_cube(&y);
    for i in 0..r.len() {
        assert!((back.re()[i] - r.re()[i]).abs() < 1e-12);
        assert!((back.im()[i] - r.im()[i]).abs() < 1e-12);
    }
}

#[test]
fn channel_conversion() {
    let c = random_cube(5, 16, 246, 7);
    let t = complex_to_channels(&c);
    assert_eq!(t.shape(), &[2, 5, 16, 246]);
    assert_eq!(channels_to_complex(&t).unwrap(), c);
    let real = ComplexCube::new(1, 2, 3, vec![1.0; 6], vec![0.0; 6]).unwrap();
    let t = complex_to_channels(&real);
    assert!(t.data()[6..].iter().all(|&v| v == 0.0));
}

#[test]
fn cubic_examples() {
    let c = random_cube(2, 4, 6, 8);
    assert_eq!(cubic_upsample(&c, 1, 1).unwrap(), c);
    let k = ComplexCube::new(1, 3, 4, vec![2.5; 12], vec![-1.0; 12]).unwrap();
    let up = cubic_upsample(&k, 2, 3).unwrap();
    assert_eq!(up.dims(), (1, 6, 12));
    assert!(up.re().iter().all(|&v| (v - 2.5).abs() < 1e-12));
    assert!(up.im().iter().all(|&v| (v + 1.0).abs() < 1e-12));
    assert!(cubic_upsample(&ComplexCube::zeros(1, 1, 4), 2, 1).is_err());
}

#[test]
fn cubic_reproduces_bilinear_ramp() {
    let (m, n) = (6, 7);
    let f = |y: f64, x: f64| 0.3 + 0.5 * y - 0.25 * x + 0.1 * x * y;
    let re: Vec<f64> = (0..m * n).map(|i| f((i / n) as f64, (i % n) as f64)).collect();
    let c = ComplexCube::new(1, m, n, re, vec![0.0; m * n]).unwrap();
    let (ds, df) = (2, 3);
    let up = cubic_upsample(&c, ds, df).unwrap();
    for y in 0..m {
        for x in 0..n {
            assert!((up.get(0, y * ds, x * df).0 - f(y as f64, x as f64)).abs() < 1e-12);
        }
    }
    // Away from the clamped border the ramp is reproduced between samples too.
    for oy in 2..(m - 2) * ds {
        for ox in 3..(n - 2) * df {
            let want = f(oy as f64 / ds as f64, ox as f64 / df as f64);
            assert!((up.get(0, oy, ox).0 - want).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nested_downsampling_composes(d1 in 1usize..4, d2 in 1usize..4, seed in 0u64..500) {
        let c = random_cube(2, d1 * d2 * 3, d1 * d2 * 2, seed);
        let once = downsample(&c, d1 * d2, d1 * d2).unwrap();
        let twice = downsample(&downsample(&c, d1, d1).unwrap(), d2, d2).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn normalized_values_in_unit_interval(seed in 0u64..1000, scale in 1e-6f64..1e6) {
        let c = random_cube(1, 4, 4, seed);
        let s = ComplexCube::new(1, 4, 4, c.re().iter().map(|v| v * scale).collect(), c.im().to_vec()).unwrap();
        let (y, _) = normalize01(&s);
        prop_assert!(y.re().iter().chain(y.im()).all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn channels_roundtrip(seed in 0u64..1000, k in 1usize..4, m in 1usize..5, n in 1usize..5) {
        let c = random_cube(k, m, n, seed);
        prop_assert_eq!(channels_to_complex(&complex_to_channels(&c)).unwrap(), c);
    }
}
