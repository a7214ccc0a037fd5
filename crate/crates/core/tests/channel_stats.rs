use rand::Rng as _;
use sensecomm::channel::{
    apply_channel, mean_square, noise_std, normalize_power, sample_realization, sensing_reflect,
    ChannelConfig, ChannelKind, SensingConfig,
};
use sensecomm::dataset::BinaryLabel;
use sensecomm::nn::{Rng, Tensor};

const N: usize = 100_000;

fn unit_power_signal(rng: &mut Rng) -> Tensor<f64> {
    let raw: Vec<f64> = (0..N).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize_power(&Tensor::vector(raw)).0
}

#[test]
fn noise_std_values() {
    assert_eq!(noise_std(0.0), 1.0);
    assert!((noise_std(3.0) - 0.7080).abs() < 1e-4);
    assert!((noise_std(-3.0) - 1.4125).abs() < 1e-4);
    assert!((noise_std(-9.0) - 2.8184).abs() < 1e-4);
}

#[test]
fn awgn_empirical_snr() {
    let mut rng = Rng::new(5);
    let s = unit_power_signal(&mut rng);
    for snr in [-9.0, -3.0, 0.0, 3.0, 10.0] {
        let cfg = ChannelConfig {
            kind: ChannelKind::Awgn,
            snr_db: snr,
        };
        let (y, r) = apply_channel(&s, &cfg, &mut rng).unwrap();
        assert_eq!(r.gain, 1.0);
        let noise: f64 = y
            .data()
            .iter()
            .zip(s.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / N as f64;
        let measured = 10.0 * (mean_square(&s) / noise).log10();
        assert!((measured - snr).abs() < 0.2, "{snr} dB measured as {measured}");
        if snr == 0.0 {
            assert!((noise - 1.0).abs() < 0.02);
        }
    }
}

#[test]
fn rayleigh_gain_has_unit_mean_square() {
    let mut rng = Rng::new(6);
    let ms: f64 = (0..N)
        .map(|_| {
            sample_realization(ChannelKind::Rayleigh, 1, 0.0, &mut rng)
                .gain
                .powi(2)
        })
        .sum::<f64>()
        / N as f64;
    assert!((ms - 1.0).abs() < 0.02, "mean square {ms}");
}

#[test]
fn rayleigh_average_snr() {
    // Averaged over many transmissions the received signal power is the
    // configured SNR above the noise.
    let mut rng = Rng::new(7);
    let (mut sig, mut noise) = (0.0, 0.0);
    for _ in 0..N {
        let r = sample_realization(ChannelKind::Rayleigh, 4, 3.0, &mut rng);
        sig += r.gain * r.gain;
        noise += r.noise.iter().map(|n| n * n).sum::<f64>() / 4.0;
    }
    let measured = 10.0 * (sig / noise).log10();
    assert!((measured - 3.0).abs() < 0.2, "measured {measured}");
}

#[test]
fn noiseless_limit_is_identity() {
    let mut rng = Rng::new(8);
    let s = Tensor::vector(vec![0.5, -1.0, 1.5]);
    let cfg = ChannelConfig {
        kind: ChannelKind::Awgn,
        snr_db: f64::INFINITY,
    };
    assert_eq!(apply_channel(&s, &cfg, &mut rng).unwrap().0, s);
}

#[test]
fn same_seed_same_output() {
    let s = Tensor::vector(vec![1.0f32; 16]);
    let cfg = ChannelConfig {
        kind: ChannelKind::Rayleigh,
        snr_db: 0.0,
    };
    let a = apply_channel(&s, &cfg, &mut Rng::new(9)).unwrap();
    let b = apply_channel(&s, &cfg, &mut Rng::new(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sensing_noise_depends_on_class() {
    let sc = SensingConfig::default();
    assert_eq!(sc.snr_db(BinaryLabel::Vehicle), -3.0);
    assert_eq!(sc.snr_db(BinaryLabel::Animal), -9.0);
    let mut rng = Rng::new(10);
    let s = unit_power_signal(&mut rng);
    for (label, sigma) in [(BinaryLabel::Vehicle, 1.4125), (BinaryLabel::Animal, 2.8184)] {
        let (y, _) = sensing_reflect(&s, label, &sc, ChannelKind::Awgn, &mut rng).unwrap();
        let var: f64 = y
            .data()
            .iter()
            .zip(s.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / N as f64;
        assert!(
            (var.sqrt() / sigma - 1.0).abs() < 0.01,
            "{label:?}: {}",
            var.sqrt()
        );
    }
}

#[test]
fn zero_offset_hides_the_class() {
    let sc = SensingConfig {
        animal_offset_db: 0.0,
        ..SensingConfig::default()
    };
    let s = Tensor::vector(vec![1.0, -1.0, 0.5, 2.0]);
    for kind in [ChannelKind::Awgn, ChannelKind::Rayleigh] {
        let v = sensing_reflect(&s, BinaryLabel::Vehicle, &sc, kind, &mut Rng::new(11)).unwrap();
        let a = sensing_reflect(&s, BinaryLabel::Animal, &sc, kind, &mut Rng::new(11)).unwrap();
        assert_eq!(v, a);
    }
}

#[test]
fn normalize_examples() {
    let (y, _) = normalize_power(&Tensor::vector(vec![3.0, 4.0]));
    let k = 5.0 / 2f64.sqrt();
    assert!((y.data()[0] - 3.0 / k).abs() < 1e-12);
    assert!((y.data()[1] - 4.0 / k).abs() < 1e-12);
    let (z, _) = normalize_power(&y);
    assert!((z.data()[0] - y.data()[0]).abs() < 1e-12);
}
