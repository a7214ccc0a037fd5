mod common;

use common::*;
use sensecomm::nn::layers::{conv2d_apply, dense_apply};
use sensecomm::nn::{adam_step, AdamConfig, AdamState, Rng, Tensor};

#[test]
fn dense_matches_double_loop() {
    let mut rng = Rng::new(40);
    let (x, p) = random_dense(20, 10, &mut rng);
    let y = dense_apply(&x, &p).unwrap();
    let want = dense_oracle(x.data(), p.weights.data(), p.bias.data());
    assert!(max_abs_diff(y.data(), &want) < 1e-12);
}

#[test]
fn conv_matches_quadruple_loop() {
    let mut rng = Rng::new(41);
    let (x, p) = random_conv((5, 5, 2), (3, 3, 3), &mut rng);
    let y = conv2d_apply(&x, &p).unwrap();
    assert_eq!(y.shape(), &[3, 3, 3]);
    let want = conv_oracle(x.data(), (5, 5, 2), p.weights.data(), (3, 3, 3), p.bias.data());
    assert!(max_abs_diff(y.data(), &want) < 1e-12);
}

#[test]
fn adam_matches_hand_update_over_several_steps() {
    let cfg = AdamConfig::default();
    let hyper = (cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let start = [0.3, -1.2, 4.0];
    let mut p = Tensor::vector(start.to_vec());
    let mut state = AdamState::new([&p]);
    let mut expected: Vec<(f64, f64, f64)> = start.iter().map(|&v| (v, 0.0, 0.0)).collect();
    let grads = [[0.5, -2.0, 1e-3], [-0.1, 0.7, 3.0], [2.0, 2.0, -2.0]];
    for (t, g) in grads.iter().enumerate() {
        let gt = Tensor::vector(g.to_vec());
        adam_step(&mut [&mut p], &[&gt], &mut state, &cfg).unwrap();
        for (e, &gi) in expected.iter_mut().zip(g) {
            *e = adam_scalar(e.0, gi, e.1, e.2, t as i32 + 1, hyper);
        }
        for (got, want) in p.data().iter().zip(&expected) {
            assert!(
                (got - want.0).abs() < 1e-12,
                "step {}: {got} vs {}",
                t + 1,
                want.0
            );
        }
    }
}
