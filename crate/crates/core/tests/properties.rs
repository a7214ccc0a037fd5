mod common;

use common::*;
use proptest::prelude::*;
use sensecomm::channel::{mean_square, normalize_power};
use sensecomm::dataset::batch_indices;
use sensecomm::nn::layers::{
    conv2d_apply, dense_apply, dropout_apply, flatten_apply, relu_apply, softmax_apply, unflatten,
};
use sensecomm::nn::{adam_step, AdamConfig, AdamState, Rng, Tensor};

fn finite_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_a_distribution(x in finite_vec(12), shift in -1e3f64..1e3) {
        let p = softmax_apply(&Tensor::vector(x.clone()));
        let sum: f64 = p.data().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(p.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Adding a constant to every logit leaves the output unchanged.
        let q = softmax_apply(&Tensor::vector(x.iter().map(|v| v + shift).collect()));
        prop_assert!(max_abs_diff(p.data(), q.data()) < 1e-9);
    }

    #[test]
    fn flatten_round_trips(h in 1usize..6, w in 1usize..6, c in 1usize..4, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let x = Tensor::from_vec(&[h, w, c], uniform(h * w * c, &mut rng)).unwrap();
        let flat = flatten_apply(x.clone());
        prop_assert_eq!(flat.shape(), &[h * w * c]);
        prop_assert_eq!(flat.data(), x.data());
        prop_assert_eq!(unflatten(flat, &[h, w, c]).unwrap(), x);
    }

    #[test]
    fn normalized_power_is_one(x in finite_vec(64), scale in 1e-3f64..1e3) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let (s, _) = normalize_power(&Tensor::vector(x.clone()));
        prop_assert!((mean_square(&s) - 1.0).abs() < 1e-9);
        let (t, _) = normalize_power(&Tensor::vector(x.iter().map(|v| v * scale).collect()));
        prop_assert!(max_abs_diff(s.data(), t.data()) < 1e-9);
    }

    #[test]
    fn dense_agrees_with_loops(n_in in 1usize..24, n_out in 1usize..24, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let (x, p) = random_dense(n_in, n_out, &mut rng);
        let y = dense_apply(&x, &p).unwrap();
        let want = dense_oracle(x.data(), p.weights.data(), p.bias.data());
        prop_assert!(max_abs_diff(y.data(), &want) < 1e-12);
    }

    #[test]
    fn conv_agrees_with_loops(
        h in 3usize..8, w in 3usize..8, c in 1usize..4, f in 1usize..4,
        kh in 1usize..4, kw in 1usize..4, seed in any::<u64>(),
    ) {
        prop_assume!(kh <= h && kw <= w);
        let mut rng = Rng::new(seed);
        let (x, p) = random_conv((h, w, c), (kh, kw, f), &mut rng);
        let y = conv2d_apply(&x, &p).unwrap();
        prop_assert_eq!(y.shape(), &[h - kh + 1, w - kw + 1, f]);
        let want = conv_oracle(x.data(), (h, w, c), p.weights.data(), (kh, kw, f), p.bias.data());
        prop_assert!(max_abs_diff(y.data(), &want) < 1e-12);
    }

    #[test]
    fn relu_is_idempotent_and_nonnegative(x in finite_vec(32)) {
        let y = relu_apply(&Tensor::vector(x));
        prop_assert!(y.data().iter().all(|&v| v >= 0.0));
        prop_assert_eq!(relu_apply(&y), y);
    }

    #[test]
    fn inference_dropout_is_identity(x in finite_vec(32), rate in 0.0f64..0.9) {
        let t = Tensor::vector(x);
        let (y, mask) = dropout_apply(&t, rate, false, None).unwrap();
        prop_assert_eq!(y, t);
        prop_assert!(mask.is_none());
    }

    #[test]
    fn epoch_visits_each_sample_once(len in 1usize..500, batch in 1usize..80, seed in any::<u64>()) {
        let batches = batch_indices(len, batch, Some(&mut Rng::new(seed))).unwrap();
        prop_assert_eq!(batches.len(), len.div_ceil(batch));
        prop_assert!(batches[..batches.len() - 1].iter().all(|b| b.len() == batch));
        let mut seen: Vec<usize> = batches.concat();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..len).collect::<Vec<_>>());
    }

    #[test]
    fn adam_keeps_twin_parameters_equal(
        start in -5.0f64..5.0,
        grads in prop::collection::vec(-10.0f64..10.0, 1..20),
    ) {
        let mut a = Tensor::vector(vec![start; 2]);
        let mut state = AdamState::new([&a]);
        for g in grads {
            let gt = Tensor::vector(vec![g; 2]);
            adam_step(&mut [&mut a], &[&gt], &mut state, &AdamConfig::default()).unwrap();
            prop_assert_eq!(a.data()[0], a.data()[1]);
        }
    }
}
