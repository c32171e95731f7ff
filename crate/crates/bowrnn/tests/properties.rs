//! Property tests for the spec-level invariants that hold over whole input
//! domains rather than hand-picked examples.

use bowrnn::bownet::{Assignment, BowNetwork};
use bowrnn::codebook::{Codebook, KMeansConfig};
use bowrnn::data::{subsample_uniform, FeatureSequence};
use bowrnn::featmap::MapKernel;
use bowrnn::kernels;
use bowrnn::optim::{rprop_step, RpropConfig, RpropState};
use ndarray::Array2;
use proptest::prelude::*;

fn words_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6, 1usize..5).prop_flat_map(|(m, d)| {
        proptest::collection::vec(
            proptest::collection::vec(-5.0..5.0f64, d),
            m,
        )
    })
}

fn codebook_from(words: &[Vec<f64>]) -> Codebook {
    let m = words.len();
    let d = words[0].len();
    let mut array = Array2::zeros((m, d));
    for (i, w) in words.iter().enumerate() {
        for (j, &v) in w.iter().enumerate() {
            array[(i, j)] = v;
        }
    }
    Codebook::new(array, None).unwrap()
}

proptest! {
    #[test]
    fn posterior_normalizes_and_matches_network(
        words in words_strategy(),
        raw_x in proptest::collection::vec(-5.0..5.0f64, 1..5),
    ) {
        let cb = codebook_from(&words);
        let mut x = raw_x;
        x.resize(cb.dim(), 0.0);

        let posterior = cb.posterior(&x, true).unwrap();
        let sum: f64 = posterior.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(posterior.iter().all(|p| *p >= 0.0 && p.is_finite()));

        // softmax over the converted layer reproduces the posterior.
        let net = BowNetwork::from_quant_layers(
            vec![cb.to_network().unwrap()], None, 2, 0,
        ).unwrap();
        let via_net = net.quantize(0, &x).unwrap();
        for (a, b) in posterior.iter().zip(&via_net) {
            prop_assert!((a - b).abs() <= 1e-12);
        }

        // Hard assignment puts all mass on an argmax of the posterior.
        let hard = cb.hard_assign(&x, true).unwrap();
        let hot = hard.iter().position(|&v| v == 1.0).unwrap();
        let best = posterior.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(posterior[hot] >= best - 1e-15);
    }

    #[test]
    fn conversion_round_trip_is_identity(words in words_strategy()) {
        let cb = codebook_from(&words);
        let back = Codebook::from_network(&cb.to_network().unwrap()).unwrap();
        prop_assert_eq!(cb.words(), back.words());
        for (a, b) in cb.prior().iter().zip(back.prior()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn encode_is_normalized_and_order_invariant(
        words in words_strategy(),
        frames in proptest::collection::vec(proptest::collection::vec(-3.0..3.0f64, 1..5), 1..12),
    ) {
        let cb = codebook_from(&words);
        let t = frames.len();
        let mut data = Array2::zeros((t, cb.dim()));
        for (i, frame) in frames.iter().enumerate() {
            for j in 0..cb.dim() {
                data[(i, j)] = *frame.get(j).unwrap_or(&0.0);
            }
        }
        let net = BowNetwork::from_quant_layers(
            vec![cb.to_network().unwrap()], None, 2, 0,
        ).unwrap();

        let seq = FeatureSequence::new(data.clone(), "p").unwrap();
        for assignment in [Assignment::Soft, Assignment::Hard] {
            let hist = net.encode(0, &seq, assignment).unwrap();
            let sum: f64 = hist.values.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }

        let mut reversed = Array2::zeros((t, cb.dim()));
        for i in 0..t {
            reversed.row_mut(i).assign(&data.row(t - 1 - i));
        }
        let rev = FeatureSequence::new(reversed, "r").unwrap();
        let a = net.encode(0, &seq, Assignment::Soft).unwrap();
        let b = net.encode(0, &rev, Assignment::Soft).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn additive_kernels_symmetric_and_homogeneous(
        pairs in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..8),
        alpha in 0.01..4.0f64,
    ) {
        let h1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let h2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        for kind in [MapKernel::Hellinger, MapKernel::Chi2, MapKernel::Intersection] {
            let ab = kernels::additive_kernel(kind, &h1, &h2).unwrap();
            let ba = kernels::additive_kernel(kind, &h2, &h1).unwrap();
            prop_assert_eq!(ab, ba);

            let s1: Vec<f64> = h1.iter().map(|v| alpha * v).collect();
            let s2: Vec<f64> = h2.iter().map(|v| alpha * v).collect();
            let scaled = kernels::additive_kernel(kind, &s1, &s2).unwrap();
            prop_assert!((scaled - alpha * ab).abs() <= 1e-12 * (1.0 + alpha * ab.abs()));
        }
        let d12 = kernels::chi2_distance(&h1, &h2).unwrap();
        prop_assert!(d12 >= 0.0);
        prop_assert_eq!(d12, kernels::chi2_distance(&h2, &h1).unwrap());
    }

    #[test]
    fn subsample_is_increasing_subsequence(
        t in 1usize..200,
        k in 1usize..50,
    ) {
        let seq = FeatureSequence::new(
            Array2::from_shape_fn((t, 1), |(i, _)| i as f64),
            "s",
        ).unwrap();
        let sub = subsample_uniform(&seq, k).unwrap();
        prop_assert_eq!(sub.num_frames(), t.min(k));
        let indices: Vec<f64> = sub.frames.column(0).to_vec();
        for pair in indices.windows(2) {
            prop_assert!(pair[0] < pair[1]);
        }
        // Deterministic.
        let again = subsample_uniform(&seq, k).unwrap();
        prop_assert_eq!(sub.frames, again.frames);
    }

    #[test]
    fn rprop_steps_bounded_under_arbitrary_gradients(
        gradients in proptest::collection::vec(
            proptest::collection::vec(-10.0..10.0f64, 4), 1..40,
        ),
    ) {
        let config = RpropConfig::default();
        let (dmin, dmax) = (config.delta_min, config.delta_max);
        let mut state = RpropState::new(config, &[4]).unwrap();
        let mut params = vec![0.0; 4];
        for g in &gradients {
            rprop_step(&mut [&mut params], &[g.as_slice()], &mut state).unwrap();
            for steps in state.step_sizes() {
                for &s in steps {
                    prop_assert!(s >= dmin && s <= dmax);
                }
            }
            prop_assert!(params.iter().all(|p| p.is_finite()));
        }
    }

    #[test]
    fn codebook_text_round_trip_bitwise(words in words_strategy()) {
        let cb = codebook_from(&words);
        let back = Codebook::from_text(&cb.to_text()).unwrap();
        prop_assert_eq!(&cb, &back);
        prop_assert_eq!(cb.to_text(), back.to_text());
    }
}

#[test]
fn kmeans_insufficient_distinct_points_rejected() {
    // Degenerate duplicated data: requesting more words than distinct points
    // must fail regardless of the duplication pattern.
    let data = Array2::from_shape_fn((12, 2), |(i, j)| ((i % 3) * (j + 1)) as f64);
    let err = bowrnn::codebook::kmeans_fit(data.view(), &KMeansConfig::new(4, 0)).unwrap_err();
    assert!(err.to_string().contains("insufficient data"));
}
