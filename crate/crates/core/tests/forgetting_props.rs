use fnn_core::forgetting::{
    apply_forget, assign_taus, calibrate, phi, ActivationProfile, PolicyKind, CALIBRATION_SIZE,
};
use fnn_core::{Architecture, ForgetClock, ForgettingPolicy, Network, Rng, TauAssignment, Tensor};
use proptest::prelude::*;

fn profile(values: Vec<f64>) -> ActivationProfile {
    ActivationProfile { mean_abs: values }
}

fn distinct_profile() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0u32..100_000, 2..40)
        .prop_map(|s| s.into_iter().map(|v| v as f64 / 1000.0).collect::<Vec<_>>())
        .prop_shuffle()
}

proptest! {
    #[test]
    fn rank_commutes_with_neuron_permutation(values in distinct_profile(), seed in any::<u64>()) {
        let policy = ForgettingPolicy::varying(PolicyKind::Rank, 1.0, 8.0);
        let width = values.len();
        let mut rng = Rng::new(0);
        let base = assign_taus(&policy, Some(&profile(values.clone())), width, 0, &mut rng).unwrap();
        let perm = Rng::new(seed).permutation(width);
        let permuted: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
        let moved = assign_taus(&policy, Some(&profile(permuted)), width, 0, &mut rng).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert_eq!(moved.taus[j], base.taus[i]);
        }
    }

    #[test]
    fn most_active_neuron_forgets_fastest(values in distinct_profile(), lo in 0.5f64..4.0, span in 0.1f64..20.0) {
        let policy = ForgettingPolicy::varying(PolicyKind::Rank, lo, lo + span);
        let taus = assign_taus(&policy, Some(&profile(values.clone())), values.len(), 0, &mut Rng::new(0))
            .unwrap()
            .taus;
        let top = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        let bottom = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        prop_assert_eq!(taus[top], lo);
        prop_assert!((taus[bottom] - (lo + span)).abs() < 1e-9);
        // Higher activation never gets a larger tau.
        for a in 0..values.len() {
            for b in 0..values.len() {
                if values[a] > values[b] {
                    prop_assert!(taus[a] <= taus[b]);
                }
            }
        }
    }

    #[test]
    fn every_kind_stays_within_bounds(
        kind in prop::sample::select(PolicyKind::ALL.to_vec()),
        values in distinct_profile(),
        lo in 0.5f64..4.0,
        span in 0.0f64..20.0,
        seed in any::<u64>(),
    ) {
        let mut policy = ForgettingPolicy::varying(kind, lo, lo + span);
        policy.tau_fixed = lo;
        policy.tau_rest = lo + span;
        policy.top_k = 5;
        let taus = assign_taus(&policy, Some(&profile(values.clone())), values.len(), 0, &mut Rng::new(seed))
            .unwrap()
            .taus;
        prop_assert_eq!(taus.len(), values.len());
        for tau in taus {
            prop_assert!(tau >= lo && tau <= lo + span, "{} outside [{}, {}]", tau, lo, lo + span);
        }
    }

    #[test]
    fn gain_decays_with_time_and_grows_with_tau(t in 0u32..50, tau in 0.1f64..100.0, extra in 0.0f64..50.0) {
        let now = phi(t, tau).unwrap();
        prop_assert!(now > 0.0 && now <= 1.0);
        prop_assert!(phi(t + 1, tau).unwrap() <= now);
        prop_assert!(phi(t, tau + extra).unwrap() >= now);
    }

    #[test]
    fn decay_is_multiplicative_in_time(a in 0u32..20, b in 0u32..20, tau in 0.5f64..16.0) {
        let joint = phi(a + b, tau).unwrap();
        let split = phi(a, tau).unwrap() * phi(b, tau).unwrap();
        prop_assert!((joint - split).abs() <= 1e-12);
    }

    #[test]
    fn forgetting_is_additive_and_scales_by_powers_of_two(
        width in 1usize..12,
        rows in 1usize..6,
        t in 0u32..10,
        shift in -4i32..5,
        seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed);
        let taus = (0..width).map(|_| rng.uniform(0.5, 10.0)).collect();
        let assignment = TauAssignment::new(0, taus).unwrap();
        let mut x = Tensor::<f64>::zeros(vec![rows, width]);
        let mut y = Tensor::<f64>::zeros(vec![rows, width]);
        rng.fill_uniform(x.data_mut(), -3.0, 3.0);
        rng.fill_uniform(y.data_mut(), -3.0, 3.0);
        let sum = Tensor::new(vec![rows, width], x.data().iter().zip(y.data()).map(|(a, b)| a + b).collect()).unwrap();
        let fx = apply_forget(&x, &assignment, t).unwrap();
        let fy = apply_forget(&y, &assignment, t).unwrap();
        let fsum = apply_forget(&sum, &assignment, t).unwrap();
        for i in 0..fsum.len() {
            prop_assert!((fsum.data()[i] - (fx.data()[i] + fy.data()[i])).abs() <= 1e-12);
        }
        // Power-of-two scaling is exact in binary floating point.
        let c = 2f64.powi(shift);
        let scaled = Tensor::new(vec![rows, width], x.data().iter().map(|v| v * c).collect()).unwrap();
        let fscaled = apply_forget(&scaled, &assignment, t).unwrap();
        for i in 0..fx.len() {
            prop_assert_eq!(fscaled.data()[i], c * fx.data()[i]);
        }
    }
}

#[test]
fn random_kind_mean_is_centred() {
    let width = 10_000;
    for seed in 0..10 {
        let policy = ForgettingPolicy {
            seed,
            ..ForgettingPolicy::varying(PolicyKind::Random, 1.0, 8.0)
        };
        let taus = assign_taus(&policy, None, width, 0, &mut Rng::new(seed)).unwrap().taus;
        let mean = taus.iter().sum::<f64>() / width as f64;
        assert!((mean - 4.5).abs() <= 0.02 * 4.5, "seed {seed}: mean {mean}");
    }
}

#[test]
fn top_k_kind_splits_fast_and_slow_neurons() {
    let values: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64).collect();
    let policy = ForgettingPolicy::varying(PolicyKind::Top30, 1.0, 8.0);
    let taus = assign_taus(&policy, Some(&profile(values.clone())), 50, 0, &mut Rng::new(0))
        .unwrap()
        .taus;
    let mut order: Vec<usize> = (0..50).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    for (rank, &n) in order.iter().enumerate() {
        if rank < 30 {
            assert!(taus[n] <= 8.0, "rank {rank}");
        } else {
            assert_eq!(taus[n], 100.0, "rank {rank}");
        }
    }
    assert_eq!(taus[order[0]], 1.0);
    assert_eq!(taus[order[29]], 8.0);
}

#[test]
fn calibration_matches_a_per_sample_loop() {
    let arch = Architecture::mlp(&[1, 6, 6], &[12, 7], 4).unwrap();
    let net = Network::<f64>::new(arch, &mut Rng::new(3));
    let mut batch = Tensor::<f64>::zeros(vec![CALIBRATION_SIZE, 1, 6, 6]);
    Rng::new(4).fill_uniform(batch.data_mut(), 0.0, 1.0);
    let layers = net.arch().forget_layers();
    for (slot, &layer) in layers.iter().enumerate() {
        let fast = calibrate(&net, &batch, slot).unwrap();
        let mut sums = vec![0.0; fast.width()];
        for i in 0..CALIBRATION_SIZE {
            let acts = net.forward(&batch.select_rows(&[i]), &ForgetClock::disabled()).unwrap();
            for (s, v) in sums.iter_mut().zip(acts.output(layer).data()) {
                *s += v.abs();
            }
        }
        for (f, s) in fast.mean_abs.iter().zip(&sums) {
            let want = s / CALIBRATION_SIZE as f64;
            assert!((f - want).abs() <= 1e-12 * want.max(1.0), "slot {slot}: {f} vs {want}");
        }
    }
}

#[test]
fn invalid_policies_are_rejected() {
    let width = 4;
    let p = profile(vec![1.0, 2.0, 3.0, 4.0]);
    let bad = [
        ForgettingPolicy::varying(PolicyKind::Rank, 5.0, 2.0),
        ForgettingPolicy::varying(PolicyKind::Ordered, 0.0, 2.0),
        ForgettingPolicy::fixed(-1.0),
    ];
    for policy in bad {
        assert!(assign_taus(&policy, Some(&p), width, 0, &mut Rng::new(0)).is_err(), "{policy:?}");
    }
    let rank = ForgettingPolicy::default();
    assert!(assign_taus(&rank, None, width, 0, &mut Rng::new(0)).is_err());
    assert!(assign_taus(&rank, Some(&p), width + 1, 0, &mut Rng::new(0)).is_err());
}
