use fnn_cli::config::{ExperimentConfig, Model};
use fnn_core::dataset::DatasetKind;
use fnn_core::engine::{FinetuneOn, ForgetLayers, UnlearnData};
use fnn_core::forgetting::PolicyKind;
use proptest::prelude::*;

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        (
            prop::bool::ANY,
            prop::bool::ANY,
            prop::bool::ANY,
            prop::sample::select(PolicyKind::ALL.to_vec()),
            0.1f64..50.0,
            1.0f64..4.0,
            4.0f64..30.0,
            prop::option::of(30.0f64..500.0),
        ),
        (
            1usize..10,
            0usize..5,
            0usize..8,
            1e-4f64..1.0,
            1usize..512,
            any::<u64>(),
            prop::option::of(0usize..100),
            prop::bool::ANY,
        ),
    )
        .prop_map(
            |((fashion, mlp, one, kind, fixed, lo, hi, rest), (turns, learn, unlearn, lr, batch, seed, epochs, full))| {
                let mut c = ExperimentConfig::default();
                c.dataset = if fashion { DatasetKind::Fashion } else { DatasetKind::Digits };
                c.model = if mlp { Model::Mlp } else { Model::Cnn };
                c.layers = if one { ForgetLayers::One } else { ForgetLayers::Two };
                c.policy.kind = kind;
                c.policy.tau_fixed = fixed;
                c.policy.tau_min = lo;
                c.policy.tau_max = hi;
                c.policy.tau_rest = rest.unwrap_or(f64::INFINITY);
                c.schedule.turns = turns;
                c.schedule.learn_epochs = learn;
                c.schedule.unlearn_epochs = unlearn;
                c.schedule.lr = lr;
                c.schedule.batch_size = batch;
                c.schedule.unlearn_data = if full { UnlearnData::FullTrain } else { UnlearnData::Retain };
                c.override_seed(seed);
                c.baseline_epochs = epochs;
                c.finetune_on = if full { FinetuneOn::Retain } else { FinetuneOn::Forget };
                c
            },
        )
}

proptest! {
    #[test]
    fn canonical_form_round_trips(cfg in config()) {
        let text = cfg.to_canonical();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_canonical(), text);
    }

    #[test]
    fn any_unknown_key_is_rejected(key in "[a-z]{1,8}(\\.[a-z_]{1,12})?") {
        let known = ExperimentConfig::default().to_canonical();
        prop_assume!(!known.lines().any(|l| l.starts_with(&format!("{key} "))));
        prop_assume!(key != "data_dir");
        let text = format!("{key} = 1\n");
        prop_assert!(ExperimentConfig::parse(&text).is_err());
    }
}
