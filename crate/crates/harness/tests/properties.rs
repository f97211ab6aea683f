use harness::aggregate::{aggregate, Z95};
use harness::metrics::{sig6, MetricsRow};
use harness::RunConfig;
use proptest::prelude::*;

fn row(step: u64, eval_mean: f64) -> MetricsRow {
    MetricsRow {
        step,
        eval_mean,
        ..Default::default()
    }
}

proptest! {
    #[test]
    fn six_significant_digits_parse_back_closely(m in 1.0f64..10.0, e in -12i32..12, neg: bool) {
        let x = if neg { -m } else { m } * 10f64.powi(e);
        let back: f64 = sig6(x).parse().unwrap();
        prop_assert!(((back - x) / x).abs() <= 5.0e-6 * (1.0 + 1e-9), "{x} -> {}", sig6(x));
    }

    #[test]
    fn metrics_rows_survive_a_csv_round_trip(
        step in 0u64..10_000_000,
        episodes in 0u64..10_000,
        train in proptest::option::of(-5.0f64..2000.0),
        eval_mean in -5.0f64..2000.0,
        eval_std in 0.0f64..500.0,
        loss in proptest::option::of(0.0f64..10.0),
        kl in proptest::option::of(-0.1f64..0.1),
    ) {
        let r = MetricsRow {
            step,
            episodes,
            train_reward: train,
            eval_mean,
            eval_std,
            loss,
            approx_kl: kl,
            ..Default::default()
        };
        let line = r.to_csv();
        let back = MetricsRow::from_csv(&line).unwrap();
        prop_assert_eq!(back.to_csv(), line);
        prop_assert_eq!(back.step, step);
        prop_assert_eq!(back.train_reward.is_some(), train.is_some());
    }

    #[test]
    fn config_text_round_trips(
        seed in 0u64..u64::MAX,
        total in 0u64..10_000_000,
        obs in prop::sample::select(vec![16usize, 32, 48, 84]),
        episodes in 1usize..50,
        lr in 1e-6f64..1e-2,
        algorithm in prop::sample::select(vec!["ppo", "dqn"]),
        actions in prop::sample::select(vec!["disc5", "disc3"]),
    ) {
        let mut cfg = RunConfig::default();
        let overrides = vec![
            format!("seed={seed}"),
            format!("total_steps={total}"),
            format!("obs_size={obs}"),
            format!("eval.episodes={episodes}"),
            format!("ppo.lr={lr}"),
            format!("algorithm={algorithm}"),
            format!("actions={actions}"),
        ];
        cfg.apply_overrides(&overrides).unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), cfg.to_text());
    }

    #[test]
    fn aggregate_interval_is_centred_on_the_seed_mean(
        curves in prop::collection::vec(prop::collection::vec(-10.0f64..2000.0, 4), 1..6),
    ) {
        let runs: Vec<Vec<MetricsRow>> = curves
            .iter()
            .map(|c| c.iter().enumerate().map(|(i, &v)| row(1000 * (i as u64 + 1), v)).collect())
            .collect();
        let agg = aggregate(&runs).unwrap();
        prop_assert_eq!(agg.len(), 4);
        for (i, a) in agg.iter().enumerate() {
            let xs: Vec<f64> = curves.iter().map(|c| c[i]).collect();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(a.n, xs.len());
            prop_assert!(a.mean >= lo - 1e-9 && a.mean <= hi + 1e-9);
            match (a.std, a.ci) {
                (Some(s), Some((l, h))) => {
                    prop_assert!(xs.len() >= 2);
                    prop_assert!(((a.mean - l) - (h - a.mean)).abs() < 1e-9 * (1.0 + a.mean.abs()));
                    prop_assert!(((h - l) / 2.0 - Z95 * s / (xs.len() as f64).sqrt()).abs() < 1e-9 * (1.0 + s));
                }
                (None, None) => prop_assert_eq!(xs.len(), 1),
                _ => prop_assert!(false, "std and interval must come together"),
            }
        }
    }
}

#[test]
fn misaligned_curves_are_rejected() {
    let a = vec![row(1000, 1.0), row(2000, 2.0)];
    let b = vec![row(1000, 1.0), row(3000, 2.0)];
    let msg = aggregate(&[a, b]).unwrap_err().to_string();
    assert!(msg.contains("2000") && msg.contains("3000"), "{msg}");
}
