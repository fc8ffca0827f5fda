use bikecast_core::baselines::holt_winters::{holt_winters_fit, HoltWintersParams};
use bikecast_core::eval::{metrics, paired_t_test, Alternative, FoldResidues, ModelEvaluation, Pooling};
use bikecast_core::masks::{
    append_masks, day_mask, hour_mask, weather_channels, GeoDistance, HourBins, WeatherStation, WeekdayMapping,
};
use bikecast_core::recurrent::network::{Encoder, Network, Sample};
use bikecast_core::recurrent::train::{fit_network, mean_loss, TrainConfig};
use bikecast_core::recurrent::CellKind;
use bikecast_core::segment::{create_subdatasets, SubdatasetSpec};
use bikecast_core::synthetic::{generate_network, generate_scenario, ScenarioConfig};
use bikecast_core::{TimeGrid, TimeSeries};
use chrono::{FixedOffset, TimeDelta, TimeZone, Utc};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn utc() -> FixedOffset {
    FixedOffset::east_opt(0).unwrap()
}

fn hourly(values: Vec<f64>) -> TimeSeries {
    let start = Utc.with_ymd_and_hms(2019, 3, 4, 0, 0, 0).unwrap();
    TimeSeries::univariate(start, TimeDelta::hours(1), "y", values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masks_span_the_target(len in 1usize..200, mins in prop::sample::select(vec![15i64, 30, 60])) {
        let start = Utc.with_ymd_and_hms(2019, 3, 4, 0, 0, 0).unwrap();
        let ts = TimeSeries::univariate(start, TimeDelta::minutes(mins), "y", vec![0.0; len]).unwrap();
        let grid = ts.grid();
        let masks = vec![
            day_mask(&grid, &WeekdayMapping::IDENTITY, utc()),
            hour_mask(&grid, &HourBins::uniform(4).unwrap(), utc()),
        ];
        prop_assert!(masks.iter().all(|m| m.values.len() == len));
        prop_assert_eq!(append_masks(&ts, &masks).unwrap().len(), len);
    }

    #[test]
    fn calendar_masks_ignore_demand(a in prop::collection::vec(0.0f64..50.0, 48), b in prop::collection::vec(0.0f64..50.0, 48)) {
        let (x, y) = (hourly(a), hourly(b));
        let bins = HourBins::uniform(6).unwrap();
        prop_assert_eq!(hour_mask(&x.grid(), &bins, utc()), hour_mask(&y.grid(), &bins, utc()));
        prop_assert_eq!(
            day_mask(&x.grid(), &WeekdayMapping::IDENTITY, utc()),
            day_mask(&y.grid(), &WeekdayMapping::IDENTITY, utc())
        );
    }

    #[test]
    fn single_weather_station_ignores_k(values in prop::collection::vec(0.0f64..30.0, 6..30), lat in -1.0f64..1.0, lon in -1.0f64..1.0, k in 1usize..5) {
        let obs = hourly(values);
        let grid = TimeGrid::new(obs.start(), TimeDelta::minutes(30), 2 * obs.len());
        let station = WeatherStation { id: "w".into(), latitude: 0.3, longitude: -0.2, series: obs };
        let one = weather_channels(std::slice::from_ref(&station), (lat, lon), 1, &["y"], &grid, GeoDistance::Euclidean).unwrap();
        let all = weather_channels(std::slice::from_ref(&station), (lat, lon), k, &["y"], &grid, GeoDistance::Euclidean).unwrap();
        prop_assert_eq!(one, all);
    }

    #[test]
    fn consecutive_subdatasets_overlap(days in 2usize..30, window in 1usize..15, step in 1usize..6) {
        prop_assume!(window <= days && step <= window);
        let ts = hourly((0..days * 24).map(|t| t as f64).collect());
        let subs = create_subdatasets(&ts, SubdatasetSpec { window_days: window, step_days: step }).unwrap();
        for pair in subs.windows(2) {
            let overlap = pair[0].grid().end() - pair[1].start();
            prop_assert_eq!(overlap, TimeDelta::days((window - step) as i64));
            let shared = (window - step) * 24;
            prop_assert_eq!(&pair[0].values()[(step * 24)..], &pair[1].values()[..shared]);
        }
    }

    #[test]
    fn zero_gamma_freezes_seasonality(
        series in prop::collection::vec(0.5f64..20.0, 8..40),
        alpha in 0.0f64..=1.0,
        beta in 0.0f64..=1.0,
        period in 1usize..5,
    ) {
        prop_assume!(series.len() >= 2 * period);
        let state = holt_winters_fit(&series, HoltWintersParams::new(alpha, beta, 0.0, period)).unwrap();
        let first: f64 = series[..period].iter().sum::<f64>() / period as f64;
        let n = series.len();
        for (i, s) in state.seasonal.iter().enumerate() {
            // seasonal[i] holds the index of observation n - period + i
            let slot = (n - period + i) % period;
            prop_assert!((s - series[slot] / first).abs() < 1e-12);
        }
    }

    #[test]
    fn rmse_dominates_mae(errors in prop::collection::vec(-100.0f64..100.0, 1..50)) {
        let zeros = vec![0.0; errors.len()];
        let (mae, rmse) = metrics(&errors, &zeros).unwrap();
        prop_assert!(rmse >= mae - 1e-12);
        let (c_mae, c_rmse) = metrics(&vec![errors[0].abs(); errors.len()], &zeros).unwrap();
        prop_assert!((c_mae - c_rmse).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_instance_order(residues in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..12), rot in 0usize..12) {
        let mut shuffled = residues.clone();
        let rot = rot % shuffled.len();
        shuffled.rotate_left(rot);
        let a = ModelEvaluation::from_folds("a", vec![FoldResidues { residues }], Pooling::PerInstance).unwrap();
        let b = ModelEvaluation::from_folds("b", vec![FoldResidues { residues: shuffled }], Pooling::PerInstance).unwrap();
        prop_assert!((a.mae_mean - b.mae_mean).abs() < 1e-12);
        prop_assert!((a.rmse_std - b.rmse_std).abs() < 1e-12);
    }

    #[test]
    fn t_test_is_antisymmetric(pairs in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 2..30)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let ab = paired_t_test(&a, &b, Alternative::Less).unwrap();
        let ba = paired_t_test(&b, &a, Alternative::Less).unwrap();
        prop_assert_eq!(ab.t, -ba.t);
        let ab_greater = paired_t_test(&a, &b, Alternative::Greater).unwrap();
        prop_assert!((ab.p + ab_greater.p - 1.0).abs() < 1e-9);
        prop_assert!((ab_greater.p - ba.p).abs() < 1e-12);
    }

    #[test]
    fn pooled_mean_weights_folds_by_size(folds in prop::collection::vec(prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..8), 1..5)) {
        let per_fold: Vec<(f64, usize)> = folds
            .iter()
            .map(|f| {
                let e = ModelEvaluation::from_folds("f", vec![FoldResidues { residues: f.clone() }], Pooling::PerInstance).unwrap();
                (e.mae_mean, f.len())
            })
            .collect();
        let n: usize = per_fold.iter().map(|(_, c)| c).sum();
        let weighted = per_fold.iter().map(|(m, c)| m * *c as f64).sum::<f64>() / n as f64;
        let folds = folds.into_iter().map(|residues| FoldResidues { residues }).collect();
        let pooled = ModelEvaluation::from_folds("all", folds, Pooling::PerInstance).unwrap();
        prop_assert!((pooled.mae_mean - weighted).abs() < 1e-9);
    }
}

fn toy_samples(n: usize, offset: usize) -> Vec<Sample> {
    (0..n)
        .map(|k| {
            let phase = (k + offset) as f64 * 0.7;
            let input: Vec<f64> = (0..8).map(|t| 0.5 + 0.4 * (phase + t as f64 * 0.8).sin()).collect();
            let target: Vec<f64> = (8..10).map(|t| 0.5 + 0.4 * (phase + t as f64 * 0.8).sin()).collect();
            Sample { input, context: Vec::new(), target }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn early_stopping_keeps_the_best_weights(seed in 0u64..1000, patience in 1usize..4, dropout in prop::sample::select(vec![0.0, 0.2])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Encoder::new(CellKind::Gru, 1, &[4], 2, &mut rng).unwrap();
        let config = TrainConfig { learning_rate: 0.05, max_epochs: 15, patience, dropout, seed, ..TrainConfig::default() };
        let validation = toy_samples(6, 100);
        let (best, history) = fit_network(net, &toy_samples(24, 0), &validation, &config).unwrap();
        let min = history.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(mean_loss(&best, &validation, config.loss).unwrap(), min);
        // inference is unaffected by the training dropout rate
        prop_assert_eq!(best.predict(&validation[0]).unwrap(), best.predict(&validation[0]).unwrap());
    }
}

#[test]
fn trips_balance_network_wide() {
    for seed in 0..4 {
        let cfg = ScenarioConfig { n_stations: 8, days: 5, seed, ..ScenarioConfig::default() };
        let net = generate_network(cfg.n_stations, cfg.bbox, cfg.capacity_range, seed).unwrap();
        let sc = generate_scenario(&net, &cfg).unwrap();
        let totals = sc.system_series(&["gross_checkins", "gross_checkouts"]).unwrap();
        let checkins: f64 = totals.column(0).iter().sum();
        let checkouts: f64 = totals.column(1).iter().sum();
        let still_riding = f64::from(*sc.in_transit.last().unwrap());
        assert_eq!(checkins + still_riding, checkouts, "seed {seed}");
    }
}
