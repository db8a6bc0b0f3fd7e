use proptest::prelude::*;

use stratum_core::features::{extract_position_features, extract_sensor_features, LabelRule, WindowingConfig, FEATURE_NAMES};
use stratum_core::data::RawRecording;
use stratum_core::Label;

/// 1.5 + sin(2π·3i/40) + 0.4·sin(2π·7i/40 + 0.3) + 0.05·i, 40 samples at 20 Hz.
fn reference_window() -> Vec<f64> {
    let n = 40.0;
    (0..40)
        .map(|i| {
            let i = i as f64;
            let tau = 2.0 * std::f64::consts::PI;
            1.5 + (tau * 3.0 * i / n).sin() + 0.4 * (tau * 7.0 * i / n + 0.3).sin() + 0.05 * i
        })
        .collect()
}

/// Computed independently with numpy/scipy from the feature definitions.
const REFERENCE_FEATURES: [f64; 27] = [
    2.475,
    0.8171721104707049,
    0.6178654043497576,
    4.382134595650243,
    2.311786540434976,
    3.7642691913004853,
    0.1794871794871795,
    2.475,
    0.39665612576504683,
    0.3186373710795593,
    0.15409237740175258,
    0.0,
    0.0,
    1.5,
    0.5,
    3.5,
    0.0,
    0.0,
    6.793395258131146,
    2.8135563947243902,
    2.5248915152695384,
    1.2997664449432418,
    3.7167147986871383,
    2.475,
    0.8171721104707049,
    0.07764182691762311,
    3.193805268008162,
];

#[test]
fn golden_vector() {
    let f = extract_sensor_features(&reference_window(), 20.0).unwrap();
    for (i, (&got, &want)) in f.iter().zip(&REFERENCE_FEATURES).enumerate() {
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{}: {got} != {want}", FEATURE_NAMES[i]);
    }
}

#[test]
fn position_features_have_81_columns_and_are_deterministic() {
    let n = 32 * 20;
    let channels: Vec<Vec<f64>> = (0..3).map(|c| (0..n).map(|i| ((i * (c + 2)) as f64 * 0.1).sin()).collect()).collect();
    let rec = RawRecording::new(
        32.0,
        vec!["acc".into(), "gyro".into(), "mag".into()],
        channels,
        (0..n).map(|i| 1 + (i / 200) as Label).collect(),
    )
    .unwrap();
    let cfg = WindowingConfig { window_seconds: 5.0, overlap_fraction: 0.5, label_rule: LabelRule::MajorityLabel };
    let a = extract_position_features(&rec, &cfg).unwrap();
    assert_eq!(a.dim(), 81);
    assert_eq!(a.n_rows(), 7);
    assert_eq!(a, extract_position_features(&rec, &cfg).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ordering_invariants(window in prop::collection::vec(-10.0..10.0f64, 8..80)) {
        let f = extract_sensor_features(&window, 16.0).unwrap();
        prop_assert!(f[2] <= f[4] && f[4] <= f[3]);
        prop_assert!(f[18] >= 0.0);
        prop_assert!(f[8..13].iter().all(|&m| m >= 0.0));
        prop_assert!(f[8..13].windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn scaling_invariants(window in prop::collection::vec(-10.0..10.0f64, 8..80), s in 0.1..10.0f64) {
        let f = extract_sensor_features(&window, 16.0).unwrap();
        let scaled: Vec<f64> = window.iter().map(|v| v * s).collect();
        let g = extract_sensor_features(&scaled, 16.0).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        for i in [0, 1, 2, 3, 4, 5, 7, 8, 9, 10, 11, 12] {
            prop_assert!(close(g[i], s * f[i]), "{}: {} vs {}", FEATURE_NAMES[i], g[i], s * f[i]);
        }
        prop_assert!(close(g[18], s * s * f[18]));
        prop_assert_eq!(g[6], f[6]);
        prop_assert_eq!(&g[13..18], &f[13..18]);
    }
}
