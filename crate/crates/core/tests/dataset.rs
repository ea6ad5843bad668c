use proptest::prelude::*;
use segfire::dataset::*;
use segfire::Label;

#[test]
fn rendered_labels_follow_the_quota() {
    let spec = TileDatasetSpec { count: 40, fire_ratio: 0.3, seed: 9, ..Default::default() };
    let tiles = synthesize_tiles(&spec).unwrap();
    let fires = tiles.iter().filter(|t| t.sample.label == Label::Fire).count();
    assert_eq!(fires, fire_quota(40, 0.3));
    assert!(tiles.iter().any(|t| t.origin == TileOrigin::Zoomed));
    // Some negatives come from burning scenes.
    assert!(tiles.iter().any(|t| t.sample.label == Label::NonFire && t.fire_fraction == 0.0));
}

#[test]
fn bad_ratios_are_rejected() {
    assert!(synthesize_tiles(&TileDatasetSpec { fire_ratio: 1.5, ..Default::default() }).is_err());
    assert!(synthesize_tiles(&TileDatasetSpec { min_fire_fraction: 0.0, ..Default::default() }).is_err());
    assert!(split_indices(10, 1.0, 0).is_err());
}

proptest! {
    #[test]
    fn class_balance_within_two_percent(n in 1000usize..20000, ratio in 0.0f64..=1.0) {
        let q = fire_quota(n, ratio);
        prop_assert!((q as f64 / n as f64 - ratio).abs() <= 0.02);
    }

    #[test]
    fn split_is_a_partition(n in 0usize..500, frac in 0.0f64..0.95, seed: u64) {
        let (train, val) = split_indices(n, frac, seed).unwrap();
        prop_assert_eq!(val.len(), (n as f64 * frac).round() as usize);
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}
