//! CLEAR MOT, successful tracks and RMS on hand-built fixtures.

use proptest::prelude::*;

use crowdtrack::dataset::{Record, SourceTag, TrajectoryDataset};
use crowdtrack::evaluation::{clear_mot, evaluate, rms_error, success_and_switches, Association, MatchConfig};
use crowdtrack::Vec2;

fn ds(rows: impl IntoIterator<Item = (u64, u32, f64, f64)>) -> TrajectoryDataset {
    let records = rows.into_iter().map(|(f, id, x, y)| Record::new(f, id, Vec2::new(x, y))).collect();
    TrajectoryDataset::new(records, 25.0, SourceTag::GroundTruth).sorted()
}

fn configs() -> [MatchConfig; 2] {
    [
        MatchConfig::default(),
        MatchConfig { association: Association::Hungarian, ..Default::default() },
    ]
}

#[test]
fn identity_is_perfect() {
    let gt = ds((0..30).flat_map(|f| (0..6).map(move |i| (f, i, i as f64 * 2.0, f as f64 * 0.05))));
    for cfg in configs() {
        let mot = clear_mot(&gt, &gt, &cfg).unwrap();
        assert_eq!((mot.mota, mot.motp, mot.id_switches, mot.misses), (1.0, 0.0, 0, 0));
        let r = evaluate(&gt, &gt, &cfg).unwrap();
        assert_eq!((r.successful_tracks, r.total_tracks, r.rms_error), (6, 6, 0.0));
    }
}

#[test]
fn one_miss_in_ten() {
    let gt = ds((0..10).map(|i| (0, i, i as f64 * 4.0, 0.0)));
    let est = ds((0..10).filter(|&i| i != 4).map(|i| (0, i, i as f64 * 4.0, 0.0)));
    for cfg in configs() {
        let mot = clear_mot(&gt, &est, &cfg).unwrap();
        assert!((mot.mota - 0.9).abs() < 1e-12);
        assert_eq!(mot.misses, 1);
    }
}

#[test]
fn swapped_identities_count_two_switches() {
    let gt = ds((0..10).flat_map(|f| [(f, 0, 0.0, f as f64 * 0.1), (f, 1, 10.0, f as f64 * 0.1)]));
    let est = ds((0..10).flat_map(|f| {
        let (a, b) = if f < 5 { (0, 1) } else { (1, 0) };
        [(f, a, 0.0, f as f64 * 0.1), (f, b, 10.0, f as f64 * 0.1)]
    }));
    for cfg in configs() {
        assert_eq!(clear_mot(&gt, &est, &cfg).unwrap().id_switches, 2);
        assert_eq!(success_and_switches(&gt, &est, &cfg).unwrap().id_switches, 2);
    }
}

#[test]
fn false_positive_far_from_every_object() {
    let gt = ds((0..4).map(|i| (0, i, i as f64 * 3.0, 0.0)));
    let est = ds((0..4).map(|i| (0, i, i as f64 * 3.0, 0.0)).chain([(0, 9, 100.0, 100.0)]));
    let mot = clear_mot(&gt, &est, &MatchConfig::default()).unwrap();
    assert_eq!(mot.false_positives, 1);
    assert!((mot.mota - 0.75).abs() < 1e-12);
}

#[test]
fn constant_offset_rms_is_analytic() {
    let gt = ds((0..50).map(|f| (f, 0, f as f64 * 0.1, 1.0)));
    let est = ds((0..50).map(|f| (f, 0, f as f64 * 0.1 + 0.3, 1.4)));
    assert!((rms_error(&gt, &est).unwrap() - 0.5).abs() <= 1e-9);
    let s = success_and_switches(&gt, &est, &MatchConfig::default()).unwrap();
    assert_eq!(s.successful_tracks, 1);
    assert!((s.mean_errors[&0] - 0.5).abs() <= 1e-9);
}

#[test]
fn far_track_is_not_successful() {
    let gt = ds((0..20).map(|f| (f, 0, f as f64, 0.0)));
    let est = ds((0..20).map(|f| (f, 0, f as f64, 0.9)));
    assert_eq!(success_and_switches(&gt, &est, &MatchConfig::default()).unwrap().successful_tracks, 0);
}

proptest! {
    #[test]
    fn mota_is_at_most_one_and_motp_within_gate(
        noise in prop::collection::vec((-1.5..1.5f64, -1.5..1.5f64), 5 * 8),
        drop in prop::collection::vec(any::<bool>(), 5 * 8),
    ) {
        let gt = ds((0..8u64).flat_map(|f| (0..5u32).map(move |i| (f, i, i as f64 * 4.0, f as f64 * 0.1))));
        let est = ds(gt.records.iter().enumerate().filter(|(k, _)| !drop[*k]).map(|(k, r)| {
            (r.frame, r.agent_id, r.x + noise[k].0, r.y + noise[k].1)
        }));
        for cfg in configs() {
            let mot = clear_mot(&gt, &est, &cfg).unwrap();
            prop_assert!(mot.mota <= 1.0);
            prop_assert!(mot.motp >= 0.0 && mot.motp <= cfg.match_radius + 1e-12);
            prop_assert_eq!(mot.matches + mot.misses, mot.gt_objects);
        }
    }
}
