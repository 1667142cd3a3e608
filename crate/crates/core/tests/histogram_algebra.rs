use std::collections::BTreeMap;

use midpath::histogram::{snapshot, Bin, CellKey};
use midpath::{BinningScheme, Metric, SchemeSet, SparseHistogram, SparseHistogram32};
use proptest::prelude::*;

fn cells() -> impl Strategy<Value = Vec<(u8, u8, i32, u64)>> {
    prop::collection::vec((0..3u8, 0..4u8, -40..200i32, 1..50u64), 0..60)
}

fn build(entries: &[(u8, u8, i32, u64)]) -> SparseHistogram {
    let mut h = SparseHistogram::new(SchemeSet::uniform(BinningScheme::default()));
    for &(server, isp, bin, n) in entries {
        let bin = match bin {
            -40 => Bin::Underflow,
            199 => Bin::Overflow,
            i => Bin::Index(i),
        };
        let key = CellKey::new("gru", format!("gru0{server}"), 1000 + isp as u32, Metric::DownloadMbps);
        h.add_count(key, bin, n).unwrap();
    }
    h
}

proptest! {
    #[test]
    fn merge_matches_bulk_build(a in cells(), b in cells()) {
        let joined: Vec<_> = a.iter().chain(&b).copied().collect();
        let merged = SparseHistogram::merge(&build(&a), &build(&b)).unwrap();
        prop_assert_eq!(&merged, &build(&joined));
        prop_assert_eq!(merged.grand_total(), joined.iter().map(|e| e.3).sum::<u64>());
    }

    #[test]
    fn snapshot_text_is_stable(a in cells()) {
        let h = build(&a);
        let mut first = Vec::new();
        snapshot::save(&h, &mut first).unwrap();
        let back: SparseHistogram = snapshot::load(&first[..]).unwrap();
        let mut second = Vec::new();
        snapshot::save(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn isp_totals_sum_to_grand_total(a in cells()) {
        let h = build(&a);
        let by_isp: BTreeMap<u32, u64> = h.isp_totals("gru");
        prop_assert_eq!(by_isp.values().sum::<u64>(), h.grand_total());
    }
}

#[test]
fn f32_snapshot_keeps_counts() {
    let mut h = SparseHistogram32::new(midpath::histogram::SchemeSet::uniform(midpath::histogram::BinningScheme::<f32>::default()));
    let key = CellKey::new("gru", "gru01", 7, Metric::MinRttMs);
    h.add_count(key.clone(), Bin::Index(40), 12).unwrap();
    let mut bytes = Vec::new();
    snapshot::save(&h, &mut bytes).unwrap();
    let back: SparseHistogram32 = snapshot::load(&bytes[..]).unwrap();
    assert_eq!(back.cell_total(&key), 12);
}

#[test]
fn mismatched_schemes_refuse_to_merge() {
    let a = SparseHistogram::new(SchemeSet::uniform(BinningScheme::default()));
    let b = SparseHistogram::new(SchemeSet::uniform(BinningScheme::new(20, 1.0, 0.01, 1e5).unwrap()));
    assert!(SparseHistogram::merge(&a, &b).is_err());
}
