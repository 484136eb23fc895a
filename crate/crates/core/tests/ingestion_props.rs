use std::collections::BTreeMap;

use proptest::prelude::*;

use sizegate::geometry::DepthCrop;
use sizegate::ingest::{
    match_rgb_depth, parse_ground_truth, parse_rankings, read_depth_crop, rankings_to_string, write_depth_crop,
    write_ground_truth, FrameStamp, MatchConfig,
};
use sizegate::reasoner::{Prediction, RegionRecord};

fn class_name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9]{0,6}(_[a-z0-9]{1,4}){0,2}"
}

fn record(id: usize) -> impl Strategy<Value = RegionRecord> {
    (
        prop::array::uniform4(0.0f64..2000.0),
        prop::option::of("[a-z0-9_/]{1,12}\\.png"),
        prop::collection::vec((class_name(), 0.0f64..50.0), 1..8),
        prop::option::of(class_name()),
    )
        .prop_map(move |(bbox2d, depth_crop, preds, ground_truth)| {
            let mut ranking: Vec<Prediction> = preds.into_iter().map(|(c, s)| Prediction::new(c, s)).collect();
            ranking.sort_by(|a, b| a.score.total_cmp(&b.score));
            RegionRecord {
                region_id: format!("r{id}"),
                bbox2d,
                depth_crop,
                ranking,
                ground_truth,
            }
        })
}

fn records() -> impl Strategy<Value = Vec<RegionRecord>> {
    (0usize..20).prop_flat_map(|n| (0..n).map(record).collect::<Vec<_>>())
}

fn stamps(max: usize) -> impl Strategy<Value = Vec<FrameStamp>> {
    prop::collection::vec(0.0f64..30.0, 0..max).prop_map(|mut ts| {
        ts.sort_by(f64::total_cmp);
        ts.into_iter().enumerate().map(|(i, t)| FrameStamp::new(format!("f{i}"), t)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ranking_jsonl_round_trips(recs in records()) {
        let text = rankings_to_string(&recs);
        let back = parse_rankings(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &recs);
        prop_assert_eq!(rankings_to_string(&back), text);
    }

    #[test]
    fn truth_csv_round_trips(truth in prop::collection::btree_map("r[0-9]{1,4}", class_name(), 0..30)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        write_ground_truth(&truth, &path).unwrap();
        let back: BTreeMap<String, String> = parse_ground_truth(std::fs::File::open(&path).unwrap()).unwrap();
        prop_assert_eq!(back, truth);
    }

    #[test]
    fn depth_png_round_trips(
        (w, h, values) in (1u32..24, 1u32..24)
            .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(any::<u16>(), (w * h) as usize)))
    ) {
        let crop = DepthCrop::new(w, h, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        write_depth_crop(&crop, &path).unwrap();
        prop_assert_eq!(read_depth_crop(&path).unwrap(), crop);
    }

    #[test]
    fn matches_stay_within_the_window(rgb in stamps(30), depth in stamps(30), mu in 0.01f64..2.0) {
        let pairs = match_rgb_depth(&rgb, &depth, &MatchConfig { mu }).unwrap();
        prop_assert_eq!(pairs.len(), rgb.len());
        let t = |frames: &[FrameStamp], id: &str| frames.iter().find(|f| f.frame_id == id).unwrap().timestamp;
        for (r, d) in &pairs {
            if let Some(d) = d {
                prop_assert!((t(&rgb, r) - t(&depth, d)).abs() <= mu);
            } else {
                // nothing was in range
                let tr = t(&rgb, r);
                prop_assert!(depth.iter().all(|f| (f.timestamp - tr).abs() > mu));
            }
        }
    }

    #[test]
    fn wider_window_never_loses_matches(rgb in stamps(30), depth in stamps(30), mu in 0.01f64..1.0, extra in 0.0f64..1.0) {
        let count = |mu: f64| {
            match_rgb_depth(&rgb, &depth, &MatchConfig { mu }).unwrap().iter().filter(|(_, d)| d.is_some()).count()
        };
        prop_assert!(count(mu + extra) >= count(mu));
    }
}
