use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::sample::subsequence;

use sizegate::kb::{ArBin, AreaBin, Catalogue, DepthBin, SizeProfile};
use sizegate::quantize::SizeObservation;
use sizegate::reasoner::{validate_ranking, Prediction, ValidationMode};

fn profile(i: usize) -> impl Strategy<Value = SizeProfile> {
    (
        subsequence(AreaBin::ALL.to_vec(), 1..=5),
        subsequence(DepthBin::ALL.to_vec(), 1..=4),
        subsequence(ArBin::ALL.to_vec(), 1..=3),
    )
        .prop_map(move |(a, d, r)| SizeProfile::new(format!("class{i}"), a, d, r))
}

fn catalogue() -> impl Strategy<Value = Catalogue> {
    (1usize..8)
        .prop_flat_map(|n| (0..n).map(profile).collect::<Vec<_>>())
        .prop_map(|profiles| Catalogue::from_profiles(profiles).unwrap())
}

fn observation() -> impl Strategy<Value = SizeObservation> {
    (
        prop::sample::select(AreaBin::ALL.to_vec()),
        prop::sample::select(DepthBin::ALL.to_vec()),
        prop::sample::select(ArBin::ALL.to_vec()),
    )
        .prop_map(|(area_bin, depth_bin, ar_bin)| SizeObservation {
            area_m2: 0.0,
            depth_m: 0.0,
            other_dims_m: [0.0; 2],
            bbox2d_w_px: 1.0,
            bbox2d_h_px: 1.0,
            area_bin,
            depth_bin,
            ar_bin,
        })
}

fn survivors(ranking: &[Prediction], obs: &SizeObservation, cat: &Catalogue, mode: ValidationMode) -> BTreeSet<String> {
    let v = validate_ranking(ranking, obs, cat, mode);
    if v.fallback {
        BTreeSet::new()
    } else {
        v.ranking.into_iter().map(|p| p.class_name).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn adding_features_only_shrinks_the_candidate_set(
        cat in catalogue(),
        obs in observation(),
        picks in prop::collection::vec(0usize..8, 1..10),
    ) {
        let names = cat.class_list();
        let ranking: Vec<Prediction> = picks
            .iter()
            .enumerate()
            .map(|(j, &p)| Prediction::new(names[p % names.len()].clone(), j as f64))
            .collect();
        let [area, flat, thin, flat_ar, thin_ar] = ValidationMode::ALL.map(|m| survivors(&ranking, &obs, &cat, m));
        prop_assert!(area.is_superset(&flat) && flat.is_superset(&flat_ar));
        prop_assert!(area.is_superset(&thin) && thin.is_superset(&thin_ar));
    }

    #[test]
    fn validated_ranking_is_an_ordered_subsequence(
        cat in catalogue(),
        obs in observation(),
        picks in prop::collection::vec(0usize..8, 1..10),
        mode in prop::sample::select(ValidationMode::ALL.to_vec()),
    ) {
        let names = cat.class_list();
        let ranking: Vec<Prediction> = picks
            .iter()
            .enumerate()
            .map(|(j, &p)| Prediction::new(names[p % names.len()].clone(), j as f64))
            .collect();
        let v = validate_ranking(&ranking, &obs, &cat, mode);
        if v.fallback {
            prop_assert_eq!(&v.ranking, &ranking);
        } else {
            let mut rest = ranking.iter();
            prop_assert!(v.ranking.iter().all(|p| rest.any(|q| q == p)));
            let plausible: BTreeSet<&str> = cat.plausible_classes(&obs, mode).into_iter().collect();
            prop_assert!(v.ranking.iter().all(|p| plausible.contains(p.class_name.as_str())));
        }
    }
}
