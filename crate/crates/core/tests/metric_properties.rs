mod common;

use explainbench::classifiers::FnModel;
use explainbench::dataset::FeatureVector;
use explainbench::metrics::{
    consistency, dice_sets, dice_similarity, effectiveness, robustness, stability, ExplanationSet, MetricSeries, Sample,
};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{ranked, set_of};

struct World {
    ids: Vec<String>,
    sources: Vec<ExplanationSet>,
}

/// Random explanation sets; some explanations are empty or missing.
fn world(seed: u64, d: usize, n: usize, m: usize) -> World {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("s{i:03}")).collect();
    let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..3)).collect();
    let mut sources = Vec::new();
    for _ in 0..m {
        let mut es = Vec::new();
        for (id, &l) in ids.iter().zip(&labels) {
            if r.gen_bool(0.05) {
                continue;
            }
            let len = r.gen_range(0..=d);
            es.push(ranked(id, l, &sample(&mut r, d, len).into_vec()));
        }
        sources.push(set_of(es));
    }
    World { ids, sources }
}

fn within(series: &MetricSeries, lo: f64, hi: f64, n: usize) -> bool {
    series.points.iter().all(|p| {
        p.n_samples + p.n_skipped == n && p.value.is_none_or(|v| (lo - 1e-12..=hi + 1e-12).contains(&v))
    })
}

const KS: [usize; 5] = [1, 2, 3, 5, 8];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_stay_in_range(seed in any::<u64>(), d in 3usize..30, n in 2usize..15, m in 2usize..5) {
        let w = world(seed, d, n, m);
        let refs: Vec<&ExplanationSet> = w.sources.iter().collect();
        prop_assert!(within(&stability(&refs, &w.ids, &KS).unwrap(), 0.0, 1.0, n));
        prop_assert!(within(&consistency(&refs, &w.ids, &KS).unwrap(), 0.0, 1.0, n));
        if let Ok(r) = robustness(&w.sources[0], &w.ids, &KS, 4, seed) {
            prop_assert!(within(&r.series, -1.0, 1.0, n));
            for b in &r.breakdowns {
                for c in &b.classes {
                    prop_assert!((c.rob - (c.s_bar - c.d_bar)).abs() < 1e-12);
                }
            }
        }
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let xs: Vec<FeatureVector> = (0..n).map(|_| FeatureVector::from_bools((0..d).map(|_| r.gen_bool(0.5)))).collect();
        let model = FnModel::new(d, 3, "mock", move |b: &[u8]| b.iter().map(|&v| v as usize).sum::<usize>() % 3);
        let samples: Vec<Sample<'_>> = w.ids.iter().map(String::as_str).zip(&xs).collect();
        prop_assert!(within(&effectiveness(&model, &samples, &w.sources[0], &KS).unwrap(), 0.0, 1.0, n));
    }

    #[test]
    fn dice_is_symmetric(seed in any::<u64>(), d in 1usize..40, k in 1usize..20) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (la, lb) = (r.gen_range(0..=d), r.gen_range(0..=d));
        let a = ranked("s", 0, &sample(&mut r, d, la).into_vec());
        let b = ranked("s", 0, &sample(&mut r, d, lb).into_vec());
        prop_assert_eq!(dice_similarity(&a, &b, k), dice_similarity(&b, &a, k));
        if let Some(v) = dice_similarity(&a, &b, k) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if !a.is_empty() {
            prop_assert_eq!(dice_similarity(&a, &a, k), Some(1.0));
        }
    }

    #[test]
    fn dice_grows_with_common_features(seed in any::<u64>(), d in 2usize..40) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (la, lb) = (r.gen_range(0..d), r.gen_range(0..d));
        let a = sample(&mut r, d, la).into_vec();
        let b = sample(&mut r, d, lb).into_vec();
        let fresh = d; // not in either set
        let before = dice_sets(&a, &b).unwrap_or(0.0);
        let after = dice_sets(&[a.clone(), vec![fresh]].concat(), &[b.clone(), vec![fresh]].concat()).unwrap();
        prop_assert!(after >= before - 1e-12);
        let same_set = a.len() == b.len() && a.iter().all(|f| b.contains(f));
        prop_assert_eq!(dice_sets(&a, &b) == Some(1.0), same_set && !a.is_empty());
    }

    #[test]
    fn full_mutation_flips_a_dictator(seed in any::<u64>(), d in 1usize..30, n in 1usize..10) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let j = r.gen_range(0..d);
        let model = FnModel::new(d, 2, "mock", move |b: &[u8]| usize::from(b[j]));
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let xs: Vec<FeatureVector> = (0..n).map(|_| FeatureVector::from_bools((0..d).map(|_| r.gen_bool(0.5)))).collect();
        let all: Vec<usize> = (0..d).collect();
        let es = set_of(ids.iter().map(|id| ranked(id, 0, &all)).collect());
        let samples: Vec<Sample<'_>> = ids.iter().map(String::as_str).zip(&xs).collect();
        let eff = effectiveness(&model, &samples, &es, &[d]).unwrap();
        prop_assert_eq!(eff.value(d), Some(1.0));
    }

    #[test]
    fn constant_explainer_is_stable_and_not_robust(seed in any::<u64>(), d in 2usize..30, n in 3usize..20) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let len = r.gen_range(1..=d);
        let feats = sample(&mut r, d, len).into_vec();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        // labels 0, 1, 0, 1, ... so every sample has both kinds of neighbours
        let es = set_of(ids.iter().enumerate().map(|(i, id)| ranked(id, i % 2, &feats)).collect());
        let s = stability(&[&es, &es, &es], &ids, &KS).unwrap();
        prop_assert!(s.points.iter().all(|p| p.value == Some(1.0)));
        let rob = robustness(&es, &ids, &KS, 50, seed).unwrap();
        prop_assert!(rob.series.points.iter().all(|p| p.value.unwrap().abs() < 1e-12));
    }

    #[test]
    fn results_do_not_depend_on_sample_order(seed in any::<u64>(), d in 3usize..20, n in 3usize..12) {
        let w = world(seed, d, n, 3);
        let mut shuffled = w.ids.clone();
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut ChaCha8Rng::seed_from_u64(seed ^ 2));
        let refs: Vec<&ExplanationSet> = w.sources.iter().collect();
        prop_assert_eq!(stability(&refs, &w.ids, &KS).unwrap(), stability(&refs, &shuffled, &KS).unwrap());
        let a = robustness(&w.sources[1], &w.ids, &KS, 3, seed);
        let b = robustness(&w.sources[1], &shuffled, &KS, 3, seed);
        prop_assert_eq!(a.ok(), b.ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // E[dice] of two uniform k-subsets of d features is k/d
    #[test]
    fn random_explainer_stability_is_k_over_d(seed in any::<u64>()) {
        let (d, k, n, m) = (295usize, 5usize, 400usize, 4usize);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let sources: Vec<ExplanationSet> = (0..m)
            .map(|_| set_of(ids.iter().map(|id| ranked(id, 0, &sample(&mut r, d, k).into_vec())).collect()))
            .collect();
        let refs: Vec<&ExplanationSet> = sources.iter().collect();
        let v = stability(&refs, &ids, &[k]).unwrap().value(k).unwrap();
        prop_assert!((v - k as f64 / d as f64).abs() <= 0.01, "stability {v}");
        let c = consistency(&refs[..3], &ids, &[k]).unwrap().value(k).unwrap();
        prop_assert!((c - k as f64 / d as f64).abs() <= 0.01, "consistency {c}");
    }
}
