// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use common::{diff, lang, random_corpus, topk_by_sort};
use langdim::intervention::{apply_intervention, InterventionSpec, PositionPolicy};
use langdim::metrics::{bleu, evaluate_control, train_langid, TokenizerPolicy};
use langdim::stats::{
    agreement_rate, corpus_mean, diff_monolingual, diff_parallel, overlap_matrix, topk_select, CorpusMeanVector,
    DimensionSet, SentenceVector, Setting,
};
use langdim::store::read_corpus;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scores(max_d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec(0.0f64..100.0, 1..max_d),
        prop::collection::vec((0u8..6).prop_map(|x| f64::from(x) * 0.5), 1..max_d),
    ]
}

fn scores_and_k(max_d: usize) -> impl Strategy<Value = (Vec<f64>, usize)> {
    scores(max_d).prop_flat_map(|v| {
        let d = v.len();
        (Just(v), 1..=d)
    })
}

fn index_set(d: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::sample::subsequence((0..d).collect::<Vec<_>>(), k)
}

fn set(tag: &str, setting: Setting, d: usize, indices: Vec<usize>) -> DimensionSet {
    DimensionSet::from_indices(lang(tag), setting, d, indices, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ldim_round_trip_is_canonical(seed in any::<u64>()) {
        let corpus = random_corpus(&mut ChaCha8Rng::seed_from_u64(seed));
        let bytes = corpus.to_bytes().unwrap();
        let back = read_corpus(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &corpus);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn topk_matches_sort((values, k) in scores_and_k(200)) {
        let set = topk_select(&diff(values.clone()), k).unwrap();
        let expected = topk_by_sort(&values, k);
        prop_assert_eq!(set.indices(), expected.as_slice());
        prop_assert!(set.indices().windows(2).all(|w| w[0] < w[1]));
        for (&i, &s) in set.indices().iter().zip(set.scores()) {
            prop_assert_eq!(values[i], s);
        }
    }

    #[test]
    fn topk_invariant_under_positive_scaling((values, k) in scores_and_k(100), exp in -20i32..20) {
        let scale = 2f64.powi(exp);
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let a = topk_select(&diff(values), k).unwrap();
        let b = topk_select(&diff(scaled), k).unwrap();
        prop_assert_eq!(a.indices(), b.indices());
    }

    #[test]
    fn overlap_is_symmetric_with_k_diagonal(
        sets in prop::collection::vec(index_set(64, 10), 1..6)
    ) {
        let sets: Vec<DimensionSet> = sets
            .into_iter()
            .enumerate()
            .map(|(i, s)| set(["fr", "es", "ja", "zh", "ko", "de"][i], Setting::Parallel, 64, s))
            .collect();
        let m = overlap_matrix(&sets).unwrap();
        for i in 0..sets.len() {
            prop_assert_eq!(m.get(i, i), 10);
            for j in 0..sets.len() {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!(m.get(i, j) <= 10);
            }
        }
    }

    #[test]
    fn agreement_in_unit_interval(a in index_set(32, 6), b in index_set(32, 6)) {
        let r = agreement_rate(&set("ja", Setting::Monolingual, 32, a), &set("ja", Setting::Parallel, 32, b)).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn corpus_mean_commutes_with_translation(
        rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..20),
        shift in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let vectors: Vec<SentenceVector> = rows
            .iter()
            .enumerate()
            .map(|(i, v)| SentenceVector { sentence_id: i as u32, values: v.clone() })
            .collect();
        let shifted: Vec<SentenceVector> = vectors
            .iter()
            .map(|v| SentenceVector {
                sentence_id: v.sentence_id,
                values: v.values.iter().zip(&shift).map(|(x, t)| x + t).collect(),
            })
            .collect();
        let a = corpus_mean(&vectors, lang("fr"), 3).unwrap();
        let b = corpus_mean(&shifted, lang("fr"), 3).unwrap();
        for ((x, y), t) in a.values().iter().zip(b.values()).zip(&shift) {
            prop_assert!((x + t - y).abs() < 1e-9);
        }
    }

    #[test]
    fn corpus_mean_ignores_input_order(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..30),
        rotate in 0usize..30,
    ) {
        let vectors: Vec<SentenceVector> = rows
            .iter()
            .enumerate()
            .map(|(i, v)| SentenceVector { sentence_id: i as u32 * 2, values: v.clone() })
            .collect();
        let mut moved = vectors.clone();
        let n = moved.len();
        moved.rotate_left(rotate % n);
        let a = corpus_mean(&vectors, lang("fr"), 0).unwrap();
        let b = corpus_mean(&moved, lang("fr"), 0).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn diffs_are_nonnegative_and_vanish_on_equal_means(
        a in prop::collection::vec(-50.0f64..50.0, 8),
        b in prop::collection::vec(-50.0f64..50.0, 8),
    ) {
        let final_ = CorpusMeanVector::new(lang("ja"), 12, a.clone(), 1).unwrap();
        let anchor = CorpusMeanVector::new(lang("ja"), 5, b.clone(), 1).unwrap();
        let source = CorpusMeanVector::new(lang("en"), 12, b, 1).unwrap();
        let mono = diff_monolingual(&final_, &anchor).unwrap();
        let para = diff_parallel(&final_, &source, 12).unwrap();
        prop_assert!(mono.values().iter().chain(para.values()).all(|&x| x >= 0.0));
        prop_assert_eq!(mono.values(), para.values());
        let same = CorpusMeanVector::new(lang("ja"), 5, a, 1).unwrap();
        prop_assert!(diff_monolingual(&final_, &same).unwrap().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn intervention_is_local_and_idempotent(
        h in prop::collection::vec(-100.0f32..100.0, 16),
        mu in prop::collection::vec(-100.0f64..100.0, 16),
        dims in prop::sample::subsequence((0..16usize).collect::<Vec<_>>(), 1..16),
        alpha in 0.0f64..3.0,
    ) {
        let set = set("fr", Setting::Parallel, 16, dims.clone());
        let mean = CorpusMeanVector::new(lang("fr"), 12, mu.clone(), 1).unwrap();
        let spec = InterventionSpec::new(set, mean, 4, alpha, PositionPolicy::AllPositions).unwrap();
        let once = apply_intervention(&h, &spec).unwrap();
        let twice = apply_intervention(&once, &spec).unwrap();
        prop_assert_eq!(&once, &twice);
        for i in 0..16 {
            if dims.contains(&i) {
                prop_assert_eq!(once[i], (alpha * mu[i]) as f32);
            } else {
                prop_assert_eq!(once[i].to_bits(), h[i].to_bits());
            }
        }
    }

    #[test]
    fn bleu_identity_and_order_invariance(
        sents in prop::collection::vec(prop::collection::vec("[a-e]", 1..8), 1..8),
        others in prop::collection::vec(prop::collection::vec("[a-e]", 0..8), 8),
        rotate in 0usize..8,
    ) {
        prop_assert_eq!(bleu(&sents, &sents).unwrap(), 100.0);
        let refs: Vec<Vec<String>> = others[..sents.len()].to_vec();
        let score = bleu(&sents, &refs).unwrap();
        prop_assert!((0.0..=100.0).contains(&score));
        let mut c2 = sents.clone();
        let mut r2 = refs.clone();
        let n = c2.len();
        c2.rotate_left(rotate % n);
        r2.rotate_left(rotate % n);
        prop_assert_eq!(bleu(&c2, &r2).unwrap(), score);
    }

    #[test]
    fn langid_symmetric_under_label_swap(
        a in prop::collection::vec("[a-f ]{1,12}", 1..5),
        b in prop::collection::vec("[c-h ]{1,12}", 1..5),
        probe in "[a-h]{1,10}",
    ) {
        prop_assume!(a.iter().any(|s| !s.is_empty()) && b.iter().any(|s| !s.is_empty()));
        let fwd = train_langid(&[("x".to_string(), a.clone()), ("y".to_string(), b.clone())]).unwrap();
        let rev = train_langid(&[("x".to_string(), b), ("y".to_string(), a)]).unwrap();
        let p = fwd.posteriors(&probe).unwrap();
        let q = rev.posteriors(&probe).unwrap();
        prop_assert!((p[0] - q[1]).abs() < 1e-12 && (p[1] - q[0]).abs() < 1e-12);
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixing_an_output_never_lowers_acc(
        picks in prop::collection::vec(any::<bool>(), 1..12),
        fix in 0usize..12,
    ) {
        let model = train_langid(&[
            ("toyA".to_string(), vec!["bada kitu mupa", "tuka dimi"]),
            ("toyB".to_string(), vec!["fesy horo", "lewe zyvo safe"]),
        ])
        .unwrap();
        let refs: Vec<&str> = picks.iter().map(|_| "fesy horo lewe").collect();
        let mut outs: Vec<&str> = picks.iter().map(|&ok| if ok { "fesy horo lewe" } else { "bada kitu" }).collect();
        let before = evaluate_control(&outs, &refs, "toyB", &model, TokenizerPolicy::Whitespace).unwrap();
        let i = fix % outs.len();
        outs[i] = refs[i];
        let after = evaluate_control(&outs, &refs, "toyB", &model, TokenizerPolicy::Whitespace).unwrap();
        prop_assert!(after.acc >= before.acc);
        prop_assert!((before.acc - before.n_success as f64 / before.n_samples as f64).abs() < 1e-15);
        prop_assert!((before.acc_bleu - before.acc * before.bleu).abs() < 1e-9);
    }
}
