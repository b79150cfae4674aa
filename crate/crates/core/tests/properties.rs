use proptest::prelude::*;

use tokbrier::apps::{expected_cascade_curve, expected_self_correction, lowest_confidence_order, SimPolicy};
use tokbrier::cli::jsonl::{parse_records, records_to_string};
use tokbrier::metrics::{auroc_scores, ece, reliability_diagram};
use tokbrier::prob::SIMPLEX_TOLERANCE;
use tokbrier::psr::{bernoulli_risk, conditional_risk};
use tokbrier::score::tokenized_brier;
use tokbrier::{
    classical_brier, nearest_token, restricted_softmax, CalibrationRecord, ConfidenceScale, CorrectnessLabel,
    LogitVector, ProbVector,
};

fn logits(max_n: usize, range: f64) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_n).prop_flat_map(move |n| prop::collection::vec(-range..range, n + 1))
}

fn scale_of(v: &[f64]) -> ConfidenceScale {
    ConfidenceScale::new(v.len() - 1).unwrap()
}

fn label() -> impl Strategy<Value = CorrectnessLabel> {
    any::<bool>().prop_map(CorrectnessLabel::from)
}

fn simplex(n: usize) -> impl Strategy<Value = ProbVector> {
    prop::collection::vec(0.0f64..1.0, n + 1).prop_filter_map("nonzero mass", |w| {
        let sum: f64 = w.iter().sum();
        (sum > 1e-6).then(|| ProbVector::new(w.iter().map(|x| x / sum).collect()).unwrap())
    })
}

fn scored_records(max: usize) -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..max)
}

fn to_records(pairs: &[(f64, bool)]) -> Vec<CalibrationRecord> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(c, y))| CalibrationRecord::with_confidence(format!("r{i:04}"), c, y.into()).unwrap())
        .collect()
}

proptest! {
    #[test]
    fn softmax_stays_on_simplex(f in logits(100, 100.0)) {
        let q = restricted_softmax(&LogitVector::new(f).unwrap());
        prop_assert!(q.values().iter().all(|&v| v >= 0.0));
        prop_assert!((q.values().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE);
    }

    #[test]
    fn softmax_is_shift_invariant(f in logits(30, 50.0), c in -500.0f64..500.0) {
        let q = restricted_softmax(&LogitVector::new(f.clone()).unwrap());
        let shifted = restricted_softmax(&LogitVector::new(f.iter().map(|v| v + c).collect()).unwrap());
        for (a, b) in q.values().iter().zip(shifted.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn brier_is_linear_in_q(
        (a, b) in (1usize..40).prop_flat_map(|n| (simplex(n), simplex(n))),
        alpha in 0.0f64..=1.0,
        y in label(),
    ) {
        let s = ConfidenceScale::new(a.len() - 1).unwrap();
        let mixed = a.mix(&b, alpha).unwrap();
        let lhs = tokenized_brier(&mixed, y, s).unwrap();
        let rhs = alpha * tokenized_brier(&a, y, s).unwrap() + (1.0 - alpha) * tokenized_brier(&b, y, s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&lhs));
    }

    #[test]
    fn one_hot_brier_is_classical(n in 1usize..200, i in 0usize..200, y in label()) {
        let s = ConfidenceScale::new(n).unwrap();
        let i = i % (n + 1);
        let q = ProbVector::one_hot(s, i).unwrap();
        prop_assert_eq!(tokenized_brier(&q, y, s).unwrap(), classical_brier(s.value(i), y).unwrap());
    }

    #[test]
    fn gradient_sums_to_zero(f in logits(100, 20.0), y in label()) {
        let s = scale_of(&f);
        let g = tokbrier::tokenized_brier_grad(&LogitVector::new(f).unwrap(), y, s).unwrap();
        prop_assert!(g.iter().sum::<f64>().abs() <= 1e-9);
    }

    #[test]
    fn nearest_token_round_trips_grid(n in 1usize..500, i in 0usize..500) {
        let s = ConfidenceScale::new(n).unwrap();
        let i = i % (n + 1);
        prop_assert_eq!(nearest_token(s.value(i), s).unwrap(), i);
    }

    #[test]
    fn conditional_risk_is_bernoulli_mixture(
        q in (1usize..60).prop_flat_map(simplex),
        eta in 0.0f64..=1.0,
    ) {
        let s = ConfidenceScale::new(q.len() - 1).unwrap();
        let a = conditional_risk(&q, eta, s).unwrap();
        let b = bernoulli_risk(&q, eta, s).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn auroc_ignores_monotone_transforms(pairs in scored_records(300)) {
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let warped: Vec<f64> = scores.iter().map(|c| c.powi(3) + 2.0 * c - 7.0).collect();
        let a = auroc_scores(&scores, &labels).unwrap();
        let b = auroc_scores(&warped, &labels).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn diagram_partitions_records(pairs in scored_records(400), bins in 1usize..25) {
        let records = to_records(&pairs);
        let d = reliability_diagram(&records, bins).unwrap();
        prop_assert_eq!(d.bins().len(), bins);
        prop_assert_eq!(d.bins().iter().map(|b| b.count).sum::<usize>(), records.len());
        prop_assert_eq!(d.bins()[0].lower, 0.0);
        prop_assert_eq!(d.bins()[bins - 1].upper, 1.0);
        for b in d.bins() {
            prop_assert_eq!(b.is_empty(), b.mean_confidence.is_none());
            if let Some(c) = b.mean_confidence {
                prop_assert!(c >= b.lower - 1e-12 && c <= b.upper + 1e-12);
            }
        }
        prop_assert_eq!(d.ece(), ece(&records, bins).unwrap());
    }

    #[test]
    fn ece_ignores_record_order(pairs in scored_records(300), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let records = to_records(&pairs);
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = ece(&records, 10).unwrap();
        let b = ece(&shuffled, 10).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn jsonl_round_trip(pairs in scored_records(50), with_eta in any::<bool>()) {
        let records: Vec<CalibrationRecord> = to_records(&pairs)
            .into_iter()
            .map(|r| if with_eta { let c = r.confidence(); r.true_eta_value(c).unwrap() } else { r })
            .collect();
        let text = records_to_string(&records).unwrap();
        prop_assert_eq!(parse_records(&text, None).unwrap(), records);
    }

    #[test]
    fn cascade_curve_is_monotone_when_strong_model_beats_selection(
        p in prop::collection::vec(0.0f64..=1.0, 1..80),
        cut in 0usize..80,
    ) {
        let n = p.len();
        let cut = cut % (n + 1);
        let ids: Vec<String> = (0..n).map(|i| format!("{i:03}")).collect();
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let order = lowest_confidence_order(&p, &id_refs);
        // Strong accuracy at least the correctness of every record in the
        // first `cut` selections.
        let sa = order[..cut].iter().map(|&i| p[i]).fold(0.0, f64::max);
        let budgets: Vec<usize> = (0..=cut).collect();
        let curve = expected_cascade_curve(&p, &order, sa, &budgets).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].expected_accuracy >= w[0].expected_accuracy - 1e-12);
        }
    }

    #[test]
    fn self_correction_never_touches_confident_records(
        pairs in prop::collection::vec((0.5f64..=1.0, 0.0f64..=1.0), 1..50),
    ) {
        let conf: Vec<f64> = pairs.iter().map(|p| (p.0 + 1e-9).min(1.0)).collect();
        let correct: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (before, after) = expected_self_correction(&conf, &correct, &SimPolicy::self_correct()).unwrap();
        prop_assert_eq!(before, after);
    }
}
