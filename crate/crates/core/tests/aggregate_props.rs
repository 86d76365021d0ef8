use mmif_core::evalrun::{
    aggregate, BenchmarkItem, ConstraintOutcome, CorpusReport, EvaluationResult, Level, Metric,
};
use mmif_core::judge::ConstraintVerdict;
use mmif_core::taxonomy::{ConstraintSpec, EvalMethod, Taxonomy};
use mmif_core::verifiers::{Param, VerifierCall};
use num_rational::Ratio;
use proptest::prelude::*;

const SUBS: [&str; 4] = ["C.1", "C.2", "C.3", "D.1"];

/// Per item: level and one verdict code (0 violated, 1 satisfied,
/// 2 indeterminate) per constraint.
type Corpus = Vec<(Level, Vec<u8>)>;

fn corpus() -> impl Strategy<Value = Corpus> {
    let item = (prop_oneof![Just(Level::Compose), Just(Level::Perception)], prop::collection::vec(0u8..3, 1..5));
    prop::collection::vec(item, 1..40)
}

fn build(corpus: &Corpus) -> (Vec<BenchmarkItem>, Vec<EvaluationResult>) {
    let tax = Taxonomy::builtin();
    let call = VerifierCall::new("check_whether_response_word_count_in_range", vec![Param::Int(0), Param::Int(9)]).unwrap();
    let mut items = Vec::new();
    let mut results = Vec::new();
    for (i, (level, verdicts)) in corpus.iter().enumerate() {
        let id = format!("i{i}");
        let constraints = (0..verdicts.len())
            .map(|k| {
                let class = tax.get(SUBS[(i + k) % SUBS.len()]).unwrap().clone();
                ConstraintSpec::new(class, format!("c{k}"), EvalMethod::RuleBased, Some(call.clone())).unwrap()
            })
            .collect();
        let image = (*level == Level::Perception).then(|| format!("{id}.png"));
        items.push(BenchmarkItem::new(id.clone(), *level, image, "Task.".to_string(), constraints).unwrap());
        let outcomes = verdicts
            .iter()
            .enumerate()
            .map(|(idx, v)| ConstraintOutcome {
                idx,
                method: EvalMethod::RuleBased,
                verdict: [ConstraintVerdict::Violated, ConstraintVerdict::Satisfied, ConstraintVerdict::Indeterminate]
                    [*v as usize],
                detail: String::new(),
            })
            .collect();
        results.push(EvaluationResult::from_outcomes(id, outcomes, "t".to_string()));
    }
    (items, results)
}

/// Mean item score x 1000, rounded half up, as tenths of a percent.
fn expected_tenths(corpus: &Corpus, level: Level, metric: Metric) -> Option<i64> {
    let scores: Vec<Ratio<i64>> = corpus
        .iter()
        .filter(|(l, _)| *l == level)
        .map(|(_, v)| {
            let sat = v.iter().filter(|&&x| x == 1).count() as i64;
            match metric {
                Metric::Fraction => Ratio::new(sat, v.len() as i64),
                Metric::StrictPass => Ratio::from_integer(i64::from(sat == v.len() as i64)),
            }
        })
        .collect();
    if scores.is_empty() {
        return None;
    }
    let mean = scores.iter().sum::<Ratio<i64>>() / Ratio::from_integer(scores.len() as i64);
    Some((mean * Ratio::from_integer(1000) + Ratio::new(1, 2)).floor().to_integer())
}

fn levels(r: &CorpusReport) -> [Option<i64>; 3] {
    [r.c_level_acc, r.p_level_acc, r.weighted_avg].map(|p| p.map(|p| p.tenths()))
}

fn metric() -> impl Strategy<Value = Metric> {
    prop_oneof![Just(Metric::Fraction), Just(Metric::StrictPass)]
}

proptest! {
    #[test]
    fn report_identity_and_rounding(c in corpus(), m in metric()) {
        let (items, results) = build(&c);
        let report = aggregate(&results, &items, m).unwrap();
        report.check_identity().unwrap();
        prop_assert_eq!(report.c_level_acc.map(|p| p.tenths()), expected_tenths(&c, Level::Compose, m));
        prop_assert_eq!(report.p_level_acc.map(|p| p.tenths()), expected_tenths(&c, Level::Perception, m));
        let indeterminate = c.iter().flat_map(|(_, v)| v).filter(|&&x| x == 2).count();
        prop_assert_eq!(report.indeterminate, indeterminate);
    }

    #[test]
    fn result_scores_follow_counts(c in corpus()) {
        let (_, results) = build(&c);
        for (r, (_, v)) in results.iter().zip(&c) {
            let sat = v.iter().filter(|&&x| x == 1).count();
            prop_assert_eq!(r.fraction, sat as f64 / v.len() as f64);
            prop_assert_eq!(r.strict, sat == v.len());
        }
    }

    #[test]
    fn order_does_not_matter(c in corpus(), m in metric(), rot in 0usize..40, rev in any::<bool>()) {
        let (items, results) = build(&c);
        let base = aggregate(&results, &items, m).unwrap();
        let mut items2 = items.clone();
        let mut results2 = results.clone();
        let k = rot % items2.len();
        items2.rotate_left(k);
        if rev {
            results2.reverse();
        }
        prop_assert_eq!(aggregate(&results2, &items2, m).unwrap(), base);
    }

    #[test]
    fn satisfying_one_more_constraint_never_lowers_scores(c in corpus(), m in metric(), pick in any::<prop::sample::Index>()) {
        let flippable: Vec<(usize, usize)> = c
            .iter()
            .enumerate()
            .flat_map(|(i, (_, v))| v.iter().enumerate().filter(|(_, &x)| x == 0).map(move |(k, _)| (i, k)))
            .collect();
        prop_assume!(!flippable.is_empty());
        let (i, k) = flippable[pick.index(flippable.len())];
        let mut better = c.clone();
        better[i].1[k] = 1;
        let (items, before) = build(&c);
        let (_, after) = build(&better);
        prop_assert!(after[i].fraction > before[i].fraction);
        let b = levels(&aggregate(&before, &items, m).unwrap());
        let a = levels(&aggregate(&after, &items, m).unwrap());
        for (x, y) in b.iter().zip(&a) {
            prop_assert!(y >= x, "{b:?} -> {a:?}");
        }
    }
}

#[test]
fn equal_levels_average_to_the_same_value() {
    let c: Corpus = (0..8).map(|i| (if i < 6 { Level::Compose } else { Level::Perception }, vec![1, 0])).collect();
    let (items, results) = build(&c);
    let r = aggregate(&results, &items, Metric::Fraction).unwrap();
    assert_eq!(levels(&r), [Some(500), Some(500), Some(500)]);
}
