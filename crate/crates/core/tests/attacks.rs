use dpi_audit::attacks::{
    auc_roc, dcr_attack, gan_leaks_calibrated, logan_calibrated, mc_attack, score_correlation, AttackScores, RadiusRule,
};
use dpi_audit::dp_bound::{epsilon_lower_bound, operating_point_with, BetaReading, OperatingPoint};
use dpi_audit::logistic::TrainConfig;
use dpi_audit::{EncodedMatrix, Metric, Role};
use proptest::prelude::*;

fn scalars(xs: &[f64]) -> EncodedMatrix {
    EncodedMatrix::from_scalars(xs, Role::Unlabeled).unwrap()
}

/// Integer-valued scores (plenty of ties) with both classes present.
fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=400, 1i32..30).prop_flat_map(|(n, levels)| {
        (
            prop::collection::vec((0..levels).prop_map(f64::from), n),
            prop::collection::vec(any::<bool>(), n - 2),
        )
            .prop_map(|(s, mut l)| {
                l.push(true);
                l.push(false);
                (s, l)
            })
    })
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let members: Vec<f64> = scores.iter().zip(labels).filter(|p| *p.1).map(|p| *p.0).collect();
    let others: Vec<f64> = scores.iter().zip(labels).filter(|p| !*p.1).map(|p| *p.0).collect();
    let mut doubled = 0u64;
    for m in &members {
        for o in &others {
            doubled += match m.partial_cmp(o).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    doubled as f64 / (2 * members.len() * others.len()) as f64
}

fn auc(scores: Vec<f64>, labels: Vec<bool>) -> f64 {
    auc_roc(&AttackScores::new("t", scores, labels).unwrap()).unwrap().auc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn auc_equals_all_pairs_count((scores, labels) in labeled_scores()) {
        prop_assert_eq!(auc(scores.clone(), labels.clone()), pairwise_auc(&scores, &labels));
    }

    #[test]
    fn auc_ignores_increasing_transforms((scores, labels) in labeled_scores()) {
        let base = auc(scores.clone(), labels.clone());
        let affine = scores.iter().map(|x| 3.0 * x - 7.0).collect();
        let cubic = scores.iter().map(|x| x * x * x + x).collect();
        let exp = scores.iter().map(|x| (x / 4.0).exp()).collect();
        prop_assert_eq!(auc(affine, labels.clone()), base);
        prop_assert_eq!(auc(cubic, labels.clone()), base);
        prop_assert_eq!(auc(exp, labels), base);
    }

    #[test]
    fn flipping_labels_complements_auc((scores, labels) in labeled_scores()) {
        let flipped = labels.iter().map(|l| !l).collect();
        let a = auc(scores.clone(), labels);
        let b = auc(scores, flipped);
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dcr_is_the_calibrated_attack(
        syn in prop::collection::vec(-50.0f64..50.0, 1..40),
        refs in prop::collection::vec(-50.0f64..50.0, 1..40),
        test in prop::collection::vec(-50.0f64..50.0, 1..40),
        metric in prop_oneof![Just(Metric::L1), Just(Metric::L2)],
    ) {
        let (s, r, t) = (scalars(&syn), scalars(&refs), scalars(&test));
        let a = gan_leaks_calibrated(&s, &r, &t, metric).unwrap();
        let b = dcr_attack(&s, &r, &t, metric).unwrap();
        prop_assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn mc_scores_grow_with_radius(
        syn in prop::collection::vec(-10.0f64..10.0, 1..50),
        test in prop::collection::vec(-10.0f64..10.0, 1..20),
        r1 in 0.01f64..5.0,
        dr in 0.0f64..5.0,
    ) {
        let (s, t) = (scalars(&syn), scalars(&test));
        let small = mc_attack(&s, &t, Metric::L2, RadiusRule::Fixed(r1)).unwrap();
        let large = mc_attack(&s, &t, Metric::L2, RadiusRule::Fixed(r1 + dr)).unwrap();
        prop_assert!(small.scores.iter().zip(&large.scores).all(|(a, b)| a <= b));
    }

    #[test]
    fn correlation_is_affine_invariant(
        a in prop::collection::vec(-100.0f64..100.0, 3..50),
        slope in 0.1f64..10.0,
        shift in -50.0f64..50.0,
    ) {
        prop_assume!(a.iter().any(|x| (x - a[0]).abs() > 1e-3));
        let sa = AttackScores::new("a", a.clone(), Vec::new()).unwrap();
        let sb = AttackScores::new("b", a.iter().map(|x| slope * x + shift).collect(), Vec::new()).unwrap();
        let sn = AttackScores::new("n", a.iter().map(|x| -x).collect(), Vec::new()).unwrap();
        prop_assert!((score_correlation(&sa, &sb).unwrap() - 1.0).abs() < 1e-9);
        prop_assert!((score_correlation(&sa, &sn).unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn epsilon_bound_is_symmetric(alpha in 0.001f64..0.999, beta in 0.001f64..0.999) {
        let a = epsilon_lower_bound(&OperatingPoint::new(alpha, beta).unwrap());
        let b = epsilon_lower_bound(&OperatingPoint::new(beta, alpha).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn epsilon_bound_grows_with_alpha(beta in 0.01f64..0.99, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        // alpha ranges over [1 - beta, 1)
        let lo = 1.0 - beta;
        let (a1, a2) = (lo + t1.min(t2) * beta * 0.99, lo + t1.max(t2) * beta * 0.99);
        prop_assume!(a1 > 0.0 && a2 < 1.0);
        let e1 = epsilon_lower_bound(&OperatingPoint::new(a1, beta).unwrap());
        let e2 = epsilon_lower_bound(&OperatingPoint::new(a2, beta).unwrap());
        prop_assert!(e2 >= e1);
    }

    #[test]
    fn clipped_rates_stay_inside_the_unit_interval((scores, labels) in labeled_scores(), t in 0.0f64..30.0) {
        let s = AttackScores::new("t", scores, labels.clone()).unwrap();
        let members = labels.iter().filter(|&&l| l).count() as f64;
        for reading in [BetaReading::FalseNegativeRate, BetaReading::FalsePositiveRate] {
            let op = operating_point_with(&s, t, reading).unwrap();
            let (a, b) = (op.point.alpha(), op.point.beta());
            prop_assert!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0);
            prop_assert!(epsilon_lower_bound(&op.point).is_finite());
            if reading == BetaReading::FalseNegativeRate {
                prop_assert!(a >= 0.5 / members - 1e-15);
            }
        }
    }
}

#[test]
fn epsilon_reference_points() {
    assert_eq!(epsilon_lower_bound(&OperatingPoint::new(0.5, 0.5).unwrap()), 0.0);
    let nine = epsilon_lower_bound(&OperatingPoint::new(0.9, 0.9).unwrap());
    assert!((nine - 9f64.ln()).abs() < 1e-12);
    let neg = epsilon_lower_bound(&OperatingPoint::new(0.8, 0.1).unwrap());
    assert!((neg - (8.0f64 / 9.0).ln()).abs() < 1e-12);
}

#[test]
fn logan_separated_pools_regression_pin() {
    let scores = logan_calibrated(
        &scalars(&[10.0]),
        &scalars(&[-10.0]),
        &scalars(&[10.0, 0.0, -10.0]),
        &TrainConfig::default(),
    )
    .unwrap()
    .scores;
    assert!(scores[0] > 0.9);
    assert!((scores[0] - 0.999_763_622_619_360_9).abs() < 1e-12, "{}", scores[0]);
    assert_eq!(scores[1], 0.5);
    assert!((scores[0] + scores[2] - 1.0).abs() < 1e-12);
}
