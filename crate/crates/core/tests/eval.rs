use dpmm::eval::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mean over positives of the precision among all samples scoring at least
/// as high as that positive.
fn brute_force_ap(scores: &[f64], labels: &[u8]) -> f64 {
    let pos: Vec<usize> = (0..scores.len()).filter(|&i| labels[i] == 1).collect();
    pos.iter()
        .map(|&i| {
            let above: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] >= scores[i]).collect();
            above.iter().filter(|&&j| labels[j] == 1).count() as f64 / above.len() as f64
        })
        .sum::<f64>()
        / pos.len() as f64
}

/// Mann–Whitney pair counting with ties worth one half.
fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

fn instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    loop {
        let n = rng.random_range(2..40);
        let levels = rng.random_range(2..12);
        let labels: Vec<u8> = (0..n).map(|_| rng.random_bool(0.3) as u8).collect();
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect();
        if labels.contains(&0) && labels.contains(&1) {
            return (scores, labels);
        }
    }
}

#[test]
fn metrics_match_brute_force_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..500 {
        let (s, y) = instance(&mut rng);
        assert!((average_precision(&s, &y).unwrap() - brute_force_ap(&s, &y)).abs() < 1e-12);
        assert!((roc_auc(&s, &y).unwrap() - pair_count_auc(&s, &y)).abs() < 1e-12);
    }
}

#[test]
fn curves_are_well_formed() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..100 {
        let (s, y) = instance(&mut rng);
        let pr = precision_recall_curve(&s, &y).unwrap();
        assert!(pr.windows(2).all(|w| w[1].recall >= w[0].recall && w[1].threshold < w[0].threshold));
        assert_eq!(pr.last().unwrap().recall, 1.0);
        let roc = roc_curve(&s, &y).unwrap();
        assert_eq!((roc[0].fpr, roc[0].tpr), (0.0, 0.0));
        let last = roc.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!(roc.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
    }
}

#[test]
fn random_scores_have_chance_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let n = 20_000;
    let labels: Vec<u8> = (0..n).map(|i| (i % 4 == 0) as u8).collect();
    let scores: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let auc = roc_auc(&scores, &labels).unwrap();
    assert!((auc - 0.5).abs() < 0.02, "auc {auc}");
    let ap = average_precision(&scores, &labels).unwrap();
    assert!((ap - 0.25).abs() < 0.02, "ap {ap}");
}

#[test]
fn evaluation_input_errors() {
    assert!(average_precision(&[1.0, 2.0], &[1]).is_err());
    assert!(roc_auc(&[f64::NAN, 1.0], &[1, 0]).is_err());
    assert!(roc_auc(&[1.0, 2.0], &[2, 0]).is_err());
    assert!(ScoreReport::new(vec!["a".into()], vec![1.0, 2.0], None).is_err());
    let report = ScoreReport::new(vec!["a".into(), "b".into()], vec![1.0, 2.0], None).unwrap();
    assert_eq!(report.ranks(), vec![2, 1]);
    assert_eq!(report.average_precision, None);
}

#[test]
fn split_is_reproducible_and_partitions() {
    let labels: Vec<u8> = (0..57).map(|i| (i % 7 == 0) as u8).collect();
    let a = stratified_split(&labels, 0.8, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = stratified_split(&labels, 0.8, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, b);
    let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..57).collect::<Vec<_>>());
    assert!(stratified_split(&labels, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).is_err());
}

proptest! {
    #[test]
    fn auc_flips_with_the_score_sign(seed in any::<u64>()) {
        let (s, y) = instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let total = roc_auc(&s, &y).unwrap() + roc_auc(&neg, &y).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_monotone_transforms(seed in any::<u64>()) {
        let (s, y) = instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(average_precision(&s, &y).unwrap(), average_precision(&t, &y).unwrap());
        prop_assert_eq!(roc_auc(&s, &y).unwrap(), roc_auc(&t, &y).unwrap());
    }

    #[test]
    fn metrics_ignore_row_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, y) = instance(&mut rng);
        let mut order: Vec<usize> = (0..s.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let s2: Vec<f64> = order.iter().map(|&i| s[i]).collect();
        let y2: Vec<u8> = order.iter().map(|&i| y[i]).collect();
        prop_assert!((average_precision(&s, &y).unwrap() - average_precision(&s2, &y2).unwrap()).abs() < 1e-12);
        prop_assert!((roc_auc(&s, &y).unwrap() - roc_auc(&s2, &y2).unwrap()).abs() < 1e-12);
    }
}
