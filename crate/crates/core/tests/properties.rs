//! Property tests for the invariants of the numeric building blocks.

use proptest::prelude::*;

use imsat::augment::radius_table;
use imsat::data::Dataset;
use imsat::eval::{
    assignment_accuracy, average_precision, hamming_distance, hamming_ranking, mean_average_precision, pack_bits,
    precision_at_n, precision_at_radius, purity, relative_scores, select_shared_hyperparameter, stratified_split,
    CodeBook, LabelSet,
};
use imsat::nn::{checkpoint, HeadLayout, MlpClassifier};
use imsat::objectives::{
    conditional_entropy, kl_divergence, marginal_estimate, mutual_information_from_joint, pairwise_joint,
    sat_loss, shannon_entropy,
};
use imsat::Matrix;

fn normalize(w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

prop_compose! {
    fn distribution(k: usize)(w in prop::collection::vec(0.01f64..1.0, k)) -> Vec<f64> {
        normalize(w)
    }
}

prop_compose! {
    /// `rows × k` matrix whose rows are distributions.
    fn soft_outputs(rows: usize, k: usize)(
        rs in prop::collection::vec(prop::collection::vec(0.001f64..1.0, k), rows)
    ) -> Matrix {
        let data = rs.into_iter().flat_map(normalize).collect();
        Matrix::from_vec(rows, k, data).unwrap()
    }
}

fn batch_kl(m: &Matrix, rows: &[usize], q: &[f64]) -> f64 {
    kl_divergence(&marginal_estimate(&m.select_rows(rows)).unwrap(), q).unwrap()
}

proptest! {
    #[test]
    fn entropy_is_bounded(p in (1usize..8).prop_flat_map(distribution)) {
        let h = shannon_entropy(&p).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (p.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn kl_is_nonnegative(p in distribution(4), q in distribution(4)) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-15);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn batch_kl_upper_bounds_full_kl(
        m in soft_outputs(24, 3),
        q in distribution(3),
        order in Just((0..24usize).collect::<Vec<_>>()).prop_shuffle(),
        batches in prop::sample::select(vec![2usize, 3, 4, 6, 8, 12]),
    ) {
        let all: Vec<usize> = (0..24).collect();
        let full = batch_kl(&m, &all, &q);
        let size = 24 / batches;
        let mean = order
            .chunks(size)
            .map(|c| batch_kl(&m, c, &q))
            .sum::<f64>() / batches as f64;
        prop_assert!(mean >= full - 1e-12, "mean {mean} < full {full}");
    }

    #[test]
    fn pairwise_mi_is_symmetric_and_bounded(
        pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..40)
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let jab = pairwise_joint(&a, &b).unwrap();
        let jba = pairwise_joint(&b, &a).unwrap();
        let total: f64 = jab.iter().flatten().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let mab = mutual_information_from_joint(&jab).unwrap();
        let mba = mutual_information_from_joint(&jba).unwrap();
        prop_assert!((mab - mba).abs() < 1e-12);
        prop_assert!(mab >= -1e-12);
        let h = |p: f64| shannon_entropy(&[1.0 - p, p]).unwrap();
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        prop_assert!(mab <= h(ma).min(h(mb)) + 1e-12);
    }

    #[test]
    fn self_augmentation_loss_is_minimized_by_the_target(t in soft_outputs(6, 4), a in soft_outputs(6, 4)) {
        let own = sat_loss(std::slice::from_ref(&t), std::slice::from_ref(&t)).unwrap();
        prop_assert!((own - conditional_entropy(&t).unwrap()).abs() < 1e-12);
        prop_assert!(sat_loss(&[t], &[a]).unwrap() >= own - 1e-12);
    }
}

fn brute_force_correct(pred: &[usize], truth: &[usize], k: usize, l: usize) -> usize {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        perms(n - 1)
            .into_iter()
            .flat_map(|p| {
                (0..=p.len()).map(move |i| {
                    let mut q = p.clone();
                    q.insert(i, n - 1);
                    q
                })
            })
            .collect()
    }
    perms(k.max(l))
        .iter()
        .map(|p| pred.iter().zip(truth).filter(|(&c, &y)| p[c] == y).count())
        .max()
        .unwrap()
}

prop_compose! {
    fn labelling()(k in 1usize..=5, l in 1usize..=5, n in 1usize..40)(
        pred in prop::collection::vec(0..k, n),
        truth in prop::collection::vec(0..l, n),
        perm in Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
        k in Just(k),
        l in Just(l),
    ) -> (Vec<usize>, Vec<usize>, Vec<usize>, usize, usize) {
        (pred, truth, perm, k, l)
    }
}

proptest! {
    #[test]
    fn accuracy_matches_brute_force((pred, truth, _, k, l) in labelling()) {
        let got = assignment_accuracy(&pred, &truth, k, l).unwrap();
        prop_assert_eq!(got.correct as usize, brute_force_correct(&pred, &truth, k, l));
        prop_assert!((0.0..=1.0).contains(&got.acc));
        prop_assert!(purity(&pred, &truth, k, l).unwrap() >= got.acc - 1e-15);
    }

    #[test]
    fn accuracy_ignores_cluster_names((pred, truth, perm, k, l) in labelling()) {
        let renamed: Vec<usize> = pred.iter().map(|&c| perm[c]).collect();
        let a = assignment_accuracy(&pred, &truth, k, l).unwrap();
        let b = assignment_accuracy(&renamed, &truth, k, l).unwrap();
        prop_assert_eq!(a.correct, b.correct);
    }
}

prop_compose! {
    fn retrieval_case()(bits in 1usize..=16, classes in 1usize..=4, nq in 1usize..10, ng in 1usize..40)(
        q_codes in prop::collection::vec(0u64..(1u64 << bits), nq),
        g_codes in prop::collection::vec(0u64..(1u64 << bits), ng),
        q_labels in prop::collection::vec(0..classes, nq),
        g_labels in prop::collection::vec(0..classes, ng),
        r in 0u32..=bits as u32,
    ) -> (Vec<u64>, Vec<usize>, Vec<u64>, Vec<usize>, u32) {
        (q_codes, q_labels, g_codes, g_labels, r)
    }
}

proptest! {
    #[test]
    fn hamming_ranking_is_a_stable_sort(q in any::<u64>(), gallery in prop::collection::vec(any::<u64>(), 0..60)) {
        let order = hamming_ranking(q, &gallery);
        let mut seen = order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..gallery.len()).collect::<Vec<_>>());
        for w in order.windows(2) {
            let (da, db) = (hamming_distance(q, gallery[w[0]]), hamming_distance(q, gallery[w[1]]));
            prop_assert!(da < db || (da == db && w[0] < w[1]));
        }
    }

    #[test]
    fn retrieval_metrics_are_bounded((qc, ql, gc, gl, r) in retrieval_case()) {
        if let Ok(m) = mean_average_precision(&qc, &ql, &gc, &gl) {
            prop_assert!((0.0..=1.0).contains(&m.map));
        }
        let pr = precision_at_radius(&qc, &ql, &gc, &gl, r).unwrap();
        prop_assert!((0.0..=1.0).contains(&pr.precision));
        let empty = qc.iter().filter(|&&q| gc.iter().all(|&g| hamming_distance(q, g) > r)).count();
        prop_assert_eq!(pr.empty, empty);
        let n = gc.len().min(5);
        let pn = precision_at_n(&qc, &ql, &gc, &gl, n).unwrap();
        prop_assert!((0.0..=1.0).contains(&pn));
        // Widening the radius never empties a query's retrieval set.
        let wider = precision_at_radius(&qc, &ql, &gc, &gl, r + 1).unwrap();
        prop_assert!(wider.empty <= pr.empty);
    }

    #[test]
    fn average_precision_is_in_unit_interval(rel in prop::collection::vec(any::<bool>(), 0..50)) {
        match average_precision(&rel) {
            None => prop_assert!(!rel.contains(&true)),
            Some(ap) => {
                prop_assert!(ap > 0.0 && ap <= 1.0);
                // All relevant items first gives AP = 1.
                let mut sorted = rel.clone();
                sorted.sort_unstable_by(|a, b| b.cmp(a));
                prop_assert_eq!(average_precision(&sorted), Some(1.0));
            }
        }
    }

    #[test]
    fn well_separated_codes_retrieve_perfectly(classes in 1usize..5, per in 2usize..6) {
        // One 16-bit code per class with pairwise Hamming distance >= 4.
        let code = |c: usize| 0xFu64 << (4 * c);
        let labels: Vec<usize> = (0..classes).flat_map(|c| vec![c; per]).collect();
        let codes: Vec<u64> = labels.iter().map(|&c| code(c)).collect();
        let m = mean_average_precision(&codes, &labels, &codes, &labels).unwrap();
        prop_assert_eq!(m.map, 1.0);
        let pr = precision_at_radius(&codes, &labels, &codes, &labels, 2).unwrap();
        prop_assert_eq!(pr.precision, 1.0);
    }

    #[test]
    fn stratified_split_partitions((labels, per) in (1usize..4, 1usize..4).prop_flat_map(|(classes, per)| {
        (prop::collection::vec(0..classes, 0..40), Just(per))
    }), seed in any::<u64>()) {
        let counts = |c: usize| labels.iter().filter(|&&l| l == c).count();
        let classes: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
        match stratified_split(&labels, per, seed) {
            Err(_) => prop_assert!(classes.iter().any(|&c| counts(c) <= per) || labels.is_empty()),
            Ok((q, g)) => {
                let mut all: Vec<usize> = q.iter().chain(&g).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                prop_assert!(q.windows(2).all(|w| w[0] < w[1]) && g.windows(2).all(|w| w[0] < w[1]));
                for &c in &classes {
                    prop_assert_eq!(q.iter().filter(|&&i| labels[i] == c).count(), per);
                }
                prop_assert_eq!(stratified_split(&labels, per, seed).unwrap(), (q, g));
            }
        }
    }

    #[test]
    fn hex_codes_round_trip(bits in 1usize..=64, raw in prop::collection::vec(any::<u64>(), 1..20)) {
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        let codes: Vec<u64> = raw.iter().map(|c| c & mask).collect();
        let cb = CodeBook::hash(codes.clone(), bits).unwrap();
        for (line, &c) in cb.to_lines().iter().zip(&codes) {
            prop_assert_eq!(line.len(), bits.div_ceil(4));
            prop_assert_eq!(u64::from_str_radix(line, 16).unwrap(), c);
        }
    }

    #[test]
    fn first_bit_is_most_significant(bits in prop::collection::vec(any::<bool>(), 1..=64)) {
        let code = pack_bits(&bits);
        let d = bits.len();
        for (i, &b) in bits.iter().enumerate() {
            prop_assert_eq!((code >> (d - 1 - i)) & 1 == 1, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn radius_table_matches_sorted_neighbours(
        pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 4..30),
        t in 1usize..4,
        alpha in 0.1f64..3.0,
    ) {
        let n = pts.len();
        let data = Matrix::from_rows(&pts).unwrap();
        let table = radius_table(&data, alpha, t).unwrap();
        for i in 0..n {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .collect();
            d.sort_by(f64::total_cmp);
            prop_assert!((table.eps[i] - alpha * d[t - 1]).abs() <= 1e-12 * (1.0 + d[t - 1]));
        }
    }

    #[test]
    fn matmul_matches_naive(
        (a, b) in (1usize..9, 1usize..9, 1usize..9).prop_flat_map(|(r, k, c)| (
            prop::collection::vec(-3.0f64..3.0, r * k).prop_map(move |v| Matrix::from_vec(r, k, v).unwrap()),
            prop::collection::vec(-3.0f64..3.0, k * c).prop_map(move |v| Matrix::from_vec(k, c, v).unwrap()),
        ))
    ) {
        let p = a.matmul(&b).unwrap();
        for r in 0..a.rows() {
            for c in 0..b.cols() {
                let naive: f64 = (0..a.cols()).map(|k| a.get(r, k) * b.get(k, c)).sum();
                prop_assert!((p.get(r, c) - naive).abs() < 1e-9);
            }
        }
        let pt = a.transpose().t_matmul(&b).unwrap();
        prop_assert!(pt.as_slice().iter().zip(p.as_slice()).all(|(x, y)| (x - y).abs() < 1e-9));
    }

    #[test]
    fn selector_picks_a_top_score(grid in (1usize..4, 1usize..6).prop_flat_map(|(d, c)| {
        prop::collection::vec(prop::collection::vec(0.01f64..=1.0, c), d)
    })) {
        let best = select_shared_hyperparameter(&grid).unwrap();
        let scores = relative_scores(&grid).unwrap();
        prop_assert!(scores.iter().all(|&s| s <= scores[best]));
        prop_assert!(scores[..best].iter().all(|&s| s < scores[best]));
        prop_assert!(scores.iter().all(|&s| s <= grid.len() as f64 + 1e-12));
    }

    #[test]
    fn dataset_bytes_round_trip(
        rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3), 1..20),
        labelled in any::<bool>(),
    ) {
        let n = rows.len();
        let labels = labelled.then(|| LabelSet::new((0..n).map(|i| i % 3).collect()));
        let ds = Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, "prop").unwrap();
        let back = Dataset::from_bytes(&ds.to_bytes(), "mem").unwrap();
        prop_assert_eq!(back.fingerprint(), ds.fingerprint());
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn checkpoint_round_trip(seed in any::<u64>(), hidden in 1usize..6, bits in prop::bool::ANY) {
        let heads = if bits { HeadLayout::Sigmoid(3) } else { HeadLayout::Softmax(vec![2, 3]) };
        let dims = [4, hidden, heads.logits()];
        let model = MlpClassifier::new(&dims, heads, &[0.1, 0.1], seed).unwrap();
        let back = checkpoint::from_bytes(&checkpoint::to_bytes(&model)).unwrap();
        prop_assert_eq!(back, model);
    }
}
