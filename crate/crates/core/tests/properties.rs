mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::sample::select;

use lsisvm::corpus::{
    build_vocabulary, is_stop_word, remove_stopwords, scrub_text, CleanDocument, ScrubRules,
    REMOVED_CHARS, STOP_WORDS,
};
use lsisvm::dtm::{build_tfm, to_boolean, to_probability, to_tfidf};
use lsisvm::lsi::truncated_svd;
use lsisvm::mi_filter::{estimate_mi, select_terms, MiTable, SelectionRule};
use lsisvm::nusvm::{
    nu_feasible, rbf, solve_nu_svc, train_multiclass, BalancingStrategy, RbfKernel, SolverConfig,
};
use lsisvm::pipeline::{fold_assignment, select_best, CvReport, GridRow, RowStatus};
use lsisvm::{TermMatrix, Weighting};

fn text_piece() -> impl Strategy<Value = String> {
    let mut pieces: Vec<String> = REMOVED_CHARS.iter().map(|c| c.to_string()).collect();
    pieces.extend(
        [
            " ",
            "  ",
            "\n",
            "\r\n",
            "\t",
            "game",
            "Fun",
            "'",
            "\"",
            "big fish",
            "Big Fish",
            "SEGA",
            "sega",
            "Don’t miss our other exciting games!",
            "don't",
            "é",
            "x",
        ]
        .map(str::to_string),
    );
    select(pieces)
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(text_piece(), 0..30).prop_map(|v| v.concat())
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        select(STOP_WORDS.to_vec()).prop_map(str::to_string),
        "[a-z]{1,8}",
    ]
}

fn matrix(rows: &[Vec<f64>], scheme: Weighting) -> TermMatrix {
    let data = rows
        .iter()
        .map(|r| r.iter().copied().enumerate().collect())
        .collect();
    let ids = (0..rows.len()).map(|i| format!("d{i}")).collect();
    TermMatrix::from_rows(rows[0].len(), data, scheme, ids)
}

fn dense_rows(max_p: usize, max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_p, 1..=max_n).prop_flat_map(|(p, n)| {
        prop::collection::vec(
            prop::collection::vec(prop_oneof![3 => Just(0.0), 2 => 0.0f64..1.0], n),
            p,
        )
    })
}

fn entropy_bits(y: &[bool]) -> f64 {
    let p = y.iter().filter(|&&b| b).count() as f64 / y.len() as f64;
    [p, 1.0 - p]
        .iter()
        .filter(|&&q| q > 0.0)
        .map(|q| -q * q.log2())
        .sum()
}

proptest! {
    #[test]
    fn scrub_is_idempotent(s in text()) {
        for rules in [ScrubRules::default(), ScrubRules::chars_only()] {
            let once = scrub_text(&s, &rules);
            prop_assert_eq!(scrub_text(&once, &rules), once.clone());
            prop_assert!(!once.chars().any(|c| rules.remove_chars.contains(&c)));
            prop_assert!(!once.chars().any(|c| c.is_uppercase()));
        }
    }

    #[test]
    fn stopword_removal_keeps_an_ordered_subsequence(words in prop::collection::vec(word(), 0..40)) {
        let kept = remove_stopwords(words.clone());
        let expected: Vec<String> = words.iter().filter(|w| !is_stop_word(w)).cloned().collect();
        prop_assert_eq!(&kept, &expected);
        prop_assert!(kept.iter().all(|w| !STOP_WORDS.contains(&w.as_str())));
    }

    #[test]
    fn vocabulary_sorted_and_complete(docs in prop::collection::vec(prop::collection::vec("[a-d]{1,3}", 0..8), 1..6)) {
        let clean: Vec<CleanDocument> = docs
            .iter()
            .enumerate()
            .map(|(i, t)| CleanDocument { id: i.to_string(), tokens: t.clone(), label: None })
            .collect();
        match build_vocabulary(&clean) {
            Ok(v) => {
                prop_assert!(v.terms().windows(2).all(|w| w[0] < w[1]));
                for t in docs.iter().flatten() {
                    let i = v.index_of(t).unwrap();
                    prop_assert_eq!(v.term(i), t.as_str());
                }
                let m = build_tfm(&clean, &v);
                let total: f64 = (0..m.rows()).map(|i| m.row_sum(i)).sum();
                prop_assert_eq!(total as usize, docs.iter().map(Vec::len).sum::<usize>());
            }
            Err(_) => prop_assert!(docs.iter().all(Vec::is_empty)),
        }
    }

    #[test]
    fn weighting_schemes(rows in dense_rows(6, 8)) {
        let counts: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| (v * 4.0).floor()).collect()).collect();
        let m = matrix(&counts, Weighting::Frequency);
        let prob = to_probability(&m).unwrap();
        let boolean = to_boolean(&m).unwrap();
        let tfidf = to_tfidf(&m).unwrap();
        for i in 0..m.rows() {
            if m.is_zero_row(i) {
                prop_assert!(prob.is_zero_row(i) && boolean.is_zero_row(i) && tfidf.is_zero_row(i));
                continue;
            }
            prop_assert!((prob.row_sum(i) - 1.0).abs() < 1e-12);
            prop_assert!(boolean.row(i).1.iter().all(|&v| v == 1.0));
            prop_assert!(tfidf.row(i).1.iter().all(|&v| v >= 0.0));
            prop_assert_eq!(prob.row(i).0, m.row(i).0);
        }
    }

    #[test]
    fn mi_bounded_and_label_symmetric(
        x in prop::collection::vec(-3.0f64..3.0, 2..80),
        seed in any::<u64>(),
        bins in select(vec![2usize, 3, 10, 100]),
    ) {
        let y: Vec<bool> = (0..x.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let mi = estimate_mi(&x, &y, bins).unwrap();
        let flipped: Vec<bool> = y.iter().map(|b| !b).collect();
        prop_assert!(mi >= 0.0);
        prop_assert!(mi <= entropy_bits(&y) + 1e-12);
        prop_assert!(mi <= 1.0 + 1e-12);
        prop_assert!((mi - estimate_mi(&x, &flipped, bins).unwrap()).abs() < 1e-12);
        prop_assert!((mi - common::brute_force_mi(&x, &y, bins)).abs() < 1e-12);
    }

    #[test]
    fn mi_invariant_under_exact_affine_maps(
        x in prop::collection::vec(0i32..20, 2..60),
        labels in prop::collection::vec(any::<bool>(), 60),
        scale in select(vec![0.25f64, 0.5, 2.0, 8.0]),
        shift in -16i32..16,
        bins in select(vec![2usize, 7, 10, 100]),
    ) {
        let y = &labels[..x.len()];
        let xs: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        let mapped: Vec<f64> = xs.iter().map(|v| scale * v + f64::from(shift)).collect();
        prop_assert_eq!(estimate_mi(&xs, y, bins).unwrap(), estimate_mi(&mapped, y, bins).unwrap());
    }

    #[test]
    fn selection_monotone_in_threshold(
        values in prop::collection::vec(0.0f64..0.02, 3..60),
        a in 0.0f64..0.02,
        b in 0.0f64..0.02,
    ) {
        let n_terms = values.len() / 3;
        let table = MiTable {
            terms: (0..n_terms).map(|i| format!("t{i}")).collect(),
            categories: vec!["x".into(), "y".into(), "z".into()],
            values: values[..n_terms * 3].to_vec(),
        };
        let (lo, hi) = (a.min(b), a.max(b));
        let loose = select_terms(&table, &SelectionRule { threshold_bits: lo, bins: 10 });
        let strict = select_terms(&table, &SelectionRule { threshold_bits: hi, bins: 10 });
        prop_assert!(strict.iter().all(|t| loose.contains(t)));
        for t in strict {
            prop_assert!(table.max_over_categories(t) > hi);
        }
    }

    #[test]
    fn kernel_symmetric_and_bounded(
        x in prop::collection::vec(-5.0f64..5.0, 1..6),
        shift in prop::collection::vec(-5.0f64..5.0, 6),
        gamma in 0.001f64..50.0,
    ) {
        let z: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let k = rbf(&x, &z, gamma).unwrap();
        prop_assert_eq!(k, rbf(&z, &x, gamma).unwrap());
        prop_assert!(k > 0.0 || x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * gamma > 700.0);
        prop_assert!(k <= 1.0);
    }

    #[test]
    fn cv_report_statistics(acc in prop::collection::vec(0.0f64..=1.0, 2..25)) {
        let n = acc.len();
        let r = CvReport::from_folds(acc.clone(), vec![1; n], vec![1; n]);
        let mean = acc.iter().sum::<f64>() / n as f64;
        let std = (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        prop_assert!((r.mean_accuracy - mean).abs() <= 1e-12);
        prop_assert!((r.std_accuracy - std).abs() <= 1e-12);
        prop_assert!(r.ci95_lower <= r.mean_accuracy);
    }

    #[test]
    fn best_row_is_a_pure_maximum(
        cells in prop::collection::vec((select(vec![0.5f64, 1.0, 2.0]), select(vec![0.1f64, 0.2]), 0u8..4, 0u8..3, 0u8..3), 0..20)
    ) {
        let rows: Vec<GridRow> = cells
            .iter()
            .map(|&(gamma, nu, acc, sv, status)| GridRow {
                gamma,
                nu,
                status: [RowStatus::Ok, RowStatus::InfeasibleNu, RowStatus::Failed][status as usize],
                mean_accuracy: Some(f64::from(acc) / 4.0),
                std_accuracy: Some(0.0),
                mean_support_vectors: Some(f64::from(sv)),
                message: None,
            })
            .collect();
        let best = select_best(&rows);
        prop_assert_eq!(best, select_best(&rows.clone()));
        match best {
            None => prop_assert!(rows.iter().all(|r| r.status != RowStatus::Ok)),
            Some(b) => {
                prop_assert_eq!(rows[b].status, RowStatus::Ok);
                for r in rows.iter().filter(|r| r.status == RowStatus::Ok) {
                    prop_assert!(r.mean_accuracy <= rows[b].mean_accuracy);
                }
            }
        }
    }

    #[test]
    fn folds_partition_and_balance(
        counts in prop::collection::vec(5usize..20, 2..5),
        folds in 2usize..6,
        seed in any::<u64>(),
    ) {
        let labels: Vec<String> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(format!("c{c}"), n))
            .collect();
        let f = fold_assignment(&labels, folds, true, seed).unwrap();
        let mut size = vec![0usize; folds];
        let mut per: BTreeMap<(&str, usize), usize> = BTreeMap::new();
        for (i, &k) in f.iter().enumerate() {
            prop_assert!(k < folds);
            size[k] += 1;
            *per.entry((labels[i].as_str(), k)).or_default() += 1;
        }
        prop_assert!(size.iter().max().unwrap() - size.iter().min().unwrap() <= 1);
        for (c, &n) in counts.iter().enumerate() {
            let name = format!("c{c}");
            for k in 0..folds {
                let got = per.get(&(name.as_str(), k)).copied().unwrap_or(0);
                prop_assert!(got == n / folds || got == n / folds + 1);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svd_invariants(rows in dense_rows(12, 12)) {
        prop_assume!(rows.iter().flatten().any(|&v| v != 0.0));
        let k = rows.len().min(rows[0].len());
        let f = truncated_svd(&matrix(&rows, Weighting::Probability), k).unwrap();
        prop_assert!(f.d.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(f.d.iter().all(|&d| d >= 0.0));
        for (m, cols) in [(&f.u, k), (&f.v, k)] {
            for a in 0..cols {
                for b in 0..cols {
                    let dot: f64 = m.col(a).iter().zip(m.col(b)).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-10);
                }
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                let rebuilt: f64 = (0..k).map(|c| f.u[(i, c)] * f.d[c] * f.v[(j, c)]).sum();
                prop_assert!((rebuilt - a).abs() < 1e-10);
            }
        }
        // the largest-magnitude entry of each right vector is positive
        for c in 0..k {
            let col = f.v.col(c);
            let big = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            prop_assert!(big >= 0.0);
        }
    }

    #[test]
    fn solver_meets_kkt_and_nu_property(
        seed in any::<u64>(),
        m in 6usize..40,
        gamma in select(vec![0.1f64, 0.5, 1.0, 4.0]),
        nu in select(vec![0.05f64, 0.2, 0.5, 0.8]),
        eps in select(vec![1e-3f64, 1e-6]),
    ) {
        let mut r = common::rng(seed);
        let (points, y) = common::random_binary_problem(&mut r, m);
        let pos = y.iter().filter(|&&l| l > 0).count();
        prop_assume!(nu_feasible(pos, m - pos, nu));
        let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
        let cfg = SolverConfig { eps, ..SolverConfig::default() };
        let sol = solve_nu_svc(&refs, &y, &vec![1.0; m], nu, RbfKernel::new(gamma).unwrap(), &cfg).unwrap();
        prop_assert!(sol.kkt_violation(&y) <= eps);
        let target = nu * m as f64 / 2.0;
        for g in [1i8, -1] {
            let s: f64 = (0..m).filter(|&i| y[i] == g).map(|i| sol.alpha[i]).sum();
            prop_assert!((s - target).abs() < 1e-9);
        }
        prop_assert!(sol.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
        let svs = sol.alpha.iter().filter(|&&a| a > 0.0).count() as f64 / m as f64;
        let bounded = (0..m).filter(|&i| sol.is_upper(i)).count() as f64 / m as f64;
        prop_assert!(svs >= nu - 2.0 / m as f64);
        prop_assert!(bounded <= nu + 2.0 / m as f64);
    }

    #[test]
    fn prediction_ignores_support_vector_order(seed in any::<u64>(), rot in 1usize..7) {
        let mut r = common::rng(seed);
        let (mut points, _) = common::random_binary_problem(&mut r, 30);
        let labels: Vec<String> = (0..30).map(|i| ["p", "q", "r"][i % 3].to_string()).collect();
        for (p, l) in points.iter_mut().zip(&labels) {
            p[1] += match l.as_str() { "p" => 3.0, "q" => 0.0, _ => -3.0 };
        }
        let model = train_multiclass(&points, &labels, 0.5, 0.2, BalancingStrategy::None, &SolverConfig::default()).unwrap();
        let mut shuffled = model.clone();
        for b in &mut shuffled.binary_models {
            let n = b.support_vectors.len();
            b.support_vectors.rotate_left(rot % n);
            b.dual_coefs.rotate_left(rot % n);
            b.sv_indices.rotate_left(rot % n);
        }
        for x in common::probe_grid(&points) {
            let clear = model.binary_models.iter().all(|b| b.decision_value(&x).abs() > 1e-9);
            if clear {
                prop_assert_eq!(model.predict(&x).unwrap(), shuffled.predict(&x).unwrap());
            }
            prop_assert_eq!(model.predict(&x).unwrap(), model.predict(&x).unwrap());
        }
    }
}
