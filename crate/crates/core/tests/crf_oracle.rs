//! Exact inference checked against explicit enumeration of every tag path,
//! and gradients against central finite differences.

use ndarray::{Array1, Array2};
use polseg::crf::{
    constrained_viterbi, log_partition, nll, nll_gradients, score_sequence, viterbi, BoundaryOracle,
    EmissionMatrix, Transitions,
};
use polseg::tagset::{expand_bio, legality_masks, tags_to_spans, CategoryVocabulary};
use proptest::prelude::*;

fn all_paths(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

// Sums exp(score) directly, shifted by the max for range.
fn brute_log_partition(scores: &[f64]) -> f64 {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

// Path score written out term by term, independent of the library.
fn path_score(e: &Array2<f64>, tr: &Transitions, path: &[usize]) -> f64 {
    let mut s = tr.start[path[0]] + e[[0, path[0]]];
    for t in 1..path.len() {
        s = s + tr.scores[[path[t - 1], path[t]]] + e[[t, path[t]]];
    }
    s + tr.end[path[path.len() - 1]]
}

fn instance() -> impl Strategy<Value = (Array2<f64>, Transitions)> {
    (1usize..=5, 1usize..=4).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * k),
            prop::collection::vec(-2.0f64..2.0, k * k + 2 * k),
        )
            .prop_map(move |(e, t)| {
                let em = Array2::from_shape_vec((n, k), e).unwrap();
                let tr = Transitions {
                    scores: Array2::from_shape_vec((k, k), t[..k * k].to_vec()).unwrap(),
                    start: Array1::from(t[k * k..k * k + k].to_vec()),
                    end: Array1::from(t[k * k + k..].to_vec()),
                };
                (em, tr)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partition_and_viterbi_match_enumeration((e, tr) in instance()) {
        let (n, k) = e.dim();
        let em = EmissionMatrix::new(e.clone()).unwrap();
        let paths = all_paths(n, k);
        let scores: Vec<f64> = paths.iter().map(|p| path_score(&e, &tr, p)).collect();
        let z = log_partition(&em, &tr, None).unwrap();
        prop_assert!((z - brute_log_partition(&scores)).abs() <= 1e-8);

        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (path, score) = viterbi(&em, &tr, None).unwrap();
        prop_assert!((score - best).abs() <= 1e-12);
        prop_assert_eq!(score, score_sequence(&em, &tr, &path).unwrap());
        let first_best = paths.iter().zip(&scores).find(|(_, s)| **s == score).map(|(p, _)| p.clone());
        prop_assert_eq!(Some(path), first_best);
    }

    #[test]
    fn gradients_match_central_differences((e, tr) in instance(), pick in any::<prop::sample::Index>()) {
        let (n, k) = e.dim();
        let gold: Vec<usize> = (0..n).map(|t| (t * 7 + pick.index(k)) % k).collect();
        let em = EmissionMatrix::new(e.clone()).unwrap();
        let (_, g) = nll_gradients(&em, &tr, &gold).unwrap();
        let h = 1e-5;
        let check = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
            assert!(rel <= 1e-4, "analytic {analytic} numeric {numeric}");
        };
        for t in 0..n {
            for j in 0..k {
                let mut p = e.clone();
                p[[t, j]] += h;
                let mut m = e.clone();
                m[[t, j]] -= h;
                let fp = nll(&EmissionMatrix::new(p).unwrap(), &tr, &gold).unwrap();
                let fm = nll(&EmissionMatrix::new(m).unwrap(), &tr, &gold).unwrap();
                check(g.emissions[[t, j]], fp, fm);
            }
        }
        for a in 0..k {
            for b in 0..k {
                let mut p = tr.clone();
                p.scores[[a, b]] += h;
                let mut m = tr.clone();
                m.scores[[a, b]] -= h;
                check(g.transitions[[a, b]], nll(&em, &p, &gold).unwrap(), nll(&em, &m, &gold).unwrap());
            }
            let mut p = tr.clone();
            p.start[a] += h;
            let mut m = tr.clone();
            m.start[a] -= h;
            check(g.start[a], nll(&em, &p, &gold).unwrap(), nll(&em, &m, &gold).unwrap());
            let mut p = tr.clone();
            p.end[a] += h;
            let mut m = tr.clone();
            m.end[a] -= h;
            check(g.end[a], nll(&em, &p, &gold).unwrap(), nll(&em, &m, &gold).unwrap());
        }
    }

    #[test]
    fn masked_decoding_matches_enumeration_over_legal_paths(
        n in 1usize..=4,
        raw in prop::collection::vec(-3.0f64..3.0, 4 * 5),
        trans in prop::collection::vec(-1.0f64..1.0, 25 + 10),
        cuts in prop::collection::vec(any::<bool>(), 3),
    ) {
        let tags = expand_bio(CategoryVocabulary::from_ids(["a", "b"]).unwrap()).unwrap();
        let k = tags.len();
        let e = Array2::from_shape_vec((n, k), raw[..n * k].to_vec()).unwrap();
        let tr = Transitions {
            scores: Array2::from_shape_vec((k, k), trans[..k * k].to_vec()).unwrap(),
            start: Array1::from(trans[k * k..k * k + k].to_vec()),
            end: Array1::from(trans[k * k + k..k * k + 2 * k].to_vec()),
        };
        let em = EmissionMatrix::new(e.clone()).unwrap();

        // legality: B first, no O, I-c only after B-c or I-c
        let legal = |p: &[usize]| {
            tags.is_begin(p[0])
                && p.iter().all(|&t| t != 0)
                && p.windows(2).all(|w| tags.transition_allowed(w[0], w[1]))
        };
        let mask = legality_masks(&tags, n).unwrap();
        let paths: Vec<Vec<usize>> = all_paths(n, k).into_iter().filter(|p| legal(p)).collect();
        let scores: Vec<f64> = paths.iter().map(|p| path_score(&e, &tr, p)).collect();
        let z = log_partition(&em, &tr, Some(&mask)).unwrap();
        prop_assert!((z - brute_log_partition(&scores)).abs() <= 1e-8);
        let (path, score) = viterbi(&em, &tr, Some(&mask)).unwrap();
        prop_assert_eq!(score, scores.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        prop_assert!(legal(&path));

        let begins: Vec<usize> = std::iter::once(0).chain((1..n).filter(|&i| cuts[i - 1])).collect();
        let oracle = BoundaryOracle::new(n, begins.clone()).unwrap();
        let (opath, oscore) = constrained_viterbi(&em, &tr, &oracle, &tags).unwrap();
        let fits = |p: &[usize]| (0..n).all(|t| tags.is_begin(p[t]) == begins.contains(&t));
        let best = paths
            .iter()
            .zip(&scores)
            .filter(|(p, _)| fits(p))
            .map(|(_, s)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(oscore, best);
        let starts: Vec<usize> = tags_to_spans(&tags, &opath).iter().map(|s| s.start).collect();
        prop_assert_eq!(starts, begins);
    }
}
