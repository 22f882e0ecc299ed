//! From estimated models to predicted edge sets: scores, thresholding,
//! topology-only baselines and misprediction counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmat::{Pair, SupportPattern, SymmetricMatrix};

/// Threshold used on `|r_ij|` throughout the reference experiments.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// `diag(T_o)^{1/2} T_o⁻¹ diag(T_o)^{1/2}`.
    AsWritten,
    /// `D^{-1/2} K D^{-1/2}` with `K = T_o⁻¹`, `D = diag(K)`; bounded by 1.
    #[default]
    PartialCorrelation,
}

impl ScoreVariant {
    pub fn name(self) -> &'static str {
        match self {
            ScoreVariant::AsWritten => "as_written",
            ScoreVariant::PartialCorrelation => "partial_correlation",
        }
    }
}

impl std::str::FromStr for ScoreVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_written" => Ok(ScoreVariant::AsWritten),
            "partial_correlation" => Ok(ScoreVariant::PartialCorrelation),
            other => Err(Error::invalid(format!("unknown score variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    pub scores: SymmetricMatrix,
    pub variant: ScoreVariant,
}

impl ScoreMatrix {
    pub fn dim(&self) -> usize {
        self.scores.dim()
    }
}

/// Scores from an estimated covariance `T_o`.
pub fn score_matrix(t_o: &SymmetricMatrix, variant: ScoreVariant) -> Result<ScoreMatrix> {
    let precision = t_o.inverse()?;
    score_parts(t_o, &precision, variant)
}

/// Scores from an estimated precision `K = T_o⁻¹`; exact zeros of `K` stay
/// exact zeros of the score.
pub fn score_from_precision(precision: &SymmetricMatrix, variant: ScoreVariant) -> Result<ScoreMatrix> {
    let t_o = precision.inverse()?;
    score_parts(&t_o, precision, variant)
}

fn score_parts(t_o: &SymmetricMatrix, precision: &SymmetricMatrix, variant: ScoreVariant) -> Result<ScoreMatrix> {
    let scale: Vec<f64> = match variant {
        ScoreVariant::AsWritten => t_o.diagonal().iter().map(|d| d.sqrt()).collect(),
        ScoreVariant::PartialCorrelation => precision.diagonal().iter().map(|d| 1.0 / d.sqrt()).collect(),
    };
    let mut scores = precision.diagonal_congruence(&scale);
    if variant == ScoreVariant::PartialCorrelation {
        for r in 0..scores.dim() {
            scores.set(r, r, 1.0);
        }
    }
    Ok(ScoreMatrix { scores, variant })
}

/// Off-diagonal pairs with `|r_ij| > t_r`, plus every diagonal pair.
pub fn threshold_support(scores: &ScoreMatrix, t_r: f64) -> Result<SupportPattern> {
    if !(t_r > 0.0) {
        return Err(Error::invalid("threshold must be positive"));
    }
    Ok(scores.scores.support(t_r).with_diagonal())
}

/// `card(N_i ∩ N_j)` over the graph of off-diagonal pairs; diagonal is zero.
pub fn common_neighbors(graph: &SupportPattern) -> SymmetricMatrix {
    let nb = graph.neighbourhoods();
    let n = graph.dim();
    SymmetricMatrix::from_fn(n, |r, c| {
        if r == c {
            0.0
        } else {
            (0..n).filter(|&k| nb[r][k] && nb[c][k]).count() as f64
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub method_name: String,
    pub predicted_support: SupportPattern,
    pub true_support: Option<SupportPattern>,
    /// Predicted edges absent from the truth.
    pub false_positives: usize,
    /// True edges missing from the prediction.
    pub false_negatives: usize,
    pub mispredicted_total: usize,
    /// Pairs a baseline chose to add or remove, in rank order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub changed_pairs: Vec<Pair>,
    /// A baseline had to break a score tie at its cutoff.
    #[serde(default)]
    pub ties_at_cutoff: bool,
    /// Every candidate scored the same, so the ranking is purely lexicographic.
    #[serde(default)]
    pub degenerate: bool,
}

impl PredictionReport {
    pub fn new(method_name: impl Into<String>, predicted_support: SupportPattern) -> Self {
        PredictionReport {
            method_name: method_name.into(),
            predicted_support: predicted_support.with_diagonal(),
            true_support: None,
            false_positives: 0,
            false_negatives: 0,
            mispredicted_total: 0,
            changed_pairs: Vec::new(),
            ties_at_cutoff: false,
            degenerate: false,
        }
    }

    pub fn score_against(&mut self, truth: &SupportPattern) -> Result<()> {
        Error::check_dim(self.predicted_support.dim(), truth.dim())?;
        self.false_positives = self.predicted_support.difference(truth).edge_count();
        self.false_negatives = truth.difference(&self.predicted_support).edge_count();
        self.mispredicted_total = self.false_positives + self.false_negatives;
        self.true_support = Some(truth.clone());
        Ok(())
    }

    pub fn exact_recovery(&self) -> bool {
        self.true_support.is_some() && self.mispredicted_total == 0
    }
}

/// Misprediction counts over undirected off-diagonal pairs.
pub fn evaluate(predicted: &SupportPattern, truth: &SupportPattern) -> Result<PredictionReport> {
    let mut report = PredictionReport::new("evaluate", predicted.clone());
    report.score_against(truth)?;
    Ok(report)
}

/// Keeps the `k` best pairs by `key` (descending when `best_high`), ties
/// broken by lexicographic pair order. Returns the chosen pairs, whether a
/// tie straddled the cutoff, and whether every candidate scored the same.
fn rank_and_cut(mut scored: Vec<(Pair, f64)>, k: usize, best_high: bool) -> (Vec<Pair>, bool, bool) {
    scored.sort_by(|a, b| {
        let ord = if best_high { b.1.total_cmp(&a.1) } else { a.1.total_cmp(&b.1) };
        ord.then(a.0.cmp(&b.0))
    });
    let degenerate = scored.windows(2).all(|w| w[0].1 == w[1].1);
    let ties = k > 0 && k < scored.len() && scored[k - 1].1 == scored[k].1;
    (scored.into_iter().take(k).map(|(p, _)| p).collect(), ties, degenerate)
}

/// Predicts as appearing the `k` non-edges with the most common neighbours.
pub fn plp_baseline(prior_support: &SupportPattern, k: usize) -> Result<PredictionReport> {
    let cn = common_neighbors(prior_support);
    let candidates: Vec<(Pair, f64)> =
        prior_support.off_diagonal_complement().map(|p| (p, cn.get(p.i - 1, p.j - 1))).collect();
    if k > candidates.len() {
        return Err(Error::invalid(format!("k = {k} exceeds {} available non-edges", candidates.len())));
    }
    let (chosen, ties, degenerate) = rank_and_cut(candidates, k, true);
    let mut predicted = prior_support.clone();
    for p in &chosen {
        predicted.insert(p.i, p.j);
    }
    let mut report = PredictionReport::new("common_neighbors", predicted);
    report.changed_pairs = chosen;
    report.ties_at_cutoff = ties;
    report.degenerate = degenerate;
    Ok(report)
}

/// Predicts as disappearing the `k` edges whose endpoints have the fewest
/// common neighbours once the edge itself is removed.
pub fn nlp_reversed_baseline(prior_support: &SupportPattern, k: usize) -> Result<PredictionReport> {
    let edges: Vec<Pair> = prior_support.off_diagonal_pairs().collect();
    if k > edges.len() {
        return Err(Error::invalid(format!("k = {k} exceeds {} available edges", edges.len())));
    }
    let scored: Vec<(Pair, f64)> = edges
        .iter()
        .map(|&p| {
            let mut without = prior_support.clone();
            without.remove(p.i, p.j);
            (p, common_neighbors(&without).get(p.i - 1, p.j - 1))
        })
        .collect();
    let (chosen, ties, degenerate) = rank_and_cut(scored, k, false);
    let mut predicted = prior_support.clone();
    for p in &chosen {
        predicted.remove(p.i, p.j);
    }
    let mut report = PredictionReport::new("reversed_common_neighbors", predicted);
    report.changed_pairs = chosen;
    report.ties_at_cutoff = ties;
    report.degenerate = degenerate;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_pd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(dim: usize, edges: &[(usize, usize)]) -> SupportPattern {
        SupportPattern::from_pairs(dim, edges.iter().copied()).unwrap().with_diagonal()
    }

    #[test]
    fn score_examples() {
        for v in [ScoreVariant::AsWritten, ScoreVariant::PartialCorrelation] {
            let r = score_matrix(&SymmetricMatrix::identity(3), v).unwrap();
            assert_eq!(r.scores, SymmetricMatrix::identity(3));
        }
        let d = SymmetricMatrix::from_diagonal(&[2.0, 0.5, 3.0]);
        let r = score_matrix(&d, ScoreVariant::PartialCorrelation).unwrap();
        assert_eq!(r.scores, SymmetricMatrix::identity(3));
        let r = score_matrix(&d, ScoreVariant::AsWritten).unwrap();
        assert_eq!(r.scores.get(1, 0), 0.0);
        let k = SymmetricMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let r = score_from_precision(&k, ScoreVariant::PartialCorrelation).unwrap();
        assert!((r.scores.get(1, 0) - 0.5).abs() < 1e-15);
        let r = score_matrix(&k.inverse().unwrap(), ScoreVariant::PartialCorrelation).unwrap();
        assert!((r.scores.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn partial_correlation_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t = random_pd(&mut rng, 6);
            let r = score_matrix(&t, ScoreVariant::PartialCorrelation).unwrap();
            for i in 0..6 {
                assert_eq!(r.scores.get(i, i), 1.0);
                for j in 0..i {
                    assert!(r.scores.get(i, j).abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn thresholded_support_ignores_diagonal_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut k = random_pd(&mut rng, 5);
            k.set(3, 1, 0.0);
            k.set(4, 0, 0.0);
            let k = k + SymmetricMatrix::identity(5).scaled(2.0);
            let t = k.inverse().unwrap();
            let d: Vec<f64> = (0..5).map(|_| rng.random_range(0.2..5.0)).collect();
            let base = threshold_support(&score_matrix(&t, ScoreVariant::PartialCorrelation).unwrap(), 1e-4).unwrap();
            let scaled = threshold_support(
                &score_matrix(&t.diagonal_congruence(&d), ScoreVariant::PartialCorrelation).unwrap(),
                1e-4,
            )
            .unwrap();
            assert_eq!(base, scaled);
            assert!(!base.contains(4, 2) && !base.contains(5, 1));
        }
    }

    #[test]
    fn threshold_examples() {
        let r = ScoreMatrix { scores: SymmetricMatrix::identity(4), variant: ScoreVariant::PartialCorrelation };
        assert_eq!(threshold_support(&r, 0.5).unwrap(), SupportPattern::diagonal(4));
        assert!(threshold_support(&r, 0.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = score_matrix(&random_pd(&mut rng, 6), ScoreVariant::PartialCorrelation).unwrap();
        let mut prev = threshold_support(&r, 1e-4).unwrap();
        for t_r in [1e-3, 0.01, 0.05, 0.1, 0.3, 0.9] {
            let next = threshold_support(&r, t_r).unwrap();
            assert!(next.is_subset(&prev));
            prev = next;
        }
        assert_eq!(DEFAULT_SCORE_THRESHOLD, 1e-4);
    }

    #[test]
    fn common_neighbor_examples() {
        let path = graph(3, &[(1, 2), (2, 3)]);
        let cn = common_neighbors(&path);
        assert_eq!(cn.get(2, 0), 1.0);
        assert_eq!(cn.get(1, 0), 0.0);
        let complete = SupportPattern::full(4);
        let cn = common_neighbors(&complete);
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(cn.get(i, j), 2.0);
            }
        }
        assert_eq!(common_neighbors(&SupportPattern::diagonal(5)), SymmetricMatrix::zeros(5));
    }

    #[test]
    fn plp_baseline_examples() {
        let star = graph(5, &[(1, 2), (1, 3), (1, 4), (1, 5)]);
        let r = plp_baseline(&star, 1).unwrap();
        assert_eq!(r.changed_pairs, vec![Pair::new(3, 2)]);
        assert!(r.ties_at_cutoff);
        assert!(r.predicted_support.contains(3, 2));

        // 1 and 3 share 2, 4 and 5; every other non-edge shares two
        let g = graph(5, &[(1, 2), (2, 3), (1, 4), (4, 3), (1, 5), (5, 3)]);
        let r = plp_baseline(&g, 1).unwrap();
        assert_eq!(r.changed_pairs, vec![Pair::new(3, 1)]);
        assert!(!r.ties_at_cutoff);

        let empty = SupportPattern::diagonal(4);
        let r = plp_baseline(&empty, 2).unwrap();
        assert_eq!(r.changed_pairs, vec![Pair::new(2, 1), Pair::new(3, 1)]);
        assert!(r.degenerate);
        assert!(plp_baseline(&empty, 7).is_err());
        let r = plp_baseline(&star, 0).unwrap();
        assert_eq!(r.predicted_support, star);
    }

    #[test]
    fn nlp_baseline_examples() {
        let triangle = graph(3, &[(1, 2), (2, 3), (1, 3)]);
        let r = nlp_reversed_baseline(&triangle, 1).unwrap();
        assert_eq!(r.changed_pairs, vec![Pair::new(2, 1)]);
        assert!(r.ties_at_cutoff && r.degenerate);

        // the pendant edge 3-4 has no common neighbour
        let g = graph(4, &[(1, 2), (2, 3), (1, 3), (3, 4)]);
        let r = nlp_reversed_baseline(&g, 1).unwrap();
        assert_eq!(r.changed_pairs, vec![Pair::new(4, 3)]);

        let r = nlp_reversed_baseline(&g, 4).unwrap();
        assert_eq!(r.predicted_support, SupportPattern::diagonal(4));
        assert!(nlp_reversed_baseline(&g, 5).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let truth = graph(4, &[(1, 2), (3, 4)]);
        let r = evaluate(&truth, &truth).unwrap();
        assert_eq!(r.mispredicted_total, 0);
        assert!(r.exact_recovery());
        let plus = graph(4, &[(1, 2), (3, 4), (1, 3)]);
        let r = evaluate(&plus, &truth).unwrap();
        assert_eq!((r.false_positives, r.false_negatives), (1, 0));
        let other = graph(4, &[(1, 4), (2, 4), (2, 3)]);
        let r = evaluate(&other, &truth).unwrap();
        assert_eq!((r.false_positives, r.false_negatives, r.mispredicted_total), (3, 2, 5));
        assert!(evaluate(&truth, &SupportPattern::diagonal(5)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_graph(dim: usize) -> impl Strategy<Value = SupportPattern> {
            proptest::collection::vec(any::<bool>(), dim * (dim - 1) / 2).prop_map(move |bits| {
                let mut g = SupportPattern::diagonal(dim);
                let mut it = bits.into_iter();
                for i in 2..=dim {
                    for j in 1..i {
                        if it.next().unwrap() {
                            g.insert(i, j);
                        }
                    }
                }
                g
            })
        }

        proptest! {
            #[test]
            fn evaluate_swaps_fp_and_fn(a in random_graph(6), b in random_graph(6)) {
                let ab = evaluate(&a, &b).unwrap();
                let ba = evaluate(&b, &a).unwrap();
                prop_assert_eq!(ab.false_positives, ba.false_negatives);
                prop_assert_eq!(ab.false_negatives, ba.false_positives);
            }
        }
    }
}
