//! Evaluation against the oracle: correlation, alignment upper bound,
//! timed pairwise matrices and clustering.

use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::align::{random_align, score_given_alignment, Alignment, AlignerConfig};
use crate::corpus::PairRecord;
use crate::error::{Error, Result};
use crate::neural::{predict_matrix, InferenceStats, ModelKind, Trained};
use crate::par;
use crate::penman::{extract_triples, AmrGraph};
use crate::seed;

/// Symmetric similarity matrix with unit diagonal, entries in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds from the `i < j` entries in row-major order.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::Contract(format!("{} upper entries for n = {n}", upper.len())));
        }
        let mut values = vec![1.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().expect("length checked");
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Contract(format!("similarity {v} at ({i}, {j}) outside [0, 1]")));
                }
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(DistanceMatrix { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64 + Sync + Send) -> Result<Self> {
        let upper = par::map(&par::upper_pairs(n), |&(i, j)| f(i, j));
        Self::from_upper(n, &upper)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Header row `\tid…`, then one row per id.
    pub fn write_tsv<W: Write>(&self, ids: &[String], mut w: W) -> Result<()> {
        if ids.len() != self.n {
            return Err(Error::Contract(format!("{} ids for a {}-row matrix", ids.len(), self.n)));
        }
        writeln!(w, "\t{}", ids.join("\t"))?;
        for (i, id) in ids.iter().enumerate() {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{id}\t{}", row.join("\t"))?;
        }
        Ok(w.flush()?)
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<(Vec<String>, Self)> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Empty("matrix file"))??;
        let ids: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
        let n = ids.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let data_err = |message: String| Error::Data { line: i + 2, message };
            let mut cells = line.split('\t');
            let id = cells.next().unwrap_or_default();
            if ids.get(i).map(String::as_str) != Some(id) {
                return Err(data_err(format!("row id `{id}` does not match header")));
            }
            let row = cells
                .map(|c| c.parse::<f64>().map_err(|e| data_err(format!("bad value `{c}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n {
                return Err(data_err(format!("expected {n} values, found {}", row.len())));
            }
            values.extend(row);
        }
        if values.len() != n * n {
            return Err(Error::Data { line: 0, message: format!("expected {n} rows") });
        }
        let upper: Vec<f64> = par::upper_pairs(n).iter().map(|&(i, j)| values[i * n + j]).collect();
        let m = Self::from_upper(n, &upper)?;
        if m.values != values {
            return Err(Error::Data { line: 0, message: "matrix is not symmetric with unit diagonal".into() });
        }
        Ok((ids, m))
    }
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Contract(format!("pearson needs two equal sequences of length >= 2, got {} and {}", xs.len(), ys.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("first sequence is constant"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("second sequence is constant"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Per-record F1 under the stored gold alignment and under `predicted`.
pub fn alignment_f1s(records: &[PairRecord], predicted: &[Alignment]) -> Result<Vec<(f64, f64)>> {
    if records.len() != predicted.len() {
        return Err(Error::Contract(format!("{} records but {} alignments", records.len(), predicted.len())));
    }
    let jobs: Vec<(&PairRecord, &Alignment)> = records.iter().zip(predicted).collect();
    par::map(&jobs, |(rec, pred)| {
        let (ga, gb) = rec.graphs()?;
        let (ta, tb) = (extract_triples(&ga), extract_triples(&gb));
        let gold = score_given_alignment(&ta, &tb, &rec.alignment()?)?;
        let ours = score_given_alignment(&ta, &tb, pred)?;
        Ok((gold.f1, ours.f1))
    })
    .into_iter()
    .collect()
}

/// Corpus averages (×100) of F1 under gold and predicted alignments.
pub fn upper_bound_gap(records: &[PairRecord], predicted: &[Alignment]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::Empty("records"));
    }
    let f1s = alignment_f1s(records, predicted)?;
    let n = f1s.len() as f64;
    let gold = f1s.iter().map(|p| p.0).sum::<f64>() / n * 100.0;
    let pred = f1s.iter().map(|p| p.1).sum::<f64>() / n * 100.0;
    Ok((gold, pred))
}

/// F1 under a uniformly random alignment per record, seeded per index.
pub fn random_baseline(records: &[PairRecord], seed: u64) -> Result<Vec<f64>> {
    par::map_range(records.len(), |i| {
        let (ga, gb) = records[i].graphs()?;
        let map = random_align(&ga, &gb, seed::derive(seed, &[i as u64]));
        Ok(score_given_alignment(&extract_triples(&ga), &extract_triples(&gb), &map)?.f1)
    })
    .into_iter()
    .collect()
}

/// How pairwise similarities are produced.
#[derive(Debug, Clone, Copy)]
pub enum MatrixMethod<'a> {
    Oracle(AlignerConfig),
    ScoreModel(&'a Trained),
    VectorModel(&'a Trained),
    /// F1 under a random alignment.
    Random,
}

impl MatrixMethod<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixMethod::Oracle(_) => "oracle",
            MatrixMethod::ScoreModel(_) => "score_model",
            MatrixMethod::VectorModel(_) => "vector_model",
            MatrixMethod::Random => "random",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TimedMatrix {
    pub matrix: DistanceMatrix,
    pub seconds: f64,
    /// Unordered pairs filled.
    pub pairs: usize,
    /// Model inference counts, for model methods.
    pub inference: Option<InferenceStats>,
}

/// Fills the `n(n-1)/2` unordered pairs with `method` and times the fill.
pub fn time_matrix(method: &MatrixMethod, graphs: &[AmrGraph], seed: u64) -> Result<TimedMatrix> {
    let n = graphs.len();
    let pairs = n * n.saturating_sub(1) / 2;
    let start = Instant::now();
    let (matrix, inference) = match method {
        MatrixMethod::Oracle(aligner) => {
            let upper = par::map(&par::upper_pairs(n), |&(i, j)| {
                aligner.run(&graphs[i], &graphs[j], seed::pair(seed, i, j)).map(|(_, s)| s.f1)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            (DistanceMatrix::from_upper(n, &upper)?, None)
        }
        MatrixMethod::Random => {
            let triples = par::map(graphs, extract_triples);
            let upper = par::map(&par::upper_pairs(n), |&(i, j)| {
                let map = random_align(&graphs[i], &graphs[j], seed::pair(seed, i, j));
                score_given_alignment(&triples[i], &triples[j], &map).map(|s| s.f1)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            (DistanceMatrix::from_upper(n, &upper)?, None)
        }
        MatrixMethod::ScoreModel(model) | MatrixMethod::VectorModel(model) => {
            let mode = if matches!(method, MatrixMethod::ScoreModel(_)) { ModelKind::Score } else { ModelKind::Vector };
            let grids = par::map(graphs, |g| model.encoder.grid(g)).into_iter().collect::<Result<Vec<_>>>()?;
            let (m, stats) = predict_matrix(&model.params, &grids, mode)?;
            (m, Some(stats))
        }
    };
    Ok(TimedMatrix { matrix, seconds: start.elapsed().as_secs_f64(), pairs, inference })
}

/// Average-linkage agglomerative clustering on `1 - similarity`, cut at `k`
/// clusters. Ties merge the lowest index pair first; labels are numbered
/// by each cluster's smallest member.
pub fn cluster(m: &DistanceMatrix, k: usize) -> Result<Vec<usize>> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(Error::Contract(format!("cluster count {k} outside 1..={n}")));
    }
    let mut dist: Vec<f64> = m.values.iter().map(|s| 1.0 - s).collect();
    let mut size = vec![1usize; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    for _ in 0..n - k {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                let d = dist[i * n + j];
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("at least two active clusters");
        let (si, sj) = (size[i] as f64, size[j] as f64);
        for x in (0..n).filter(|&x| active[x] && x != i && x != j) {
            let d = (si * dist[i * n + x] + sj * dist[j * n + x]) / (si + sj);
            dist[i * n + x] = d;
            dist[x * n + i] = d;
        }
        size[i] += size[j];
        active[j] = false;
        for o in owner.iter_mut().filter(|o| **o == j) {
            *o = i;
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut seen: Vec<usize> = Vec::new();
    for (x, &root) in owner.iter().enumerate() {
        let label = seen.iter().position(|&r| r == root).unwrap_or_else(|| {
            seen.push(root);
            seen.len() - 1
        });
        labels[x] = label;
    }
    Ok(labels)
}

/// Correlation summary for one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub predictor: String,
    pub n: usize,
    /// `None` when undefined (constant predictions).
    pub rho: Option<f64>,
    pub mean_predicted: f64,
    pub mean_gold: f64,
}

impl ScoreReport {
    pub fn new(predictor: impl Into<String>, predicted: &[f64], gold: &[f64]) -> Result<Self> {
        if predicted.len() != gold.len() || gold.is_empty() {
            return Err(Error::Contract(format!("{} predictions for {} gold scores", predicted.len(), gold.len())));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok(ScoreReport {
            predictor: predictor.into(),
            n: gold.len(),
            rho: pearson(predicted, gold).ok(),
            mean_predicted: mean(predicted),
            mean_gold: mean(gold),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_pair_record, gen_synthetic_pairs, SyntheticConfig};
    use crate::penman::parse_penman;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    /// Textbook two-pass formula on centered data.
    fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    proptest! {
        #[test]
        fn pearson_linear_invariance(xs in prop::collection::vec(-100.0f64..100.0, 3..30), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-3));
            let pos: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let neg: Vec<f64> = xs.iter().map(|x| -a * x + b).collect();
            prop_assert!((pearson(&xs, &pos).unwrap() - 1.0).abs() < 1e-9);
            prop_assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-9);
        }

        #[test]
        fn pearson_matches_textbook(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(r) = pearson(&xs, &ys) {
                let naive = naive_pearson(&xs, &ys);
                prop_assert!((r - naive).abs() < 1e-6, "{} vs {}", r, naive);
            }
        }
    }

    fn records(n: usize) -> Vec<PairRecord> {
        let cfg = SyntheticConfig { max_nodes: 5, ..SyntheticConfig::default() };
        gen_synthetic_pairs(n, &cfg, 3).unwrap().records
    }

    #[test]
    fn upper_bound_holds() {
        let recs = records(40);
        let gold: Vec<Alignment> = recs.iter().map(|r| r.alignment().unwrap()).collect();
        let (g, p) = upper_bound_gap(&recs, &gold).unwrap();
        assert_eq!(g, p);
        let random: Vec<Alignment> = recs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (a, b) = r.graphs().unwrap();
                random_align(&a, &b, i as u64)
            })
            .collect();
        for (gold, pred) in alignment_f1s(&recs, &random).unwrap() {
            assert!(pred <= gold + 1e-12);
        }
        let (g2, p2) = upper_bound_gap(&recs, &random).unwrap();
        assert_eq!(g, g2);
        assert!(p2 < g2);
    }

    #[test]
    fn rejects_mismatched_alignment() {
        let recs = records(2);
        let bogus = vec![Alignment::new([("nope", "x0")]).unwrap(), recs[1].alignment().unwrap()];
        assert!(upper_bound_gap(&recs, &bogus).is_err());
        assert!(upper_bound_gap(&recs, &bogus[..1]).is_err());
    }

    fn graphs() -> Vec<AmrGraph> {
        ["(r / run-01 :ARG0 (d / duck))", "(a / cat)", "(r / run-01 :ARG0 (d / duck) :manner (f / fast))", "(w / want-01 :ARG0 (b / boy))"]
            .iter()
            .map(|s| parse_penman(s).unwrap())
            .collect()
    }

    #[test]
    fn oracle_matrix_properties() {
        let g = graphs();
        let t = time_matrix(&MatrixMethod::Oracle(AlignerConfig::exact()), &g, 1).unwrap();
        assert_eq!(t.pairs, 6);
        let m = &t.matrix;
        for i in 0..4 {
            assert_eq!(m.get(i, i), 1.0);
            for j in 0..4 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert!((m.get(0, 2) - build_pair_record("x", &g[0], &g[2], &AlignerConfig::exact(), 0).unwrap().f1).abs() < 1e-15);
        let three = time_matrix(&MatrixMethod::Random, &g[..3], 5).unwrap();
        assert_eq!(three.pairs, 3);
        assert_eq!(three.matrix, time_matrix(&MatrixMethod::Random, &g[..3], 5).unwrap().matrix);
    }

    #[test]
    fn oracle_matrix_permutation_consistent() {
        let g = graphs();
        let perm = [2usize, 0, 3, 1];
        let shuffled: Vec<AmrGraph> = perm.iter().map(|&i| g[i].clone()).collect();
        let cfg = AlignerConfig::exact();
        let m = time_matrix(&MatrixMethod::Oracle(cfg), &g, 0).unwrap().matrix;
        let p = time_matrix(&MatrixMethod::Oracle(cfg), &shuffled, 0).unwrap().matrix;
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(p.get(a, b), m.get(perm[a], perm[b]));
            }
        }
    }

    #[test]
    fn tsv_roundtrip() {
        let m = DistanceMatrix::from_upper(3, &[0.5, 0.25, 0.125]).unwrap();
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut buf = Vec::new();
        m.write_tsv(&ids, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("\ta\tb\tc\na\t1\t0.5\t0.25\n"));
        let (ids2, m2) = DistanceMatrix::read_tsv(buf.as_slice()).unwrap();
        assert_eq!((ids2, m2), (ids, m));
        assert!(DistanceMatrix::from_upper(2, &[1.5]).is_err());
        assert!(DistanceMatrix::from_upper(3, &[0.5]).is_err());
    }

    #[test]
    fn cluster_examples() {
        let m = DistanceMatrix::from_upper(4, &[0.2, 0.3, 0.1, 0.4, 0.2, 0.3]).unwrap();
        assert_eq!(cluster(&m, 4).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(cluster(&m, 1).unwrap(), vec![0, 0, 0, 0]);
        assert!(cluster(&m, 0).is_err());
        assert!(cluster(&m, 5).is_err());

        // Two duplicated groups, interleaved.
        let group = [0usize, 1, 0, 1, 1, 0];
        let sim = DistanceMatrix::from_fn(6, |i, j| if group[i] == group[j] { 1.0 } else { 0.3 }).unwrap();
        let labels = cluster(&sim, 2).unwrap();
        assert_eq!(labels, group.to_vec());
        assert_eq!(labels, cluster(&sim, 2).unwrap());
    }

    /// Average linkage computed from scratch each round over member lists.
    fn naive_average_linkage(m: &DistanceMatrix, k: usize) -> Vec<usize> {
        let n = m.n();
        let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        while clusters.len() > k {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let total: f64 = clusters[a].iter().flat_map(|&x| clusters[b].iter().map(move |&y| 1.0 - m.get(x, y))).sum();
                    let d = total / (clusters[a].len() * clusters[b].len()) as f64;
                    if d < best.0 - 1e-12 {
                        best = (d, a, b);
                    }
                }
            }
            let merged = clusters.remove(best.2);
            clusters[best.1].extend(merged);
        }
        let mut labels = vec![0; n];
        let mut order: Vec<usize> = (0..clusters.len()).collect();
        order.sort_by_key(|&c| clusters[c].iter().min().copied());
        for (label, &c) in order.iter().enumerate() {
            for &x in &clusters[c] {
                labels[x] = label;
            }
        }
        labels
    }

    proptest! {
        #[test]
        fn cluster_matches_naive(vals in prop::collection::vec(0u32..1000, 28), k in 1usize..8) {
            // Distinct values keep merge order unambiguous.
            let upper: Vec<f64> = vals.iter().enumerate().map(|(i, v)| (*v as f64 + i as f64 * 1e-4) / 1001.0).collect();
            let m = DistanceMatrix::from_upper(8, &upper).unwrap();
            prop_assert_eq!(cluster(&m, k).unwrap(), naive_average_linkage(&m, k));
        }
    }

    #[test]
    fn score_report() {
        let r = ScoreReport::new("x", &[0.1, 0.2, 0.3], &[0.2, 0.4, 0.6]).unwrap();
        assert!((r.rho.unwrap() - 1.0).abs() < 1e-12);
        assert!(ScoreReport::new("x", &[0.5, 0.5], &[0.2, 0.4]).unwrap().rho.is_none());
    }
}
