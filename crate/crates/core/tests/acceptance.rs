//! End-to-end acceptance checks. Runs without the libtest harness so the
//! criteria execute sequentially (the timing check must not share the CPU
//! with other tests) and each prints one PASS/FAIL line.
//!
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test --test acceptance -- 2 5`.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use amrsynth::align::{
    exact_align, hill_climb_align, Alignment, AlignerConfig, DEFAULT_EXACT_LIMIT,
};
use amrsynth::anonymize::{anonymize_corpus, anonymize_pair, anonymize_record, augment_corpus, permute_record};
use amrsynth::corpus::{gen_synthetic_pairs, random_graph, split_corpus, synthetic_pair, Corpus, PairRecord, Split, SyntheticConfig};
use amrsynth::eval::{alignment_f1s, pearson, random_baseline, time_matrix, upper_bound_gap, MatrixMethod};
use amrsynth::neural::gradcheck::grad_check;
use amrsynth::neural::{
    init_params, train, ModelConfig, ModelKind, ModelParams, PairItem, TrainConfig, Trained,
};
use amrsynth::penman::{
    extract_triples, normalize_role, parse_penman, serialize_penman, AmrGraph, Edge, TokenGrid, Triple, TripleKind, TripleSet,
};
use amrsynth::seed;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// 1. Oracle equivalence
// ---------------------------------------------------------------------------

/// Best F1 over every partial injection, scored with its own multiset count.
fn enumeration_f1(ta: &TripleSet, tb: &TripleSet) -> f64 {
    let va: Vec<String> = ta.variables().iter().map(|s| s.to_string()).collect();
    let vb: Vec<String> = tb.variables().iter().map(|s| s.to_string()).collect();
    let mut pool: HashMap<&Triple, usize> = HashMap::new();
    for t in &tb.triples {
        *pool.entry(t).or_default() += 1;
    }
    let count = |map: &HashMap<&str, &str>| -> usize {
        let mut images: HashMap<Triple, usize> = HashMap::new();
        for t in &ta.triples {
            let Some(&src) = map.get(t.source.as_str()) else { continue };
            let target = if t.kind == TripleKind::Relation {
                match map.get(t.target.as_str()) {
                    Some(&v) => v.to_string(),
                    None => continue,
                }
            } else {
                t.target.clone()
            };
            *images.entry(Triple { kind: t.kind, source: src.to_string(), role: t.role.clone(), target }).or_default() += 1;
        }
        images.iter().map(|(t, &n)| n.min(pool.get(t).copied().unwrap_or(0))).sum()
    };
    fn walk<'a>(
        i: usize,
        va: &'a [String],
        vb: &'a [String],
        used: &mut Vec<bool>,
        map: &mut HashMap<&'a str, &'a str>,
        count: &dyn Fn(&HashMap<&str, &str>) -> usize,
        best: &mut usize,
    ) {
        if i == va.len() {
            *best = (*best).max(count(map));
            return;
        }
        walk(i + 1, va, vb, used, map, count, best);
        for j in 0..vb.len() {
            if !used[j] {
                used[j] = true;
                map.insert(&va[i], &vb[j]);
                walk(i + 1, va, vb, used, map, count, best);
                map.remove(va[i].as_str());
                used[j] = false;
            }
        }
    }
    let mut best = 0;
    walk(0, &va, &vb, &mut vec![false; vb.len()], &mut HashMap::new(), &count, &mut best);
    2.0 * best as f64 / (ta.len() + tb.len()) as f64
}

fn small_pairs(n: usize, max_vars: usize, seed: u64) -> Vec<(AmrGraph, AmrGraph)> {
    let cfg = SyntheticConfig { max_nodes: max_vars, max_edits: 4, ..SyntheticConfig::default() };
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let edits = rng.gen_range(0..=4);
        let (a, b) = synthetic_pair(&cfg, edits, &mut rng);
        if a.variable_count() <= max_vars && b.variable_count() <= max_vars {
            out.push((a, b));
        }
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let pairs = small_pairs(500, 6, 101);
    let mut hill_agree = 0;
    for (i, (a, b)) in pairs.iter().enumerate() {
        let (ta, tb) = (extract_triples(a), extract_triples(b));
        let (_, exact) = ok(exact_align(a, b, DEFAULT_EXACT_LIMIT))?;
        let naive = enumeration_f1(&ta, &tb);
        ensure((exact.f1 - naive).abs() < 1e-12, || format!("pair {i}: exact {} vs enumeration {naive}", exact.f1))?;
        let (_, hill) = hill_climb_align(a, b, 8, seed::derive(7, &[i as u64]));
        if (hill.f1 - exact.f1).abs() < 1e-12 {
            hill_agree += 1;
        }
    }
    let rate = hill_agree as f64 / pairs.len() as f64;
    ensure(rate >= 0.98, || format!("hill climbing agrees on {:.1}% of pairs", rate * 100.0))?;
    Ok(format!("exact = enumeration on 500/500; hill climbing (8 restarts) = exact on {hill_agree}/500"))
}

// ---------------------------------------------------------------------------
// 2. Worked example
// ---------------------------------------------------------------------------

fn worked_example() -> Outcome {
    let a = ok(parse_penman("(r / run-01 :ARG0 (d / duck))"))?;
    let b = ok(parse_penman("(x / run-01 :ARG0 (y / duck) :mod (z / fast))"))?;
    let (map, score) = ok(exact_align(&a, &b, DEFAULT_EXACT_LIMIT))?;
    ensure(map == ok(Alignment::new([("r", "x"), ("d", "y")]))?, || format!("alignment {:?}", map.pairs()))?;
    ensure((score.f1 - 0.8).abs() < 1e-12, || format!("F1 {}", score.f1))?;
    let anon = anonymize_pair(&a, &b, Some(&map));
    let (sa, sb) = (anon.a.to_string(), anon.b.to_string());
    let flat = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    ensure(flat(&sa) == "(4 / 1 :3 (5 / 2))", || format!("anonymized first graph {sa}"))?;
    ensure(flat(&sb) == "(6 / 1 :3 (7 / 2) :10 (8 / 9))", || format!("anonymized second graph {sb}"))?;
    let remapped = anon.alignment.ok_or("no transported alignment")?;
    ensure(remapped == ok(Alignment::new([("4", "6"), ("5", "7")]))?, || format!("remapped {:?}", remapped.pairs()))?;
    Ok("map {(r,x),(d,y)}, F1 0.8, anonymized indices and map {(4,6),(5,7)} as stated".into())
}

// ---------------------------------------------------------------------------
// 3. Invariance
// ---------------------------------------------------------------------------

fn invariance() -> Outcome {
    let corpus = ok(gen_synthetic_pairs(1000, &SyntheticConfig::default(), 303))?;
    let mut exact_checked = 0;
    for (i, rec) in corpus.records.iter().enumerate() {
        let (anon, _) = ok(anonymize_record(rec))?;
        let s = ok(anon.rescore())?;
        ensure(s.matches == rec.matches, || format!("{}: anonymized matches {} vs {}", rec.id, s.matches, rec.matches))?;
        ensure((s.f1 - rec.f1).abs() < 1e-12, || format!("{}: anonymized F1 {} vs {}", rec.id, s.f1, rec.f1))?;

        let (ga, gb) = ok(rec.graphs())?;
        if ga.variable_count().min(gb.variable_count()) <= 6 {
            let (xa, xb) = ok(anon.graphs())?;
            let before = ok(exact_align(&ga, &gb, DEFAULT_EXACT_LIMIT))?.1;
            let after = ok(exact_align(&xa, &xb, DEFAULT_EXACT_LIMIT))?.1;
            ensure((before.f1 - after.f1).abs() < 1e-12, || format!("{}: optimal F1 {} vs {}", rec.id, before.f1, after.f1))?;
            exact_checked += 1;
        }

        for p in 0..10u64 {
            let perm = ok(permute_record(&anon, seed::derive(17, &[i as u64, p])))?;
            let s = ok(perm.rescore())?;
            ensure(s.matches == rec.matches, || format!("{} perm {p}: matches {} vs {}", rec.id, s.matches, rec.matches))?;
            ensure((s.f1 - rec.f1).abs() < 1e-12, || format!("{} perm {p}: F1 {} vs {}", rec.id, s.f1, rec.f1))?;
            ensure((perm.f1 - rec.f1).abs() < 1e-12, || format!("{} perm {p}: stored score changed", rec.id))?;
        }
    }
    Ok(format!("1000 pairs × (anonymization + 10 permutations) keep match counts; optimal F1 re-searched on {exact_checked}"))
}

// ---------------------------------------------------------------------------
// 4. Parser roundtrip
// ---------------------------------------------------------------------------

/// Reverses about a third of the edges. Undirected connectivity is kept,
/// so the result is valid, but nodes the root cannot reach forward must be
/// written with inverse roles.
fn flip_some_edges(g: AmrGraph, rng: &mut impl Rng) -> Result<AmrGraph, String> {
    let edges = g
        .edges
        .into_iter()
        .map(|e| if rng.gen_bool(0.3) { Edge { source: e.target, role: e.role, target: e.source } } else { e })
        .collect();
    ok(AmrGraph::new(g.root, g.nodes, edges, g.attributes))
}

fn parser_roundtrip() -> Outcome {
    let cfg = SyntheticConfig { max_nodes: 12, reentrancy: 0.4, attribute: 0.4, ..SyntheticConfig::default() };
    let mut rng = seed::rng(404);
    let mut graphs = Vec::with_capacity(1000);
    while graphs.len() < 1000 {
        let edits = rng.gen_range(0..=6);
        let (a, b) = synthetic_pair(&cfg, edits, &mut rng);
        for g in [a, b] {
            graphs.push(flip_some_edges(g, &mut rng)?);
        }
    }
    graphs.truncate(1000);
    let mut inverse_roles = 0;
    for (i, g) in graphs.iter().enumerate() {
        let text = serialize_penman(g);
        let back = ok(parse_penman(&text))?;
        ensure(extract_triples(&back).sorted() == extract_triples(g).sorted(), || format!("graph {i}: triples differ after roundtrip\n{text}"))?;
        let again = serialize_penman(&back);
        ensure(again == text, || format!("graph {i}: serialization not idempotent\n{text}\n---\n{again}"))?;
        for e in &back.edges {
            ensure(normalize_role(&e.role) == (e.role.clone(), false), || format!("graph {i}: role {} not normalized", e.role))?;
        }
        for line in text.lines() {
            if let Some(role) = line.split_whitespace().find(|t| t.starts_with(':') && t.ends_with("-of")) {
                let (base, inv) = normalize_role(role);
                ensure(!inv || normalize_role(&base) == (base.clone(), false), || format!("role {role} normalizes twice"))?;
                inverse_roles += inv as usize;
            }
        }
    }
    ensure(inverse_roles > 0, || "no inverse roles exercised".into())?;
    Ok(format!("1000 graphs roundtrip with equal triple sets and stable text; {inverse_roles} inverse roles normalized once"))
}

// ---------------------------------------------------------------------------
// 5. Gradient correctness
// ---------------------------------------------------------------------------

fn tiny_batch(cfg: &ModelConfig, seed: u64) -> Vec<PairItem> {
    let mut rng = seed::rng(seed);
    let mut grid = || TokenGrid {
        rows: cfg.rows,
        cols: cfg.cols,
        cells: (0..cfg.rows * cfg.cols).map(|_| rng.gen_range(0..cfg.vocab_size as u32)).collect(),
    };
    (0..4).map(|i| PairItem { a: grid(), b: grid(), target: 0.2 * i as f64 + 0.1 }).collect()
}

fn gradient_correctness() -> Outcome {
    let mut worst = Vec::new();
    for kind in [ModelKind::Score, ModelKind::Vector] {
        let cfg = ModelConfig::tiny(kind, 16);
        let p: ModelParams<f64> = ok(init_params(&cfg, 505))?;
        let report = ok(grad_check(&p, &tiny_batch(&cfg, 55), 1e-5))?;
        for g in &report.groups {
            ensure(g.max_rel < 1e-4, || format!("{kind:?} {}: relative error {:.3e}", g.name, g.max_rel))?;
        }
        worst.push(format!("{kind:?} max {:.2e} over {} groups", report.max_rel, report.groups.len()));
    }
    Ok(worst.join("; "))
}

// ---------------------------------------------------------------------------
// 6. Learning sanity
// ---------------------------------------------------------------------------

fn learning_sanity() -> Outcome {
    let n = 2500;
    let corpus = ok(gen_synthetic_pairs(n, &SyntheticConfig::default(), 606))?;
    let corpus = ok(split_corpus(&corpus, (2000, 250, 250), 61))?;
    let test = corpus.part(Split::Test);
    let gold: Vec<f64> = test.iter().map(|r| r.f1).collect();
    let cfg = TrainConfig { epochs: 10, ..TrainConfig::new(ModelConfig::compact(ModelKind::Score, 0)) };

    let untrained = ok(Trained::untrained(&corpus.part(Split::Train), &cfg.model, 62))?;
    let rho_untrained = pearson(&ok(untrained.predict(&test))?, &gold).unwrap_or(0.0);
    let (plain, _) = ok(train(&corpus.part(Split::Train), &corpus.part(Split::Dev), &cfg, 62))?;
    let rho_plain = ok(pearson(&ok(plain.predict(&test))?, &gold))?;

    let anon = ok(anonymize_corpus(&corpus))?;
    let augmented = ok(augment_corpus(&anon.part(Split::Train), 4, 63, false))?;
    let (voc_aug, _) = ok(train(&augmented, &anon.part(Split::Dev), &cfg, 62))?;
    let rho_voc_aug = ok(pearson(&ok(voc_aug.predict(&anon.part(Split::Test)))?, &gold))?;

    let rho_random = ok(pearson(&ok(random_baseline(&test, 64))?, &gold))?;

    let summary = format!(
        "test ρ: untrained {rho_untrained:.3}, plain {rho_plain:.3}, voc+aug {rho_voc_aug:.3}, random alignment {rho_random:.3}"
    );
    ensure(rho_plain >= 0.5, || format!("plain ρ below 0.5 ({summary})"))?;
    ensure(rho_plain > rho_untrained, || format!("training did not beat the untrained model ({summary})"))?;
    ensure(rho_voc_aug >= rho_plain, || format!("voc+aug below plain ({summary})"))?;
    ensure(rho_random < rho_plain.min(rho_voc_aug), || format!("random baseline is not the lowest ({summary})"))?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// 7. Speed ordering
// ---------------------------------------------------------------------------

fn speed_ordering() -> Outcome {
    let cfg = SyntheticConfig { min_nodes: 10, max_nodes: 20, ..SyntheticConfig::default() };
    let mut rng = seed::rng(707);
    let graphs: Vec<AmrGraph> = (0..200).map(|_| random_graph(&cfg, &mut rng)).collect();

    let corpus = ok(gen_synthetic_pairs(300, &SyntheticConfig::default(), 71))?;
    let corpus = ok(split_corpus(&corpus, (250, 50, 0), 72))?;
    let train_cfg = |kind| TrainConfig { epochs: 1, ..TrainConfig::new(ModelConfig::compact(kind, 0)) };
    let fit = |kind| -> Result<Trained, String> {
        Ok(ok(train(&corpus.part(Split::Train), &corpus.part(Split::Dev), &train_cfg(kind), 73))?.0)
    };
    let (score_model, vector_model) = (fit(ModelKind::Score)?, fit(ModelKind::Vector)?);

    // Model timings interleave and keep the fastest of five runs each, so
    // transient load hits both modes alike.
    let oracle = ok(time_matrix(&MatrixMethod::Oracle(AlignerConfig::default()), &graphs, 74))?;
    let mut fastest: [Option<amrsynth::eval::TimedMatrix>; 2] = [None, None];
    for _ in 0..5 {
        for (slot, method) in fastest.iter_mut().zip([MatrixMethod::ScoreModel(&score_model), MatrixMethod::VectorModel(&vector_model)]) {
            let t = ok(time_matrix(&method, &graphs, 74))?;
            if slot.as_ref().is_none_or(|b| t.seconds < b.seconds) {
                *slot = Some(t);
            }
        }
    }
    let [Some(score), Some(vector)] = fastest else { return Err("no model timings".into()) };

    let stats = vector.inference.ok_or("vector method reported no inference counts")?;
    ensure(stats.encoder_calls == graphs.len(), || format!("vector mode made {} encoder calls for {} graphs", stats.encoder_calls, graphs.len()))?;
    let summary = format!(
        "oracle {:.3}s, score {:.3}s, vector {:.4}s (oracle/vector {:.0}×); vector encoder calls {}",
        oracle.seconds,
        score.seconds,
        vector.seconds,
        oracle.seconds / vector.seconds,
        stats.encoder_calls
    );
    ensure(oracle.seconds >= 100.0 * vector.seconds, || format!("vector not 100× faster ({summary})"))?;
    ensure(vector.seconds < score.seconds && score.seconds < oracle.seconds, || format!("score mode not strictly between ({summary})"))?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// 8. Upper bound
// ---------------------------------------------------------------------------

fn corrupt(rec: &PairRecord, rng: &mut impl Rng) -> Result<Alignment, String> {
    let (_, gb) = ok(rec.graphs())?;
    let vb: Vec<String> = gb.nodes.keys().cloned().collect();
    let mut pairs: Vec<(String, String)> = ok(rec.alignment())?.pairs().to_vec();
    for _ in 0..rng.gen_range(1..=3) {
        match rng.gen_range(0..3) {
            0 if !pairs.is_empty() => {
                let i = rng.gen_range(0..pairs.len());
                pairs.remove(i);
            }
            1 if pairs.len() >= 2 => {
                let (i, j) = (rng.gen_range(0..pairs.len()), rng.gen_range(0..pairs.len()));
                let t = pairs[i].1.clone();
                pairs[i].1 = pairs[j].1.clone();
                pairs[j].1 = t;
            }
            _ if !pairs.is_empty() => {
                let free: Vec<&String> = vb.iter().filter(|v| !pairs.iter().any(|p| &p.1 == *v)).collect();
                if let Some(v) = free.choose(rng) {
                    let i = rng.gen_range(0..pairs.len());
                    pairs[i].1 = (*v).clone();
                }
            }
            _ => {}
        }
    }
    ok(Alignment::new(pairs))
}

fn upper_bound() -> Outcome {
    let cfg = SyntheticConfig { max_nodes: 6, max_edits: 3, aligner: AlignerConfig::exact(), ..SyntheticConfig::default() };
    let corpus: Corpus = ok(gen_synthetic_pairs(500, &cfg, 808))?;
    let mut rng = seed::rng(809);
    let predicted = corpus.records.iter().map(|r| corrupt(r, &mut rng)).collect::<Result<Vec<_>, _>>()?;
    for (i, (gold, pred)) in ok(alignment_f1s(&corpus.records, &predicted))?.into_iter().enumerate() {
        ensure(pred <= gold + 1e-12, || format!("pair {i}: predicted F1 {pred} above gold {gold}"))?;
    }
    let (gold, pred) = ok(upper_bound_gap(&corpus.records, &predicted))?;
    ensure(pred <= gold, || format!("average predicted {pred} above gold {gold}"))?;
    let (same_gold, same_pred) =
        ok(upper_bound_gap(&corpus.records, &corpus.records.iter().map(|r| r.alignment()).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?))?;
    ensure(same_gold == same_pred, || "gold alignments do not reach the bound".into())?;
    Ok(format!("500 pairs: gold average {gold:.2}, corrupted {pred:.2}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("worked example", worked_example),
        ("invariance", invariance),
        ("parser roundtrip", parser_roundtrip),
        ("gradient correctness", gradient_correctness),
        ("learning sanity", learning_sanity),
        ("speed ordering", speed_ordering),
        ("upper bound", upper_bound),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {number} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {number} ({name}): FAIL [{secs:.1}s] {why}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
