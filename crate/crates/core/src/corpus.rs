//! Pair datasets: records of `(G, G', alignment, score)`, seeded splits,
//! JSONL persistence, seq2seq export and a synthetic pair generator.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::align::{format_pairs, score_given_alignment, Alignment, AlignerConfig, MatchScore};
use crate::error::{Error, Result};
use crate::penman::{extract_triples, linearize, parse_penman, serialize_compact, AmrGraph, Attribute, Edge};
use crate::{par, seed};

pub const SEP_TOKEN: &str = "<SEP>";

/// Tolerance for stored-versus-recomputed score fields.
pub const SCORE_TOLERANCE: f64 = 1e-9;

pub type AlignmentPairs = Vec<(Option<String>, Option<String>)>;

/// One training or evaluation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub amr_a: String,
    pub amr_b: String,
    pub alignment: AlignmentPairs,
    pub matches: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub anonymized: bool,
    pub provenance: String,
}

const RECORD_FIELDS: &[&str] = &[
    "id", "amr_a", "amr_b", "alignment", "matches", "precision", "recall", "f1", "anonymized", "provenance",
];

impl PairRecord {
    pub fn graphs(&self) -> Result<(AmrGraph, AmrGraph)> {
        Ok((parse_penman(&self.amr_a)?, parse_penman(&self.amr_b)?))
    }

    pub fn alignment(&self) -> Result<Alignment> {
        Alignment::from_full(&self.alignment)
    }

    pub fn score(&self) -> MatchScore {
        MatchScore { matches: self.matches, precision: self.precision, recall: self.recall, f1: self.f1 }
    }

    /// Recompute the score from the stored graphs and alignment.
    pub fn rescore(&self) -> Result<MatchScore> {
        let (a, b) = self.graphs()?;
        score_given_alignment(&extract_triples(&a), &extract_triples(&b), &self.alignment()?)
    }

    /// Check that the stored score fields agree with a recomputation.
    pub fn validate(&self) -> Result<()> {
        let s = self.rescore()?;
        let close = |x: f64, y: f64| (x - y).abs() <= SCORE_TOLERANCE;
        if s.matches != self.matches || !close(s.f1, self.f1) || !close(s.precision, self.precision) || !close(s.recall, self.recall) {
            return Err(Error::Contract(format!(
                "record `{}` stores f1 {} but its alignment scores {}",
                self.id, self.f1, s.f1
            )));
        }
        Ok(())
    }

    pub(crate) fn with_score(mut self, s: MatchScore) -> Self {
        self.matches = s.matches;
        self.precision = s.precision;
        self.recall = s.recall;
        self.f1 = s.f1;
        self
    }
}

/// Score a graph pair with the chosen aligner and package the result.
pub fn build_pair_record(id: impl Into<String>, ga: &AmrGraph, gb: &AmrGraph, aligner: &AlignerConfig, seed: u64) -> Result<PairRecord> {
    let (map, score) = aligner.run(ga, gb, seed)?;
    let ta = extract_triples(ga);
    let tb = extract_triples(gb);
    Ok(PairRecord {
        id: id.into(),
        amr_a: serialize_compact(ga),
        amr_b: serialize_compact(gb),
        alignment: map.with_unmatched(&ta.variables(), &tb.variables()),
        matches: 0,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        anonymized: false,
        provenance: String::new(),
    }
    .with_score(score))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub records: Vec<PairRecord>,
    /// One label per record when the corpus has been split.
    pub split: Option<Vec<Split>>,
}

impl Corpus {
    pub fn new(records: Vec<PairRecord>) -> Self {
        Corpus { records, split: None }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records carrying the given split label (empty when unsplit).
    pub fn part(&self, which: Split) -> Vec<PairRecord> {
        match &self.split {
            None => Vec::new(),
            Some(labels) => self
                .records
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == which)
                .map(|(r, _)| r.clone())
                .collect(),
        }
    }

    pub fn check_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Contract(format!("duplicate record id `{}`", r.id)));
            }
        }
        Ok(())
    }
}

/// Seeded shuffle, then contiguous train/dev/test assignment.
pub fn split_corpus(c: &Corpus, sizes: (usize, usize, usize), seed: u64) -> Result<Corpus> {
    if sizes.0 + sizes.1 + sizes.2 != c.len() {
        return Err(Error::SplitSize { got: sizes, expected: c.len() });
    }
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.shuffle(&mut seed::rng(seed));
    let records = order.iter().map(|&i| c.records[i].clone()).collect();
    let labels = std::iter::repeat_n(Split::Train, sizes.0)
        .chain(std::iter::repeat_n(Split::Dev, sizes.1))
        .chain(std::iter::repeat_n(Split::Test, sizes.2))
        .collect();
    Ok(Corpus { records, split: Some(labels) })
}

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

pub fn emit_jsonl<W: Write>(c: &Corpus, mut w: W) -> Result<()> {
    for r in &c.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read records, one JSON object per line. Unknown fields are appended to
/// `provenance` as `extra=<json>`.
pub fn load_jsonl<R: BufRead>(r: R) -> Result<Corpus> {
    let mut records = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let data_err = |message: String| Error::Data { line: i + 1, message };
        let mut obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&line).map_err(|e| data_err(e.to_string()))?;
        let extra: serde_json::Map<String, serde_json::Value> = obj
            .keys()
            .filter(|k| !RECORD_FIELDS.contains(&k.as_str()))
            .cloned()
            .collect::<Vec<_>>()
            .into_iter()
            .filter_map(|k| obj.remove(&k).map(|v| (k, v)))
            .collect();
        let mut rec: PairRecord =
            serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| data_err(e.to_string()))?;
        if !extra.is_empty() {
            let tag = format!("extra={}", serde_json::Value::Object(extra));
            rec.provenance = if rec.provenance.is_empty() { tag } else { format!("{};{tag}", rec.provenance) };
        }
        records.push(rec);
    }
    Ok(Corpus::new(records))
}

pub fn write_jsonl(c: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    emit_jsonl(c, std::io::BufWriter::new(f))
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Corpus> {
    let f = std::fs::File::open(path)?;
    load_jsonl(std::io::BufReader::new(f))
}

/// Write `train.jsonl`, `dev.jsonl` and `test.jsonl` under `dir`.
pub fn write_splits(c: &Corpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for s in Split::ALL {
        write_jsonl(&Corpus::new(c.part(s)), dir.join(format!("{}.jsonl", s.name())))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Seq2seq export
// ---------------------------------------------------------------------------

/// Source line `lin(Ga) <SEP> lin(Gb)` and target line of `u:v` pairs.
pub fn seq2seq_lines(rec: &PairRecord) -> Result<(String, String)> {
    let (a, b) = rec.graphs()?;
    let mut src = linearize(&a);
    src.push(SEP_TOKEN.to_string());
    src.extend(linearize(&b));
    let ta = extract_triples(&a);
    let tb = extract_triples(&b);
    let map = rec.alignment()?;
    map.check(&ta.variables(), &tb.variables())?;
    Ok((src.join(" "), format_pairs(&map.with_unmatched(&ta.variables(), &tb.variables()))))
}

pub fn emit_seq2seq<W1: Write, W2: Write>(c: &Corpus, mut source: W1, mut target: W2) -> Result<()> {
    for r in &c.records {
        let (s, t) = seq2seq_lines(r)?;
        writeln!(source, "{s}")?;
        writeln!(target, "{t}")?;
    }
    source.flush()?;
    target.flush()?;
    Ok(())
}

/// Parse a predicted-alignment file: one line of `u:v` pairs per record.
pub fn read_alignment_lines<R: BufRead>(r: R) -> Result<Vec<AlignmentPairs>> {
    r.lines()
        .enumerate()
        .map(|(i, line)| {
            crate::align::parse_pairs(&line?).map_err(|e| Error::Data { line: i + 1, message: e.to_string() })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Pairing AMR banks
// ---------------------------------------------------------------------------

/// Pair two banks by `::id` when every entry has one, else by position.
pub fn pair_banks(
    a: &[crate::penman::BankEntry],
    b: &[crate::penman::BankEntry],
) -> Result<Vec<(String, AmrGraph, AmrGraph)>> {
    let all_ids = a.iter().chain(b).all(|e| e.id.is_some());
    if all_ids {
        let index: std::collections::HashMap<&str, &AmrGraph> =
            b.iter().map(|e| (e.id.as_deref().unwrap_or_default(), &e.graph)).collect();
        a.iter()
            .map(|e| {
                let id = e.id.clone().unwrap_or_default();
                let other = index
                    .get(id.as_str())
                    .ok_or_else(|| Error::Contract(format!("id `{id}` missing from second bank")))?;
                Ok((id, e.graph.clone(), (*other).clone()))
            })
            .collect()
    } else {
        if a.len() != b.len() {
            return Err(Error::Contract(format!("banks differ in length: {} vs {}", a.len(), b.len())));
        }
        Ok(a.iter()
            .zip(b)
            .enumerate()
            .map(|(i, (x, y))| (x.id.clone().unwrap_or_else(|| format!("pair-{i}")), x.graph.clone(), y.graph.clone()))
            .collect())
    }
}

/// Score many pairs in parallel with per-pair derived seeds.
pub fn build_records(pairs: &[(String, AmrGraph, AmrGraph)], aligner: &AlignerConfig, seed: u64) -> Result<Corpus> {
    let recs = par::map_range(pairs.len(), |i| {
        let (id, a, b) = &pairs[i];
        build_pair_record(id.clone(), a, b, aligner, seed::derive(seed, &[i as u64]))
    });
    Ok(Corpus::new(recs.into_iter().collect::<Result<Vec<_>>>()?))
}

// ---------------------------------------------------------------------------
// Synthetic pairs
// ---------------------------------------------------------------------------

const CONCEPTS: &[&str] = &[
    "run-01", "duck", "fast", "want-01", "boy", "girl", "go-01", "city", "say-01", "person", "eat-01", "apple",
    "big", "house", "see-01", "dog", "cat", "live-01", "work-01", "company", "new", "country", "know-01",
    "think-01", "good-02", "make-01", "time", "year", "give-01", "book", "read-01", "write-01", "school",
    "teacher", "child", "play-01", "game", "win-01", "lose-02", "tree",
];

const ROLES: &[&str] = &[
    ":ARG0", ":ARG1", ":ARG2", ":mod", ":location", ":time", ":manner", ":purpose", ":poss", ":topic", ":domain",
    ":beneficiary",
];

/// Bounds for [`gen_synthetic_pairs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Size of the concept pool graphs draw from.
    pub concepts: usize,
    /// Size of the role pool (capped at the built-in role list).
    pub roles: usize,
    pub min_edits: usize,
    pub max_edits: usize,
    /// Probability of one extra re-entrant edge.
    pub reentrancy: f64,
    /// Per-node probability of carrying an attribute.
    pub attribute: f64,
    pub aligner: AlignerConfig,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            min_nodes: 2,
            max_nodes: 8,
            concepts: 30,
            roles: 8,
            min_edits: 0,
            max_edits: 8,
            reentrancy: 0.15,
            attribute: 0.15,
            aligner: AlignerConfig::default(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_nodes == 0 || self.min_nodes > self.max_nodes {
            return Err(Error::Config(format!("node bounds {}..={} invalid", self.min_nodes, self.max_nodes)));
        }
        if self.min_edits > self.max_edits {
            return Err(Error::Config("min_edits exceeds max_edits".into()));
        }
        if self.concepts == 0 || self.roles == 0 {
            return Err(Error::Config("concept and role pools must be non-empty".into()));
        }
        Ok(())
    }

    fn concept(&self, k: usize) -> String {
        match CONCEPTS.get(k) {
            Some(c) => c.to_string(),
            None => format!("thing-{k:03}"),
        }
    }

    fn role(&self, rng: &mut impl Rng) -> String {
        ROLES[rng.gen_range(0..self.roles.min(ROLES.len()))].to_string()
    }

    fn random_concept(&self, rng: &mut impl Rng) -> String {
        self.concept(rng.gen_range(0..self.concepts))
    }
}

/// Random rooted graph: a random tree over `x0..` plus optional
/// re-entrancy and attributes.
pub fn random_graph(cfg: &SyntheticConfig, rng: &mut impl Rng) -> AmrGraph {
    let n = rng.gen_range(cfg.min_nodes..=cfg.max_nodes);
    let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let mut nodes = IndexMap::new();
    for name in &names {
        nodes.insert(name.clone(), cfg.random_concept(rng));
    }
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = rng.gen_range(0..i);
        edges.push(Edge { source: names[parent].clone(), role: cfg.role(rng), target: names[i].clone() });
    }
    if n > 2 && rng.gen_bool(cfg.reentrancy) {
        let s = rng.gen_range(1..n);
        let t = rng.gen_range(1..n);
        if s != t {
            edges.push(Edge { source: names[s].clone(), role: cfg.role(rng), target: names[t].clone() });
        }
    }
    let mut attributes = Vec::new();
    for name in &names {
        if rng.gen_bool(cfg.attribute) {
            attributes.push(match rng.gen_range(0..3) {
                0 => Attribute { source: name.clone(), role: ":polarity".into(), value: "-".into() },
                1 => Attribute { source: name.clone(), role: ":quant".into(), value: rng.gen_range(1..10).to_string() },
                _ => Attribute { source: name.clone(), role: ":mode".into(), value: "imperative".into() },
            });
        }
    }
    AmrGraph::new(names[0].clone(), nodes, edges, attributes).expect("tree is connected")
}

fn degree(g: &AmrGraph, v: &str) -> usize {
    g.edges.iter().filter(|e| e.source == v || e.target == v).count()
}

/// Apply one random edit in place; returns false if the drawn edit did not
/// apply (e.g. no deletable leaf).
fn edit_once(g: &mut AmrGraph, cfg: &SyntheticConfig, rng: &mut impl Rng, fresh: &mut usize) -> bool {
    match rng.gen_range(0..4) {
        0 => {
            let i = rng.gen_range(0..g.nodes.len());
            let c = cfg.random_concept(rng);
            let (_, slot) = g.nodes.get_index_mut(i).expect("index in range");
            if *slot == c {
                return false;
            }
            *slot = c;
            true
        }
        1 => {
            let i = rng.gen_range(0..g.nodes.len());
            let parent = g.nodes.get_index(i).expect("index in range").0.clone();
            let name = format!("n{fresh}");
            *fresh += 1;
            let c = cfg.random_concept(rng);
            g.nodes.insert(name.clone(), c);
            g.edges.push(Edge { source: parent, role: cfg.role(rng), target: name });
            true
        }
        2 => {
            let leaves: Vec<String> =
                g.nodes.keys().filter(|v| **v != g.root && degree(g, v) == 1).cloned().collect();
            let Some(leaf) = leaves.choose(rng).cloned() else { return false };
            g.nodes.shift_remove(&leaf);
            g.edges.retain(|e| e.source != leaf && e.target != leaf);
            g.attributes.retain(|a| a.source != leaf);
            true
        }
        _ => {
            if g.edges.is_empty() {
                return false;
            }
            let k = rng.gen_range(0..g.edges.len());
            let before = g.edges[k].clone();
            if rng.gen_bool(0.5) {
                g.edges[k].role = cfg.role(rng);
            } else {
                let i = rng.gen_range(0..g.nodes.len());
                g.edges[k].source = g.nodes.get_index(i).expect("index in range").0.clone();
            }
            if g.edges[k] == before || g.edges[k].source == g.edges[k].target || g.validate().is_err() {
                g.edges[k] = before;
                return false;
            }
            true
        }
    }
}

/// Rename variables to a shuffled `y0..` sequence, keeping structure.
fn rename_variables(g: &AmrGraph, rng: &mut impl Rng) -> AmrGraph {
    let mut fresh: Vec<usize> = (0..g.nodes.len()).collect();
    fresh.shuffle(rng);
    let rename: std::collections::HashMap<&str, String> =
        g.nodes.keys().zip(&fresh).map(|(v, k)| (v.as_str(), format!("y{k}"))).collect();
    AmrGraph {
        root: rename[g.root.as_str()].clone(),
        nodes: g.nodes.iter().map(|(v, c)| (rename[v.as_str()].clone(), c.clone())).collect(),
        edges: g
            .edges
            .iter()
            .map(|e| Edge { source: rename[e.source.as_str()].clone(), role: e.role.clone(), target: rename[e.target.as_str()].clone() })
            .collect(),
        attributes: g
            .attributes
            .iter()
            .map(|a| Attribute { source: rename[a.source.as_str()].clone(), role: a.role.clone(), value: a.value.clone() })
            .collect(),
    }
}

/// A graph and an edited partner, with `edits` successful edits applied.
pub fn synthetic_pair(cfg: &SyntheticConfig, edits: usize, rng: &mut impl Rng) -> (AmrGraph, AmrGraph) {
    let a = random_graph(cfg, rng);
    let mut b = a.clone();
    let mut fresh = 0;
    let mut done = 0;
    let mut attempts = 0;
    while done < edits && attempts < edits * 20 + 20 {
        attempts += 1;
        if edit_once(&mut b, cfg, rng, &mut fresh) {
            done += 1;
        }
    }
    let b = rename_variables(&b, rng);
    debug_assert!(b.validate().is_ok());
    (a, b)
}

/// `n` scored synthetic pairs; pair `i` uses seed `(seed, i)`.
pub fn gen_synthetic_pairs(n: usize, cfg: &SyntheticConfig, seed: u64) -> Result<Corpus> {
    cfg.validate()?;
    let recs = par::map_range(n, |i| {
        let s = seed::derive(seed, &[i as u64]);
        let mut rng = seed::rng(s);
        let edits = rng.gen_range(cfg.min_edits..=cfg.max_edits);
        let (a, b) = synthetic_pair(cfg, edits, &mut rng);
        let mut rec = build_pair_record(format!("syn-{i}"), &a, &b, &cfg.aligner, seed::derive(s, &[1]))?;
        rec.provenance = format!("synthetic edits={edits}");
        Ok(rec)
    });
    Ok(Corpus::new(recs.into_iter().collect::<Result<Vec<_>>>()?))
}
