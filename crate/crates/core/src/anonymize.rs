//! Pair-local vocabulary reduction and permutation augmentation.
//!
//! Anonymization rewrites every token of a graph pair (variables, concepts,
//! literals, roles) as a small integer. Tokens shared by the two graphs get
//! one id; variables are always graph-local. Ids are handed out as: shared
//! values, shared roles, then the first graph's variables, values and roles,
//! then the second graph's, each group in order of first appearance in the
//! serialized graph.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;

use crate::align::{sort_full_pairs, Alignment};
use crate::corpus::{Corpus, PairRecord};
use crate::error::{Error, Result};
use crate::penman::{serialize_compact, AmrGraph, Attribute, Edge};
use crate::{par, seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenClass {
    /// A variable of the first (`0`) or second (`1`) graph.
    Variable(u8),
    /// Concept labels and attribute literals.
    Value,
    Role,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub class: TokenClass,
    pub token: String,
    pub id: u32,
}

/// Bijection between a pair's original tokens and integers `1..=len`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VocabMap {
    entries: Vec<VocabEntry>,
    forward: HashMap<(TokenClass, String), u32>,
}

impl VocabMap {
    fn assign(&mut self, class: TokenClass, token: &str) -> u32 {
        if let Some(&id) = self.forward.get(&(class, token.to_string())) {
            return id;
        }
        let id = self.entries.len() as u32 + 1;
        self.entries.push(VocabEntry { class, token: token.to_string(), id });
        self.forward.insert((class, token.to_string()), id);
        id
    }

    pub fn forward(&self, class: TokenClass, token: &str) -> Option<u32> {
        self.forward.get(&(class, token.to_string())).copied()
    }

    pub fn inverse(&self, id: u32) -> Option<&VocabEntry> {
        id.checked_sub(1).and_then(|i| self.entries.get(i as usize))
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Two-column TSV: original token, integer.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            writeln!(w, "{}\t{}", e.token, e.id)?;
        }
        Ok(())
    }
}

/// Distinct tokens of one graph, by class, in serialization order.
#[derive(Debug, Default)]
pub struct GraphTokens {
    pub variables: Vec<String>,
    pub values: Vec<String>,
    pub roles: Vec<String>,
}

impl GraphTokens {
    pub fn of(g: &AmrGraph) -> Self {
        let mut out = GraphTokens::default();
        let mut seen: HashSet<(u8, String)> = HashSet::new();
        let mut push = |list: &mut Vec<String>, tag: u8, tok: &str| {
            if seen.insert((tag, tok.to_string())) {
                list.push(tok.to_string());
            }
        };
        let roles: HashMap<&str, &str> = g
            .edges
            .iter()
            .map(|e| (e.role.as_str(), e.role.as_str()))
            .chain(g.attributes.iter().map(|a| (a.role.as_str(), a.role.as_str())))
            .collect();
        // Walk the layout: `( var / concept` opens a node, `role value`
        // pairs are children; bare variables are references.
        for line in g.layout() {
            let toks = &line.tokens;
            let mut k = 0;
            while k < toks.len() {
                let t = toks[k].as_str();
                match t {
                    "(" => {
                        push(&mut out.variables, 0, &toks[k + 1]);
                        push(&mut out.values, 1, &toks[k + 3]);
                        k += 4;
                        continue;
                    }
                    ")" => {}
                    _ if t.starts_with(':') => {
                        let base = if roles.contains_key(t) { t.to_string() } else { crate::penman::normalize_role(t).0 };
                        push(&mut out.roles, 2, &base);
                        if let Some(v) = toks.get(k + 1) {
                            if v != "(" && !g.nodes.contains_key(v) {
                                push(&mut out.values, 1, v);
                            }
                        }
                    }
                    _ => {}
                }
                k += 1;
            }
        }
        out
    }

    fn all(&self) -> usize {
        self.variables.len() + self.values.len() + self.roles.len()
    }
}

/// Output of [`anonymize_pair`].
#[derive(Debug, Clone)]
pub struct Anonymized {
    pub a: AmrGraph,
    pub b: AmrGraph,
    pub vocab: VocabMap,
    pub alignment: Option<Alignment>,
}

fn relabel(g: &AmrGraph, var: impl Fn(&str) -> String, value: impl Fn(&str) -> String, role: impl Fn(&str) -> String) -> AmrGraph {
    AmrGraph {
        root: var(&g.root),
        nodes: g.nodes.iter().map(|(v, c)| (var(v), value(c))).collect(),
        edges: g
            .edges
            .iter()
            .map(|e| Edge { source: var(&e.source), role: role(&e.role), target: var(&e.target) })
            .collect(),
        attributes: g
            .attributes
            .iter()
            .map(|a| Attribute { source: var(&a.source), role: role(&a.role), value: value(&a.value) })
            .collect(),
    }
}

/// Relabel a pair with a shared local integer vocabulary.
pub fn anonymize_pair(ga: &AmrGraph, gb: &AmrGraph, alignment: Option<&Alignment>) -> Anonymized {
    let ta = GraphTokens::of(ga);
    let tb = GraphTokens::of(gb);
    let values_b: HashSet<&String> = tb.values.iter().collect();
    let roles_b: HashSet<&String> = tb.roles.iter().collect();

    let mut vocab = VocabMap::default();
    for v in ta.values.iter().filter(|v| values_b.contains(v)) {
        vocab.assign(TokenClass::Value, v);
    }
    for r in ta.roles.iter().filter(|r| roles_b.contains(r)) {
        vocab.assign(TokenClass::Role, r);
    }
    for (side, t) in [(0u8, &ta), (1u8, &tb)] {
        for v in &t.variables {
            vocab.assign(TokenClass::Variable(side), v);
        }
        for v in &t.values {
            vocab.assign(TokenClass::Value, v);
        }
        for r in &t.roles {
            vocab.assign(TokenClass::Role, r);
        }
    }

    let id = |class: TokenClass, t: &str| vocab.forward(class, t).expect("every token assigned").to_string();
    let a = relabel(ga, |v| id(TokenClass::Variable(0), v), |v| id(TokenClass::Value, v), |r| format!(":{}", id(TokenClass::Role, r)));
    let b = relabel(gb, |v| id(TokenClass::Variable(1), v), |v| id(TokenClass::Value, v), |r| format!(":{}", id(TokenClass::Role, r)));
    let alignment = alignment.map(|m| {
        Alignment::new(m.pairs().iter().map(|(x, y)| (id(TokenClass::Variable(0), x), id(TokenClass::Variable(1), y))))
            .expect("relabeling keeps injectivity")
    });
    Anonymized { a, b, vocab, alignment }
}

/// Total distinct tokens across both graphs (variables counted per graph).
pub fn token_count(ga: &AmrGraph, gb: &AmrGraph) -> usize {
    GraphTokens::of(ga).all() + GraphTokens::of(gb).all()
}

fn map_side(pairs: &[(Option<String>, Option<String>)], f: impl Fn(&str, u8) -> String) -> Vec<(Option<String>, Option<String>)> {
    let mut out: Vec<_> = pairs
        .iter()
        .map(|(a, b)| (a.as_deref().map(|x| f(x, 0)), b.as_deref().map(|y| f(y, 1))))
        .collect();
    sort_full_pairs(&mut out);
    out
}

/// Anonymize a stored record, carrying its alignment (unmatched entries
/// included) and score fields through.
pub fn anonymize_record(rec: &PairRecord) -> Result<(PairRecord, VocabMap)> {
    let (a, b) = rec.graphs()?;
    let anon = anonymize_pair(&a, &b, None);
    let v = &anon.vocab;
    let alignment = map_side(&rec.alignment, |x, side| {
        v.forward(TokenClass::Variable(side), x).map(|i| i.to_string()).unwrap_or_else(|| x.to_string())
    });
    let out = PairRecord {
        amr_a: serialize_compact(&anon.a),
        amr_b: serialize_compact(&anon.b),
        alignment,
        anonymized: true,
        ..rec.clone()
    };
    Ok((out, anon.vocab))
}

pub fn anonymize_corpus(c: &Corpus) -> Result<Corpus> {
    let recs = par::map(&c.records, |r| anonymize_record(r).map(|(r, _)| r));
    Ok(Corpus { records: recs.into_iter().collect::<Result<_>>()?, split: c.split.clone() })
}

fn integer_tokens(g: &AmrGraph) -> Result<Vec<u64>> {
    let t = GraphTokens::of(g);
    t.variables
        .iter()
        .chain(&t.values)
        .map(|s| s.as_str())
        .chain(t.roles.iter().map(|r| r.trim_start_matches(':')))
        .map(|s| s.parse::<u64>().map_err(|_| Error::Contract(format!("token `{s}` is not anonymized"))))
        .collect()
}

/// Apply an explicit integer relabeling (ids absent from `perm` stay put).
pub fn permute_record_with(rec: &PairRecord, perm: &HashMap<u64, u64>) -> Result<PairRecord> {
    if !rec.anonymized {
        return Err(Error::Contract(format!("record `{}` is not anonymized", rec.id)));
    }
    let (a, b) = rec.graphs()?;
    integer_tokens(&a)?;
    integer_tokens(&b)?;
    let p = |s: &str| -> String {
        match s.parse::<u64>() {
            Ok(k) => perm.get(&k).copied().unwrap_or(k).to_string(),
            Err(_) => s.to_string(),
        }
    };
    let pr = |r: &str| format!(":{}", p(r.trim_start_matches(':')));
    let a2 = relabel(&a, p, p, pr);
    let b2 = relabel(&b, p, p, pr);
    Ok(PairRecord {
        amr_a: serialize_compact(&a2),
        amr_b: serialize_compact(&b2),
        alignment: map_side(&rec.alignment, |x, _| p(x)),
        ..rec.clone()
    })
}

/// Seeded random bijection over the record's integer vocabulary.
pub fn permute_record(rec: &PairRecord, seed: u64) -> Result<PairRecord> {
    if !rec.anonymized {
        return Err(Error::Contract(format!("record `{}` is not anonymized", rec.id)));
    }
    let (a, b) = rec.graphs()?;
    let mut ids = integer_tokens(&a)?;
    ids.extend(integer_tokens(&b)?);
    ids.sort_unstable();
    ids.dedup();
    let mut shuffled = ids.clone();
    shuffled.shuffle(&mut seed::rng(seed));
    let perm: HashMap<u64, u64> = ids.into_iter().zip(shuffled).collect();
    permute_record_with(rec, &perm)
}

/// `k` permuted variants per record, plus the originals unless `replace`.
/// Variant `p` of record `i` uses seed `(seed, i, p)` and id `<id>~p<p>`.
pub fn augment_corpus(records: &[PairRecord], k: usize, seed: u64, replace: bool) -> Result<Vec<PairRecord>> {
    if k == 0 {
        return Ok(records.to_vec());
    }
    let per = par::map_range(records.len(), |i| -> Result<Vec<PairRecord>> {
        let r = &records[i];
        let mut out = Vec::with_capacity(k + 1);
        if !replace {
            out.push(r.clone());
        }
        for p in 0..k {
            let mut v = permute_record(r, seed::derive(seed, &[i as u64, p as u64]))?;
            v.id = format!("{}~p{p}", r.id);
            out.push(v);
        }
        Ok(out)
    });
    let mut out = Vec::with_capacity(records.len() * (k + 1));
    for chunk in per {
        out.extend(chunk?);
    }
    Ok(out)
}
