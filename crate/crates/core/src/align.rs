//! Smatch alignment search and scoring.
//!
//! [`score_given_alignment`] matches triples directly. The two maximizers
//! ([`exact_align`] and [`hill_climb_align`]) instead work on a weight table:
//! under an injective map every triple touches one or two variables, so the
//! match count splits into per-variable (unary) and per-variable-pair terms.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penman::{extract_triples, natural_cmp, AmrGraph, TripleKind, TripleSet};
use crate::seed;

pub const DEFAULT_EXACT_LIMIT: usize = 8;
pub const DEFAULT_RESTARTS: usize = 4;

/// Marker for an unmatched variable in the text form.
pub const UNMATCHED: &str = "∅";

/// Partial injective map from variables of the first graph to the second.
/// Pairs are kept sorted by source variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Alignment {
    pairs: Vec<(String, String)>,
}

impl Alignment {
    pub fn new<I, A, B>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut pairs: Vec<(String, String)> = pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        pairs.sort_by(|x, y| natural_cmp(&x.0, &y.0).then_with(|| natural_cmp(&x.1, &y.1)));
        let mut src = HashSet::new();
        let mut dst = HashSet::new();
        for (a, b) in &pairs {
            if !src.insert(a.as_str()) {
                return Err(Error::Contract(format!("variable `{a}` mapped twice")));
            }
            if !dst.insert(b.as_str()) {
                return Err(Error::Contract(format!("alignment is not injective: `{b}` is hit twice")));
            }
        }
        Ok(Alignment { pairs })
    }

    pub fn identity<'a>(vars: impl IntoIterator<Item = &'a str>) -> Self {
        Self::new(vars.into_iter().map(|v| (v, v))).expect("identity is injective")
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, a: &str) -> Option<&str> {
        self.pairs.iter().find(|(x, _)| x == a).map(|(_, y)| y.as_str())
    }

    pub fn as_map(&self) -> HashMap<&str, &str> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
    }

    /// Swap the direction of the map.
    pub fn inverse(&self) -> Self {
        Self::new(self.pairs.iter().map(|(a, b)| (b.clone(), a.clone()))).expect("inverse of injective map")
    }

    /// Check domain and codomain against the two variable sets.
    pub fn check(&self, vars_a: &[&str], vars_b: &[&str]) -> Result<()> {
        let a: HashSet<&str> = vars_a.iter().copied().collect();
        let b: HashSet<&str> = vars_b.iter().copied().collect();
        for (x, y) in &self.pairs {
            if !a.contains(x.as_str()) {
                return Err(Error::Contract(format!("alignment references unknown variable `{x}` in first graph")));
            }
            if !b.contains(y.as_str()) {
                return Err(Error::Contract(format!("alignment references unknown variable `{y}` in second graph")));
            }
        }
        Ok(())
    }

    /// Full pair list including unmatched variables on either side, as
    /// `(Some(u), Some(v))`, `(Some(u), None)` or `(None, Some(v))`. Source
    /// entries come first sorted by source variable, then unmatched targets.
    pub fn with_unmatched(&self, vars_a: &[&str], vars_b: &[&str]) -> Vec<(Option<String>, Option<String>)> {
        let map = self.as_map();
        let hit: HashSet<&str> = self.pairs.iter().map(|(_, b)| b.as_str()).collect();
        let mut a: Vec<&str> = vars_a.to_vec();
        a.sort_by(|x, y| natural_cmp(x, y));
        let mut b: Vec<&str> = vars_b.iter().copied().filter(|v| !hit.contains(v)).collect();
        b.sort_by(|x, y| natural_cmp(x, y));
        a.into_iter()
            .map(|u| (Some(u.to_string()), map.get(u).map(|v| v.to_string())))
            .chain(b.into_iter().map(|v| (None, Some(v.to_string()))))
            .collect()
    }

    /// Build from a full pair list; entries with a missing side are dropped.
    pub fn from_full(pairs: &[(Option<String>, Option<String>)]) -> Result<Self> {
        Self::new(pairs.iter().filter_map(|(a, b)| Some((a.clone()?, b.clone()?))))
    }
}

/// Canonical order for full pair lists: matched or unmatched source
/// entries by source variable, then unmatched targets.
pub fn sort_full_pairs(pairs: &mut [(Option<String>, Option<String>)]) {
    let key = |o: &Option<String>| o.clone().unwrap_or_default();
    pairs.sort_by(|(a1, b1), (a2, b2)| {
        a1.is_none()
            .cmp(&a2.is_none())
            .then_with(|| natural_cmp(&key(a1), &key(a2)))
            .then_with(|| natural_cmp(&key(b1), &key(b2)))
    });
}

/// Render pairs as whitespace-separated `u:v`, with `∅` for a missing side.
pub fn format_pairs(pairs: &[(Option<String>, Option<String>)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{}:{}", a.as_deref().unwrap_or(UNMATCHED), b.as_deref().unwrap_or(UNMATCHED)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parse the `u:v ... ∅:w` text form.
pub fn parse_pairs(text: &str) -> Result<Vec<(Option<String>, Option<String>)>> {
    text.split_whitespace()
        .map(|tok| {
            let (a, b) = tok
                .split_once(':')
                .ok_or_else(|| Error::Contract(format!("alignment token `{tok}` lacks `:`")))?;
            let side = |s: &str| (s != UNMATCHED && !s.is_empty()).then(|| s.to_string());
            Ok((side(a), side(b)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub matches: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MatchScore {
    /// Precision over the first graph's triples, recall over the second's.
    pub fn from_counts(matches: usize, total_a: usize, total_b: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(matches, total_a);
        let recall = ratio(matches, total_b);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        MatchScore { matches, precision, recall, f1 }
    }
}

type TripleKey<'a> = (TripleKind, &'a str, &'a str, &'a str);
type UnaryKey = (TripleKind, String, Option<String>);

/// Score two triple sets under a fixed alignment. Each triple of `tb` is
/// consumed by at most one triple of `ta`.
pub fn score_given_alignment(ta: &TripleSet, tb: &TripleSet, map: &Alignment) -> Result<MatchScore> {
    map.check(&ta.variables(), &tb.variables())?;
    let m = map.as_map();
    let mut pool: HashMap<TripleKey, usize> = HashMap::new();
    for t in &tb.triples {
        *pool.entry((t.kind, &t.source, &t.role, &t.target)).or_default() += 1;
    }
    let mut matches = 0;
    for t in &ta.triples {
        let Some(&src) = m.get(t.source.as_str()) else { continue };
        let tgt = match t.kind {
            TripleKind::Relation => match m.get(t.target.as_str()) {
                Some(&v) => v,
                None => continue,
            },
            _ => t.target.as_str(),
        };
        if let Some(n) = pool.get_mut(&(t.kind, src, t.role.as_str(), tgt)) {
            if *n > 0 {
                *n -= 1;
                matches += 1;
            }
        }
    }
    Ok(MatchScore::from_counts(matches, ta.len(), tb.len()))
}

// ---------------------------------------------------------------------------
// Weight table
// ---------------------------------------------------------------------------

/// Per-variable-pair triple weights for one ordered graph pair.
pub(crate) struct WeightTable {
    vars_a: Vec<String>,
    vars_b: Vec<String>,
    /// `unary[i * m + j]`: matches from single-variable triples when i -> j.
    unary: Vec<u32>,
    /// Relation groups between two distinct first-graph variables.
    groups: Vec<PairGroup>,
    /// For each first-graph variable, the groups it takes part in.
    incident: Vec<Vec<usize>>,
    total_a: usize,
    total_b: usize,
}

struct PairGroup {
    first: usize,
    second: usize,
    /// Dense `m × m` weights indexed by the images of `first` and `second`.
    weights: Vec<u32>,
    max: u32,
}

impl WeightTable {
    pub(crate) fn new(ta: &TripleSet, tb: &TripleSet) -> Self {
        let mut vars_a: Vec<String> = ta.variables().into_iter().map(str::to_string).collect();
        let mut vars_b: Vec<String> = tb.variables().into_iter().map(str::to_string).collect();
        vars_a.sort_by(|x, y| natural_cmp(x, y));
        vars_b.sort_by(|x, y| natural_cmp(x, y));
        let (n, m) = (vars_a.len(), vars_b.len());
        let ia: HashMap<&str, usize> = vars_a.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let ib: HashMap<&str, usize> = vars_b.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();

        // Unary keys: (kind, role, target); self-loops have no target.
        let unary_counts = |ts: &'_ TripleSet, idx: &HashMap<&str, usize>, len: usize| {
            let mut per: Vec<HashMap<UnaryKey, u32>> = vec![HashMap::new(); len];
            let mut binary: HashMap<(usize, usize), HashMap<String, u32>> = HashMap::new();
            for t in &ts.triples {
                let s = idx[t.source.as_str()];
                match t.kind {
                    TripleKind::Relation if t.source != t.target => {
                        let o = idx[t.target.as_str()];
                        *binary.entry((s, o)).or_default().entry(t.role.clone()).or_default() += 1;
                    }
                    TripleKind::Relation => {
                        *per[s].entry((t.kind, t.role.clone(), None)).or_default() += 1;
                    }
                    _ => {
                        *per[s].entry((t.kind, t.role.clone(), Some(t.target.clone()))).or_default() += 1;
                    }
                }
            }
            (per, binary)
        };
        let (ua, ba) = unary_counts(ta, &ia, n);
        let (ub, bb) = unary_counts(tb, &ib, m);

        let mut unary = vec![0u32; n * m];
        for i in 0..n {
            for j in 0..m {
                unary[i * m + j] = ua[i]
                    .iter()
                    .map(|(k, &c)| ub[j].get(k).map_or(0, |&d| c.min(d)))
                    .sum();
            }
        }

        // Merge (i,k) and (k,i) into one unordered group so a pair of
        // variables is scored exactly once.
        let mut keys: Vec<(usize, usize)> = ba.keys().map(|&(s, o)| (s.min(o), s.max(o))).collect();
        keys.sort_unstable();
        keys.dedup();
        let mut groups = Vec::with_capacity(keys.len());
        let mut incident = vec![Vec::new(); n];
        for (first, second) in keys {
            let fwd = ba.get(&(first, second));
            let bwd = ba.get(&(second, first));
            let mut weights = vec![0u32; m * m];
            for (&(j, l), roles_b) in &bb {
                let mut w = 0;
                if let Some(fr) = fwd {
                    w += fr.iter().map(|(r, &c)| roles_b.get(r).map_or(0, |&d| c.min(d))).sum::<u32>();
                }
                weights[j * m + l] += w;
                if let Some(br) = bwd {
                    let w: u32 = br.iter().map(|(r, &c)| roles_b.get(r).map_or(0, |&d| c.min(d))).sum();
                    weights[l * m + j] += w;
                }
            }
            let max = weights.iter().copied().max().unwrap_or(0);
            let g = groups.len();
            incident[first].push(g);
            incident[second].push(g);
            groups.push(PairGroup { first, second, weights, max });
        }

        WeightTable { vars_a, vars_b, unary, groups, incident, total_a: ta.len(), total_b: tb.len() }
    }

    fn m(&self) -> usize {
        self.vars_b.len()
    }

    fn n(&self) -> usize {
        self.vars_a.len()
    }

    fn group_weight(&self, g: &PairGroup, map: &[Option<usize>]) -> u32 {
        match (map[g.first], map[g.second]) {
            (Some(j), Some(l)) => g.weights[j * self.m() + l],
            _ => 0,
        }
    }

    pub(crate) fn score(&self, map: &[Option<usize>]) -> u32 {
        let m = self.m();
        let u: u32 = map.iter().enumerate().filter_map(|(i, j)| j.map(|j| self.unary[i * m + j])).sum();
        u + self.groups.iter().map(|g| self.group_weight(g, map)).sum::<u32>()
    }

    /// Contribution of the variables in `vars` (each incident group once).
    fn local(&self, vars: &[usize], map: &[Option<usize>]) -> u32 {
        let m = self.m();
        let mut total = 0;
        for &i in vars {
            if let Some(j) = map[i] {
                total += self.unary[i * m + j];
            }
            for &g in &self.incident[i] {
                let grp = &self.groups[g];
                let other = if grp.first == i { grp.second } else { grp.first };
                // Groups shared by two listed variables are counted by the first.
                if vars.contains(&other) && vars.iter().position(|&v| v == other) < vars.iter().position(|&v| v == i) {
                    continue;
                }
                total += self.group_weight(grp, map);
            }
        }
        total
    }

    fn alignment(&self, map: &[Option<usize>]) -> Alignment {
        Alignment::new(
            map.iter()
                .enumerate()
                .filter_map(|(i, j)| j.map(|j| (self.vars_a[i].clone(), self.vars_b[j].clone()))),
        )
        .expect("search maps are injective")
    }

    fn match_score(&self, matches: u32) -> MatchScore {
        MatchScore::from_counts(matches as usize, self.total_a, self.total_b)
    }

    fn upper_cap(&self) -> u32 {
        self.total_a.min(self.total_b) as u32
    }
}

// ---------------------------------------------------------------------------
// Exact search
// ---------------------------------------------------------------------------

struct Exact<'t> {
    t: &'t WeightTable,
    map: Vec<Option<usize>>,
    used: Vec<bool>,
    best: Vec<Option<usize>>,
    best_score: Option<u32>,
    /// Optimistic unary gain per first-graph variable.
    unary_max: Vec<u32>,
}

impl Exact<'_> {
    fn bound(&self, depth: usize) -> u32 {
        let rest: u32 = self.unary_max[depth..].iter().sum();
        let pairs: u32 = self
            .t
            .groups
            .iter()
            .filter(|g| g.first >= depth || g.second >= depth)
            .map(|g| g.max)
            .sum();
        rest + pairs
    }

    fn search(&mut self, depth: usize, current: u32) {
        if self.best_score == Some(self.t.upper_cap()) {
            return;
        }
        if depth == self.t.n() {
            if self.best_score.is_none_or(|b| current > b) {
                self.best_score = Some(current);
                self.best.clone_from(&self.map);
            }
            return;
        }
        if let Some(b) = self.best_score {
            if current + self.bound(depth) <= b {
                return;
            }
        }
        for j in 0..self.t.m() {
            if self.used[j] {
                continue;
            }
            self.map[depth] = Some(j);
            self.used[j] = true;
            // Gain: unary plus groups whose other endpoint is already placed.
            let mut gain = self.t.unary[depth * self.t.m() + j];
            for &g in &self.t.incident[depth] {
                let grp = &self.t.groups[g];
                let other = if grp.first == depth { grp.second } else { grp.first };
                if other < depth {
                    gain += self.t.group_weight(grp, &self.map);
                }
            }
            self.search(depth + 1, current + gain);
            self.used[j] = false;
            self.map[depth] = None;
        }
    }
}

/// Maximize over complete injections of `t`'s first side, which must be
/// the smaller one. Ties keep the first map in lexicographic order.
fn exact_on_table(t: &WeightTable) -> (Vec<Option<usize>>, u32) {
    debug_assert!(t.n() <= t.m());
    let m = t.m();
    let unary_max = (0..t.n()).map(|i| (0..m).map(|j| t.unary[i * m + j]).max().unwrap_or(0)).collect();
    let mut ex = Exact {
        t,
        map: vec![None; t.n()],
        used: vec![false; m],
        best: vec![None; t.n()],
        best_score: None,
        unary_max,
    };
    ex.search(0, 0);
    let s = ex.best_score.unwrap_or(0);
    (ex.best, s)
}

/// Exact Smatch by branch and bound. Adding a pair never loses matches, so
/// the search only visits complete injections of the smaller variable set.
pub fn exact_align(ga: &AmrGraph, gb: &AmrGraph, limit: usize) -> Result<(Alignment, MatchScore)> {
    exact_align_triples(&extract_triples(ga), &extract_triples(gb), limit)
}

pub fn exact_align_triples(ta: &TripleSet, tb: &TripleSet, limit: usize) -> Result<(Alignment, MatchScore)> {
    let (n, m) = (ta.variables().len(), tb.variables().len());
    if n.min(m) > limit {
        return Err(Error::TooLarge { vars: n.min(m), limit });
    }
    if n <= m {
        let t = WeightTable::new(ta, tb);
        let (map, s) = exact_on_table(&t);
        Ok((t.alignment(&map), t.match_score(s)))
    } else {
        let t = WeightTable::new(tb, ta);
        let (map, s) = exact_on_table(&t);
        Ok((t.alignment(&map).inverse(), MatchScore::from_counts(s as usize, ta.len(), tb.len())))
    }
}

// ---------------------------------------------------------------------------
// Hill climbing
// ---------------------------------------------------------------------------

/// Greedy start: each first-graph variable takes the first free
/// second-graph variable carrying the same concept.
fn greedy_start(t: &WeightTable, ta: &TripleSet, tb: &TripleSet) -> Vec<Option<usize>> {
    let concept = |ts: &TripleSet| -> HashMap<String, String> {
        ts.triples
            .iter()
            .filter(|x| x.kind == TripleKind::Instance)
            .map(|x| (x.source.clone(), x.target.clone()))
            .collect()
    };
    let ca = concept(ta);
    let cb = concept(tb);
    let mut used = vec![false; t.m()];
    let mut map = vec![None; t.n()];
    for (i, va) in t.vars_a.iter().enumerate() {
        if let Some(j) = (0..t.m()).find(|&j| !used[j] && ca.get(va) == cb.get(&t.vars_b[j])) {
            used[j] = true;
            map[i] = Some(j);
        }
    }
    map
}

fn random_start(n: usize, m: usize, seed: u64) -> Vec<Option<usize>> {
    let mut rng = seed::rng(seed);
    let mut targets: Vec<usize> = (0..m).collect();
    targets.shuffle(&mut rng);
    let mut sources: Vec<usize> = (0..n).collect();
    sources.shuffle(&mut rng);
    let mut map = vec![None; n];
    for (&i, &j) in sources.iter().zip(targets.iter()) {
        map[i] = Some(j);
    }
    map
}

/// Steepest ascent over reassign-to-free and swap moves.
fn climb(t: &WeightTable, mut map: Vec<Option<usize>>) -> (Vec<Option<usize>>, u32) {
    let (n, m) = (t.n(), t.m());
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for (i, j) in map.iter().enumerate() {
        if let Some(j) = j {
            owner[*j] = Some(i);
        }
    }
    let mut score = t.score(&map);
    loop {
        let mut best_gain = 0i64;
        let mut best_move: Option<(usize, usize)> = None;
        for i in 0..n {
            for (j, &holder) in owner.iter().enumerate() {
                if map[i] == Some(j) {
                    continue;
                }
                let gain = match holder {
                    None => {
                        let before = t.local(&[i], &map) as i64;
                        let old = map[i];
                        map[i] = Some(j);
                        let after = t.local(&[i], &map) as i64;
                        map[i] = old;
                        after - before
                    }
                    Some(k) => {
                        let before = t.local(&[i, k], &map) as i64;
                        let (oi, ok) = (map[i], map[k]);
                        map[i] = Some(j);
                        map[k] = oi;
                        let after = t.local(&[i, k], &map) as i64;
                        map[i] = oi;
                        map[k] = ok;
                        after - before
                    }
                };
                if gain > best_gain {
                    best_gain = gain;
                    best_move = Some((i, j));
                }
            }
        }
        let Some((i, j)) = best_move else { break };
        let old = map[i];
        match owner[j] {
            None => {
                if let Some(o) = old {
                    owner[o] = None;
                }
            }
            Some(k) => {
                map[k] = old;
                if let Some(o) = old {
                    owner[o] = Some(k);
                }
            }
        }
        map[i] = Some(j);
        owner[j] = Some(i);
        score += best_gain as u32;
        debug_assert_eq!(score, t.score(&map));
    }
    (map, score)
}

/// Hill-climbing Smatch. Restart 0 starts from greedy concept matching,
/// restart `r > 0` from a random injection seeded by `(seed, r)`; the first
/// best map over restarts is returned.
pub fn hill_climb_align(ga: &AmrGraph, gb: &AmrGraph, restarts: usize, seed: u64) -> (Alignment, MatchScore) {
    hill_climb_triples(&extract_triples(ga), &extract_triples(gb), restarts, seed)
}

pub fn hill_climb_triples(ta: &TripleSet, tb: &TripleSet, restarts: usize, seed: u64) -> (Alignment, MatchScore) {
    let t = WeightTable::new(ta, tb);
    let mut best: Option<(Vec<Option<usize>>, u32)> = None;
    for r in 0..restarts.max(1) {
        if best.as_ref().is_some_and(|(_, s)| *s == t.upper_cap()) {
            break;
        }
        let start = if r == 0 { greedy_start(&t, ta, tb) } else { random_start(t.n(), t.m(), seed::derive(seed, &[r as u64])) };
        let (map, s) = climb(&t, start);
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((map, s));
        }
    }
    let (map, s) = best.expect("at least one restart");
    (t.alignment(&map), t.match_score(s))
}

/// Uniformly random injection of the smaller variable set into the larger.
pub fn random_align(ga: &AmrGraph, gb: &AmrGraph, seed: u64) -> Alignment {
    let mut va: Vec<&str> = ga.nodes.keys().map(String::as_str).collect();
    let mut vb: Vec<&str> = gb.nodes.keys().map(String::as_str).collect();
    va.sort_by(|x, y| natural_cmp(x, y));
    vb.sort_by(|x, y| natural_cmp(x, y));
    let mut rng = seed::rng(seed);
    if va.len() <= vb.len() {
        let picked: Vec<&str> = vb.choose_multiple(&mut rng, va.len()).copied().collect();
        Alignment::new(va.into_iter().zip(picked)).expect("distinct picks")
    } else {
        let picked: Vec<&str> = va.choose_multiple(&mut rng, vb.len()).copied().collect();
        Alignment::new(picked.into_iter().zip(vb)).expect("distinct picks")
    }
}

/// Which maximizer builds an oracle score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aligner {
    Exact,
    HillClimb,
}

impl std::str::FromStr for Aligner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Aligner::Exact),
            "hillclimb" | "hill-climb" => Ok(Aligner::HillClimb),
            other => Err(Error::Config(format!("unknown aligner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignerConfig {
    pub aligner: Aligner,
    pub restarts: usize,
    pub limit: usize,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        AlignerConfig { aligner: Aligner::HillClimb, restarts: DEFAULT_RESTARTS, limit: DEFAULT_EXACT_LIMIT }
    }
}

impl AlignerConfig {
    pub fn exact() -> Self {
        AlignerConfig { aligner: Aligner::Exact, ..Self::default() }
    }

    pub fn run(&self, ga: &AmrGraph, gb: &AmrGraph, seed: u64) -> Result<(Alignment, MatchScore)> {
        match self.aligner {
            Aligner::Exact => exact_align(ga, gb, self.limit),
            Aligner::HillClimb => Ok(hill_climb_align(ga, gb, self.restarts, seed)),
        }
    }
}


#[cfg(test)]
mod props {
    use super::tests::brute_force;
    use super::*;
    use crate::penman::testgen;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn exact_matches_brute_force(a in testgen::graph(5), b in testgen::graph(5)) {
            let (map, s) = exact_align(&a, &b, 8).unwrap();
            prop_assert_eq!(s.matches, brute_force(&a, &b));
            let direct = score_given_alignment(&extract_triples(&a), &extract_triples(&b), &map).unwrap();
            prop_assert_eq!(direct, s);
        }

        #[test]
        fn optimum_is_symmetric(a in testgen::graph(6), b in testgen::graph(6)) {
            let ab = exact_align(&a, &b, 8).unwrap().1;
            let ba = exact_align(&b, &a, 8).unwrap().1;
            prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
            prop_assert_eq!(exact_align(&a, &a, 8).unwrap().1.f1, 1.0);
        }

        #[test]
        fn heuristics_bounded_by_exact(a in testgen::graph(7), b in testgen::graph(7), seed in any::<u64>()) {
            let best = exact_align(&a, &b, 8).unwrap().1;
            let (map, hc) = hill_climb_align(&a, &b, 4, seed);
            prop_assert!(hc.f1 <= best.f1 + 1e-12);
            let direct = score_given_alignment(&extract_triples(&a), &extract_triples(&b), &map).unwrap();
            prop_assert_eq!(direct, hc);
            let r = random_align(&a, &b, seed);
            let rs = score_given_alignment(&extract_triples(&a), &extract_triples(&b), &r).unwrap();
            prop_assert!(rs.f1 <= best.f1 + 1e-12);
        }

        #[test]
        fn restarts_are_monotone(a in testgen::graph(7), b in testgen::graph(7), seed in any::<u64>()) {
            let mut prev = 0.0;
            for r in 1..=6 {
                let f = hill_climb_align(&a, &b, r, seed).1.f1;
                prop_assert!(f >= prev);
                prev = f;
            }
        }
    }
}
