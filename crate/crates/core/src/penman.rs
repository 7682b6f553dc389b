//! PENMAN notation: parsing, pretty-printing, linearization, 2-D grid
//! rendering and canonical triple extraction.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, ParseErrorKind, Result};

/// Spaces per nesting level in pretty-printed output.
const INDENT: usize = 4;

/// Roles whose surface form ends in `-of` but which are not inversions.
const NON_INVERTED_OF: &[&str] = &[":consist-of", ":prep-out-of", ":prep-on-behalf-of"];

pub const ROLE_INSTANCE: &str = ":instance";
pub const ROLE_TOP: &str = ":TOP";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: String,
    pub role: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Attribute {
    pub source: String,
    pub role: String,
    pub value: String,
}

/// A rooted, connected, labeled graph. `nodes` keeps definition order, which
/// drives deterministic serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmrGraph {
    pub root: String,
    pub nodes: IndexMap<String, String>,
    pub edges: Vec<Edge>,
    pub attributes: Vec<Attribute>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TripleKind {
    Instance,
    Relation,
    Attribute,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub kind: TripleKind,
    pub source: String,
    pub role: String,
    pub target: String,
}

/// Canonical triples of one graph. Kept as a multiset: duplicated edges in
/// the input yield duplicated triples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TripleSet {
    pub triples: Vec<Triple>,
}

impl TripleSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Variables in first-appearance order (instance triples come first).
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.triples
            .iter()
            .filter(|t| t.kind == TripleKind::Instance)
            .map(|t| t.source.as_str())
            .filter(|v| seen.insert(*v))
            .collect()
    }

    /// Sorted copy, for order-insensitive comparison.
    pub fn sorted(&self) -> Vec<Triple> {
        let mut v = self.triples.clone();
        v.sort();
        v
    }
}

impl AmrGraph {
    /// Build a graph and check the structural invariants.
    pub fn new(
        root: impl Into<String>,
        nodes: IndexMap<String, String>,
        edges: Vec<Edge>,
        attributes: Vec<Attribute>,
    ) -> Result<Self> {
        let g = AmrGraph { root: root.into(), nodes, edges, attributes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nodes.contains_key(&self.root) {
            return Err(Error::Contract(format!("root `{}` is not a node", self.root)));
        }
        for e in &self.edges {
            for v in [&e.source, &e.target] {
                if !self.nodes.contains_key(v) {
                    return Err(Error::Contract(format!("edge endpoint `{v}` is not a node")));
                }
            }
        }
        for a in &self.attributes {
            if !self.nodes.contains_key(&a.source) {
                return Err(Error::Contract(format!("attribute source `{}` is not a node", a.source)));
            }
        }
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in &self.edges {
            adj.entry(&e.source).or_default().push(&e.target);
            adj.entry(&e.target).or_default().push(&e.source);
        }
        let mut seen = HashSet::from([self.root.as_str()]);
        let mut stack = vec![self.root.as_str()];
        while let Some(v) = stack.pop() {
            for &w in adj.get(v).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        if seen.len() != self.nodes.len() {
            return Err(Error::Contract("graph is not connected from its root".into()));
        }
        Ok(())
    }

    pub fn variable_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn concept(&self, var: &str) -> Option<&str> {
        self.nodes.get(var).map(String::as_str)
    }

    /// Pretty-printed layout: one entry per output line.
    pub fn layout(&self) -> Vec<Line> {
        Layout::new(self).run()
    }
}

impl fmt::Display for AmrGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_penman(self))
    }
}

impl std::str::FromStr for AmrGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_penman(s)
    }
}

/// Normalize a role: `:ARG0-of` becomes `(:ARG0, true)`.
pub fn normalize_role(role: &str) -> (String, bool) {
    if role.len() > 4 && role.ends_with("-of") && !NON_INVERTED_OF.contains(&role) {
        (role[..role.len() - 3].to_string(), true)
    } else {
        (role.to_string(), false)
    }
}

fn invert_role(role: &str) -> String {
    format!("{role}-of")
}

/// Ordering used for all variable tie-breaks: integer names compare
/// numerically and sort before non-integer names, which compare as strings.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

// ---------------------------------------------------------------------------
// Tokenizer and parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Quoted(String),
    Symbol(String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn err(kind: ParseErrorKind, line: usize, column: usize) -> Error {
    Error::Parse { kind, line, column }
}

fn tokenize(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    let advance = |c: char, line: &mut usize, column: &mut usize| {
        if c == '\n' {
            *line += 1;
            *column = 1;
        } else {
            *column += 1;
        }
    };

    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        match c {
            c if c.is_whitespace() => {
                chars.next();
                advance(c, &mut line, &mut column);
            }
            '(' | ')' | '/' => {
                chars.next();
                advance(c, &mut line, &mut column);
                let tok = match c {
                    '(' => Tok::Open,
                    ')' => Tok::Close,
                    _ => Tok::Slash,
                };
                out.push(Spanned { tok, line: l, column: col });
            }
            '"' => {
                chars.next();
                advance(c, &mut line, &mut column);
                let mut s = String::from('"');
                let mut closed = false;
                while let Some(c) = chars.next() {
                    advance(c, &mut line, &mut column);
                    s.push(c);
                    if c == '\\' {
                        if let Some(n) = chars.next() {
                            advance(n, &mut line, &mut column);
                            s.push(n);
                        }
                    } else if c == '"' {
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    return Err(err(ParseErrorKind::Unexpected("unterminated string".into()), l, col));
                }
                out.push(Spanned { tok: Tok::Quoted(s), line: l, column: col });
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '"' | '/') {
                        break;
                    }
                    chars.next();
                    advance(c, &mut line, &mut column);
                    s.push(c);
                }
                let tok = if s.starts_with(':') { Tok::Role(s) } else { Tok::Symbol(s) };
                out.push(Spanned { tok, line: l, column: col });
            }
        }
    }
    Ok(out)
}

/// A role value that could not be classified until the whole graph was read.
struct Pending {
    source: String,
    role: String,
    symbol: String,
    inverted: bool,
    quoted: bool,
    line: usize,
    column: usize,
}

enum Child {
    Edge(Edge),
    Pending(Pending),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
    nodes: IndexMap<String, String>,
    children: Vec<(usize, Child)>,
    seq: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Spanned> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(err(ParseErrorKind::UnbalancedParens, self.eof.0, self.eof.1)),
        }
    }

    fn node(&mut self) -> Result<String> {
        let open = self.next()?;
        if open.tok != Tok::Open {
            return Err(err(ParseErrorKind::Unexpected(format!("{:?}, expected `(`", open.tok)), open.line, open.column));
        }
        let var_tok = self.next()?;
        let var = match var_tok.tok {
            Tok::Symbol(s) => s,
            other => {
                return Err(err(
                    ParseErrorKind::Unexpected(format!("{other:?}, expected variable")),
                    var_tok.line,
                    var_tok.column,
                ))
            }
        };
        let slash = self.next()?;
        if slash.tok != Tok::Slash {
            return Err(err(ParseErrorKind::Unexpected(format!("{:?}, expected `/`", slash.tok)), slash.line, slash.column));
        }
        let concept_tok = self.next()?;
        let concept = match concept_tok.tok {
            Tok::Symbol(s) | Tok::Quoted(s) => s,
            other => {
                return Err(err(
                    ParseErrorKind::Unexpected(format!("{other:?}, expected concept")),
                    concept_tok.line,
                    concept_tok.column,
                ))
            }
        };
        if self.nodes.contains_key(&var) {
            return Err(err(ParseErrorKind::DuplicateVariable(var), var_tok.line, var_tok.column));
        }
        self.nodes.insert(var.clone(), concept);

        loop {
            let t = self.next()?;
            match t.tok {
                Tok::Close => return Ok(var),
                Tok::Role(role) => {
                    let (base, inverted) = normalize_role(&role);
                    let order = self.seq;
                    self.seq += 1;
                    let value = match self.peek() {
                        Some(v) => v.clone(),
                        None => return Err(err(ParseErrorKind::UnbalancedParens, self.eof.0, self.eof.1)),
                    };
                    match value.tok {
                        Tok::Open => {
                            let child = self.node()?;
                            let edge = if inverted {
                                Edge { source: child, role: base, target: var.clone() }
                            } else {
                                Edge { source: var.clone(), role: base, target: child }
                            };
                            self.children.push((order, Child::Edge(edge)));
                        }
                        Tok::Symbol(s) | Tok::Quoted(s) => {
                            self.pos += 1;
                            let quoted = s.starts_with('"');
                            self.children.push((
                                order,
                                Child::Pending(Pending {
                                    source: var.clone(),
                                    role: base,
                                    symbol: s,
                                    inverted,
                                    quoted,
                                    line: value.line,
                                    column: value.column,
                                }),
                            ));
                        }
                        other => {
                            return Err(err(
                                ParseErrorKind::Unexpected(format!("{other:?} after role")),
                                value.line,
                                value.column,
                            ))
                        }
                    }
                }
                other => {
                    return Err(err(ParseErrorKind::Unexpected(format!("{other:?}")), t.line, t.column));
                }
            }
        }
    }
}

/// AMR variable names: one lowercase letter, optional digits.
fn looks_like_variable(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase()) && cs.all(|c| c.is_ascii_digit())
}

/// Parse a single PENMAN expression.
///
/// Bare symbols after a role are variable references when the symbol is
/// defined anywhere in the graph, and constants otherwise; an undefined
/// symbol shaped like an AMR variable (`b`, `x12`) is rejected.
pub fn parse_penman(text: &str) -> Result<AmrGraph> {
    let toks = tokenize(text)?;
    let eof = text
        .lines()
        .enumerate()
        .last()
        .map(|(i, l)| (i + 1, l.chars().count() + 1))
        .unwrap_or((1, 1));
    if toks.is_empty() {
        return Err(err(ParseErrorKind::Empty, 1, 1));
    }
    // Bracket balance first, so mismatches report as such.
    let mut depth = 0i64;
    for t in &toks {
        match t.tok {
            Tok::Open => depth += 1,
            Tok::Close => {
                depth -= 1;
                if depth < 0 {
                    return Err(err(ParseErrorKind::UnbalancedParens, t.line, t.column));
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(err(ParseErrorKind::UnbalancedParens, eof.0, eof.1));
    }

    let mut p = Parser { toks, pos: 0, eof, nodes: IndexMap::new(), children: Vec::new(), seq: 0 };
    let root = p.node()?;
    if let Some(t) = p.peek() {
        return Err(err(ParseErrorKind::Unexpected(format!("trailing {:?}", t.tok)), t.line, t.column));
    }

    let mut children = std::mem::take(&mut p.children);
    children.sort_by_key(|(order, _)| *order);
    let mut edges = Vec::new();
    let mut attributes = Vec::new();
    for (_, child) in children {
        match child {
            Child::Edge(e) => edges.push(e),
            Child::Pending(pd) => {
                if !pd.quoted && p.nodes.contains_key(&pd.symbol) {
                    edges.push(if pd.inverted {
                        Edge { source: pd.symbol, role: pd.role, target: pd.source }
                    } else {
                        Edge { source: pd.source, role: pd.role, target: pd.symbol }
                    });
                } else if !pd.quoted && looks_like_variable(&pd.symbol) {
                    return Err(err(ParseErrorKind::UndefinedVariable(pd.symbol), pd.line, pd.column));
                } else {
                    let role = if pd.inverted { invert_role(&pd.role) } else { pd.role };
                    attributes.push(Attribute { source: pd.source, role, value: pd.symbol });
                }
            }
        }
    }
    Ok(AmrGraph { root, nodes: p.nodes, edges, attributes })
}

// ---------------------------------------------------------------------------
// Layout and serialization
// ---------------------------------------------------------------------------

/// One pretty-printed line: nesting depth and its tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub depth: usize,
    pub tokens: Vec<String>,
}

#[derive(Clone, Copy)]
enum Item {
    Out(usize),
    In(usize),
    Attr(usize),
}

struct Layout<'g> {
    g: &'g AmrGraph,
    items: HashMap<&'g str, Vec<Item>>,
    used: Vec<bool>,
    placed: HashSet<&'g str>,
    /// Nodes reachable from the root along edge direction.
    forward: HashSet<&'g str>,
    lines: Vec<Line>,
}

impl<'g> Layout<'g> {
    fn new(g: &'g AmrGraph) -> Self {
        let mut items: HashMap<&str, Vec<Item>> = HashMap::new();
        for (i, e) in g.edges.iter().enumerate() {
            items.entry(&e.source).or_default().push(Item::Out(i));
            if e.target != e.source {
                items.entry(&e.target).or_default().push(Item::In(i));
            }
        }
        for (i, a) in g.attributes.iter().enumerate() {
            items.entry(&a.source).or_default().push(Item::Attr(i));
        }
        let mut forward = HashSet::from([g.root.as_str()]);
        let mut stack = vec![g.root.as_str()];
        while let Some(v) = stack.pop() {
            for e in g.edges.iter().filter(|e| e.source == v) {
                if forward.insert(e.target.as_str()) {
                    stack.push(e.target.as_str());
                }
            }
        }
        Layout { g, items, used: vec![false; g.edges.len()], placed: HashSet::new(), forward, lines: Vec::new() }
    }

    fn run(mut self) -> Vec<Line> {
        let root = self.g.root.as_str();
        self.node(root, 0, Vec::new());
        self.lines
    }

    /// Emit `(var / concept` onto a line that already holds `prefix`, then
    /// its children on subsequent lines, then the closing paren.
    fn node(&mut self, var: &'g str, depth: usize, mut prefix: Vec<String>) {
        self.placed.insert(var);
        prefix.extend(["(".to_string(), var.to_string(), "/".to_string(), self.g.nodes[var].clone()]);
        self.lines.push(Line { depth, tokens: prefix });
        let items = self.items.get(var).cloned().unwrap_or_default();
        for item in items {
            match item {
                Item::Attr(i) => {
                    let a = &self.g.attributes[i];
                    self.lines.push(Line { depth: depth + 1, tokens: vec![a.role.clone(), a.value.clone()] });
                }
                Item::Out(i) | Item::In(i) => {
                    // Edges from forward-reachable sources are written there.
                    if self.used[i] || matches!(item, Item::In(_)) && self.forward.contains(self.g.edges[i].source.as_str()) {
                        continue;
                    }
                    self.used[i] = true;
                    let e = &self.g.edges[i];
                    let (role, other) = match item {
                        Item::Out(_) => (e.role.clone(), e.target.as_str()),
                        _ => (invert_role(&e.role), e.source.as_str()),
                    };
                    if self.placed.contains(other) {
                        self.lines.push(Line { depth: depth + 1, tokens: vec![role, other.to_string()] });
                    } else {
                        self.node(other, depth + 1, vec![role]);
                    }
                }
            }
        }
        self.lines.last_mut().expect("node pushed a line").tokens.push(")".to_string());
    }
}

fn render_line(line: &Line) -> String {
    let mut s = " ".repeat(line.depth * INDENT);
    let mut prev: Option<&str> = None;
    for tok in &line.tokens {
        let glue = matches!(prev, None | Some("(")) || tok == ")";
        if !glue {
            s.push(' ');
        }
        s.push_str(tok);
        prev = Some(tok);
    }
    s
}

/// Deterministic pretty-printed PENMAN, one child per line.
pub fn serialize_penman(g: &AmrGraph) -> String {
    g.layout().iter().map(render_line).collect::<Vec<_>>().join("\n")
}

/// The pretty-printed form collapsed onto one line.
pub fn serialize_compact(g: &AmrGraph) -> String {
    g.layout().iter().map(|l| render_line(l).trim_start().to_string()).collect::<Vec<_>>().join(" ")
}

/// Depth-first token stream of the serialized form.
pub fn linearize(g: &AmrGraph) -> Vec<String> {
    g.layout().into_iter().flat_map(|l| l.tokens).collect()
}

/// Canonical triples: instances, relations, attributes, then the root marker.
pub fn extract_triples(g: &AmrGraph) -> TripleSet {
    let mut triples = Vec::with_capacity(g.nodes.len() + g.edges.len() + g.attributes.len() + 1);
    for (v, c) in &g.nodes {
        triples.push(Triple {
            kind: TripleKind::Instance,
            source: v.clone(),
            role: ROLE_INSTANCE.to_string(),
            target: c.clone(),
        });
    }
    for e in &g.edges {
        triples.push(Triple {
            kind: TripleKind::Relation,
            source: e.source.clone(),
            role: e.role.clone(),
            target: e.target.clone(),
        });
    }
    for a in &g.attributes {
        triples.push(Triple {
            kind: TripleKind::Attribute,
            source: a.source.clone(),
            role: a.role.clone(),
            target: a.value.clone(),
        });
    }
    triples.push(Triple {
        kind: TripleKind::Attribute,
        source: g.root.clone(),
        role: ROLE_TOP.to_string(),
        target: g.nodes[&g.root].clone(),
    });
    TripleSet { triples }
}

// ---------------------------------------------------------------------------
// Grid rendering
// ---------------------------------------------------------------------------

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token vocabulary with reserved padding (0) and unknown (1) ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(Vec::<String>::new())
    }
}

impl Vocab {
    /// Reserved ids first, then each new token in iteration order.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Vocab { tokens: Vec::new(), index: HashMap::new() };
        v.insert(PAD_TOKEN);
        v.insert(UNK_TOKEN);
        for t in tokens {
            v.insert(t.as_ref());
        }
        v
    }

    /// Vocabulary over every linearized token of `graphs`, in encounter order.
    pub fn from_graphs<'a>(graphs: impl IntoIterator<Item = &'a AmrGraph>) -> Self {
        let mut v = Self::default();
        for g in graphs {
            for t in linearize(g) {
                v.insert(&t);
            }
        }
        v
    }

    pub fn insert(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Row-major `rows × cols` table of token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenGrid {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<u32>,
}

impl TokenGrid {
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.cells[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.cells[r * self.cols..(r + 1) * self.cols]
    }
}

/// Lay the pretty-printed graph onto a grid: line `k` fills row `k`,
/// starting at the column given by its depth. Overflow is truncated.
pub fn render_grid(g: &AmrGraph, vocab: &Vocab, rows: usize, cols: usize) -> Result<TokenGrid> {
    if rows == 0 || cols == 0 {
        return Err(Error::Config(format!("grid must be at least 1x1, got {rows}x{cols}")));
    }
    let mut cells = vec![PAD_ID; rows * cols];
    for (r, line) in g.layout().iter().enumerate().take(rows) {
        for (k, tok) in line.tokens.iter().enumerate() {
            let c = line.depth + k;
            if c >= cols {
                break;
            }
            cells[r * cols + c] = vocab.id(tok);
        }
    }
    Ok(TokenGrid { rows, cols, cells })
}

// ---------------------------------------------------------------------------
// AMR bank files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BankEntry {
    /// Value of a `# ::id` metadata field, if present.
    pub id: Option<String>,
    pub graph: AmrGraph,
}

/// Read an AMR bank: graphs separated by blank lines, `#` lines ignored
/// (except that `# ::id X` names the following graph).
pub fn read_bank(text: &str) -> Result<Vec<BankEntry>> {
    let mut out = Vec::new();
    let mut id = None;
    let mut block = String::new();
    let mut block_start = 0usize;

    let mut flush = |block: &mut String, id: &mut Option<String>, start: usize| -> Result<()> {
        if block.trim().is_empty() {
            block.clear();
            return Ok(());
        }
        let graph = parse_penman(block).map_err(|e| match e {
            Error::Parse { kind, line, column } => Error::Parse { kind, line: line + start, column },
            other => other,
        })?;
        out.push(BankEntry { id: id.take(), graph });
        block.clear();
        Ok(())
    };

    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            flush(&mut block, &mut id, block_start)?;
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            if let Some(rest) = meta.trim_start().strip_prefix("::id") {
                id = rest.split_whitespace().next().map(str::to_string);
            }
            continue;
        }
        if block.is_empty() {
            block_start = i;
        }
        block.push_str(line);
        block.push('\n');
    }
    flush(&mut block, &mut id, block_start)?;
    Ok(out)
}
