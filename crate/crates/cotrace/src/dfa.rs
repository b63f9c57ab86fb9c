//! Property automata and their causal dependence relations.
//!
//! Properties are bad-prefix DFAs: the verdict states are absorbing and
//! signal a violation. From any DFA we extract the independence relation
//! I_D — the symbol pairs whose permutation never changes the reached
//! state — by checking, for every state q and pair (a,b), whether a·b
//! and b·a lead to the same state. Its complement (off the diagonal) is
//! the causal dependence relation D: the pairs a monitor needs ordered.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DfaError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InvalidDfa {
    #[error("automaton needs at least one state")]
    EmptyStates,
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("initial state `{0}` is not a state")]
    BadInitial(String),
    #[error("verdict state `{0}` is not a state")]
    BadVerdict(String),
    #[error("transition references unknown state `{0}`")]
    UnknownStateRef(String),
    #[error("transition references unknown symbol `{0}`")]
    UnknownSymbolRef(String),
    #[error("duplicate transition from `{state}` on `{symbol}`")]
    DuplicateTransition { state: String, symbol: String },
    #[error("missing transition from `{state}` on `{symbol}` (delta must be total)")]
    MissingTransition { state: String, symbol: String },
    #[error("verdict state `{state}` must be absorbing but moves on `{symbol}`")]
    NonAbsorbingVerdict { state: String, symbol: String },
}

/// Monitor verdict after consuming a finite word.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Violation,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub state: String,
    pub verdict: Verdict,
}

/// A deterministic finite automaton with a total transition function and
/// absorbing violation states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    alphabet: Vec<String>,
    states: Vec<String>,
    initial: usize,
    verdict: BTreeSet<usize>,
    /// delta[state][symbol]
    delta: Vec<Vec<usize>>,
}

impl Dfa {
    /// Builds and validates an automaton from explicit parts. Transitions
    /// are (from, symbol, to) by name and must cover Q×Σ exactly once;
    /// verdict states must be absorbing.
    pub fn build(
        alphabet: Vec<String>,
        states: Vec<String>,
        initial: &str,
        verdict: &[String],
        transitions: &[(String, String, String)],
    ) -> Result<Dfa, InvalidDfa> {
        if states.is_empty() {
            return Err(InvalidDfa::EmptyStates);
        }
        let mut state_idx = BTreeMap::new();
        for (i, s) in states.iter().enumerate() {
            if state_idx.insert(s.clone(), i).is_some() {
                return Err(InvalidDfa::DuplicateState(s.clone()));
            }
        }
        let mut symbol_idx = BTreeMap::new();
        for (i, a) in alphabet.iter().enumerate() {
            if symbol_idx.insert(a.clone(), i).is_some() {
                return Err(InvalidDfa::DuplicateSymbol(a.clone()));
            }
        }
        let &initial = state_idx
            .get(initial)
            .ok_or_else(|| InvalidDfa::BadInitial(initial.to_owned()))?;
        let mut verdict_set = BTreeSet::new();
        for v in verdict {
            let &i = state_idx
                .get(v)
                .ok_or_else(|| InvalidDfa::BadVerdict(v.clone()))?;
            verdict_set.insert(i);
        }

        let mut delta: Vec<Vec<Option<usize>>> = vec![vec![None; alphabet.len()]; states.len()];
        for (from, on, to) in transitions {
            let &f = state_idx
                .get(from)
                .ok_or_else(|| InvalidDfa::UnknownStateRef(from.clone()))?;
            let &a = symbol_idx
                .get(on)
                .ok_or_else(|| InvalidDfa::UnknownSymbolRef(on.clone()))?;
            let &t = state_idx
                .get(to)
                .ok_or_else(|| InvalidDfa::UnknownStateRef(to.clone()))?;
            if delta[f][a].replace(t).is_some() {
                return Err(InvalidDfa::DuplicateTransition {
                    state: from.clone(),
                    symbol: on.clone(),
                });
            }
        }
        let mut total = Vec::with_capacity(states.len());
        for (qi, row) in delta.into_iter().enumerate() {
            let mut out = Vec::with_capacity(alphabet.len());
            for (ai, entry) in row.into_iter().enumerate() {
                let t = entry.ok_or_else(|| InvalidDfa::MissingTransition {
                    state: states[qi].clone(),
                    symbol: alphabet[ai].clone(),
                })?;
                if verdict_set.contains(&qi) && t != qi {
                    return Err(InvalidDfa::NonAbsorbingVerdict {
                        state: states[qi].clone(),
                        symbol: alphabet[ai].clone(),
                    });
                }
                out.push(t);
            }
            total.push(out);
        }

        Ok(Dfa {
            alphabet,
            states,
            initial,
            verdict: verdict_set,
            delta: total,
        })
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn initial_state(&self) -> &str {
        &self.states[self.initial]
    }

    pub fn verdict_states(&self) -> Vec<&str> {
        self.verdict
            .iter()
            .map(|&i| self.states[i].as_str())
            .collect()
    }

    pub fn has_symbol(&self, symbol: &str) -> bool {
        self.alphabet.iter().any(|a| a == symbol)
    }

    fn symbol_index(&self, symbol: &str) -> Result<usize, DfaError> {
        self.alphabet
            .iter()
            .position(|a| a == symbol)
            .ok_or_else(|| DfaError::UnknownSymbol(symbol.to_owned()))
    }

    fn state_index(&self, state: &str) -> Result<usize, DfaError> {
        self.states
            .iter()
            .position(|s| s == state)
            .ok_or_else(|| DfaError::UnknownState(state.to_owned()))
    }

    /// One transition step by name.
    pub fn step(&self, state: &str, symbol: &str) -> Result<&str, DfaError> {
        let q = self.state_index(state)?;
        let a = self.symbol_index(symbol)?;
        Ok(&self.states[self.delta[q][a]])
    }

    /// Folds a word from the initial state; violation iff the final state
    /// is a verdict state (which, being absorbing, means a bad prefix was
    /// seen somewhere along the word).
    pub fn run<'a, I: IntoIterator<Item = &'a str>>(
        &self,
        word: I,
    ) -> Result<RunOutcome, DfaError> {
        let mut q = self.initial;
        for symbol in word {
            let a = self.symbol_index(symbol)?;
            q = self.delta[q][a];
        }
        Ok(RunOutcome {
            state: self.states[q].clone(),
            verdict: if self.verdict.contains(&q) {
                Verdict::Violation
            } else {
                Verdict::None
            },
        })
    }

    fn step_idx(&self, q: usize, a: usize) -> usize {
        self.delta[q][a]
    }

    /// Extracts the independence relation: (a,b) is independent iff a = b
    /// or a·b and b·a reach the same state from every state of the
    /// automaton. Reflexive and symmetric by construction.
    pub fn compute_independence(&self) -> IndependenceRelation {
        let mut pairs = BTreeSet::new();
        let n = self.alphabet.len();
        for a in 0..n {
            pairs.insert((self.alphabet[a].clone(), self.alphabet[a].clone()));
            for b in a + 1..n {
                let commutes = (0..self.states.len()).all(|q| {
                    self.step_idx(self.step_idx(q, a), b) == self.step_idx(self.step_idx(q, b), a)
                });
                if commutes {
                    pairs.insert((self.alphabet[a].clone(), self.alphabet[b].clone()));
                    pairs.insert((self.alphabet[b].clone(), self.alphabet[a].clone()));
                }
            }
        }
        IndependenceRelation { pairs }
    }

    /// The causal dependence relation: all of Σ×Σ minus the independence
    /// relation; anti-reflexive and symmetric.
    pub fn dependence(&self) -> DependenceRelation {
        let ind = self.compute_independence();
        let mut pairs = BTreeSet::new();
        for a in &self.alphabet {
            for b in &self.alphabet {
                if a != b && !ind.contains(a, b) {
                    pairs.insert((a.clone(), b.clone()));
                }
            }
        }
        DependenceRelation { pairs }
    }

    fn reachable_from_initial(&self) -> Vec<usize> {
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        let mut order = Vec::new();
        while let Some(q) = queue.pop_front() {
            order.push(q);
            for a in 0..self.alphabet.len() {
                let t = self.delta[q][a];
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        order
    }

    /// Classical monitorability for bad-prefix automata: from every state
    /// reachable from the initial state, some verdict state is reachable.
    pub fn classical_monitorability(&self) -> bool {
        if self.verdict.is_empty() {
            return false;
        }
        // Backward reachability from the verdict set.
        let mut can_reach = vec![false; self.states.len()];
        for &v in &self.verdict {
            can_reach[v] = true;
        }
        loop {
            let mut grew = false;
            for q in 0..self.states.len() {
                if !can_reach[q] && (0..self.alphabet.len()).any(|a| can_reach[self.delta[q][a]]) {
                    can_reach[q] = true;
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        self.reachable_from_initial()
            .into_iter()
            .all(|q| can_reach[q])
    }

    /// Removes unreachable states and merges behaviorally equivalent ones
    /// (Moore partition refinement with the verdict set as the initial
    /// split). States are renamed q1, q2, … in search order from the
    /// initial state.
    pub fn minimize(&self) -> Dfa {
        let reachable = self.reachable_from_initial();
        let mut class = vec![usize::MAX; self.states.len()];
        for &q in &reachable {
            class[q] = usize::from(self.verdict.contains(&q));
        }
        loop {
            // Signature = (class, classes after each symbol).
            let mut sig_to_class: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            let mut next = vec![usize::MAX; self.states.len()];
            for &q in &reachable {
                let mut sig = vec![class[q]];
                for a in 0..self.alphabet.len() {
                    sig.push(class[self.delta[q][a]]);
                }
                let id = sig_to_class.len();
                next[q] = *sig_to_class.entry(sig).or_insert(id);
            }
            if reachable.iter().all(|&q| next[q] == class[q]) {
                break;
            }
            class = next;
        }

        // Canonical order: BFS over classes from the initial class.
        let repr_of = |c: usize| reachable.iter().copied().find(|&q| class[q] == c).unwrap();
        let mut order = Vec::new();
        let mut placed: BTreeMap<usize, usize> = BTreeMap::new();
        let mut queue = VecDeque::from([class[self.initial]]);
        placed.insert(class[self.initial], 0);
        while let Some(c) = queue.pop_front() {
            order.push(c);
            let q = repr_of(c);
            for a in 0..self.alphabet.len() {
                let tc = class[self.delta[q][a]];
                if let std::collections::btree_map::Entry::Vacant(e) = placed.entry(tc) {
                    e.insert(order.len() + queue.len());
                    queue.push_back(tc);
                }
            }
        }

        let states: Vec<String> = (0..order.len()).map(|i| format!("q{}", i + 1)).collect();
        let mut delta = Vec::with_capacity(order.len());
        let mut verdict = BTreeSet::new();
        for (i, &c) in order.iter().enumerate() {
            let q = repr_of(c);
            if self.verdict.contains(&q) {
                verdict.insert(i);
            }
            delta.push(
                (0..self.alphabet.len())
                    .map(|a| placed[&class[self.delta[q][a]]])
                    .collect(),
            );
        }
        Dfa {
            alphabet: self.alphabet.clone(),
            states,
            initial: 0,
            verdict,
            delta,
        }
    }
}

/// On-disk JSON form of a [`Dfa`].
#[derive(Serialize, Deserialize)]
struct DfaFile {
    alphabet: Vec<String>,
    states: Vec<String>,
    initial: String,
    verdict: Vec<String>,
    transitions: Vec<TransitionEntry>,
}

#[derive(Serialize, Deserialize)]
struct TransitionEntry {
    from: String,
    on: String,
    to: String,
}

#[derive(Debug, Error)]
pub enum DfaFileError {
    #[error("bad DFA document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] InvalidDfa),
}

impl Dfa {
    pub fn from_json(text: &str) -> Result<Dfa, DfaFileError> {
        let file: DfaFile = serde_json::from_str(text)?;
        let transitions: Vec<(String, String, String)> = file
            .transitions
            .into_iter()
            .map(|t| (t.from, t.on, t.to))
            .collect();
        Ok(Dfa::build(
            file.alphabet,
            file.states,
            &file.initial,
            &file.verdict,
            &transitions,
        )?)
    }

    pub fn to_json(&self) -> String {
        let file = DfaFile {
            alphabet: self.alphabet.clone(),
            states: self.states.clone(),
            initial: self.states[self.initial].clone(),
            verdict: self
                .verdict
                .iter()
                .map(|&i| self.states[i].clone())
                .collect(),
            transitions: self
                .delta
                .iter()
                .enumerate()
                .flat_map(|(q, row)| {
                    row.iter().enumerate().map(move |(a, &t)| TransitionEntry {
                        from: self.states[q].clone(),
                        on: self.alphabet[a].clone(),
                        to: self.states[t].clone(),
                    })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("dfa serialization cannot fail")
    }
}

/// Symbol pairs that may permute without changing any monitor state.
/// Includes the diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndependenceRelation {
    pairs: BTreeSet<(String, String)>,
}

impl IndependenceRelation {
    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&(a.to_owned(), b.to_owned()))
    }

    pub fn pairs(&self) -> &BTreeSet<(String, String)> {
        &self.pairs
    }

    /// The informative part: pairs of distinct symbols.
    pub fn off_diagonal(&self) -> Vec<(String, String)> {
        self.pairs.iter().filter(|(a, b)| a != b).cloned().collect()
    }
}

/// Symbol pairs whose relative order the monitor depends on.
/// Anti-reflexive and symmetric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependenceRelation {
    pairs: BTreeSet<(String, String)>,
}

impl DependenceRelation {
    pub fn from_pairs<I: IntoIterator<Item = (String, String)>>(pairs: I) -> DependenceRelation {
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            if a != b {
                set.insert((b.clone(), a.clone()));
                set.insert((a, b));
            }
        }
        DependenceRelation { pairs: set }
    }

    pub fn related(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&(a.to_owned(), b.to_owned()))
    }

    pub fn pairs(&self) -> &BTreeSet<(String, String)> {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// All symbols mentioned by the relation.
    pub fn symbols(&self) -> BTreeSet<String> {
        self.pairs.iter().map(|(a, _)| a.clone()).collect()
    }
}

/// Percentage of independent pairs among the (|Σ|² − |Σ|) distinct-symbol
/// pairs. Degenerate single-letter alphabets count as fully independent.
pub fn independence_percentage(dfa: &Dfa) -> f64 {
    let n = dfa.alphabet().len();
    if n < 2 {
        return 100.0;
    }
    let off = dfa.compute_independence().off_diagonal().len();
    100.0 * off as f64 / (n * n - n) as f64
}

/// Specification-pattern templates, in the usual pattern/scope taxonomy.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Absence,
    Existence,
    Precedence,
    Response,
    PrecedenceChain2,
    ResponseChain2,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Pattern::Absence,
        Pattern::Existence,
        Pattern::Precedence,
        Pattern::Response,
        Pattern::PrecedenceChain2,
        Pattern::ResponseChain2,
    ];

    fn arity(&self) -> usize {
        match self {
            Pattern::Absence | Pattern::Existence => 1,
            Pattern::Precedence | Pattern::Response => 2,
            Pattern::PrecedenceChain2 | Pattern::ResponseChain2 => 3,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Pattern::Absence => "absence",
            Pattern::Existence => "existence",
            Pattern::Precedence => "precedence",
            Pattern::Response => "response",
            Pattern::PrecedenceChain2 => "precedence-chain-2",
            Pattern::ResponseChain2 => "response-chain-2",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    Global,
    BeforeR,
    AfterQ,
    BetweenQAndR,
}

impl Scope {
    pub const ALL: [Scope; 4] = [
        Scope::Global,
        Scope::BeforeR,
        Scope::AfterQ,
        Scope::BetweenQAndR,
    ];

    fn arity(&self) -> usize {
        match self {
            Scope::Global => 0,
            Scope::BeforeR | Scope::AfterQ => 1,
            Scope::BetweenQAndR => 2,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Scope::Global => "global",
            Scope::BeforeR => "before-r",
            Scope::AfterQ => "after-q",
            Scope::BetweenQAndR => "between-q-and-r",
        }
    }
}

/// A pattern instance: the pattern's own symbols first, then the scope
/// delimiters (the opening event for after/between, the closing event
/// for before/between).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternSpec {
    pub pattern: Pattern,
    pub scope: Scope,
    pub symbols: Vec<String>,
}

impl PatternSpec {
    pub fn new<S: Into<String>>(pattern: Pattern, scope: Scope, symbols: Vec<S>) -> PatternSpec {
        PatternSpec {
            pattern,
            scope,
            symbols: symbols.into_iter().map(Into::into).collect(),
        }
    }

    pub fn name(&self) -> String {
        format!(
            "{}({}) {}",
            self.pattern.as_str(),
            self.symbols.join(","),
            self.scope.as_str()
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("{pattern} with scope {scope} needs {expected} symbols, got {got}")]
    ArityMismatch {
        pattern: &'static str,
        scope: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("pattern symbols must be distinct; `{0}` repeats")]
    RepeatedSymbol(String),
}

/// Little helper for writing the pattern tables: named states, explicit
/// edges, everything unspecified becomes a self-loop, verdict states at
/// the end, then minimize.
struct TemplateDfa {
    alphabet: Vec<String>,
    states: Vec<&'static str>,
    edges: Vec<(&'static str, usize, &'static str)>,
    verdict: Vec<&'static str>,
}

impl TemplateDfa {
    fn build(self) -> Dfa {
        let mut transitions = Vec::new();
        for &state in &self.states {
            for (i, symbol) in self.alphabet.iter().enumerate() {
                let to = self
                    .edges
                    .iter()
                    .find(|&&(from, on, _)| from == state && on == i)
                    .map(|&(_, _, to)| to)
                    .unwrap_or(state);
                transitions.push((state.to_owned(), symbol.clone(), to.to_owned()));
            }
        }
        let dfa = Dfa::build(
            self.alphabet,
            self.states.iter().map(|s| s.to_string()).collect(),
            self.states[0],
            &self
                .verdict
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>(),
            &transitions,
        )
        .expect("pattern templates are well-formed");
        dfa.minimize()
    }
}

/// Compiles a pattern/scope instance into its bad-prefix DFA.
///
/// The automata are minimized, so behaviorally equivalent "satisfied" and
/// "scope closed" situations share a state; the extracted independence
/// relations then match the usual hand-drawn minimal automata. Patterns
/// with no finite bad prefix in a scope (global/after-q existence and
/// response) collapse to a single verdict-free state.
pub fn build_pattern(spec: &PatternSpec) -> Result<Dfa, PatternError> {
    let expected = spec.pattern.arity() + spec.scope.arity();
    if spec.symbols.len() != expected {
        return Err(PatternError::ArityMismatch {
            pattern: spec.pattern.as_str(),
            scope: spec.scope.as_str(),
            expected,
            got: spec.symbols.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for s in &spec.symbols {
        if !seen.insert(s) {
            return Err(PatternError::RepeatedSymbol(s.clone()));
        }
    }

    let alphabet: Vec<String> = spec.symbols.clone();
    // Symbol positions: pattern symbols come first, scope symbols last.
    // For between-q-and-r the opening symbol precedes the closing one.
    let base = spec.pattern.arity();
    let open = base; // after-q / between: scope opener
    let close = match spec.scope {
        Scope::BeforeR => base,
        Scope::BetweenQAndR => base + 1,
        _ => usize::MAX,
    };

    use Pattern::*;
    use Scope::*;
    let t = |states: Vec<&'static str>,
             edges: Vec<(&'static str, usize, &'static str)>,
             verdict: Vec<&'static str>| {
        TemplateDfa {
            alphabet: alphabet.clone(),
            states,
            edges,
            verdict,
        }
    };

    // Pattern symbol positions (by declared order).
    let p0 = 0;
    let p1 = 1;
    let p2 = 2;

    let template = match (spec.pattern, spec.scope) {
        (Absence, Global) => t(
            vec!["clean", "bad"],
            vec![("clean", p0, "bad")],
            vec!["bad"],
        ),
        (Absence, BeforeR) => t(
            vec!["clean", "pending", "done", "bad"],
            vec![
                ("clean", p0, "pending"),
                ("clean", close, "done"),
                ("pending", close, "bad"),
            ],
            vec!["bad"],
        ),
        (Absence, AfterQ) => t(
            vec!["before", "active", "bad"],
            vec![("before", open, "active"), ("active", p0, "bad")],
            vec!["bad"],
        ),
        (Absence, BetweenQAndR) => t(
            vec!["out", "in", "dirty", "bad"],
            vec![
                ("out", open, "in"),
                ("in", p0, "dirty"),
                ("in", close, "out"),
                ("dirty", close, "bad"),
            ],
            vec!["bad"],
        ),

        (Existence, Global) => t(
            vec!["waiting", "done"],
            vec![("waiting", p0, "done")],
            vec![],
        ),
        (Existence, BeforeR) => t(
            vec!["waiting", "done", "bad"],
            vec![("waiting", p0, "done"), ("waiting", close, "bad")],
            vec!["bad"],
        ),
        (Existence, AfterQ) => t(
            vec!["before", "waiting", "done"],
            vec![("before", open, "waiting"), ("waiting", p0, "done")],
            vec![],
        ),
        (Existence, BetweenQAndR) => t(
            vec!["out", "waiting", "got", "bad"],
            vec![
                ("out", open, "waiting"),
                ("waiting", p0, "got"),
                ("waiting", close, "bad"),
                ("got", close, "out"),
            ],
            vec!["bad"],
        ),

        // precedence(s, p): p may only occur once s has occurred.
        (Precedence, Global) => t(
            vec!["fresh", "ok", "bad"],
            vec![("fresh", p0, "ok"), ("fresh", p1, "bad")],
            vec!["bad"],
        ),
        (Precedence, BeforeR) => t(
            vec!["fresh", "ok", "pending", "bad"],
            vec![
                ("fresh", p0, "ok"),
                ("fresh", p1, "pending"),
                ("fresh", close, "ok"),
                ("pending", close, "bad"),
            ],
            vec!["bad"],
        ),
        (Precedence, AfterQ) => t(
            vec!["before", "fresh", "ok", "bad"],
            vec![
                ("before", open, "fresh"),
                ("fresh", p0, "ok"),
                ("fresh", p1, "bad"),
            ],
            vec!["bad"],
        ),
        (Precedence, BetweenQAndR) => t(
            vec!["out", "fresh", "ok", "pending", "bad"],
            vec![
                ("out", open, "fresh"),
                ("fresh", p0, "ok"),
                ("fresh", p1, "pending"),
                ("fresh", close, "out"),
                ("ok", close, "out"),
                ("pending", close, "bad"),
            ],
            vec!["bad"],
        ),

        // response(p, s): every p is eventually answered by s.
        (Response, Global) => t(
            vec!["idle", "pending"],
            vec![("idle", p0, "pending"), ("pending", p1, "idle")],
            vec![],
        ),
        (Response, BeforeR) => t(
            vec!["idle", "pending", "done", "bad"],
            vec![
                ("idle", p0, "pending"),
                ("idle", close, "done"),
                ("pending", p1, "idle"),
                ("pending", close, "bad"),
            ],
            vec!["bad"],
        ),
        (Response, AfterQ) => t(
            vec!["before", "idle", "pending"],
            vec![
                ("before", open, "idle"),
                ("idle", p0, "pending"),
                ("pending", p1, "idle"),
            ],
            vec![],
        ),
        (Response, BetweenQAndR) => t(
            vec!["out", "idle", "pending", "bad"],
            vec![
                ("out", open, "idle"),
                ("idle", p0, "pending"),
                ("idle", close, "out"),
                ("pending", p1, "idle"),
                ("pending", close, "bad"),
            ],
            vec!["bad"],
        ),

        // precedence-chain-2(s, t, p): s then t must both precede any p.
        (PrecedenceChain2, Global) => t(
            vec!["none", "half", "ok", "bad"],
            vec![
                ("none", p0, "half"),
                ("none", p2, "bad"),
                ("half", p1, "ok"),
                ("half", p2, "bad"),
            ],
            vec!["bad"],
        ),
        (PrecedenceChain2, BeforeR) => t(
            vec!["none", "half", "ok", "pending", "bad"],
            vec![
                ("none", p0, "half"),
                ("none", p2, "pending"),
                ("none", close, "ok"),
                ("half", p1, "ok"),
                ("half", p2, "pending"),
                ("half", close, "ok"),
                ("pending", close, "bad"),
            ],
            vec!["bad"],
        ),
        (PrecedenceChain2, AfterQ) => t(
            vec!["before", "none", "half", "ok", "bad"],
            vec![
                ("before", open, "none"),
                ("none", p0, "half"),
                ("none", p2, "bad"),
                ("half", p1, "ok"),
                ("half", p2, "bad"),
            ],
            vec!["bad"],
        ),
        (PrecedenceChain2, BetweenQAndR) => t(
            vec!["out", "none", "half", "ok", "pending", "bad"],
            vec![
                ("out", open, "none"),
                ("none", p0, "half"),
                ("none", p2, "pending"),
                ("none", close, "out"),
                ("half", p1, "ok"),
                ("half", p2, "pending"),
                ("half", close, "out"),
                ("ok", close, "out"),
                ("pending", close, "bad"),
            ],
            vec!["bad"],
        ),

        // response-chain-2(p, s, t): every p is followed by s and then t.
        (ResponseChain2, Global) => t(
            vec!["idle", "want_s", "want_t"],
            vec![
                ("idle", p0, "want_s"),
                ("want_s", p1, "want_t"),
                ("want_t", p0, "want_s"),
                ("want_t", p2, "idle"),
            ],
            vec![],
        ),
        (ResponseChain2, BeforeR) => t(
            vec!["idle", "want_s", "want_t", "done", "bad"],
            vec![
                ("idle", p0, "want_s"),
                ("idle", close, "done"),
                ("want_s", p1, "want_t"),
                ("want_s", close, "bad"),
                ("want_t", p0, "want_s"),
                ("want_t", p2, "idle"),
                ("want_t", close, "bad"),
            ],
            vec!["bad"],
        ),
        (ResponseChain2, AfterQ) => t(
            vec!["before", "idle", "want_s", "want_t"],
            vec![
                ("before", open, "idle"),
                ("idle", p0, "want_s"),
                ("want_s", p1, "want_t"),
                ("want_t", p0, "want_s"),
                ("want_t", p2, "idle"),
            ],
            vec![],
        ),
        (ResponseChain2, BetweenQAndR) => t(
            vec!["out", "idle", "want_s", "want_t", "bad"],
            vec![
                ("out", open, "idle"),
                ("idle", p0, "want_s"),
                ("idle", close, "out"),
                ("want_s", p1, "want_t"),
                ("want_s", close, "bad"),
                ("want_t", p0, "want_s"),
                ("want_t", p2, "idle"),
                ("want_t", close, "bad"),
            ],
            vec!["bad"],
        ),
    };

    Ok(template.build())
}

/// The built-in pattern library: every pattern crossed with every scope,
/// using conventional symbol names (24 automata).
pub fn pattern_library() -> Vec<(PatternSpec, Dfa)> {
    let mut out = Vec::new();
    for &pattern in &Pattern::ALL {
        let base: Vec<&str> = match pattern {
            Pattern::Absence | Pattern::Existence => vec!["p"],
            Pattern::Precedence => vec!["s", "p"],
            Pattern::Response => vec!["p", "s"],
            Pattern::PrecedenceChain2 => vec!["s", "t", "p"],
            Pattern::ResponseChain2 => vec!["p", "s", "t"],
        };
        for &scope in &Scope::ALL {
            let mut symbols = base.clone();
            match scope {
                Scope::Global => {}
                Scope::BeforeR => symbols.push("r"),
                Scope::AfterQ => symbols.push("q"),
                Scope::BetweenQAndR => {
                    symbols.push("q");
                    symbols.push("r");
                }
            }
            let spec = PatternSpec::new(pattern, scope, symbols);
            let dfa = build_pattern(&spec).expect("library specs are well-formed");
            out.push((spec, dfa));
        }
    }
    out
}

/// Mean percentage of independent distinct-symbol pairs, grouped by
/// pattern and alphabet size. Single-letter specifications are excluded.
pub fn independence_stats(
    specs: &[PatternSpec],
) -> Result<BTreeMap<(Pattern, usize), f64>, PatternError> {
    let mut sums: BTreeMap<(Pattern, usize), (f64, usize)> = BTreeMap::new();
    for spec in specs {
        let dfa = build_pattern(spec)?;
        let n = dfa.alphabet().len();
        if n < 2 {
            continue;
        }
        let entry = sums.entry((spec.pattern, n)).or_insert((0.0, 0));
        entry.0 += independence_percentage(&dfa);
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect())
}
