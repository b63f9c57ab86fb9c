//! Actions, vector clocks, and the JSON-lines wire format.
//!
//! An action is the smallest observed program step: either a *regular*
//! event (the ones a property talks about) or a *synchronization action*
//! (lock/unlock, fork/begin, end/join, read/write, notify/wait) that
//! establishes release-acquire order between threads. Streams are UTF-8
//! JSON Lines, one action per line, sorted by the global arrival index
//! `seq`.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Identifier of one thread within a stream.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThreadId(pub u32);

impl fmt::Display for ThreadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The kind of a program step.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Regular,
    Lock,
    Unlock,
    Fork,
    Begin,
    End,
    Join,
    Read,
    Write,
    Notify,
    Wait,
}

impl ActionKind {
    pub const ALL: [ActionKind; 11] = [
        ActionKind::Regular,
        ActionKind::Lock,
        ActionKind::Unlock,
        ActionKind::Fork,
        ActionKind::Begin,
        ActionKind::End,
        ActionKind::Join,
        ActionKind::Read,
        ActionKind::Write,
        ActionKind::Notify,
        ActionKind::Wait,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::Regular => "regular",
            ActionKind::Lock => "lock",
            ActionKind::Unlock => "unlock",
            ActionKind::Fork => "fork",
            ActionKind::Begin => "begin",
            ActionKind::End => "end",
            ActionKind::Join => "join",
            ActionKind::Read => "read",
            ActionKind::Write => "write",
            ActionKind::Notify => "notify",
            ActionKind::Wait => "wait",
        }
    }

    pub fn is_regular(&self) -> bool {
        matches!(self, ActionKind::Regular)
    }

    pub fn is_sync(&self) -> bool {
        !self.is_regular()
    }

    /// Release class: the action publishes its thread's clock on a resource.
    /// `notify` follows release semantics on the signal id.
    pub fn is_release(&self) -> bool {
        matches!(
            self,
            ActionKind::Unlock | ActionKind::Fork | ActionKind::End | ActionKind::Notify
        )
    }

    /// Acquire class: the action picks up the clock of the matching release.
    /// `wait` follows acquire semantics on the signal id.
    pub fn is_acquire(&self) -> bool {
        matches!(
            self,
            ActionKind::Lock | ActionKind::Begin | ActionKind::Join | ActionKind::Wait
        )
    }
}

/// One program step as it appears on the wire.
///
/// Field rules (checked by [`parse_action_line`]):
/// - `label` is required iff `kind = regular`;
/// - `res` is required for every synchronization action: the lock id, the
///   shared-variable id, the signal id, or the peer thread id (fork/join
///   carry the *target* thread, begin/end the *own* thread);
/// - `val` is required iff `kind` is `read` or `write`;
/// - `idx` is the 0-based occurrence index within the emitting thread and
///   must increase by exactly one per action of that thread;
/// - `seq` is the global arrival index at the collector. It is **not**
///   causal order; it only records how the stream was observed.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Action {
    pub seq: u64,
    pub tid: ThreadId,
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<String>,
    pub idx: u64,
}

impl Action {
    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn res(&self) -> Option<&str> {
        self.res.as_deref()
    }

    pub fn val(&self) -> Option<&str> {
        self.val.as_deref()
    }
}

/// Errors from decoding a single stream line.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("unknown kind `{0}`")]
    BadKind(String),
    #[error("missing field `{field}` for kind `{kind}`")]
    MissingField {
        kind: &'static str,
        field: &'static str,
    },
    #[error("stream must be strictly seq-sorted: {found} after {prev}")]
    SeqOutOfOrder { prev: u64, found: u64 },
}

fn require(present: bool, kind: ActionKind, field: &'static str) -> Result<(), ParseError> {
    if present {
        Ok(())
    } else {
        Err(ParseError::MissingField {
            kind: kind.as_str(),
            field,
        })
    }
}

/// Checks the kind-dependent field rules of [`Action`].
pub fn check_fields(a: &Action) -> Result<(), ParseError> {
    match a.kind {
        ActionKind::Regular => require(a.label.is_some(), a.kind, "label"),
        ActionKind::Read | ActionKind::Write => {
            require(a.res.is_some(), a.kind, "res")?;
            require(a.val.is_some(), a.kind, "val")
        }
        _ => require(a.res.is_some(), a.kind, "res"),
    }
}

/// Decodes one JSON line into an [`Action`]. Unknown fields are ignored.
pub fn parse_action_line(line: &str) -> Result<Action, ParseError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| ParseError::MalformedLine(e.to_string()))?;
    // Distinguish a bad `kind` string from a structurally bad line.
    if let Some(kind) = value.get("kind").and_then(|k| k.as_str()) {
        if !ActionKind::ALL.iter().any(|k| k.as_str() == kind) {
            return Err(ParseError::BadKind(kind.to_owned()));
        }
    }
    let action: Action =
        serde_json::from_value(value).map_err(|e| ParseError::MalformedLine(e.to_string()))?;
    check_fields(&action)?;
    Ok(action)
}

/// Encodes an action as one canonical JSON line (no trailing newline).
/// Inverse of [`parse_action_line`] for every valid action.
pub fn serialize_action(a: &Action) -> String {
    serde_json::to_string(a).expect("action serialization cannot fail")
}

/// Parses a whole JSONL stream, enforcing the wire contract that lines
/// are strictly seq-sorted. Blank lines are skipped; the line number
/// (1-based) is attached to errors.
pub fn parse_stream(text: &str) -> Result<Vec<Action>, (usize, ParseError)> {
    let mut out: Vec<Action> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let action = parse_action_line(line).map_err(|e| (i + 1, e))?;
        if let Some(prev) = out.last() {
            if action.seq <= prev.seq {
                return Err((
                    i + 1,
                    ParseError::SeqOutOfOrder {
                        prev: prev.seq,
                        found: action.seq,
                    },
                ));
            }
        }
        out.push(action);
    }
    Ok(out)
}

/// A vector timestamp: per-thread counters, absent entry meaning 0.
///
/// Kept as a sorted `(tid, counter)` vector; every stored counter is
/// nonzero. The partial order `⊑` is componentwise ≤.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct VectorClock {
    entries: Vec<(ThreadId, u64)>,
}

impl VectorClock {
    pub fn new() -> VectorClock {
        VectorClock::default()
    }

    /// Builds a clock from explicit entries; zero counters are dropped.
    pub fn from_entries<I: IntoIterator<Item = (ThreadId, u64)>>(entries: I) -> VectorClock {
        let mut v: Vec<(ThreadId, u64)> = entries.into_iter().filter(|&(_, c)| c > 0).collect();
        v.sort_by_key(|&(t, _)| t);
        v.dedup_by_key(|&mut (t, _)| t);
        VectorClock { entries: v }
    }

    pub fn get(&self, tid: ThreadId) -> u64 {
        match self.entries.binary_search_by_key(&tid, |&(t, _)| t) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    pub fn entries(&self) -> &[(ThreadId, u64)] {
        &self.entries
    }

    /// Increments the component of `tid` by one.
    pub fn inc(&mut self, tid: ThreadId) {
        match self.entries.binary_search_by_key(&tid, |&(t, _)| t) {
            Ok(i) => self.entries[i].1 += 1,
            Err(i) => self.entries.insert(i, (tid, 1)),
        }
    }

    /// Componentwise maximum (the ⊔ join).
    pub fn join(&mut self, other: &VectorClock) {
        let mut merged = Vec::with_capacity(self.entries.len().max(other.entries.len()));
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ta, ca) = self.entries[i];
            let (tb, cb) = other.entries[j];
            match ta.cmp(&tb) {
                std::cmp::Ordering::Less => {
                    merged.push((ta, ca));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push((tb, cb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    merged.push((ta, ca.max(cb)));
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&self.entries[i..]);
        merged.extend_from_slice(&other.entries[j..]);
        self.entries = merged;
    }

    /// The ⊑ comparison: every component of `self` is ≤ the corresponding
    /// component of `other` (absent entries read as 0).
    pub fn leq(&self, other: &VectorClock) -> bool {
        self.entries.iter().all(|&(t, c)| c <= other.get(t))
    }

    /// Neither clock ⊑ the other.
    pub fn concurrent(&self, other: &VectorClock) -> bool {
        !self.leq(other) && !other.leq(self)
    }
}

impl Serialize for VectorClock {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for &(t, c) in &self.entries {
            map.serialize_entry(&t.0.to_string(), &c)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for VectorClock {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<VectorClock, D::Error> {
        struct VcVisitor;
        impl<'de> Visitor<'de> for VcVisitor {
            type Value = VectorClock;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from thread id to counter")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<VectorClock, A::Error> {
                let mut entries = BTreeMap::new();
                while let Some((k, v)) = access.next_entry::<String, u64>()? {
                    let tid: u32 = k
                        .parse()
                        .map_err(|_| serde::de::Error::custom(format!("bad thread id `{k}`")))?;
                    entries.insert(ThreadId(tid), v);
                }
                Ok(VectorClock::from_entries(entries))
            }
        }
        deserializer.deserialize_map(VcVisitor)
    }
}

/// A regular action together with its final vector timestamp.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TimestampedEvent {
    #[serde(flatten)]
    pub action: Action,
    pub vc: VectorClock,
}

impl TimestampedEvent {
    pub fn seq(&self) -> u64 {
        self.action.seq
    }
}

/// Parses a timestamped-trace JSONL document (action fields plus `vc`).
pub fn parse_trace(text: &str) -> Result<Vec<TimestampedEvent>, (usize, ParseError)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev: TimestampedEvent = serde_json::from_str(line)
            .map_err(|e| (i + 1, ParseError::MalformedLine(e.to_string())))?;
        check_fields(&ev.action).map_err(|e| (i + 1, e))?;
        out.push(ev);
    }
    Ok(out)
}

/// Serializes a timestamped event as one JSON line.
pub fn serialize_event(ev: &TimestampedEvent) -> String {
    serde_json::to_string(ev).expect("event serialization cannot fail")
}

/// A departure from the instrumentation contract the reordering engine
/// assumes. Violations are data: an ingested stream may carry any number
/// of them.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StreamViolation {
    /// Per-thread `idx` must be 0,1,2,… with no gaps.
    IdxNotContiguous {
        tid: ThreadId,
        expected: u64,
        found: u64,
        seq: u64,
    },
    /// `begin(u)` must be thread u's first action.
    BeginNotFirst { tid: ThreadId, seq: u64 },
    /// `end(t)` must be thread t's last action; `seq` is the offender after it.
    ActionAfterEnd { tid: ThreadId, seq: u64 },
    /// `join(u,t)` may only appear after `end(t)`.
    JoinBeforeEnd {
        tid: ThreadId,
        target: ThreadId,
        seq: u64,
    },
    /// `begin(u)` may only appear after some `fork(·,u)`.
    BeginBeforeFork { tid: ThreadId, seq: u64 },
}

/// Checks a seq-ordered stream against the delivery contract. An empty
/// result means the stream is conformant.
pub fn validate_stream(actions: &[Action]) -> Vec<StreamViolation> {
    let mut violations = Vec::new();
    let mut next_idx: BTreeMap<ThreadId, u64> = BTreeMap::new();
    let mut forked: BTreeMap<ThreadId, bool> = BTreeMap::new();
    let mut ended: BTreeMap<ThreadId, bool> = BTreeMap::new();

    for a in actions {
        let expected = next_idx.entry(a.tid).or_insert(0);
        if a.idx != *expected {
            violations.push(StreamViolation::IdxNotContiguous {
                tid: a.tid,
                expected: *expected,
                found: a.idx,
                seq: a.seq,
            });
            // Resynchronize on the observed index so one gap is one violation.
            *expected = a.idx + 1;
        } else {
            *expected += 1;
        }

        if ended.get(&a.tid).copied().unwrap_or(false) {
            violations.push(StreamViolation::ActionAfterEnd {
                tid: a.tid,
                seq: a.seq,
            });
        }

        match a.kind {
            ActionKind::Begin => {
                if a.idx != 0 {
                    violations.push(StreamViolation::BeginNotFirst {
                        tid: a.tid,
                        seq: a.seq,
                    });
                }
                if !forked.get(&a.tid).copied().unwrap_or(false) {
                    violations.push(StreamViolation::BeginBeforeFork {
                        tid: a.tid,
                        seq: a.seq,
                    });
                }
            }
            ActionKind::End => {
                ended.insert(a.tid, true);
            }
            ActionKind::Fork => {
                if let Some(target) = a.res().and_then(|r| r.parse().ok()) {
                    forked.insert(ThreadId(target), true);
                }
            }
            ActionKind::Join => {
                if let Some(target) = a.res().and_then(|r| r.parse().ok()) {
                    let target = ThreadId(target);
                    if !ended.get(&target).copied().unwrap_or(false) {
                        violations.push(StreamViolation::JoinBeforeEnd {
                            tid: a.tid,
                            target,
                            seq: a.seq,
                        });
                    }
                }
            }
            _ => {}
        }
    }
    violations
}
