//! Ground-truth execution orders, trace partial orders, and the
//! soundness / faithfulness calculus, including the brute-force
//! transitive-closure oracle used to validate the clock engine.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dfa::DependenceRelation;
use crate::event::{Action, ActionKind, ThreadId, TimestampedEvent, VectorClock};

/// An ordered pair of event ids (global `seq` values).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct OrderPair {
    pub from: u64,
    pub to: u64,
}

impl OrderPair {
    pub fn new(from: u64, to: u64) -> OrderPair {
        OrderPair { from, to }
    }
}

/// The ground-truth poset of one program run: all actions plus the
/// thread-order and synchronization-order edges as they actually
/// happened. The execution order is the transitive closure of both.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConcurrentExecution {
    pub actions: Vec<Action>,
    /// Consecutive same-thread pairs, as (seq, seq).
    pub thread_edges: Vec<(u64, u64)>,
    /// Release → matching acquire pairs, as (seq, seq).
    pub sync_edges: Vec<(u64, u64)>,
}

impl ConcurrentExecution {
    pub fn action(&self, seq: u64) -> Option<&Action> {
        self.actions.iter().find(|a| a.seq == seq)
    }
}

/// A set of timestamped regular events; the order is induced by ⊑ on
/// the attached clocks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConcurrentTrace {
    pub events: Vec<TimestampedEvent>,
}

impl ConcurrentTrace {
    pub fn new(events: Vec<TimestampedEvent>) -> ConcurrentTrace {
        ConcurrentTrace { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn event(&self, seq: u64) -> Option<&TimestampedEvent> {
        self.events.iter().find(|e| e.seq() == seq)
    }

    /// All ordered pairs of the trace: (a, b) with `a.vc ⊑ b.vc`, a ≠ b.
    pub fn order_pairs(&self) -> BTreeSet<OrderPair> {
        let mut pairs = BTreeSet::new();
        for a in &self.events {
            for b in &self.events {
                if a.seq() != b.seq() && a.vc.leq(&b.vc) {
                    pairs.insert(OrderPair::new(a.seq(), b.seq()));
                }
            }
        }
        pairs
    }

    /// Restricts the trace to events whose label lies in `sigma`.
    pub fn restrict_to(&self, sigma: &BTreeSet<String>) -> ConcurrentTrace {
        ConcurrentTrace::new(
            self.events
                .iter()
                .filter(|e| e.action.label().is_some_and(|l| sigma.contains(l)))
                .cloned()
                .collect(),
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrderError {
    #[error("execution edge relation contains a cycle")]
    CyclicExecution,
    #[error("unknown event {0}")]
    UnknownEvent(u64),
    #[error("edge endpoint {0} is not an execution action")]
    UnknownEdgeEndpoint(u64),
    #[error("trace is not sound for this execution; ratio undefined")]
    UnsoundTrace,
    #[error("execution lacks an ordering required by the dependence relation")]
    NotMonitorableExecution,
}

/// The strict transitive closure of thread order ∪ synchronization order.
/// This is the brute-force oracle everything else is checked against.
pub fn execution_order(exec: &ConcurrentExecution) -> Result<BTreeSet<OrderPair>, OrderError> {
    let index: BTreeMap<u64, usize> = exec
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| (a.seq, i))
        .collect();
    let n = exec.actions.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for &(from, to) in exec.thread_edges.iter().chain(exec.sync_edges.iter()) {
        let &f = index
            .get(&from)
            .ok_or(OrderError::UnknownEdgeEndpoint(from))?;
        let &t = index.get(&to).ok_or(OrderError::UnknownEdgeEndpoint(to))?;
        succ[f].push(t);
        indegree[t] += 1;
    }

    // Kahn topological order; incomplete output means a cycle.
    let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(v) = queue.pop() {
        topo.push(v);
        for &s in &succ[v] {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                queue.push(s);
            }
        }
    }
    if topo.len() != n {
        return Err(OrderError::CyclicExecution);
    }

    // Reachability bitsets, filled in reverse topological order.
    let words = n.div_ceil(64);
    let mut reach: Vec<Vec<u64>> = vec![vec![0u64; words]; n];
    for &v in topo.iter().rev() {
        // Split borrow: take the row out, fold successors in, put it back.
        let mut row = std::mem::take(&mut reach[v]);
        for &s in &succ[v] {
            row[s / 64] |= 1u64 << (s % 64);
            for (w, bits) in reach[s].iter().enumerate() {
                row[w] |= bits;
            }
        }
        reach[v] = row;
    }

    let mut pairs = BTreeSet::new();
    for (v, row) in reach.iter().enumerate() {
        for (w, &bits) in row.iter().enumerate() {
            let mut bits = bits;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let u = w * 64 + b;
                pairs.insert(OrderPair::new(exec.actions[v].seq, exec.actions[u].seq));
            }
        }
    }
    Ok(pairs)
}

/// True iff `a`'s clock is componentwise ≤ `b`'s and the events differ.
pub fn happens_before(trace: &ConcurrentTrace, a: u64, b: u64) -> Result<bool, OrderError> {
    let ea = trace.event(a).ok_or(OrderError::UnknownEvent(a))?;
    let eb = trace.event(b).ok_or(OrderError::UnknownEvent(b))?;
    Ok(a != b && ea.vc.leq(&eb.vc))
}

/// Keeps only pairs whose endpoints are labeled and the labels lie in `sigma`.
pub fn project(
    order: &BTreeSet<OrderPair>,
    actions: &[Action],
    sigma: &BTreeSet<String>,
) -> BTreeSet<OrderPair> {
    let labeled: BTreeSet<u64> = actions
        .iter()
        .filter(|a| a.label().is_some_and(|l| sigma.contains(l)))
        .map(|a| a.seq)
        .collect();
    order
        .iter()
        .filter(|p| labeled.contains(&p.from) && labeled.contains(&p.to))
        .copied()
        .collect()
}

/// Result of the trace-soundness check (Does the trace invent order or
/// events the execution never had?).
#[derive(Clone, Debug, Serialize)]
pub struct SoundnessReport {
    pub holds: bool,
    /// Trace-ordered pairs absent from the execution order.
    pub violations: Vec<OrderPair>,
    /// Trace events that are not execution actions at all.
    pub foreign_events: Vec<u64>,
}

/// A trace is sound iff its events all come from the execution and every
/// trace-ordered pair is in the execution order.
pub fn check_soundness(
    exec: &ConcurrentExecution,
    trace: &ConcurrentTrace,
) -> Result<SoundnessReport, OrderError> {
    let exec_order = execution_order(exec)?;
    let known: BTreeSet<u64> = exec.actions.iter().map(|a| a.seq).collect();
    let foreign_events: Vec<u64> = trace
        .events
        .iter()
        .map(|e| e.seq())
        .filter(|s| !known.contains(s))
        .collect();
    let violations: Vec<OrderPair> = trace
        .order_pairs()
        .into_iter()
        .filter(|p| !exec_order.contains(p))
        .collect();
    Ok(SoundnessReport {
        holds: violations.is_empty() && foreign_events.is_empty(),
        violations,
        foreign_events,
    })
}

/// Result of the trace-faithfulness check (Does the trace keep every
/// execution ordering over its events?).
#[derive(Clone, Debug, Serialize)]
pub struct FaithfulnessReport {
    pub holds: bool,
    /// Execution pairs over trace events that the trace does not order.
    pub missing: Vec<OrderPair>,
}

pub fn check_faithfulness(
    exec: &ConcurrentExecution,
    trace: &ConcurrentTrace,
) -> Result<FaithfulnessReport, OrderError> {
    let exec_order = execution_order(exec)?;
    let events: BTreeSet<u64> = trace.events.iter().map(|e| e.seq()).collect();
    let trace_order = trace.order_pairs();
    let missing: Vec<OrderPair> = exec_order
        .into_iter()
        .filter(|p| events.contains(&p.from) && events.contains(&p.to))
        .filter(|p| !trace_order.contains(p))
        .collect();
    Ok(FaithfulnessReport {
        holds: missing.is_empty(),
        missing,
    })
}

/// |→t| / |→e ∩ E×E| for a sound trace. A zero denominator (nothing to
/// order) counts as fully faithful: ratio 1.
pub fn faithfulness_ratio(
    exec: &ConcurrentExecution,
    trace: &ConcurrentTrace,
) -> Result<Ratio<u64>, OrderError> {
    let soundness = check_soundness(exec, trace)?;
    if !soundness.holds {
        return Err(OrderError::UnsoundTrace);
    }
    let events: BTreeSet<u64> = trace.events.iter().map(|e| e.seq()).collect();
    let denominator = execution_order(exec)?
        .into_iter()
        .filter(|p| events.contains(&p.from) && events.contains(&p.to))
        .count() as u64;
    if denominator == 0 {
        return Ok(Ratio::from_integer(1));
    }
    Ok(Ratio::new(trace.order_pairs().len() as u64, denominator))
}

fn transitive_closure_of(pairs: &BTreeSet<OrderPair>) -> BTreeSet<OrderPair> {
    let nodes: BTreeSet<u64> = pairs.iter().flat_map(|p| [p.from, p.to]).collect();
    let mut closed = pairs.clone();
    loop {
        let mut grew = false;
        for &a in &nodes {
            for &b in &nodes {
                if closed.contains(&OrderPair::new(a, b)) {
                    for &c in &nodes {
                        if closed.contains(&OrderPair::new(b, c))
                            && closed.insert(OrderPair::new(a, c))
                        {
                            grew = true;
                        }
                    }
                }
            }
        }
        if !grew {
            return closed;
        }
    }
}

/// The smallest faithfulness ratio that still permits sound monitoring:
/// the dependence-required orderings of the execution, transitively
/// closed, over all execution orderings between property events.
///
/// Errs if the execution itself lacks an ordering the dependence relation
/// needs (then no sound sub-trace can be monitorable).
pub fn optimal_ratio(
    exec: &ConcurrentExecution,
    dep: &DependenceRelation,
    sigma: &BTreeSet<String>,
) -> Result<Ratio<u64>, OrderError> {
    let events: Vec<&Action> = exec
        .actions
        .iter()
        .filter(|a| a.kind == ActionKind::Regular)
        .filter(|a| a.label().is_some_and(|l| sigma.contains(l)))
        .collect();
    let event_seqs: BTreeSet<u64> = events.iter().map(|a| a.seq).collect();
    let label_of: BTreeMap<u64, &str> =
        events.iter().map(|a| (a.seq, a.label().unwrap())).collect();

    let order: BTreeSet<OrderPair> = execution_order(exec)?
        .into_iter()
        .filter(|p| event_seqs.contains(&p.from) && event_seqs.contains(&p.to))
        .collect();

    // Precondition: every D-related event pair must be ordered somewhere
    // in the execution, else the property is unmonitorable over it.
    for (i, a) in events.iter().enumerate() {
        for b in &events[i + 1..] {
            if dep.related(label_of[&a.seq], label_of[&b.seq])
                && !order.contains(&OrderPair::new(a.seq, b.seq))
                && !order.contains(&OrderPair::new(b.seq, a.seq))
            {
                return Err(OrderError::NotMonitorableExecution);
            }
        }
    }

    let required: BTreeSet<OrderPair> = order
        .iter()
        .filter(|p| dep.related(label_of[&p.from], label_of[&p.to]))
        .copied()
        .collect();
    let numerator = transitive_closure_of(&required).len() as u64;
    if numerator == 0 {
        return Ok(Ratio::from_integer(0));
    }
    Ok(Ratio::new(numerator, order.len() as u64))
}

/// Timestamps a stream as a naive collector would: every regular event
/// totally ordered by arrival. This is the unsound "linear trace" that
/// concurrent traces exist to replace; kept as a comparison baseline.
pub fn linear_trace(actions: &[Action]) -> ConcurrentTrace {
    let mut counts: BTreeMap<ThreadId, u64> = BTreeMap::new();
    let mut events = Vec::new();
    for a in actions {
        if a.kind != ActionKind::Regular {
            continue;
        }
        *counts.entry(a.tid).or_insert(0) += 1;
        events.push(TimestampedEvent {
            action: a.clone(),
            vc: VectorClock::from_entries(counts.iter().map(|(&t, &c)| (t, c))),
        });
    }
    ConcurrentTrace::new(events)
}

/// Timestamps a stream keeping thread order only (every cross-thread pair
/// concurrent). Sound but typically unfaithful.
pub fn thread_order_trace(actions: &[Action]) -> ConcurrentTrace {
    let mut counts: BTreeMap<ThreadId, u64> = BTreeMap::new();
    let mut events = Vec::new();
    for a in actions {
        if a.kind != ActionKind::Regular {
            continue;
        }
        let c = counts.entry(a.tid).or_insert(0);
        *c += 1;
        events.push(TimestampedEvent {
            action: a.clone(),
            vc: VectorClock::from_entries([(a.tid, *c)]),
        });
    }
    ConcurrentTrace::new(events)
}

/// Expands events into before/after delimiter pairs, preserving the
/// trace order exactly.
///
/// An event labeled `l` with clock C becomes `before` at 2·C − 1 on its
/// own component and `after` at 2·C; doubling keeps ⊑ intact and the −1
/// slot orders the two halves. Labels without a mapping stay single
/// events (at 2·C). Fresh ids: seq 2s (before/single) and 2s+1 (after).
pub fn delimit(
    trace: &ConcurrentTrace,
    map: &BTreeMap<String, (String, String)>,
) -> ConcurrentTrace {
    let mut events = Vec::new();
    for e in &trace.events {
        let doubled = VectorClock::from_entries(e.vc.entries().iter().map(|&(t, c)| (t, 2 * c)));
        let mut before = doubled.clone();
        let own = before.get(e.action.tid);
        let mut before_entries: Vec<(ThreadId, u64)> = before
            .entries()
            .iter()
            .map(|&(t, c)| {
                if t == e.action.tid {
                    (t, own - 1)
                } else {
                    (t, c)
                }
            })
            .collect();
        before_entries.retain(|&(_, c)| c > 0);
        before = VectorClock::from_entries(before_entries);

        match e.action.label().and_then(|l| map.get(l)) {
            Some((before_label, after_label)) => {
                let mut first = e.action.clone();
                first.seq = 2 * e.action.seq;
                first.idx = 2 * e.action.idx;
                first.label = Some(before_label.clone());
                let mut second = e.action.clone();
                second.seq = 2 * e.action.seq + 1;
                second.idx = 2 * e.action.idx + 1;
                second.label = Some(after_label.clone());
                events.push(TimestampedEvent {
                    action: first,
                    vc: before,
                });
                events.push(TimestampedEvent {
                    action: second,
                    vc: doubled,
                });
            }
            None => {
                let mut single = e.action.clone();
                single.seq = 2 * e.action.seq;
                single.idx = 2 * e.action.idx;
                events.push(TimestampedEvent {
                    action: single,
                    vc: doubled,
                });
            }
        }
    }
    ConcurrentTrace::new(events)
}

/// Reconstructs ground truth from a bare stream: thread edges from
/// consecutive same-thread actions, synchronization edges by matching
/// each acquire to the latest preceding release of the same resource in
/// seq order (for reads, the latest write of the same variable and
/// value). Arrival order is taken as one legal linearization; this is
/// used by the oracle and the checks, never by the engine.
pub fn reconstruct_execution(actions: &[Action]) -> ConcurrentExecution {
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Key {
        Lock(String),
        Thread(ThreadId),
        Signal(String),
    }

    let mut last_by_thread: BTreeMap<ThreadId, u64> = BTreeMap::new();
    let mut last_release: BTreeMap<Key, u64> = BTreeMap::new();
    let mut last_write: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut thread_edges = Vec::new();
    let mut sync_edges = Vec::new();

    for a in actions {
        if let Some(&prev) = last_by_thread.get(&a.tid) {
            thread_edges.push((prev, a.seq));
        }
        last_by_thread.insert(a.tid, a.seq);

        let release_key = |a: &Action| -> Option<Key> {
            match a.kind {
                ActionKind::Unlock | ActionKind::Lock => Some(Key::Lock(a.res()?.to_owned())),
                ActionKind::Fork | ActionKind::Join => {
                    Some(Key::Thread(ThreadId(a.res()?.parse().ok()?)))
                }
                ActionKind::End | ActionKind::Begin => Some(Key::Thread(a.tid)),
                ActionKind::Notify | ActionKind::Wait => Some(Key::Signal(a.res()?.to_owned())),
                _ => None,
            }
        };
        // Begin matches the fork that targeted this thread; end is keyed
        // the same way so joins on the thread id find it.
        let acquire_key = |a: &Action| -> Option<Key> {
            match a.kind {
                ActionKind::Lock => Some(Key::Lock(a.res()?.to_owned())),
                ActionKind::Begin => Some(Key::Thread(a.tid)),
                ActionKind::Join => Some(Key::Thread(ThreadId(a.res()?.parse().ok()?))),
                ActionKind::Wait => Some(Key::Signal(a.res()?.to_owned())),
                _ => None,
            }
        };

        match a.kind {
            ActionKind::Unlock | ActionKind::Notify | ActionKind::End => {
                if let Some(k) = release_key(a) {
                    last_release.insert(k, a.seq);
                }
            }
            ActionKind::Fork => {
                if let Some(r) = a.res() {
                    if let Ok(target) = r.parse::<u32>() {
                        last_release.insert(Key::Thread(ThreadId(target)), a.seq);
                    }
                }
            }
            ActionKind::Lock | ActionKind::Begin | ActionKind::Join | ActionKind::Wait => {
                if let Some(k) = acquire_key(a) {
                    if let Some(&rel) = last_release.get(&k) {
                        sync_edges.push((rel, a.seq));
                    }
                }
            }
            ActionKind::Write => {
                if let (Some(x), Some(v)) = (a.res(), a.val()) {
                    last_write.insert((x.to_owned(), v.to_owned()), a.seq);
                }
            }
            ActionKind::Read => {
                if let (Some(x), Some(v)) = (a.res(), a.val()) {
                    if let Some(&w) = last_write.get(&(x.to_owned(), v.to_owned())) {
                        sync_edges.push((w, a.seq));
                    }
                }
            }
            ActionKind::Regular => {}
        }
    }

    ConcurrentExecution {
        actions: actions.to_vec(),
        thread_edges,
        sync_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::ActionKind;

    fn regular(seq: u64, tid: u32, label: &str, idx: u64) -> Action {
        Action {
            seq,
            tid: ThreadId(tid),
            kind: ActionKind::Regular,
            label: Some(label.to_owned()),
            res: None,
            val: None,
            idx,
        }
    }

    fn ev(seq: u64, tid: u32, label: &str, idx: u64, clock: &[(u32, u64)]) -> TimestampedEvent {
        TimestampedEvent {
            action: regular(seq, tid, label, idx),
            vc: VectorClock::from_entries(clock.iter().map(|&(t, c)| (ThreadId(t), c))),
        }
    }

    fn chain_execution() -> ConcurrentExecution {
        ConcurrentExecution {
            actions: vec![
                regular(0, 0, "a", 0),
                regular(1, 0, "b", 1),
                regular(2, 0, "c", 2),
            ],
            thread_edges: vec![(0, 1), (1, 2)],
            sync_edges: vec![],
        }
    }

    #[test]
    fn closure_of_chain() {
        let order = execution_order(&chain_execution()).unwrap();
        let expected: BTreeSet<OrderPair> = [(0, 1), (1, 2), (0, 2)]
            .iter()
            .map(|&(f, t)| OrderPair::new(f, t))
            .collect();
        assert_eq!(order, expected);
    }

    #[test]
    fn disjoint_threads_unordered() {
        let exec = ConcurrentExecution {
            actions: vec![regular(0, 0, "a", 0), regular(1, 1, "b", 0)],
            thread_edges: vec![],
            sync_edges: vec![],
        };
        assert!(execution_order(&exec).unwrap().is_empty());
    }

    #[test]
    fn cycle_is_rejected() {
        let exec = ConcurrentExecution {
            actions: vec![regular(0, 0, "a", 0), regular(1, 0, "b", 1)],
            thread_edges: vec![(0, 1)],
            sync_edges: vec![(1, 0)],
        };
        assert_eq!(execution_order(&exec), Err(OrderError::CyclicExecution));
    }

    #[test]
    fn happens_before_on_clocks() {
        let t = ConcurrentTrace::new(vec![
            ev(0, 0, "a", 0, &[(0, 1)]),
            ev(1, 0, "b", 1, &[(0, 2)]),
            ev(2, 1, "c", 0, &[(1, 1)]),
        ]);
        assert!(happens_before(&t, 0, 1).unwrap());
        assert!(!happens_before(&t, 1, 0).unwrap());
        assert!(!happens_before(&t, 0, 2).unwrap());
        assert!(!happens_before(&t, 2, 0).unwrap());
        assert!(!happens_before(&t, 0, 0).unwrap(), "strictness");
        assert_eq!(happens_before(&t, 0, 99), Err(OrderError::UnknownEvent(99)));
    }

    #[test]
    fn project_is_identity_on_full_sigma() {
        let exec = chain_execution();
        let order = execution_order(&exec).unwrap();
        let sigma: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(project(&order, &exec.actions, &sigma), order);
        assert!(project(&BTreeSet::new(), &exec.actions, &sigma).is_empty());
    }

    // Four collected traces of the 1-writer/2-readers execution, over
    // events 0.w0 (seq 0), r1 (seq 1), r2 (seq 2), 1.w0 (seq 3).
    fn rw_events() -> [Action; 4] {
        [
            regular(0, 0, "w", 0),
            regular(1, 1, "r", 0),
            regular(2, 2, "r", 0),
            regular(3, 0, "w", 1),
        ]
    }

    fn rw_execution() -> ConcurrentExecution {
        let a = rw_events();
        ConcurrentExecution {
            actions: a.to_vec(),
            thread_edges: vec![(0, 3)],
            sync_edges: vec![(0, 1), (0, 2), (1, 3), (2, 3)],
        }
    }

    /// Linear trace t0: w, r1, r2, w — faithful but unsound.
    fn rw_t0() -> ConcurrentTrace {
        ConcurrentTrace::new(vec![
            ev(0, 0, "w", 0, &[(0, 1)]),
            ev(1, 1, "r", 0, &[(0, 1), (1, 1)]),
            ev(2, 2, "r", 0, &[(0, 1), (1, 1), (2, 1)]),
            ev(3, 0, "w", 1, &[(0, 2), (1, 1), (2, 1)]),
        ])
    }

    /// Thread-order-only trace t2: sound but unfaithful.
    fn rw_t2() -> ConcurrentTrace {
        ConcurrentTrace::new(vec![
            ev(0, 0, "w", 0, &[(0, 1)]),
            ev(1, 1, "r", 0, &[(1, 1)]),
            ev(2, 2, "r", 0, &[(2, 1)]),
            ev(3, 0, "w", 1, &[(0, 2)]),
        ])
    }

    /// The sound and faithful partial trace t3.
    fn rw_t3() -> ConcurrentTrace {
        ConcurrentTrace::new(vec![
            ev(0, 0, "w", 0, &[(0, 1)]),
            ev(1, 1, "r", 0, &[(0, 1), (1, 1)]),
            ev(2, 2, "r", 0, &[(0, 1), (2, 1)]),
            ev(3, 0, "w", 1, &[(0, 2), (1, 1), (2, 1)]),
        ])
    }

    #[test]
    fn rw_execution_order_has_the_five_pairs() {
        let order = execution_order(&rw_execution()).unwrap();
        let expected: BTreeSet<OrderPair> = [(0, 1), (0, 2), (1, 3), (2, 3), (0, 3)]
            .iter()
            .map(|&(f, t)| OrderPair::new(f, t))
            .collect();
        assert_eq!(order, expected);
    }

    #[test]
    fn linear_rw_trace_is_faithful_but_unsound() {
        let exec = rw_execution();
        let t0 = rw_t0();
        let s = check_soundness(&exec, &t0).unwrap();
        assert!(!s.holds);
        assert!(
            s.violations.contains(&OrderPair::new(1, 2)),
            "the r1→r2 pair is invented"
        );
        assert!(check_faithfulness(&exec, &t0).unwrap().holds);
    }

    #[test]
    fn thread_order_rw_trace_is_sound_but_unfaithful() {
        let exec = rw_execution();
        let t2 = rw_t2();
        assert!(check_soundness(&exec, &t2).unwrap().holds);
        assert!(!check_faithfulness(&exec, &t2).unwrap().holds);
    }

    #[test]
    fn faithful_and_sound_partial_trace() {
        let exec = rw_execution();
        let t3 = rw_t3();
        assert!(check_soundness(&exec, &t3).unwrap().holds);
        assert!(check_faithfulness(&exec, &t3).unwrap().holds);
        assert_eq!(
            faithfulness_ratio(&exec, &t3).unwrap(),
            Ratio::from_integer(1)
        );
    }

    #[test]
    fn restriction_of_execution_is_sound() {
        let exec = rw_execution();
        let t3 = rw_t3();
        let s = check_soundness(&exec, &t3).unwrap();
        assert!(s.holds);
        assert!(s.foreign_events.is_empty());
    }

    #[test]
    fn ratio_of_thread_order_trace_is_one_fifth() {
        let exec = rw_execution();
        assert_eq!(
            faithfulness_ratio(&exec, &rw_t2()).unwrap(),
            Ratio::new(1, 5)
        );
    }

    #[test]
    fn ratio_rejects_unsound_trace() {
        assert_eq!(
            faithfulness_ratio(&rw_execution(), &rw_t0()),
            Err(OrderError::UnsoundTrace)
        );
    }

    #[test]
    fn empty_trace_is_vacuously_faithful_with_ratio_one() {
        let exec = rw_execution();
        let empty = ConcurrentTrace::default();
        assert!(check_faithfulness(&exec, &empty).unwrap().holds);
        assert_eq!(
            faithfulness_ratio(&exec, &empty).unwrap(),
            Ratio::from_integer(1)
        );
    }

    #[test]
    fn orderless_trace_over_ordered_execution_has_ratio_zero() {
        let exec = ConcurrentExecution {
            actions: vec![regular(0, 0, "a", 0), regular(1, 1, "b", 0)],
            thread_edges: vec![],
            sync_edges: vec![(0, 1)],
        };
        let trace = ConcurrentTrace::new(vec![
            ev(0, 0, "a", 0, &[(0, 1)]),
            ev(1, 1, "b", 0, &[(1, 1)]),
        ]);
        assert_eq!(
            faithfulness_ratio(&exec, &trace).unwrap(),
            Ratio::from_integer(0)
        );
    }

    #[test]
    fn linear_and_thread_order_constructions() {
        let a = rw_events();
        let linear = linear_trace(&a);
        assert_eq!(linear.order_pairs().len(), 6, "4-event chain has 6 pairs");
        let thread_only = thread_order_trace(&a);
        assert_eq!(thread_only.order_pairs().len(), 1);
    }

    #[test]
    fn delimit_preserves_and_refines_order() {
        let map: BTreeMap<String, (String, String)> = [
            ("w".to_string(), ("bw".to_string(), "aw".to_string())),
            ("r".to_string(), ("br".to_string(), "ar".to_string())),
        ]
        .into_iter()
        .collect();
        let t3 = rw_t3();
        let d = delimit(&t3, &map);
        assert_eq!(d.len(), 8);
        // before < after for the same source event
        assert!(happens_before(&d, 0, 1).unwrap());
        // w0 after-delimiter precedes r1 before-delimiter
        assert!(happens_before(&d, 1, 2).unwrap());
        // reads stay concurrent
        assert!(!happens_before(&d, 2, 4).unwrap());
        assert!(!happens_before(&d, 4, 2).unwrap());
        assert!(!happens_before(&d, 3, 4).unwrap());
        // everything precedes the final write's delimiters
        assert!(happens_before(&d, 3, 6).unwrap());
        assert!(happens_before(&d, 5, 6).unwrap());
    }

    #[test]
    fn optimal_ratio_bounds_and_midpoints() {
        use crate::dfa::DependenceRelation;
        let pairs = |list: &[(&str, &str)]| {
            DependenceRelation::from_pairs(list.iter().map(|&(a, b)| (a.to_owned(), b.to_owned())))
        };
        let sigma_wr: BTreeSet<String> = ["w", "r"].iter().map(|s| s.to_string()).collect();
        let exec = rw_execution();

        // No dependence: nothing needs ordering.
        assert_eq!(
            optimal_ratio(&exec, &pairs(&[]), &sigma_wr).unwrap(),
            Ratio::from_integer(0)
        );

        // Write/read dependence over the readers/writers execution: the
        // four cross pairs are required and their closure brings in the
        // write/write pair, so all five orderings are necessary.
        // (Derived by enumerating →e0 against D by hand.)
        assert_eq!(
            optimal_ratio(&exec, &pairs(&[("w", "r")]), &sigma_wr).unwrap(),
            Ratio::from_integer(1)
        );

        // Chain a→b→c with D relating only (a,b): one required pair out
        // of three ordered pairs.
        let chain = ConcurrentExecution {
            actions: vec![
                regular(0, 0, "a", 0),
                regular(1, 0, "b", 1),
                regular(2, 0, "c", 2),
            ],
            thread_edges: vec![(0, 1), (1, 2)],
            sync_edges: vec![],
        };
        let sigma_abc: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            optimal_ratio(&chain, &pairs(&[("a", "b")]), &sigma_abc).unwrap(),
            Ratio::new(1, 3)
        );
        // Full dependence over a fully ordered execution needs all of it.
        assert_eq!(
            optimal_ratio(
                &chain,
                &pairs(&[("a", "b"), ("a", "c"), ("b", "c")]),
                &sigma_abc
            )
            .unwrap(),
            Ratio::from_integer(1)
        );

        // Two disjoint threads with dependent labels: the execution
        // itself lacks the necessary order.
        let split = ConcurrentExecution {
            actions: vec![regular(0, 0, "a", 0), regular(1, 1, "b", 0)],
            thread_edges: vec![],
            sync_edges: vec![],
        };
        let sigma_ab: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            optimal_ratio(&split, &pairs(&[("a", "b")]), &sigma_ab),
            Err(OrderError::NotMonitorableExecution)
        );
    }

    #[test]
    fn reconstruct_matches_lock_handoff() {
        use crate::event::ActionKind::*;
        let mk = |seq, tid, kind, res: &str, idx| Action {
            seq,
            tid: ThreadId(tid),
            kind,
            label: None,
            res: Some(res.to_owned()),
            val: None,
            idx,
        };
        let stream = vec![
            mk(0, 0, Lock, "s", 0),
            mk(1, 0, Unlock, "s", 1),
            mk(2, 1, Lock, "s", 0),
        ];
        let exec = reconstruct_execution(&stream);
        assert_eq!(exec.sync_edges, vec![(1, 2)]);
        assert_eq!(exec.thread_edges, vec![(0, 1)]);
    }
}
