//! Trace-necessary-order checking, monitorability gating, deterministic
//! linearization, and monitoring of concurrent traces.
//!
//! A concurrent trace must be linearized before a word-consuming monitor
//! can run. Linearization invents order between concurrent events, which
//! is only safe when the monitor does not depend on the invented part:
//! the trace has the *necessary order* for a dependence relation D when
//! every event pair with D-related labels is already ordered. Property
//! monitorability over a trace (t-Mon) is classical monitorability plus
//! trace soundness plus that condition; when it fails, the verdict may be
//! an artifact of the linearization and warnings are attached.

use serde::Serialize;

use std::collections::BTreeMap;

use crate::dfa::{DependenceRelation, Dfa, Verdict};
use crate::event::TimestampedEvent;
use crate::order::{check_soundness, ConcurrentExecution, ConcurrentTrace};

/// A D-related event pair the trace leaves unordered. `first` and
/// `second` are event ids with `first` the smaller arrival index.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FaultyPair {
    pub first: u64,
    pub second: u64,
    pub labels: (String, String),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
}

/// Which action field carries the slice value when the necessary-order
/// check is restricted to per-slice event pairs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SliceField {
    Res,
    Val,
}

impl SliceField {
    pub fn of(self, e: &TimestampedEvent) -> Option<&str> {
        match self {
            SliceField::Res => e.action.res(),
            SliceField::Val => e.action.val(),
        }
    }
}

impl std::str::FromStr for SliceField {
    type Err = String;

    fn from_str(s: &str) -> Result<SliceField, String> {
        match s {
            "res" => Ok(SliceField::Res),
            "val" => Ok(SliceField::Val),
            other => Err(format!(
                "unknown slice key `{other}` (expected `res` or `val`)"
            )),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TnoReport {
    pub holds: bool,
    pub faulty: Vec<FaultyPair>,
}

/// Does the trace order every event pair whose labels the dependence
/// relation cares about? With a slice key, only pairs sharing the slice
/// value are quantified over.
pub fn tno_check(
    trace: &ConcurrentTrace,
    dep: &DependenceRelation,
    slice_key: Option<SliceField>,
) -> TnoReport {
    let mut events: Vec<&TimestampedEvent> = trace.events.iter().collect();
    events.sort_by_key(|e| e.seq());

    let mut faulty = Vec::new();
    for (i, a) in events.iter().enumerate() {
        let Some(label_a) = a.action.label() else {
            continue;
        };
        for b in &events[i + 1..] {
            let Some(label_b) = b.action.label() else {
                continue;
            };
            if !dep.related(label_a, label_b) {
                continue;
            }
            if let Some(key) = slice_key {
                if key.of(a) != key.of(b) {
                    continue;
                }
            }
            if a.vc.concurrent(&b.vc) {
                faulty.push(FaultyPair {
                    first: a.seq(),
                    second: b.seq(),
                    labels: (label_a.to_owned(), label_b.to_owned()),
                    slice: slice_key.and_then(|k| k.of(a)).map(str::to_owned),
                });
            }
        }
    }
    TnoReport {
        holds: faulty.is_empty(),
        faulty,
    }
}

/// How the soundness clause of t-Mon is discharged: traces coming out of
/// the clock engine are sound by construction; ingested traces can be
/// checked against ground truth, or pessimistically assumed unsound.
#[derive(Clone, Copy, Debug)]
pub enum SoundnessClause<'a> {
    ByConstruction,
    CheckedAgainst(&'a ConcurrentExecution),
    AssumedUnsound,
}

impl SoundnessClause<'_> {
    fn holds(&self, trace: &ConcurrentTrace) -> bool {
        match self {
            SoundnessClause::ByConstruction => true,
            SoundnessClause::CheckedAgainst(exec) => check_soundness(exec, trace)
                .map(|r| r.holds)
                .unwrap_or(false),
            SoundnessClause::AssumedUnsound => false,
        }
    }
}

/// Trace monitorability of a concurrent execution: the property is
/// classically monitorable, the trace is sound, and the trace has the
/// necessary orderings for the property's dependence relation.
pub fn t_mon(dfa: &Dfa, trace: &ConcurrentTrace, soundness: SoundnessClause<'_>) -> bool {
    dfa.classical_monitorability()
        && soundness.holds(trace)
        && tno_check(trace, &dfa.dependence(), None).holds
}

/// Topological order of the trace, deterministically tie-broken: among
/// the currently minimal events, the smallest (tid, idx) goes first.
pub fn linearize(trace: &ConcurrentTrace) -> Vec<&TimestampedEvent> {
    let n = trace.events.len();
    let mut placed = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if placed[i] {
                continue;
            }
            let minimal = (0..n).all(|j| {
                placed[j]
                    || j == i
                    || !(trace.events[j].vc.leq(&trace.events[i].vc)
                        && trace.events[j].seq() != trace.events[i].seq())
            });
            if !minimal {
                continue;
            }
            let key = (trace.events[i].action.tid, trace.events[i].action.idx);
            if best.is_none_or(|b| key < (trace.events[b].action.tid, trace.events[b].action.idx)) {
                best = Some(i);
            }
        }
        let i = best.expect("clock order is acyclic");
        placed[i] = true;
        out.push(&trace.events[i]);
    }
    out
}

/// Every linearization of the trace, as index sequences. Exhaustive
/// enumeration; only call on tiny traces (≤ 8 events is the intended
/// range, 8! orders).
pub fn all_linearizations(trace: &ConcurrentTrace) -> Vec<Vec<usize>> {
    assert!(
        trace.len() <= 10,
        "exhaustive linearization is for tiny traces"
    );
    let n = trace.len();
    let mut result = Vec::new();
    let mut placed = vec![false; n];
    let mut prefix = Vec::with_capacity(n);
    fn recurse(
        trace: &ConcurrentTrace,
        placed: &mut Vec<bool>,
        prefix: &mut Vec<usize>,
        result: &mut Vec<Vec<usize>>,
    ) {
        let n = trace.len();
        if prefix.len() == n {
            result.push(prefix.clone());
            return;
        }
        for i in 0..n {
            if placed[i] {
                continue;
            }
            let minimal = (0..n).all(|j| {
                placed[j]
                    || j == i
                    || !(trace.events[j].vc.leq(&trace.events[i].vc)
                        && trace.events[j].seq() != trace.events[i].seq())
            });
            if minimal {
                placed[i] = true;
                prefix.push(i);
                recurse(trace, placed, prefix, result);
                prefix.pop();
                placed[i] = false;
            }
        }
    }
    recurse(trace, &mut placed, &mut prefix, &mut result);
    result
}

/// What the monitor reports for one trace: the DFA verdict over the
/// chosen linearization, the t-Mon flag, the unordered D-related pairs
/// (the verdict is reliable only when there are none), and the
/// linearization that was fed to the automaton.
#[derive(Clone, Debug, Serialize)]
pub struct MonitorReport {
    pub verdict: Verdict,
    pub t_mon: bool,
    pub warnings: Vec<FaultyPair>,
    pub linearization: Vec<u64>,
}

/// Monitors a complete concurrent trace: events outside the property
/// alphabet are dropped, the rest are linearized and fed to the
/// automaton. Warnings are attached even when a verdict is reached; a
/// verdict under t_mon = false may be a linearization artifact.
pub fn monitor_trace(
    dfa: &Dfa,
    trace: &ConcurrentTrace,
    slice_key: Option<SliceField>,
    soundness: SoundnessClause<'_>,
) -> MonitorReport {
    let sigma = dfa.alphabet().iter().cloned().collect();
    let filtered = trace.restrict_to(&sigma);
    let dep = dfa.dependence();
    let tno = tno_check(&filtered, &dep, slice_key);
    let linear = linearize(&filtered);
    let outcome = dfa
        .run(
            linear
                .iter()
                .map(|e| e.action.label().expect("regular events are labeled")),
        )
        .expect("filtered events lie in the property alphabet");
    MonitorReport {
        verdict: outcome.verdict,
        t_mon: dfa.classical_monitorability() && soundness.holds(&filtered) && tno.holds,
        warnings: tno.faulty,
        linearization: linear.iter().map(|e| e.seq()).collect(),
    }
}

/// Online variant: events arrive in an order consistent with the trace
/// order (the engine's emission order qualifies). Each arriving event is
/// checked against the retained events of its slice whose labels the
/// dependence relation pairs with it; unordered pairs raise warnings
/// immediately, in arrival order. The automaton advances on arrival
/// order. Retention is conservative: all D-relevant events of a slice
/// are kept.
pub fn monitor_stream<I: IntoIterator<Item = TimestampedEvent>>(
    dfa: &Dfa,
    events: I,
    slice_key: Option<SliceField>,
    soundness: SoundnessClause<'_>,
) -> MonitorReport {
    let dep = dfa.dependence();
    let dep_symbols = dep.symbols();
    let mut retained: BTreeMap<Option<String>, Vec<TimestampedEvent>> = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut state = dfa.initial_state().to_owned();
    let mut linearization = Vec::new();
    let mut seen = Vec::new();

    for event in events {
        let Some(label) = event.action.label().map(str::to_owned) else {
            continue;
        };
        if !dfa.has_symbol(&label) {
            continue;
        }
        state = dfa
            .step(&state, &label)
            .expect("symbol checked against alphabet")
            .to_owned();
        linearization.push(event.seq());

        if dep_symbols.contains(&label) {
            let slice = slice_key.and_then(|k| k.of(&event)).map(str::to_owned);
            let bucket = retained.entry(slice.clone()).or_default();
            for prior in bucket.iter() {
                let prior_label = prior.action.label().expect("retained events are labeled");
                if dep.related(prior_label, &label) && prior.vc.concurrent(&event.vc) {
                    // Keep the smaller arrival index first, as in the
                    // batch report.
                    let (first, second, labels) = if prior.seq() <= event.seq() {
                        (
                            prior.seq(),
                            event.seq(),
                            (prior_label.to_owned(), label.clone()),
                        )
                    } else {
                        (
                            event.seq(),
                            prior.seq(),
                            (label.clone(), prior_label.to_owned()),
                        )
                    };
                    warnings.push(FaultyPair {
                        first,
                        second,
                        labels,
                        slice: slice.clone(),
                    });
                }
            }
            bucket.push(event.clone());
        }
        seen.push(event);
    }

    let verdict = if dfa.verdict_states().contains(&state.as_str()) {
        Verdict::Violation
    } else {
        Verdict::None
    };
    let trace = ConcurrentTrace::new(seen);
    MonitorReport {
        verdict,
        t_mon: dfa.classical_monitorability() && soundness.holds(&trace) && warnings.is_empty(),
        warnings,
        linearization,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfa::Dfa;
    use crate::event::{Action, ActionKind, ThreadId, VectorClock};
    use crate::order::delimit;

    fn p2() -> Dfa {
        Dfa::from_json(include_str!("../properties/p2.json")).unwrap()
    }

    fn p1() -> Dfa {
        Dfa::from_json(include_str!("../properties/p1.json")).unwrap()
    }

    fn ev(seq: u64, tid: u32, label: &str, idx: u64, clock: &[(u32, u64)]) -> TimestampedEvent {
        TimestampedEvent {
            action: Action {
                seq,
                tid: ThreadId(tid),
                kind: ActionKind::Regular,
                label: Some(label.to_owned()),
                res: None,
                val: None,
                idx,
            },
            vc: VectorClock::from_entries(clock.iter().map(|&(t, c)| (ThreadId(t), c))),
        }
    }

    fn delimiter_map() -> BTreeMap<String, (String, String)> {
        [
            ("w".to_string(), ("bw".to_string(), "aw".to_string())),
            ("r".to_string(), ("br".to_string(), "ar".to_string())),
        ]
        .into_iter()
        .collect()
    }

    /// The sound-and-faithful readers/writers trace (reads concurrent).
    fn rw_t3() -> ConcurrentTrace {
        ConcurrentTrace::new(vec![
            ev(0, 0, "w", 0, &[(0, 1)]),
            ev(1, 1, "r", 0, &[(0, 1), (1, 1)]),
            ev(2, 2, "r", 0, &[(0, 1), (2, 1)]),
            ev(3, 0, "w", 1, &[(0, 2), (1, 1), (2, 1)]),
        ])
    }

    /// Thread-order-only variant: nothing ordered across threads.
    fn rw_t2() -> ConcurrentTrace {
        ConcurrentTrace::new(vec![
            ev(0, 0, "w", 0, &[(0, 1)]),
            ev(1, 1, "r", 0, &[(1, 1)]),
            ev(2, 2, "r", 0, &[(2, 1)]),
            ev(3, 0, "w", 1, &[(0, 2)]),
        ])
    }

    #[test]
    fn tno_accepts_the_faithful_trace_and_rejects_thread_order_only() {
        let dep = p2().dependence();
        let t3 = delimit(&rw_t3(), &delimiter_map());
        assert!(tno_check(&t3, &dep, None).holds);

        let t2 = delimit(&rw_t2(), &delimiter_map());
        let report = tno_check(&t2, &dep, None);
        assert!(!report.holds);
        assert!(!report.faulty.is_empty());
        for pair in &report.faulty {
            assert!(pair.first < pair.second);
            assert!(dep.related(&pair.labels.0, &pair.labels.1));
        }
    }

    #[test]
    fn tno_on_empty_trace_holds() {
        let report = tno_check(&ConcurrentTrace::default(), &p2().dependence(), None);
        assert!(report.holds);
        assert!(report.faulty.is_empty());
    }

    #[test]
    fn tno_slicing_restricts_pairs() {
        let dep = DependenceRelation::from_pairs([("a".to_owned(), "b".to_owned())]);
        let mut e1 = ev(0, 0, "a", 0, &[(0, 1)]);
        let mut e2 = ev(1, 1, "b", 0, &[(1, 1)]);
        e1.action.res = Some("file1".to_owned());
        e2.action.res = Some("file2".to_owned());
        let trace = ConcurrentTrace::new(vec![e1.clone(), e2.clone()]);
        assert!(
            !tno_check(&trace, &dep, None).holds,
            "unsliced: the pair counts"
        );
        assert!(
            tno_check(&trace, &dep, Some(SliceField::Res)).holds,
            "different slices"
        );
        e2.action.res = Some("file1".to_owned());
        let trace = ConcurrentTrace::new(vec![e1, e2]);
        let report = tno_check(&trace, &dep, Some(SliceField::Res));
        assert!(!report.holds, "same slice: the pair counts again");
        assert_eq!(report.faulty[0].slice.as_deref(), Some("file1"));
    }

    #[test]
    fn linearize_keeps_chains_and_breaks_ties_by_tid_idx() {
        let chain = ConcurrentTrace::new(vec![
            ev(0, 0, "a", 0, &[(0, 1)]),
            ev(1, 0, "b", 1, &[(0, 2)]),
            ev(2, 0, "c", 2, &[(0, 3)]),
        ]);
        let order: Vec<u64> = linearize(&chain).iter().map(|e| e.seq()).collect();
        assert_eq!(order, vec![0, 1, 2]);

        let concurrent = ConcurrentTrace::new(vec![
            ev(5, 1, "b", 0, &[(1, 1)]),
            ev(7, 0, "a", 0, &[(0, 1)]),
        ]);
        let order: Vec<u64> = linearize(&concurrent).iter().map(|e| e.seq()).collect();
        assert_eq!(order, vec![7, 5], "thread 0 first despite larger seq");
    }

    #[test]
    fn linearization_respects_trace_order() {
        let t3 = rw_t3();
        let order: Vec<u64> = linearize(&t3).iter().map(|e| e.seq()).collect();
        let position: BTreeMap<u64, usize> =
            order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        for a in &t3.events {
            for b in &t3.events {
                if a.seq() != b.seq() && a.vc.leq(&b.vc) {
                    assert!(position[&a.seq()] < position[&b.seq()]);
                }
            }
        }
    }

    #[test]
    fn all_linearizations_of_the_rw_trace() {
        // w < {r1, r2} < w': the two reads permute, nothing else does.
        let lins = all_linearizations(&rw_t3());
        assert_eq!(lins.len(), 2);
    }

    #[test]
    fn monitoring_the_faithful_rw_trace_is_clean() {
        let dfa = p2();
        let t3 = delimit(&rw_t3(), &delimiter_map());
        let report = monitor_trace(&dfa, &t3, None, SoundnessClause::ByConstruction);
        assert_eq!(report.verdict, Verdict::None);
        assert!(report.t_mon);
        assert!(report.warnings.is_empty());
        assert_eq!(report.linearization.len(), 8);
    }

    #[test]
    fn monitoring_concurrent_events_warns() {
        // Two unordered task flows: q..r in one thread, p..s in another.
        let dfa = p1();
        let trace = ConcurrentTrace::new(vec![
            ev(0, 1, "q", 0, &[(1, 1)]),
            ev(1, 1, "r", 1, &[(1, 2)]),
            ev(2, 2, "p", 0, &[(2, 1)]),
            ev(3, 2, "s", 1, &[(2, 2)]),
        ]);
        let report = monitor_trace(&dfa, &trace, None, SoundnessClause::ByConstruction);
        assert!(!report.t_mon);
        assert!(!report.warnings.is_empty());
    }

    #[test]
    fn empty_trace_reports_classical_monitorability() {
        let dfa = p2();
        let report = monitor_trace(
            &dfa,
            &ConcurrentTrace::default(),
            None,
            SoundnessClause::ByConstruction,
        );
        assert_eq!(report.verdict, Verdict::None);
        assert_eq!(report.t_mon, dfa.classical_monitorability());
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn events_outside_the_alphabet_are_skipped() {
        let dfa = p2();
        let trace = ConcurrentTrace::new(vec![
            ev(0, 0, "bw", 0, &[(0, 1)]),
            ev(1, 0, "noise", 1, &[(0, 2)]),
            ev(2, 0, "aw", 2, &[(0, 3)]),
        ]);
        let report = monitor_trace(&dfa, &trace, None, SoundnessClause::ByConstruction);
        assert_eq!(report.verdict, Verdict::None);
        assert_eq!(report.linearization, vec![0, 2]);
    }

    #[test]
    fn assumed_unsound_traces_are_not_monitorable() {
        let dfa = p2();
        let t3 = delimit(&rw_t3(), &delimiter_map());
        let report = monitor_trace(&dfa, &t3, None, SoundnessClause::AssumedUnsound);
        assert!(!report.t_mon);
        assert!(report.warnings.is_empty(), "tno itself still holds");
    }

    #[test]
    fn stream_matches_batch_on_fully_ordered_input() {
        let dfa = p2();
        let chain = ConcurrentTrace::new(vec![
            ev(0, 0, "bw", 0, &[(0, 1)]),
            ev(1, 0, "aw", 1, &[(0, 2)]),
            ev(2, 1, "br", 0, &[(0, 2), (1, 1)]),
            ev(3, 1, "ar", 1, &[(0, 2), (1, 2)]),
        ]);
        let batch = monitor_trace(&dfa, &chain, None, SoundnessClause::ByConstruction);
        let stream = monitor_stream(
            &dfa,
            chain.events.clone(),
            None,
            SoundnessClause::ByConstruction,
        );
        assert_eq!(stream.verdict, batch.verdict);
        assert_eq!(stream.t_mon, batch.t_mon);
        assert!(stream.warnings.is_empty());
        assert_eq!(stream.linearization, batch.linearization);
    }

    #[test]
    fn stream_warns_at_the_second_event_of_the_first_faulty_pair() {
        let dfa = p2();
        // bw(t0) arrives, then a concurrent br(t1): warning exactly there.
        let events = vec![
            ev(0, 0, "bw", 0, &[(0, 1)]),
            ev(1, 1, "br", 0, &[(1, 1)]),
            ev(2, 0, "aw", 1, &[(0, 2)]),
        ];
        let report = monitor_stream(&dfa, events, None, SoundnessClause::ByConstruction);
        assert!(!report.t_mon);
        assert_eq!(report.warnings[0].first, 0);
        assert_eq!(report.warnings[0].second, 1);
    }

    #[test]
    fn single_event_stream_never_warns() {
        let dfa = p2();
        let report = monitor_stream(
            &dfa,
            vec![ev(0, 0, "bw", 0, &[(0, 1)])],
            None,
            SoundnessClause::ByConstruction,
        );
        assert!(report.warnings.is_empty());
        assert_eq!(report.verdict, Verdict::None);
    }

    #[test]
    fn report_serializes_to_the_wire_shape() {
        let dfa = p2();
        let t2 = delimit(&rw_t2(), &delimiter_map());
        let report = monitor_trace(&dfa, &t2, None, SoundnessClause::ByConstruction);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["verdict"], "none");
        assert_eq!(json["t_mon"], false);
        assert!(!json["warnings"].as_array().unwrap().is_empty());
        assert!(json["warnings"][0]["labels"].is_array());
        assert!(json["linearization"].is_array());
    }
}
