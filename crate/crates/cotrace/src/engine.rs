//! The trace-reordering engine: consumes an action stream, maintains
//! per-thread clocks plus release and write maps, and emits a timestamped
//! concurrent trace.
//!
//! For each incoming action the engine copies the emitting thread's last
//! clock, merges it with the matching release (acquire class) or last
//! unconflicted write (reads), increments the thread's own component, and
//! stores the result. Regular events are appended to the trace;
//! synchronization actions only update the maps and are discarded.
//!
//! Two unordered writes of the same value to the same variable are
//! *conflicting*: a later read could have obtained the value from either,
//! so the write-map entry is cleared and the read merges with nothing.
//! That can lose order information (faithfulness) but never invents any
//! (soundness).
//!
//! The engine is a deterministic function of the delivery sequence. It
//! assumes the transport delivers (1) each thread's actions in program
//! order and (2) every acquire after its matching release; under that
//! contract it can run inline with the program or decoupled behind a
//! queue with identical output.

use std::collections::HashMap;
use std::sync::mpsc;

use thiserror::Error;

use crate::event::{Action, ActionKind, ThreadId, TimestampedEvent, VectorClock};
use crate::order::ConcurrentTrace;

/// A synchronization action with its final timestamp, as retained in the
/// release and write maps.
#[derive(Clone, Debug)]
pub struct TimestampedSyncAction {
    pub action: Action,
    pub vc: VectorClock,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    /// The stream broke the delivery contract for this thread; the
    /// stream's clocks would be meaningless, so this is fatal.
    #[error("delivery contract violated: thread {tid} sent idx {found}, expected {expected}")]
    ContractViolation {
        tid: ThreadId,
        expected: u64,
        found: u64,
    },
    #[error("action seq {seq} of kind `{kind}` lacks its `{field}` field")]
    MalformedAction {
        seq: u64,
        kind: &'static str,
        field: &'static str,
    },
}

/// Resource keys are namespaced by synchronization family so a lock named
/// "1" never aliases thread 1 or a signal "1".
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum ResourceKey {
    Lock(String),
    Thread(ThreadId),
    Signal(String),
}

/// Engine state: `last` is the per-thread clock map L, `releases` the
/// last-release map R, `writes` the last-unconflicted-write map W, and
/// `trace` the concurrent trace T under construction.
#[derive(Debug, Default)]
pub struct VcEngine {
    last: HashMap<ThreadId, VectorClock>,
    releases: HashMap<ResourceKey, TimestampedSyncAction>,
    writes: HashMap<(String, String), TimestampedSyncAction>,
    trace: Vec<TimestampedEvent>,
    next_idx: HashMap<ThreadId, u64>,
}

impl VcEngine {
    pub fn new() -> VcEngine {
        VcEngine::default()
    }

    /// Number of events currently in the trace.
    pub fn trace_len(&self) -> usize {
        self.trace.len()
    }

    /// The last timestamp stored for a thread (L(t)).
    pub fn last_clock(&self, tid: ThreadId) -> Option<&VectorClock> {
        self.last.get(&tid)
    }

    fn resource_str(a: &Action) -> Result<&str, EngineError> {
        a.res().ok_or(EngineError::MalformedAction {
            seq: a.seq,
            kind: a.kind.as_str(),
            field: "res",
        })
    }

    fn value_str(a: &Action) -> Result<&str, EngineError> {
        a.val().ok_or(EngineError::MalformedAction {
            seq: a.seq,
            kind: a.kind.as_str(),
            field: "val",
        })
    }

    fn resource_key(a: &Action) -> Result<ResourceKey, EngineError> {
        Ok(match a.kind {
            ActionKind::Lock | ActionKind::Unlock => {
                ResourceKey::Lock(Self::resource_str(a)?.to_owned())
            }
            ActionKind::Notify | ActionKind::Wait => {
                ResourceKey::Signal(Self::resource_str(a)?.to_owned())
            }
            // fork/join name the peer thread; begin/end their own.
            ActionKind::Fork | ActionKind::Join => {
                let res = Self::resource_str(a)?;
                let tid = res
                    .parse::<u32>()
                    .map_err(|_| EngineError::MalformedAction {
                        seq: a.seq,
                        kind: a.kind.as_str(),
                        field: "res",
                    })?;
                ResourceKey::Thread(ThreadId(tid))
            }
            ActionKind::Begin | ActionKind::End => ResourceKey::Thread(a.tid),
            _ => unreachable!("regular and read/write actions carry no release-acquire key"),
        })
    }

    /// Processes one action. Order of operations per the reordering
    /// algorithm: copy L(t), dispatch synchronization handling, increment
    /// own component, store back to L(t), then append (regular) or
    /// publish to R / W (release, write).
    pub fn receive_action(&mut self, action: Action) -> Result<(), EngineError> {
        let tid = action.tid;
        let expected = self.next_idx.get(&tid).copied().unwrap_or(0);
        if action.idx != expected {
            return Err(EngineError::ContractViolation {
                tid,
                expected,
                found: action.idx,
            });
        }

        let mut vc = self.last.get(&tid).cloned().unwrap_or_default();

        enum Publish {
            Nothing,
            Release(ResourceKey),
            Write(String, String),
            Trace,
        }
        let publish = match action.kind {
            ActionKind::Regular => Publish::Trace,
            ActionKind::Lock | ActionKind::Begin | ActionKind::Join | ActionKind::Wait => {
                // Joining with an absent release leaves the clock as is.
                if let Some(rel) = self.releases.get(&Self::resource_key(&action)?) {
                    vc.join(&rel.vc);
                }
                Publish::Nothing
            }
            ActionKind::Unlock | ActionKind::Fork | ActionKind::End | ActionKind::Notify => {
                Publish::Release(Self::resource_key(&action)?)
            }
            ActionKind::Write => {
                let key = (
                    Self::resource_str(&action)?.to_owned(),
                    Self::value_str(&action)?.to_owned(),
                );
                match self.writes.get(&key) {
                    Some(prev) if !prev.vc.leq(&vc) => {
                        // Conflicting write: a future read of (x,v) could
                        // stem from either writer; forget the entry.
                        self.writes.remove(&key);
                        Publish::Nothing
                    }
                    _ => Publish::Write(key.0, key.1),
                }
            }
            ActionKind::Read => {
                let key = (
                    Self::resource_str(&action)?.to_owned(),
                    Self::value_str(&action)?.to_owned(),
                );
                if let Some(w) = self.writes.get(&key) {
                    vc.join(&w.vc);
                }
                Publish::Nothing
            }
        };

        vc.inc(tid);
        self.last.insert(tid, vc.clone());
        self.next_idx.insert(tid, expected + 1);

        match publish {
            Publish::Nothing => {}
            Publish::Trace => self.trace.push(TimestampedEvent { action, vc }),
            Publish::Release(key) => {
                self.releases
                    .insert(key, TimestampedSyncAction { action, vc });
            }
            Publish::Write(x, v) => {
                self.writes
                    .insert((x, v), TimestampedSyncAction { action, vc });
            }
        }
        Ok(())
    }

    /// Consumes the engine and returns the concurrent trace collected so
    /// far. Synchronization actions have been discarded along the way.
    pub fn finalize(self) -> ConcurrentTrace {
        ConcurrentTrace::new(self.trace)
    }
}

/// Runs the engine synchronously over a complete stream.
pub fn run_inline<I: IntoIterator<Item = Action>>(
    actions: I,
) -> Result<ConcurrentTrace, EngineError> {
    let mut engine = VcEngine::new();
    for a in actions {
        engine.receive_action(a)?;
    }
    Ok(engine.finalize())
}

/// Runs the engine decoupled from the producer: actions are buffered in
/// an ordered queue and drained by a consumer thread off the caller's
/// path. Output is identical to [`run_inline`] for the same delivery
/// sequence.
pub fn run_decoupled<I: IntoIterator<Item = Action>>(
    actions: I,
) -> Result<ConcurrentTrace, EngineError> {
    let (tx, rx) = mpsc::channel::<Action>();
    let consumer = std::thread::spawn(move || -> Result<ConcurrentTrace, EngineError> {
        let mut engine = VcEngine::new();
        for action in rx {
            engine.receive_action(action)?;
        }
        Ok(engine.finalize())
    });
    for a in actions {
        if tx.send(a).is_err() {
            break; // consumer bailed on a contract violation
        }
    }
    drop(tx);
    consumer.join().expect("engine consumer panicked")
}
