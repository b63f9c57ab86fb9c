//! Seeded generators of legal concurrent executions: action streams plus
//! the ground-truth edges as they were scheduled, which is what the
//! brute-force oracle closes over.
//!
//! Scenarios are small per-thread scripts. The scheduler repeatedly picks
//! one runnable thread at random (seeded), so interleavings vary by seed
//! while locks and the scripts' ordering guards keep every emitted stream
//! a legal execution. Guards model uninstrumented program logic (a
//! condition check, a protocol phase); they constrain scheduling but are
//! deliberately not synchronization actions, so they never contribute
//! ground-truth edges.
//!
//! # Scenario catalog
//!
//! - `rw` — one writer and two readers round a service lock `s` plus a
//!   reader-count lock `c`: write, two concurrent reads, write. The two
//!   reads stay unordered in every run; all five write/read orderings are
//!   structural.
//! - `prods-cons` / `prods-cons-faulty` — producers and consumers work a
//!   buffer under one lock, emitting `bw`/`aw` and `br`/`ar` delimiters.
//!   The faulty variant's consumers skip the lock entirely and emit with
//!   no synchronization at all.
//! - `bakery` / `bakery-faulty` — workers hand a critical section around
//!   using ticket variables only (writes and reads, no locks). The faulty
//!   variant's last worker never reads the tickets: it barges into the
//!   critical section unordered.
//! - `precedence-demo` — a request `r` and a grant `g` on two unrelated
//!   threads: nothing orders them.
//! - `response-between` — a normal task (`q` … `r`) and an urgent task
//!   (`p`, `s`) on unrelated threads.
//! - `mix` — a seeded random workload over locks, forks, reads/writes and
//!   signals; the stress and property-testing backend.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::event::{validate_stream, Action, ActionKind, StreamViolation, ThreadId};
use crate::order::{reconstruct_execution, ConcurrentExecution};

/// A generator of executions, identified by name.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub defaults: BTreeMap<String, u64>,
}

/// A generated stream together with the edges as scheduled.
#[derive(Clone, Debug)]
pub struct SimResult {
    pub stream: Vec<Action>,
    pub ground_truth: ConcurrentExecution,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("stream violates the delivery contract ({} violations)", .0.len())]
    ContractViolation(Vec<StreamViolation>),
}

fn params(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|&(k, v)| (k.to_owned(), v)).collect()
}

/// The scenario roster.
pub fn list_scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "rw",
            description: "one writer, two readers; reads concurrent under a service lock",
            defaults: params(&[]),
        },
        Scenario {
            name: "prods-cons",
            description: "producers and consumers serialize on one buffer lock",
            defaults: params(&[("producers", 1), ("consumers", 2), ("iters", 2)]),
        },
        Scenario {
            name: "prods-cons-faulty",
            description: "consumers emit without acquiring the buffer lock",
            defaults: params(&[("producers", 1), ("consumers", 2), ("iters", 2)]),
        },
        Scenario {
            name: "bakery",
            description: "critical sections handed over purely by ticket reads/writes",
            defaults: params(&[("threads", 3), ("rounds", 1)]),
        },
        Scenario {
            name: "bakery-faulty",
            description: "last worker skips the ticket reads and barges in",
            defaults: params(&[("threads", 3), ("rounds", 1)]),
        },
        Scenario {
            name: "precedence-demo",
            description: "an unordered request/grant pair on two threads",
            defaults: params(&[]),
        },
        Scenario {
            name: "response-between",
            description: "a normal task and an urgent task with no cross ordering",
            defaults: params(&[]),
        },
        Scenario {
            name: "mix",
            description: "random workload over locks, forks, reads/writes and signals",
            defaults: params(&[
                ("threads", 4),
                ("actions", 200),
                ("rw", 1),
                ("signals", 1),
                ("collide", 1),
            ]),
        },
    ]
}

/// Deterministically generates the named scenario. Identical
/// (name, seed, params) give byte-identical streams.
pub fn simulate(
    name: &str,
    seed: u64,
    overrides: &BTreeMap<String, u64>,
) -> Result<SimResult, SimError> {
    let scenario = list_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| SimError::UnknownScenario(name.to_owned()))?;
    let mut p = scenario.defaults.clone();
    for (k, v) in overrides {
        if !p.contains_key(k) {
            return Err(SimError::BadParams(format!(
                "scenario `{name}` takes no parameter `{k}`"
            )));
        }
        p.insert(k.clone(), *v);
    }
    let get = |k: &str| p[k];
    let positive = |k: &str| -> Result<u64, SimError> {
        let v = get(k);
        if v == 0 {
            return Err(SimError::BadParams(format!(
                "parameter `{k}` must be positive"
            )));
        }
        Ok(v)
    };

    let script = match name {
        "rw" => rw_script(),
        "prods-cons" => prods_cons_script(
            positive("producers")?,
            positive("consumers")?,
            positive("iters")?,
            false,
        ),
        "prods-cons-faulty" => prods_cons_script(
            positive("producers")?,
            positive("consumers")?,
            positive("iters")?,
            true,
        ),
        "bakery" => {
            let threads = positive("threads")?;
            if threads < 2 {
                return Err(SimError::BadParams(
                    "bakery needs at least 2 threads".into(),
                ));
            }
            bakery_script(threads, positive("rounds")?, false)
        }
        "bakery-faulty" => {
            let threads = positive("threads")?;
            if threads < 2 {
                return Err(SimError::BadParams(
                    "bakery needs at least 2 threads".into(),
                ));
            }
            bakery_script(threads, positive("rounds")?, true)
        }
        "precedence-demo" => two_thread_script(&[&["r"], &["g"]], "x"),
        "response-between" => two_thread_script(&[&["q", "r"], &["p", "s"]], "task"),
        "mix" => {
            let cfg = MixCfg {
                threads: positive("threads")? as u32,
                actions: get("actions"),
                readwrite: get("rw") != 0,
                signals: get("signals") != 0,
                collide: get("collide") != 0,
            };
            if cfg.threads < 2 {
                return Err(SimError::BadParams("mix needs at least 2 threads".into()));
            }
            mix_script(seed, &cfg)
        }
        _ => unreachable!("roster covers all names"),
    };
    Ok(run_script(&script, seed))
}

/// Wraps an ingested stream with oracle-derived ground truth: thread
/// edges by position, synchronization edges by seq-order matching.
pub fn replay(stream: &[Action]) -> Result<SimResult, SimError> {
    let violations = validate_stream(stream);
    if !violations.is_empty() {
        return Err(SimError::ContractViolation(violations));
    }
    Ok(SimResult {
        stream: stream.to_vec(),
        ground_truth: reconstruct_execution(stream),
    })
}

// ---------------------------------------------------------------------
// Script machinery

#[derive(Clone, Debug)]
enum Op {
    Lock(String),
    Unlock(String),
    Regular { label: String, res: Option<String> },
    Read { var: String },
    Write { var: String, val: String },
    Notify(String),
    Wait(String),
    Fork(usize),
    Begin,
    End,
    Join(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct StepRef {
    thread: usize,
    index: usize,
}

#[derive(Clone, Debug)]
struct Step {
    op: Op,
    /// The referenced step must have been emitted before this one runs.
    /// Models uninstrumented program logic; contributes no edges.
    guard: Option<StepRef>,
}

#[derive(Default)]
struct Script {
    threads: Vec<Vec<Step>>,
}

impl Script {
    fn thread(&mut self) -> usize {
        self.threads.push(Vec::new());
        self.threads.len() - 1
    }

    fn push(&mut self, thread: usize, op: Op) -> StepRef {
        self.threads[thread].push(Step { op, guard: None });
        StepRef {
            thread,
            index: self.threads[thread].len() - 1,
        }
    }

    fn push_after(&mut self, thread: usize, op: Op, after: StepRef) -> StepRef {
        self.threads[thread].push(Step {
            op,
            guard: Some(after),
        });
        StepRef {
            thread,
            index: self.threads[thread].len() - 1,
        }
    }

    fn guard(&mut self, step: StepRef, after: StepRef) {
        self.threads[step.thread][step.index].guard = Some(after);
    }
}

/// Executes a script under a seeded random scheduler. Threads blocked on
/// a held lock, an unemitted guard, an unforked begin, or an unfinished
/// join target are not runnable.
fn run_script(script: &Script, seed: u64) -> SimResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = script.threads.len();
    let mut pc = vec![0usize; n];
    let mut idx = vec![0u64; n];
    let mut stream: Vec<Action> = Vec::new();
    let mut thread_edges = Vec::new();
    let mut sync_edges = Vec::new();
    let mut last_of_thread: Vec<Option<u64>> = vec![None; n];

    let mut lock_held: BTreeMap<&str, bool> = BTreeMap::new();
    let mut last_unlock: BTreeMap<&str, u64> = BTreeMap::new();
    let mut last_notify: BTreeMap<&str, u64> = BTreeMap::new();
    let mut memory: BTreeMap<&str, (&str, Option<u64>)> = BTreeMap::new();
    let mut fork_seq: BTreeMap<usize, u64> = BTreeMap::new();
    let mut end_seq: BTreeMap<usize, u64> = BTreeMap::new();

    loop {
        let runnable: Vec<usize> = (0..n)
            .filter(|&t| {
                let Some(step) = script.threads[t].get(pc[t]) else {
                    return false;
                };
                if let Some(g) = step.guard {
                    if pc[g.thread] <= g.index {
                        return false;
                    }
                }
                match &step.op {
                    Op::Lock(l) => !lock_held.get(l.as_str()).copied().unwrap_or(false),
                    Op::Begin => fork_seq.contains_key(&t),
                    Op::Join(u) => end_seq.contains_key(u),
                    _ => true,
                }
            })
            .collect();
        if runnable.is_empty() {
            assert!(
                (0..n).all(|t| pc[t] == script.threads[t].len()),
                "scenario script deadlocked"
            );
            break;
        }
        let t = runnable[rng.gen_range(0..runnable.len())];
        let step = &script.threads[t][pc[t]];
        let seq = stream.len() as u64;

        let (kind, label, res, val) = match &step.op {
            Op::Lock(l) => {
                lock_held.insert(l.as_str(), true);
                if let Some(&u) = last_unlock.get(l.as_str()) {
                    sync_edges.push((u, seq));
                }
                (ActionKind::Lock, None, Some(l.clone()), None)
            }
            Op::Unlock(l) => {
                lock_held.insert(l.as_str(), false);
                last_unlock.insert(l.as_str(), seq);
                (ActionKind::Unlock, None, Some(l.clone()), None)
            }
            Op::Regular { label, res } => {
                (ActionKind::Regular, Some(label.clone()), res.clone(), None)
            }
            Op::Read { var } => {
                let (value, writer) = memory.get(var.as_str()).copied().unwrap_or(("0", None));
                if let Some(w) = writer {
                    sync_edges.push((w, seq));
                }
                (
                    ActionKind::Read,
                    None,
                    Some(var.clone()),
                    Some(value.to_owned()),
                )
            }
            Op::Write { var, val } => {
                memory.insert(var.as_str(), (val.as_str(), Some(seq)));
                (
                    ActionKind::Write,
                    None,
                    Some(var.clone()),
                    Some(val.clone()),
                )
            }
            Op::Notify(s) => {
                last_notify.insert(s.as_str(), seq);
                (ActionKind::Notify, None, Some(s.clone()), None)
            }
            Op::Wait(s) => {
                if let Some(&r) = last_notify.get(s.as_str()) {
                    sync_edges.push((r, seq));
                }
                (ActionKind::Wait, None, Some(s.clone()), None)
            }
            Op::Fork(u) => {
                fork_seq.insert(*u, seq);
                (ActionKind::Fork, None, Some(u.to_string()), None)
            }
            Op::Begin => {
                sync_edges.push((fork_seq[&t], seq));
                (ActionKind::Begin, None, Some(t.to_string()), None)
            }
            Op::End => {
                end_seq.insert(t, seq);
                (ActionKind::End, None, Some(t.to_string()), None)
            }
            Op::Join(u) => {
                sync_edges.push((end_seq[u], seq));
                (ActionKind::Join, None, Some(u.to_string()), None)
            }
        };

        if let Some(prev) = last_of_thread[t] {
            thread_edges.push((prev, seq));
        }
        last_of_thread[t] = Some(seq);
        stream.push(Action {
            seq,
            tid: ThreadId(t as u32),
            kind,
            label,
            res,
            val,
            idx: idx[t],
        });
        idx[t] += 1;
        pc[t] += 1;
    }

    let ground_truth = ConcurrentExecution {
        actions: stream.clone(),
        thread_edges,
        sync_edges,
    };
    SimResult {
        stream,
        ground_truth,
    }
}

// ---------------------------------------------------------------------
// Scenario scripts

/// Classic 1-writer/2-readers: the service lock `s` guards writes; the
/// first reader takes `s`, the last reader releases it; the reader count
/// is kept under lock `c`. Guards pin the handover order so the poset
/// over {w, r} is identical in every run.
fn rw_script() -> Script {
    let mut s = Script::default();
    let writer = s.thread();
    let r1 = s.thread();
    let r2 = s.thread();

    let regular = |label: &str, res: &str| Op::Regular {
        label: label.to_owned(),
        res: Some(res.to_owned()),
    };

    s.push(writer, Op::Fork(r1));
    s.push(writer, Op::Fork(r2));
    s.push(writer, Op::Lock("s".into()));
    s.push(writer, regular("w", "x"));
    let w_unlock = s.push(writer, Op::Unlock("s".into()));

    s.push(r1, Op::Begin);
    s.push_after(r1, Op::Lock("c".into()), w_unlock);
    s.push(r1, regular("i", "cnt"));
    s.push(r1, Op::Lock("s".into()));
    let r1_uc1 = s.push(r1, Op::Unlock("c".into()));
    s.push(r1, regular("r", "x"));
    let r1_lc2 = s.push(r1, Op::Lock("c".into()));
    s.push(r1, regular("d", "cnt"));
    let r1_uc2 = s.push(r1, Op::Unlock("c".into()));
    let r1_end = s.push(r1, Op::End);

    s.push(r2, Op::Begin);
    s.push_after(r2, Op::Lock("c".into()), r1_uc1);
    s.push(r2, regular("i", "cnt"));
    let r2_uc1 = s.push(r2, Op::Unlock("c".into()));
    s.push(r2, regular("r", "x"));
    s.push_after(r2, Op::Lock("c".into()), r1_uc2);
    s.push(r2, regular("d", "cnt"));
    let r2_us = s.push(r2, Op::Unlock("s".into()));
    s.push(r2, Op::Unlock("c".into()));
    let r2_end = s.push(r2, Op::End);

    // The reader-side dance: r1 counts in, r2 counts in, r1 counts out,
    // r2 counts out and releases the service lock.
    s.guard(r1_lc2, r2_uc1);

    s.push_after(writer, Op::Lock("s".into()), r2_us);
    s.push(writer, regular("w", "x"));
    s.push(writer, Op::Unlock("s".into()));
    s.push_after(writer, Op::Join(r1), r1_end);
    s.push_after(writer, Op::Join(r2), r2_end);
    s
}

/// Producers and consumers around one buffer lock, emitting write/read
/// delimiters. Faulty consumers skip the lock.
fn prods_cons_script(producers: u64, consumers: u64, iters: u64, faulty: bool) -> Script {
    let mut s = Script::default();
    let main = s.thread();
    let mut ends = Vec::new();

    for w in 0..(producers + consumers) {
        let producing = w < producers;
        let t = s.thread();
        s.push(main, Op::Fork(t));
        s.push(t, Op::Begin);
        for _ in 0..iters {
            let locked = producing || !faulty;
            if locked {
                s.push(t, Op::Lock("b".into()));
            }
            let (before, after) = if producing {
                ("bw", "aw")
            } else {
                ("br", "ar")
            };
            s.push(
                t,
                Op::Regular {
                    label: before.into(),
                    res: Some("buf".into()),
                },
            );
            s.push(
                t,
                Op::Regular {
                    label: after.into(),
                    res: Some("buf".into()),
                },
            );
            if locked {
                s.push(t, Op::Unlock("b".into()));
            }
        }
        ends.push((t, s.push(t, Op::End)));
    }
    for (t, end) in ends {
        s.push_after(main, Op::Join(t), end);
    }
    s
}

/// Ticket-based mutual exclusion: worker i waits for worker i−1's ticket
/// release (cross-round: worker 1 waits for the last worker), then runs
/// its critical section. Synchronization is reads/writes only. The
/// faulty variant's last worker skips every ticket read.
fn bakery_script(threads: u64, rounds: u64, faulty: bool) -> Script {
    let threads = threads as usize;
    let mut s = Script::default();
    let main = s.thread();
    let workers: Vec<usize> = (0..threads).map(|_| s.thread()).collect();
    for &w in &workers {
        s.push(main, Op::Fork(w));
        s.push(w, Op::Begin);
    }

    let ticket = |i: usize| format!("ticket{i}");
    // Release-write step of each (worker, round), for read guards.
    let mut release: Vec<Vec<Option<StepRef>>> = vec![vec![None; rounds as usize]; threads];

    for round in 0..rounds as usize {
        for (i, &w) in workers.iter().enumerate() {
            let rogue = faulty && i == threads - 1;
            s.push(
                w,
                Op::Write {
                    var: ticket(i),
                    val: "1".into(),
                },
            );
            if !rogue {
                // Spin-read of the predecessor's ticket; the first entrant
                // of the first round has nobody to wait for.
                let pred = if i == 0 {
                    round.checked_sub(1).map(|r| (threads - 1, r))
                } else {
                    Some((i - 1, round))
                };
                if let Some((pi, pr)) = pred {
                    let read = s.push(w, Op::Read { var: ticket(pi) });
                    // Predecessor rounds are built before this step, so
                    // the release ref is always present.
                    s.guard(read, release[pi][pr].expect("predecessor release exists"));
                }
            }
            s.push(
                w,
                Op::Regular {
                    label: "bw".into(),
                    res: Some("cs".into()),
                },
            );
            s.push(
                w,
                Op::Regular {
                    label: "aw".into(),
                    res: Some("cs".into()),
                },
            );
            release[i][round] = Some(s.push(
                w,
                Op::Write {
                    var: ticket(i),
                    val: "0".into(),
                },
            ));
        }
    }

    for &w in &workers {
        let end = s.push(w, Op::End);
        s.push_after(main, Op::Join(w), end);
    }
    s
}

/// Two forked threads emitting fixed regular labels, nothing ordering
/// them across threads.
fn two_thread_script(labels: &[&[&str]], res: &str) -> Script {
    let mut s = Script::default();
    let main = s.thread();
    let mut ends = Vec::new();
    for thread_labels in labels {
        let t = s.thread();
        s.push(main, Op::Fork(t));
        s.push(t, Op::Begin);
        for label in *thread_labels {
            s.push(
                t,
                Op::Regular {
                    label: (*label).to_owned(),
                    res: Some(res.to_owned()),
                },
            );
        }
        ends.push((t, s.push(t, Op::End)));
    }
    for (t, end) in ends {
        s.push_after(main, Op::Join(t), end);
    }
    s
}

// ---------------------------------------------------------------------
// Random executions

/// Knobs for the `mix` workload.
#[derive(Clone, Debug)]
pub struct MixCfg {
    /// Total thread count including the forking main thread.
    pub threads: u32,
    /// Approximate stream length.
    pub actions: u64,
    /// Allow shared-variable reads and writes.
    pub readwrite: bool,
    /// Allow notify/wait signal pairs.
    pub signals: bool,
    /// Draw written values from a tiny pool so same-value writes collide.
    pub collide: bool,
}

impl MixCfg {
    /// Lock/fork/join-only synchronization (plus regular events).
    pub fn lock_fork_only(threads: u32, actions: u64) -> MixCfg {
        MixCfg {
            threads,
            actions,
            readwrite: false,
            signals: false,
            collide: false,
        }
    }

    /// Every synchronization family, with colliding write values.
    pub fn full(threads: u32, actions: u64) -> MixCfg {
        MixCfg {
            threads,
            actions,
            readwrite: true,
            signals: true,
            collide: true,
        }
    }
}

/// Builds a random per-thread script: workers do seeded sequences of
/// regular events, bounded lock regions, reads/writes and signals. Lock
/// regions never nest, so the schedule cannot deadlock.
fn mix_script(seed: u64, cfg: &MixCfg) -> Script {
    // Decorrelate the script choice from the scheduler choices.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut s = Script::default();
    let main = s.thread();
    let workers: Vec<usize> = (1..cfg.threads as usize).map(|_| s.thread()).collect();
    let mut ends = Vec::new();

    let labels = ["a", "b", "c", "d"];
    let locks = ["l0", "l1", "l2"];
    let vars = ["x", "y"];
    let signals = ["sig0", "sig1"];
    let mut fresh_value = 0u64;

    // Skeleton costs fork+begin+end+join per worker.
    let budget = (cfg.actions as usize)
        .saturating_sub(4 * workers.len())
        .max(workers.len());
    let per_worker = budget / workers.len().max(1);

    for &w in &workers {
        s.push(main, Op::Fork(w));
        s.push(w, Op::Begin);
        let mut emitted = 0usize;
        while emitted < per_worker {
            let mut choices = vec!["regular", "lock"];
            if cfg.readwrite {
                choices.push("read");
                choices.push("write");
            }
            if cfg.signals {
                choices.push("notify");
                choices.push("wait");
            }
            match *choices.choose(&mut rng).unwrap() {
                "regular" => {
                    let label = *labels.choose(&mut rng).unwrap();
                    s.push(
                        w,
                        Op::Regular {
                            label: label.into(),
                            res: None,
                        },
                    );
                    emitted += 1;
                }
                "lock" => {
                    let lock = *locks.choose(&mut rng).unwrap();
                    s.push(w, Op::Lock(lock.into()));
                    for _ in 0..rng.gen_range(1..=2) {
                        let label = *labels.choose(&mut rng).unwrap();
                        s.push(
                            w,
                            Op::Regular {
                                label: label.into(),
                                res: None,
                            },
                        );
                    }
                    s.push(w, Op::Unlock(lock.into()));
                    emitted += 3;
                }
                "read" => {
                    s.push(
                        w,
                        Op::Read {
                            var: (*vars.choose(&mut rng).unwrap()).into(),
                        },
                    );
                    emitted += 1;
                }
                "write" => {
                    let val = if cfg.collide {
                        (*["1", "2"].choose(&mut rng).unwrap()).to_owned()
                    } else {
                        fresh_value += 1;
                        fresh_value.to_string()
                    };
                    s.push(
                        w,
                        Op::Write {
                            var: (*vars.choose(&mut rng).unwrap()).into(),
                            val,
                        },
                    );
                    emitted += 1;
                }
                "notify" => {
                    s.push(w, Op::Notify((*signals.choose(&mut rng).unwrap()).into()));
                    emitted += 1;
                }
                "wait" => {
                    s.push(w, Op::Wait((*signals.choose(&mut rng).unwrap()).into()));
                    emitted += 1;
                }
                _ => unreachable!(),
            }
        }
        ends.push((w, s.push(w, Op::End)));
    }
    for (t, end) in ends {
        s.push_after(main, Op::Join(t), end);
    }
    s
}

/// One random execution with scheduled ground truth.
pub fn random_execution(seed: u64, cfg: &MixCfg) -> SimResult {
    run_script(&mix_script(seed, cfg), seed)
}

/// Stream only, skipping the ground-truth clone; for throughput runs.
pub fn random_stream(seed: u64, cfg: &MixCfg) -> Vec<Action> {
    run_script(&mix_script(seed, cfg), seed).stream
}
