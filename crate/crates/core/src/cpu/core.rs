use std::collections::VecDeque;
use std::sync::Arc;

use super::llc::{Eviction, Llc};
use crate::controller::ReqKind;
use crate::workload::TraceRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct CoreConfig {
    pub width: usize,
    pub window: usize,
    pub mshrs: usize,
    pub llc_latency: u64,
    /// Pending memory requests a core may hold before dispatch stalls.
    pub outbox: usize,
}

impl Default for CoreConfig {
    fn default() -> Self {
        Self {
            width: 4,
            window: 128,
            mshrs: 8,
            llc_latency: 20,
            outbox: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Ready(u64),
    Waiting(u64),
}

/// A memory request waiting to leave the core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outgoing {
    pub kind: ReqKind,
    pub addr: u64,
    /// Core cycle from which the request may be sent.
    pub ready_at: u64,
}

/// Snapshot of retired instructions at a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Mark {
    pub cycle: u64,
    pub retired: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoreStats {
    pub llc_read_hits: u64,
    pub llc_read_misses: u64,
    pub llc_writes: u64,
    pub mshr_merges: u64,
    pub reads_sent: u64,
    pub writebacks: u64,
    pub mshr_stalls: u64,
}

/// Trace-driven in-order core with a bounded instruction window.
///
/// Instructions dispatch in trace order, up to `width` per cycle, and retire in
/// order, up to `width` per cycle. Reads that miss the LLC hold an MSHR until
/// the line returns; reads to a line already in flight share its MSHR.
/// Writes allocate in the LLC without a fetch and never block retirement.
#[derive(Debug, Clone)]
pub struct Core {
    id: usize,
    cfg: CoreConfig,
    trace: Arc<Vec<TraceRecord>>,
    cursor: usize,
    bubbles_left: u64,
    window: VecDeque<Slot>,
    mshrs: Vec<u64>,
    outbox: VecDeque<Outgoing>,
    retired: u64,
    warmup: u64,
    quota: u64,
    warm: Option<Mark>,
    done: Option<Mark>,
    stats: CoreStats,
    stats_at_warm: CoreStats,
    stats_at_done: Option<CoreStats>,
    passes: u64,
}

impl Core {
    /// `quota` counts instructions after the first `warmup` retired ones.
    pub fn new(id: usize, cfg: CoreConfig, trace: Arc<Vec<TraceRecord>>, warmup: u64, quota: u64) -> Self {
        assert!(!trace.is_empty(), "empty trace");
        let bubbles_left = trace[0].bubbles;
        let mut c = Self {
            id,
            cfg,
            trace,
            cursor: 0,
            bubbles_left,
            window: VecDeque::new(),
            mshrs: Vec::new(),
            outbox: VecDeque::new(),
            retired: 0,
            warmup,
            quota,
            warm: None,
            done: None,
            stats: CoreStats::default(),
            stats_at_warm: CoreStats::default(),
            stats_at_done: None,
            passes: 0,
        };
        if warmup == 0 {
            c.warm = Some(Mark::default());
        }
        c
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn retired(&self) -> u64 {
        self.retired
    }

    pub fn is_done(&self) -> bool {
        self.done.is_some()
    }

    pub fn warm_mark(&self) -> Option<Mark> {
        self.warm
    }

    pub fn done_mark(&self) -> Option<Mark> {
        self.done
    }

    pub fn outstanding(&self) -> usize {
        self.mshrs.len()
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Full passes over the trace completed so far.
    pub fn passes(&self) -> u64 {
        self.passes
    }

    /// Counters accumulated between the end of warm-up and reaching the quota.
    pub fn measured_stats(&self) -> CoreStats {
        let end = self.stats_at_done.as_ref().unwrap_or(&self.stats);
        let w = &self.stats_at_warm;
        CoreStats {
            llc_read_hits: end.llc_read_hits - w.llc_read_hits,
            llc_read_misses: end.llc_read_misses - w.llc_read_misses,
            llc_writes: end.llc_writes - w.llc_writes,
            mshr_merges: end.mshr_merges - w.mshr_merges,
            reads_sent: end.reads_sent - w.reads_sent,
            writebacks: end.writebacks - w.writebacks,
            mshr_stalls: end.mshr_stalls - w.mshr_stalls,
        }
    }

    /// Instructions per cycle between the warm-up and quota marks (or `now`).
    pub fn ipc(&self, now: u64) -> f64 {
        let Some(w) = self.warm else { return 0.0 };
        let end = self.done.unwrap_or(Mark {
            cycle: now,
            retired: self.retired,
        });
        if end.cycle <= w.cycle {
            return 0.0;
        }
        (end.retired - w.retired) as f64 / (end.cycle - w.cycle) as f64
    }

    pub fn peek_outgoing(&self, now: u64) -> Option<&Outgoing> {
        self.outbox.front().filter(|o| o.ready_at <= now)
    }

    pub fn pop_outgoing(&mut self) -> Option<Outgoing> {
        self.outbox.pop_front()
    }

    fn writeback(&mut self, ev: Option<Eviction>, now: u64) {
        if let Some(Eviction { line, dirty: true }) = ev {
            self.stats.writebacks += 1;
            self.outbox.push_back(Outgoing {
                kind: ReqKind::Write,
                addr: line << 6,
                ready_at: now,
            });
        }
    }

    /// A read for `line` returned from memory at core cycle `now`.
    pub fn fill(&mut self, line: u64, now: u64, llc: &mut Llc) {
        if let Some(i) = self.mshrs.iter().position(|l| *l == line) {
            self.mshrs.swap_remove(i);
        }
        for s in self.window.iter_mut() {
            if *s == Slot::Waiting(line) {
                *s = Slot::Ready(now);
            }
        }
        let ev = llc.insert(line, false);
        self.writeback(ev, now);
    }

    fn advance_cursor(&mut self) {
        self.cursor += 1;
        if self.cursor == self.trace.len() {
            self.cursor = 0;
            self.passes += 1;
        }
        self.bubbles_left = self.trace[self.cursor].bubbles;
    }

    /// Tries to dispatch the memory instruction at the cursor.
    fn dispatch_memory(&mut self, now: u64, llc: &mut Llc, translate: &dyn Fn(usize, u64) -> u64) -> bool {
        let rec = self.trace[self.cursor];
        let line = translate(self.id, rec.addr) >> 6;
        match rec.kind {
            ReqKind::Write => {
                if self.outbox.len() >= self.cfg.outbox {
                    return false;
                }
                self.stats.llc_writes += 1;
                let (_, ev) = llc.write(line);
                self.writeback(ev, now);
                self.window.push_back(Slot::Ready(now));
            }
            ReqKind::Read => {
                if self.mshrs.contains(&line) {
                    self.stats.mshr_merges += 1;
                    self.window.push_back(Slot::Waiting(line));
                } else if llc.contains(line) {
                    llc.read(line);
                    self.stats.llc_read_hits += 1;
                    self.window.push_back(Slot::Ready(now + self.cfg.llc_latency));
                } else {
                    if self.mshrs.len() >= self.cfg.mshrs || self.outbox.len() >= self.cfg.outbox {
                        self.stats.mshr_stalls += 1;
                        return false;
                    }
                    llc.read(line);
                    self.stats.llc_read_misses += 1;
                    self.stats.reads_sent += 1;
                    self.mshrs.push(line);
                    self.outbox.push_back(Outgoing {
                        kind: ReqKind::Read,
                        addr: line << 6,
                        ready_at: now + self.cfg.llc_latency,
                    });
                    self.window.push_back(Slot::Waiting(line));
                }
            }
        }
        true
    }

    /// One core cycle: dispatch, then retire.
    pub fn tick(&mut self, now: u64, llc: &mut Llc, translate: &dyn Fn(usize, u64) -> u64) {
        let mut n = 0;
        while n < self.cfg.width && self.window.len() < self.cfg.window {
            if self.bubbles_left > 0 {
                self.bubbles_left -= 1;
                self.window.push_back(Slot::Ready(now));
            } else if self.dispatch_memory(now, llc, translate) {
                self.advance_cursor();
            } else {
                break;
            }
            n += 1;
        }
        let mut r = 0;
        while r < self.cfg.width {
            match self.window.front() {
                Some(Slot::Ready(t)) if *t <= now => {
                    self.window.pop_front();
                    self.retired += 1;
                    r += 1;
                    self.check_marks(now);
                }
                _ => break,
            }
        }
    }

    fn check_marks(&mut self, now: u64) {
        // Marks are taken at the end of the cycle in which the count is reached.
        let mark = Mark {
            cycle: now + 1,
            retired: self.retired,
        };
        if self.warm.is_none() && self.retired >= self.warmup {
            self.warm = Some(mark);
            self.stats_at_warm = self.stats.clone();
        }
        if self.done.is_none() && self.retired >= self.warmup + self.quota {
            self.done = Some(mark);
            self.stats_at_done = Some(self.stats.clone());
        }
    }
}
