//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;

use rvc_core::{DramConfig, PhaseModel, Record, Row, Trace};

/// Exact multiset counter.
#[derive(Clone, Default)]
pub struct ExactCounter {
    counts: HashMap<u32, u64>,
}

impl ExactCounter {
    pub fn add(&mut self, x: u32) {
        *self.counts.entry(x).or_default() += 1;
    }

    pub fn clear(&mut self, x: u32) {
        self.counts.remove(&x);
    }

    pub fn get(&self, x: u32) -> u64 {
        self.counts.get(&x).copied().unwrap_or(0)
    }
}

/// Largest `T >= 1` with `pred(T)`, found by walking up from 1. `pred` must
/// hold at 1 and be monotone decreasing.
pub fn scan_largest(pred: impl Fn(u64) -> bool) -> Option<u64> {
    if !pred(1) {
        return None;
    }
    let mut t = 1;
    while pred(t + 1) {
        t += 1;
    }
    Some(t)
}

/// `2(T - 1) < t_rh / (2n)` with both sides scaled by `2n`.
pub fn aggressor_ok(t_rh: u64, n: u64, t: u64) -> bool {
    2 * (t - 1) * 2 * n < t_rh
}

pub fn rvc_ok(t_rh: u64, t: u64) -> bool {
    2 * (t - 1) < t_rh
}

/// Flips recomputed from scratch: for each activation and each neighbour,
/// the disturbance is the number of neighbour activations since the most
/// recent restore of that row, found by scanning the history backwards.
///
/// `refreshes[&s]` holds the rows refreshed right after activation `s`
/// (1-based).
pub fn naive_flips(cfg: &DramConfig, trace: &Trace, refreshes: &HashMap<u64, Vec<Row>>) -> Vec<(u64, u32)> {
    let rows = cfg.rows_per_bank() as u64;
    let w = cfg.window_acts();
    let n = i64::from(cfg.blast_radius());
    // (act_seq, row, window index, position within window)
    let mut acts: Vec<(u64, u32, u64, u64)> = Vec::new();
    let mut window = 0u64;
    let mut pos = 0u64;
    let mut flips = Vec::new();
    let near = |a: u32, b: u32| a != b && (i64::from(a) - i64::from(b)).abs() <= n;
    for rec in &trace.records {
        match *rec {
            Record::Window => {
                window += 1;
                pos = 0;
            }
            Record::Act(Row(r)) => {
                if pos == w {
                    window += 1;
                    pos = 0;
                }
                let seq = acts.len() as u64 + 1;
                acts.push((seq, r, window, pos));
                pos += 1;
                for v in 0..rows as u32 {
                    if !near(v, r) {
                        continue;
                    }
                    // walk back to the last restore of v
                    let slot = (u128::from(v) * u128::from(w) / u128::from(rows as u32)) as u64;
                    let mut d = 0u64;
                    for &(s, a, win, p) in acts.iter().rev() {
                        if s != seq && refreshes.get(&s).is_some_and(|rs| rs.contains(&Row(v))) {
                            break;
                        }
                        if a == v {
                            break;
                        }
                        let restored_here = match cfg.phase_model() {
                            PhaseModel::EpochBoundary => win != window,
                            // v's slot falls between this act and the current one
                            PhaseModel::Staggered => staggered_restored_between(win, p, window, pos - 1, slot),
                        };
                        if restored_here {
                            break;
                        }
                        if near(a, v) {
                            d += 1;
                        }
                    }
                    if d == cfg.t_rh() {
                        flips.push((seq, v));
                    }
                }
            }
        }
    }
    flips
}

/// Whether slot `slot` is passed strictly after the act at `(w0, p0)` and at
/// or before the act at `(w1, p1)`. Under the staggered model a window that
/// ends early restores its remaining slots at the boundary, so any window
/// change also counts when the slot was still pending in `w0`.
fn staggered_restored_between(w0: u64, p0: u64, w1: u64, p1: u64, slot: u64) -> bool {
    if w0 == w1 {
        p0 < slot && slot <= p1
    } else {
        // pending in w0, or reached in w1, or a whole window in between
        p0 < slot || slot <= p1 || w1 > w0 + 1
    }
}
