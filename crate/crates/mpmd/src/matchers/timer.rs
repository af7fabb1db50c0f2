//! The timer-based deterministic matcher (CLI name `algA`).
//!
//! Each point `v` carries a timer `z_v` accumulating delay cost at rate
//! `f'(t − t₀)` while a request is pending there; timers persist across
//! internal matches and reset only on external matches. An external match
//! between pending requests at `u ≠ v` fires when some `x ∈ {u,v}` has
//! either `δ ≤ z_x < 2δ` with `{u,v}` disjoint from the suspect set `Ψ`,
//! or `z_x ≥ 2δ` unconditionally. Requests outside `Ψ` are prioritized.
//! Every `2k` external matches close a round and clear `Ψ`. On general
//! metrics `δ` is replaced by `d_max`.

use std::collections::BTreeSet;

use super::THRESHOLD_TOL;
use crate::costfn::TimeCostFunction;
use crate::engine::{Emission, OnlineMatcher};
use crate::instance::Request;
use crate::metric::MetricSpace;

/// Always-on self-audit of the matcher's structural invariants.
#[derive(Debug, Clone, Default)]
pub struct TimerInvariants {
    pub events_checked: u64,
    pub violations: Vec<String>,
}

pub struct TimerMatcher {
    f: TimeCostFunction,
    k: usize,
    delta_eff: f64,
    tol: f64,
    z_base: Vec<f64>,
    pending: Vec<Option<Request>>,
    psi: BTreeSet<usize>,
    round_externals: usize,
    round_just_started: bool,
    invariants: TimerInvariants,
}

struct Candidate {
    class: usize,
    z_init: f64,
    initiator: usize,
    partner: usize,
}

impl TimerMatcher {
    pub fn new(space: &MetricSpace, f: TimeCostFunction) -> Self {
        let delta_eff = match space.uniform_delta() {
            Some(d) => d,
            None => space.d_max(),
        };
        let delta_eff = if delta_eff > 0.0 { delta_eff } else { 1.0 };
        TimerMatcher {
            f,
            k: space.k(),
            delta_eff,
            tol: THRESHOLD_TOL * delta_eff,
            z_base: vec![0.0; space.k()],
            pending: vec![None; space.k()],
            psi: BTreeSet::new(),
            round_externals: 0,
            round_just_started: true,
            invariants: TimerInvariants::default(),
        }
    }

    /// Effective single threshold (δ on uniform spaces, d_max otherwise).
    pub fn delta_eff(&self) -> f64 {
        self.delta_eff
    }

    pub fn timer(&self, p: usize, now: f64) -> f64 {
        self.z_base[p]
            + self.pending[p]
                .map_or(0.0, |r| self.f.eval_unchecked((now - r.arrival).max(0.0)))
    }

    pub fn psi(&self) -> &BTreeSet<usize> {
        &self.psi
    }

    pub fn round_externals(&self) -> usize {
        self.round_externals
    }

    pub fn invariants(&self) -> &TimerInvariants {
        &self.invariants
    }

    fn check(&mut self, cond: bool, msg: &str) {
        self.invariants.events_checked += 1;
        if !cond {
            self.invariants.violations.push(msg.to_string());
        }
    }

    fn audit_after_event(&mut self) {
        let externals = self.round_externals;
        let k = self.k;
        self.check(externals <= 2 * k, "more than 2k external matches in a round");
        let psi_ok = self.psi.iter().all(|&p| p < k);
        self.check(psi_ok, "suspect set contains an out-of-range point");
        if self.round_just_started {
            let empty = self.psi.is_empty();
            self.check(empty, "suspect set not empty at round start");
        }
    }

    /// Best eligible external match at `now`, if any.
    fn best_candidate(&self, now: f64) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for u in 0..self.k {
            if self.pending[u].is_none() {
                continue;
            }
            for v in (u + 1)..self.k {
                if self.pending[v].is_none() {
                    continue;
                }
                let pair_outside_psi = !self.psi.contains(&u) && !self.psi.contains(&v);
                let mut initiator: Option<(f64, usize)> = None;
                for x in [u, v] {
                    let z = self.timer(x, now);
                    let cond_b = z >= 2.0 * self.delta_eff - self.tol;
                    let cond_a = !cond_b && z >= self.delta_eff - self.tol && pair_outside_psi;
                    if cond_a || cond_b {
                        let better = match initiator {
                            None => true,
                            Some((zb, xb)) => z > zb || (z == zb && x < xb),
                        };
                        if better {
                            initiator = Some((z, x));
                        }
                    }
                }
                let Some((z_init, x)) = initiator else { continue };
                let class = [u, v].iter().filter(|p| self.psi.contains(p)).count();
                let partner = if x == u { v } else { u };
                let cand = Candidate {
                    class,
                    z_init,
                    initiator: x,
                    partner,
                };
                let replace = match &best {
                    None => true,
                    Some(b) => {
                        (cand.class, -cand.z_init, cand.initiator, cand.partner)
                            .partial_cmp(&(b.class, -b.z_init, b.initiator, b.partner))
                            .unwrap()
                            .is_lt()
                    }
                };
                if replace {
                    best = Some(cand);
                }
            }
        }
        best
    }

    fn fixpoint(&mut self, now: f64) -> Vec<Emission> {
        let mut out = Vec::new();
        while let Some(c) = self.best_candidate(now) {
            let (u, v) = (c.initiator.min(c.partner), c.initiator.max(c.partner));
            let ru = self.pending[u].take().unwrap();
            let rv = self.pending[v].take().unwrap();
            out.push(Emission {
                a: ru.id,
                b: rv.id,
                initiator: Some(c.initiator),
            });
            self.z_base[u] = 0.0;
            self.z_base[v] = 0.0;
            if !(self.psi.contains(&u) && self.psi.contains(&v)) {
                self.psi.remove(&u);
                self.psi.remove(&v);
                self.psi.insert(c.initiator);
            }
            self.round_just_started = false;
            self.round_externals += 1;
            let zu = self.timer(u, now);
            let zv = self.timer(v, now);
            self.check(zu == 0.0 && zv == 0.0, "timer not reset after external match");
            if self.round_externals == 2 * self.k {
                self.psi.clear();
                self.round_externals = 0;
                self.round_just_started = true;
            }
            self.audit_after_event();
        }
        out
    }
}

impl OnlineMatcher for TimerMatcher {
    fn observe_arrival(&mut self, req: &Request, now: f64) -> Vec<Emission> {
        let p = req.point;
        let mut out = Vec::new();
        if let Some(old) = self.pending[p].take() {
            // Operation 1: co-located actives pair up immediately; the
            // timer keeps the finished pendency's cost.
            self.z_base[p] += self.f.eval_unchecked((now - old.arrival).max(0.0));
            out.push(Emission::pair(old.id, req.id));
        } else {
            self.pending[p] = Some(*req);
        }
        // Either the point emptied through Operation 1 or it holds exactly
        // the request that just arrived.
        let single = self.pending[p].map_or(true, |r| r.id == req.id);
        self.check(single, "more than one pending request at a point");
        out.extend(self.fixpoint(now));
        self.audit_after_event();
        out
    }

    fn next_trigger(&mut self, now: f64) -> Option<f64> {
        let mut earliest: Option<f64> = None;
        for p in 0..self.k {
            let Some(r) = self.pending[p] else { continue };
            let z = self.timer(p, now);
            let threshold = if z < self.delta_eff - self.tol {
                self.delta_eff
            } else if z < 2.0 * self.delta_eff - self.tol {
                2.0 * self.delta_eff
            } else {
                continue;
            };
            let t = r.arrival
                + self
                    .f
                    .invert_unchecked((threshold - self.z_base[p]).max(0.0));
            let t = t.max(now);
            earliest = Some(match earliest {
                None => t,
                Some(e) => e.min(t),
            });
        }
        earliest
    }

    fn fire_trigger(&mut self, now: f64) -> Vec<Emission> {
        let out = self.fixpoint(now);
        self.audit_after_event();
        out
    }
}
