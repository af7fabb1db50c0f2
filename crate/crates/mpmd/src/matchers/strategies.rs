//! The three threshold baselines. All of them match co-located requests
//! immediately; they differ in when an external match is allowed.
//!
//! * `StrategyI`: both requests of the pair must have waited at least θ.
//! * `StrategyII`: both endpoints' accumulated time costs must reach θ.
//! * `StrategyIII`: one endpoint's accumulated time cost reaching θ is
//!   enough, evaluated when the threshold is crossed or when a request
//!   arrives at a point already past it.
//!
//! When the request stream ends, strategies I and III run one relaxed
//! drain pass that lets a pair go as soon as a single side satisfies its
//! threshold; strategy II keeps its double condition to the end.

use super::THRESHOLD_TOL;
use crate::costfn::TimeCostFunction;
use crate::engine::{Emission, OnlineMatcher};
use crate::instance::Request;

/// External match once both requests have waited at least θ.
pub struct StrategyI {
    theta: f64,
    tol: f64,
    pending: Vec<Option<Request>>,
}

impl StrategyI {
    pub fn new(k: usize, theta: f64) -> Self {
        assert!(theta > 0.0, "threshold must be positive");
        StrategyI {
            theta,
            tol: THRESHOLD_TOL * theta.max(1.0),
            pending: vec![None; k],
        }
    }

    fn sorted_pending(&self) -> Vec<Request> {
        let mut v: Vec<Request> = self.pending.iter().flatten().copied().collect();
        v.sort_by(|a, b| a.arrival.partial_cmp(&b.arrival).unwrap().then(a.id.cmp(&b.id)));
        v
    }

    /// Pairs the two oldest pending requests while the wait condition
    /// holds. `relaxed` needs only the older side past θ.
    fn collect(&mut self, now: f64, relaxed: bool) -> Vec<Emission> {
        let mut out = Vec::new();
        loop {
            let v = self.sorted_pending();
            if v.len() < 2 {
                break;
            }
            let gate = if relaxed { v[0].arrival } else { v[1].arrival };
            if now - gate < self.theta - self.tol {
                break;
            }
            out.push(Emission::pair(v[0].id, v[1].id));
            self.pending[v[0].point] = None;
            self.pending[v[1].point] = None;
        }
        out
    }
}

impl OnlineMatcher for StrategyI {
    fn observe_arrival(&mut self, req: &Request, now: f64) -> Vec<Emission> {
        if let Some(old) = self.pending[req.point].take() {
            let mut ems = vec![Emission::pair(old.id, req.id)];
            ems.extend(self.collect(now, false));
            return ems;
        }
        self.pending[req.point] = Some(*req);
        self.collect(now, false)
    }

    fn next_trigger(&mut self, now: f64) -> Option<f64> {
        let v = self.sorted_pending();
        if v.len() < 2 {
            return None;
        }
        Some((v[1].arrival + self.theta).max(now))
    }

    fn fire_trigger(&mut self, now: f64) -> Vec<Emission> {
        self.collect(now, false)
    }

    fn finalize(&mut self, now: f64) -> Vec<Emission> {
        self.collect(now, true)
    }
}

/// Per-point accumulator of time costs since the last external match
/// involving the point.
#[derive(Clone, Copy, Default)]
struct PointAcc {
    frozen: f64,
    pending: Option<Request>,
}

impl PointAcc {
    fn value(&self, f: TimeCostFunction, now: f64) -> f64 {
        self.frozen
            + self
                .pending
                .map_or(0.0, |r| f.eval_unchecked((now - r.arrival).max(0.0)))
    }

    /// Time at which the accumulator reaches `threshold`, given a pending
    /// request; `None` when already there or no request is pending.
    fn crossing(&self, f: TimeCostFunction, threshold: f64, tol: f64, now: f64) -> Option<f64> {
        let r = self.pending?;
        if self.value(f, now) >= threshold - tol {
            return None;
        }
        Some(r.arrival + f.invert_unchecked((threshold - self.frozen).max(0.0)))
    }
}

/// External match once both endpoints' accumulators reach θ.
pub struct StrategyII {
    f: TimeCostFunction,
    theta: f64,
    tol: f64,
    points: Vec<PointAcc>,
}

impl StrategyII {
    pub fn new(k: usize, f: TimeCostFunction, theta: f64) -> Self {
        assert!(theta > 0.0, "threshold must be positive");
        StrategyII {
            f,
            theta,
            tol: THRESHOLD_TOL * theta.max(1.0),
            points: vec![PointAcc::default(); k],
        }
    }

    fn collect(&mut self, now: f64) -> Vec<Emission> {
        let mut out = Vec::new();
        loop {
            // Points with a pending request and a full accumulator, the
            // two largest accumulators first.
            let mut ready: Vec<(f64, usize)> = self
                .points
                .iter()
                .enumerate()
                .filter(|(_, a)| a.pending.is_some())
                .map(|(p, a)| (a.value(self.f, now), p))
                .filter(|&(v, _)| v >= self.theta - self.tol)
                .collect();
            if ready.len() < 2 {
                break;
            }
            ready.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let (pu, pv) = (ready[0].1, ready[1].1);
            let (ru, rv) = (
                self.points[pu].pending.take().unwrap(),
                self.points[pv].pending.take().unwrap(),
            );
            self.points[pu].frozen = 0.0;
            self.points[pv].frozen = 0.0;
            out.push(Emission::pair(ru.id, rv.id));
        }
        out
    }
}

impl OnlineMatcher for StrategyII {
    fn observe_arrival(&mut self, req: &Request, now: f64) -> Vec<Emission> {
        let acc = &mut self.points[req.point];
        if let Some(old) = acc.pending.take() {
            acc.frozen += self.f.eval_unchecked((now - old.arrival).max(0.0));
            let mut ems = vec![Emission::pair(old.id, req.id)];
            ems.extend(self.collect(now));
            return ems;
        }
        acc.pending = Some(*req);
        self.collect(now)
    }

    fn next_trigger(&mut self, now: f64) -> Option<f64> {
        self.points
            .iter()
            .filter_map(|a| a.crossing(self.f, self.theta, self.tol, now))
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .map(|t| t.max(now))
    }

    fn fire_trigger(&mut self, now: f64) -> Vec<Emission> {
        self.collect(now)
    }
}

/// External match once a single endpoint's accumulator reaches θ.
///
/// The enabling is edge-evaluated: once at the threshold crossing of a
/// pending point, and once when a request arrives at a point already
/// past θ. An edge with no partner available simply passes; the point
/// does not grab later arrivals until its accumulator resets.
pub struct StrategyIII {
    f: TimeCostFunction,
    theta: f64,
    tol: f64,
    points: Vec<PointAcc>,
    /// Per point: a crossing edge is still owed for the current pendency.
    armed: Vec<bool>,
}

impl StrategyIII {
    pub fn new(k: usize, f: TimeCostFunction, theta: f64) -> Self {
        assert!(theta > 0.0, "threshold must be positive");
        StrategyIII {
            f,
            theta,
            tol: THRESHOLD_TOL * theta.max(1.0),
            points: vec![PointAcc::default(); k],
            armed: vec![false; k],
        }
    }

    /// One match attempt initiated by `p`: the partner is the pending
    /// point with the largest accumulator (ties to the lower index).
    fn try_match(&mut self, p: usize, now: f64) -> Option<Emission> {
        self.points[p].pending?;
        let partner = self
            .points
            .iter()
            .enumerate()
            .filter(|&(q, a)| q != p && a.pending.is_some())
            .map(|(q, a)| (a.value(self.f, now), q))
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(b.1.cmp(&a.1)))?
            .1;
        let ru = self.points[p].pending.take().unwrap();
        let rv = self.points[partner].pending.take().unwrap();
        self.points[p].frozen = 0.0;
        self.points[partner].frozen = 0.0;
        self.armed[p] = false;
        self.armed[partner] = false;
        Some(Emission::pair(ru.id, rv.id))
    }
}

impl OnlineMatcher for StrategyIII {
    fn observe_arrival(&mut self, req: &Request, now: f64) -> Vec<Emission> {
        let acc = &mut self.points[req.point];
        if let Some(old) = acc.pending.take() {
            acc.frozen += self.f.eval_unchecked((now - old.arrival).max(0.0));
            self.armed[req.point] = false;
            return vec![Emission::pair(old.id, req.id)];
        }
        acc.pending = Some(*req);
        if self.points[req.point].value(self.f, now) >= self.theta - self.tol {
            // Arrival on a point already past θ is its own edge.
            self.armed[req.point] = false;
            return self.try_match(req.point, now).into_iter().collect();
        }
        self.armed[req.point] = true;
        Vec::new()
    }

    fn next_trigger(&mut self, now: f64) -> Option<f64> {
        let mut earliest: Option<f64> = None;
        for (p, a) in self.points.iter().enumerate() {
            if !self.armed[p] || a.pending.is_none() {
                continue;
            }
            // A crossing that already happened (e.g. exactly at another
            // request's arrival) still owes its edge: fire immediately.
            let t = match a.crossing(self.f, self.theta, self.tol, now) {
                Some(t) => t.max(now),
                None => now,
            };
            earliest = Some(earliest.map_or(t, |e: f64| e.min(t)));
        }
        earliest
    }

    fn fire_trigger(&mut self, now: f64) -> Vec<Emission> {
        let mut out = Vec::new();
        for p in 0..self.points.len() {
            if !self.armed[p] || self.points[p].pending.is_none() {
                continue;
            }
            if self.points[p].value(self.f, now) >= self.theta - self.tol {
                self.armed[p] = false;
                if let Some(em) = self.try_match(p, now) {
                    out.push(em);
                }
            }
        }
        out
    }

    fn finalize(&mut self, now: f64) -> Vec<Emission> {
        let mut out = Vec::new();
        loop {
            let initiator = self
                .points
                .iter()
                .enumerate()
                .filter(|(_, a)| a.pending.is_some())
                .map(|(p, a)| (a.value(self.f, now), p))
                .filter(|&(v, _)| v >= self.theta - self.tol)
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(b.1.cmp(&a.1)));
            let Some((_, p)) = initiator else { break };
            match self.try_match(p, now) {
                Some(em) => out.push(em),
                None => break,
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, MatchKind, SimulationResult};
    use crate::instance::{Instance, InstanceMeta};
    use crate::metric::MetricSpace;

    fn f2() -> TimeCostFunction {
        "monomial:2".parse().unwrap()
    }

    fn run(matcher: &mut dyn OnlineMatcher, k: usize, schedule: Vec<(usize, f64)>) -> SimulationResult {
        let space = MetricSpace::uniform(k, 1.0).unwrap();
        let inst =
            Instance::from_schedule(space, f2(), schedule, 1.0, InstanceMeta::default()).unwrap();
        simulate(matcher, &inst).unwrap()
    }

    #[test]
    fn s1_internal_is_immediate() {
        let mut m = StrategyI::new(2, 1.0);
        let r = run(&mut m, 2, vec![(0, 0.0), (0, 0.25)]);
        assert_eq!(r.matches[0].kind, MatchKind::Internal);
        assert_eq!(r.matches[0].time, 0.25);
    }

    #[test]
    fn s1_single_pair_waits_both_thresholds() {
        let mut m = StrategyI::new(2, 1.0);
        let r = run(&mut m, 2, vec![(0, 0.0), (1, 0.0)]);
        // Tie perturbation nudges the second arrival; the match fires once
        // the younger request has waited θ.
        assert_eq!(r.matches.len(), 1);
        let t = r.matches[0].time;
        assert!((t - 1.0).abs() < 1e-6, "match at {t}");
    }

    #[test]
    fn s2_freezes_accumulator_without_pending() {
        // One early pair at point 0 freezes cost f(0.5); point 1 request
        // then has to push its own accumulator to θ before the external.
        let mut m = StrategyII::new(2, f2(), 1.0);
        let r = run(&mut m, 2, vec![(0, 0.0), (0, 0.5), (1, 1.0), (0, 2.0)]);
        let ext: Vec<_> = r
            .matches
            .iter()
            .filter(|m| m.kind == MatchKind::External)
            .collect();
        assert_eq!(ext.len(), 1);
        // acc(point1) = f(t - 1) reaches 1 at t = 2; acc(point0) = 0.25 +
        // f(t - 2) reaches 1 at t = 2 + sqrt(0.75).
        let expect = 2.0 + 0.75_f64.sqrt();
        assert!((ext[0].time - expect).abs() < 1e-9, "ext at {}", ext[0].time);
    }

    #[test]
    fn s3_single_pair_fires_at_older_crossing() {
        let mut m = StrategyIII::new(2, f2(), 1.0);
        let r = run(&mut m, 2, vec![(0, 0.0), (1, 0.1)]);
        assert_eq!(r.matches.len(), 1);
        // f(t) = 1 at t = 1 = t(old) + f^{-1}(θ).
        assert!((r.matches[0].time - 1.0).abs() < 1e-9);
    }

    #[test]
    fn s3_crossing_without_partner_passes() {
        // Point 0's request crosses θ alone at t=1; the point-1 request
        // arriving at t=3 (below its own θ) is not grabbed; the match
        // waits for point 1's crossing at t=4. The co-located tail pair
        // keeps the stream open past the external.
        let mut m = StrategyIII::new(2, f2(), 1.0);
        let r = run(&mut m, 2, vec![(0, 0.0), (1, 3.0), (0, 10.0), (0, 10.5)]);
        let ext: Vec<_> = r
            .matches
            .iter()
            .filter(|m| m.kind == MatchKind::External)
            .collect();
        assert_eq!(ext.len(), 1);
        assert!((ext[0].time - 4.0).abs() < 1e-9, "at {}", ext[0].time);
    }

    #[test]
    fn s3_drains_an_enabled_pair_when_the_stream_ends() {
        // Same head as above but the stream ends right after the point-1
        // arrival; the full accumulator at point 0 lets the pair go.
        let mut m = StrategyIII::new(2, f2(), 1.0);
        let r = run(&mut m, 2, vec![(0, 0.0), (1, 3.0)]);
        assert_eq!(r.matches.len(), 1);
        assert!((r.matches[0].time - 3.0).abs() < 1e-9, "at {}", r.matches[0].time);
    }
}
