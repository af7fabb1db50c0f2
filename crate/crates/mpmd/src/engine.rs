//! Deterministic event-driven simulation.
//!
//! The engine feeds arrivals to an online matcher in strict time order,
//! services the matcher's analytically computed trigger times between
//! arrivals, and accounts space and time costs. At equal timestamps
//! arrivals are processed before triggers, lower request ids first. After
//! every event the matcher's emission loop has already run to fixpoint
//! (each callback returns everything it wants to emit at that instant).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::costfn::{CostFnError, TimeCostFunction};
use crate::instance::{Instance, InstanceMeta, Request};
use crate::metric::MetricSpace;

/// Multiplier in the runaway-matcher drain bound
/// `last_arrival + f⁻¹(DRAIN_FACTOR · d_max · K)`.
const DRAIN_FACTOR: f64 = 1e6;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("instance has an odd number of requests ({0}); a perfect matching needs an even count")]
    OddRequestCount(usize),
    #[error("requests {stragglers:?} still pending past the drain horizon {horizon}")]
    IncompleteMatching { stragglers: Vec<u64>, horizon: f64 },
    #[error("matcher emitted a match for request {id} which is not pending")]
    NotPending { id: u64 },
    #[error("matcher tried to match request {id} with itself")]
    SelfMatch { id: u64 },
    #[error("initiator point {point} is not an endpoint of match ({a},{b})")]
    BadInitiator { point: usize, a: u64, b: u64 },
    #[error("matcher trigger stalled at time {time} without emitting")]
    TriggerStall { time: f64 },
    #[error("matcher offered trigger time {t} before current time {now}")]
    TriggerRegression { t: f64, now: f64 },
    #[error("adaptive source protocol violation: {0}")]
    Protocol(String),
    #[error("audit failed: {0}")]
    Audit(String),
    #[error(transparent)]
    CostFn(#[from] CostFnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Internal,
    External,
}

/// A committed pair. `kind` is internal iff the endpoints share a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Match {
    pub a: u64,
    pub b: u64,
    #[serde(rename = "t")]
    pub time: f64,
    pub kind: MatchKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initiator: Option<usize>,
}

/// What a matcher hands back to the engine; the engine stamps the match
/// time with the current event time and derives the kind.
#[derive(Debug, Clone, Copy)]
pub struct Emission {
    pub a: u64,
    pub b: u64,
    pub initiator: Option<usize>,
}

impl Emission {
    pub fn pair(a: u64, b: u64) -> Self {
        Emission {
            a,
            b,
            initiator: None,
        }
    }
}

/// Behavioral contract for an online matching policy.
///
/// Emitted matches may reference only currently pending requests; each
/// request is matched at most once, at a time no earlier than its arrival.
pub trait OnlineMatcher {
    /// A new request is active as of `now`. Returns every match the policy
    /// commits at this instant.
    fn observe_arrival(&mut self, req: &Request, now: f64) -> Vec<Emission>;

    /// Earliest future time at which the policy's internal condition may
    /// change (an analytic threshold crossing), if any.
    fn next_trigger(&mut self, now: f64) -> Option<f64>;

    /// The clock reached a previously announced trigger time.
    fn fire_trigger(&mut self, now: f64) -> Vec<Emission>;

    /// The request stream has ended; drain-at-end policies may act once.
    fn finalize(&mut self, _now: f64) -> Vec<Emission> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventRecord {
    Arrival { t: f64, id: u64, p: usize },
    Trigger { t: f64 },
    Finalize { t: f64 },
    Matched {
        t: f64,
        a: u64,
        b: u64,
        kind: MatchKind,
        #[serde(skip_serializing_if = "Option::is_none")]
        initiator: Option<usize>,
    },
}

/// Matches plus accumulated costs for one run.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    pub space_cost: f64,
    pub time_cost: f64,
    #[serde(rename = "total")]
    pub total_cost: f64,
    pub matches: Vec<Match>,
    #[serde(skip)]
    pub per_request_wait: BTreeMap<u64, f64>,
    #[serde(skip)]
    pub event_log: Option<Vec<EventRecord>>,
}

struct EngineCore<'a> {
    space: &'a MetricSpace,
    f: TimeCostFunction,
    pending: BTreeMap<u64, Request>,
    matches: Vec<Match>,
    space_cost: f64,
    time_cost: f64,
    waits: BTreeMap<u64, f64>,
    trace: Option<Vec<EventRecord>>,
}

impl<'a> EngineCore<'a> {
    fn new(space: &'a MetricSpace, f: TimeCostFunction, trace: bool) -> Self {
        EngineCore {
            space,
            f,
            pending: BTreeMap::new(),
            matches: Vec::new(),
            space_cost: 0.0,
            time_cost: 0.0,
            waits: BTreeMap::new(),
            trace: trace.then(Vec::new),
        }
    }

    fn record(&mut self, ev: EventRecord) {
        if let Some(t) = self.trace.as_mut() {
            t.push(ev);
        }
    }

    fn apply(&mut self, ems: &[Emission], now: f64) -> Result<(), EngineError> {
        for em in ems {
            if em.a == em.b {
                return Err(EngineError::SelfMatch { id: em.a });
            }
            let ra = self
                .pending
                .remove(&em.a)
                .ok_or(EngineError::NotPending { id: em.a })?;
            let rb = match self.pending.remove(&em.b) {
                Some(r) => r,
                None => {
                    self.pending.insert(em.a, ra);
                    return Err(EngineError::NotPending { id: em.b });
                }
            };
            if let Some(x) = em.initiator {
                if x != ra.point && x != rb.point {
                    return Err(EngineError::BadInitiator {
                        point: x,
                        a: em.a,
                        b: em.b,
                    });
                }
            }
            let kind = if ra.point == rb.point {
                MatchKind::Internal
            } else {
                MatchKind::External
            };
            self.space_cost += self.space.distance(ra.point, rb.point);
            let (wa, wb) = (now - ra.arrival, now - rb.arrival);
            self.time_cost += self.f.eval_unchecked(wa.max(0.0)) + self.f.eval_unchecked(wb.max(0.0));
            self.waits.insert(ra.id, wa);
            self.waits.insert(rb.id, wb);
            let m = Match {
                a: em.a.min(em.b),
                b: em.a.max(em.b),
                time: now,
                kind,
                initiator: em.initiator,
            };
            self.matches.push(m);
            self.record(EventRecord::Matched {
                t: now,
                a: m.a,
                b: m.b,
                kind,
                initiator: m.initiator,
            });
        }
        Ok(())
    }

    fn arrive(
        &mut self,
        matcher: &mut dyn OnlineMatcher,
        req: Request,
        now: f64,
    ) -> Result<(), EngineError> {
        self.pending.insert(req.id, req);
        self.record(EventRecord::Arrival {
            t: now,
            id: req.id,
            p: req.point,
        });
        let ems = matcher.observe_arrival(&req, now);
        self.apply(&ems, now)
    }

    /// Services matcher triggers up to `stop`, quiescence, or the drain
    /// horizon. An exclusive stop (used before delivering an arrival)
    /// keeps same-instant triggers queued behind the arrival. Returns the
    /// time of the last serviced event.
    fn run_triggers(
        &mut self,
        matcher: &mut dyn OnlineMatcher,
        mut now: f64,
        stop: Option<f64>,
        inclusive_stop: bool,
        horizon: f64,
        until_quiescent: bool,
    ) -> Result<f64, EngineError> {
        loop {
            if until_quiescent && self.pending.is_empty() {
                return Ok(now);
            }
            let t = match matcher.next_trigger(now) {
                Some(t) => t,
                None => {
                    if until_quiescent && !self.pending.is_empty() {
                        return Err(EngineError::IncompleteMatching {
                            stragglers: self.pending.keys().copied().collect(),
                            horizon,
                        });
                    }
                    return Ok(now);
                }
            };
            if t < now - 1e-9 * now.abs().max(1.0) {
                return Err(EngineError::TriggerRegression { t, now });
            }
            let t = t.max(now);
            if let Some(stop) = stop {
                if t > stop || (!inclusive_stop && t >= stop) {
                    return Ok(now);
                }
            }
            if t > horizon {
                return Err(EngineError::IncompleteMatching {
                    stragglers: self.pending.keys().copied().collect(),
                    horizon,
                });
            }
            let before = self.matches.len();
            self.record(EventRecord::Trigger { t });
            let ems = matcher.fire_trigger(t);
            self.apply(&ems, t)?;
            if self.matches.len() == before {
                // No progress: the matcher must now offer a strictly later
                // time or nothing, otherwise it is stuck.
                if let Some(t2) = matcher.next_trigger(t) {
                    if t2 <= t {
                        return Err(EngineError::TriggerStall { time: t });
                    }
                }
            }
            now = t;
        }
    }

    fn into_result(self) -> SimulationResult {
        SimulationResult {
            space_cost: self.space_cost,
            time_cost: self.time_cost,
            total_cost: self.space_cost + self.time_cost,
            matches: self.matches,
            per_request_wait: self.waits,
            event_log: self.trace,
        }
    }
}

fn drain_horizon(space: &MetricSpace, f: TimeCostFunction, last_arrival: f64) -> f64 {
    let d_max = space.d_max().max(f64::MIN_POSITIVE);
    last_arrival + f.invert_unchecked(DRAIN_FACTOR * d_max * space.k() as f64)
}

/// Runs `matcher` over a fixed instance.
pub fn simulate(
    matcher: &mut dyn OnlineMatcher,
    instance: &Instance,
) -> Result<SimulationResult, EngineError> {
    simulate_opt(matcher, instance, false)
}

/// As [`simulate`], also collecting a full event log.
pub fn simulate_traced(
    matcher: &mut dyn OnlineMatcher,
    instance: &Instance,
) -> Result<SimulationResult, EngineError> {
    simulate_opt(matcher, instance, true)
}

fn simulate_opt(
    matcher: &mut dyn OnlineMatcher,
    instance: &Instance,
    trace: bool,
) -> Result<SimulationResult, EngineError> {
    if instance.len() % 2 != 0 {
        return Err(EngineError::OddRequestCount(instance.len()));
    }
    let mut core = EngineCore::new(&instance.space, instance.f, trace);
    let last_arrival = instance.last_arrival().unwrap_or(0.0);
    let horizon = drain_horizon(&instance.space, instance.f, last_arrival);
    let mut now = 0.0_f64;

    for req in &instance.requests {
        core.run_triggers(matcher, now, Some(req.arrival), false, horizon, false)?;
        now = req.arrival;
        core.arrive(matcher, *req, now)?;
    }

    now = now.max(last_arrival);
    core.record(EventRecord::Finalize { t: now });
    let ems = matcher.finalize(now);
    core.apply(&ems, now)?;
    core.run_triggers(matcher, now, None, true, horizon, true)?;
    Ok(core.into_result())
}

/// One step of an adaptive instance source.
#[derive(Debug, Clone)]
pub enum SourceBatch {
    /// New requests, arrivals strictly increasing and later than anything
    /// already emitted. `closes_stream` marks the stream's final batch so
    /// the engine can finalize at the same point a replay would.
    Requests {
        requests: Vec<Request>,
        closes_stream: bool,
    },
    End,
}

/// An instance source that observes the matcher's committed matches and
/// decides future requests accordingly.
pub trait AdaptiveSource {
    fn space(&self) -> &MetricSpace;
    fn f(&self) -> TimeCostFunction;

    /// `Some(t)`: the engine should simulate up to and including `t`, then
    /// call [`AdaptiveSource::observe`]. `None`: the engine should run the
    /// matcher to quiescence (all delivered requests matched) first.
    fn next_checkpoint(&self) -> Option<f64>;

    /// Match log through the checkpoint; returns the next batch.
    fn observe(&mut self, matches: &[Match], now: f64) -> Result<SourceBatch, EngineError>;

    /// Metadata describing what was materialized (round boundaries etc).
    fn meta(&self) -> InstanceMeta;
}

/// Runs `matcher` against an adaptive source, materializing the instance
/// the source produced. Replaying [`simulate`] on the materialized
/// instance yields the identical match list.
pub fn simulate_adaptive(
    matcher: &mut dyn OnlineMatcher,
    source: &mut dyn AdaptiveSource,
) -> Result<(Instance, SimulationResult), EngineError> {
    let space = source.space().clone();
    let f = source.f();
    let mut core = EngineCore::new(&space, f, false);
    let mut buffered: std::collections::VecDeque<Request> = Default::default();
    let mut all_requests: Vec<Request> = Vec::new();
    let mut last_emitted = f64::NEG_INFINITY;
    let mut now = 0.0_f64;
    let mut stream_closed = false;
    let mut finalized = false;

    loop {
        // Deliver what we can according to the source's barrier.
        let barrier = source.next_checkpoint();
        let horizon = drain_horizon(&space, f, all_requests.last().map(|r| r.arrival).unwrap_or(now));
        match barrier {
            Some(cp) => {
                while let Some(req) = buffered.front().copied() {
                    if req.arrival > cp {
                        break;
                    }
                    buffered.pop_front();
                    core.run_triggers(matcher, now, Some(req.arrival), false, horizon, false)?;
                    now = req.arrival;
                    core.arrive(matcher, req, now)?;
                }
                if buffered.is_empty() && stream_closed && !finalized {
                    core.record(EventRecord::Finalize { t: now });
                    let ems = matcher.finalize(now);
                    core.apply(&ems, now)?;
                    finalized = true;
                }
                now = core.run_triggers(matcher, now, Some(cp), true, horizon, false)?;
                now = now.max(cp);
            }
            None => {
                while let Some(req) = buffered.pop_front() {
                    core.run_triggers(matcher, now, Some(req.arrival), false, horizon, false)?;
                    now = req.arrival;
                    core.arrive(matcher, req, now)?;
                }
                if stream_closed && !finalized {
                    core.record(EventRecord::Finalize { t: now });
                    let ems = matcher.finalize(now);
                    core.apply(&ems, now)?;
                    finalized = true;
                }
                now = core.run_triggers(matcher, now, None, true, horizon, true)?;
            }
        }

        match source.observe(&core.matches, now)? {
            SourceBatch::Requests {
                requests,
                closes_stream,
            } => {
                if stream_closed {
                    return Err(EngineError::Protocol(
                        "source emitted requests after closing the stream".into(),
                    ));
                }
                for r in &requests {
                    if r.arrival <= last_emitted {
                        return Err(EngineError::Protocol(format!(
                            "arrival {} for request {} does not increase past {}",
                            r.arrival, r.id, last_emitted
                        )));
                    }
                    if r.arrival < now {
                        return Err(EngineError::Protocol(format!(
                            "request {} arrives at {} in the past (now {})",
                            r.id, r.arrival, now
                        )));
                    }
                    if r.point >= space.k() {
                        return Err(EngineError::Protocol(format!(
                            "request {} at out-of-range point {}",
                            r.id, r.point
                        )));
                    }
                    last_emitted = r.arrival;
                    buffered.push_back(*r);
                    all_requests.push(*r);
                }
                stream_closed = closes_stream;
            }
            SourceBatch::End => break,
        }
    }

    // Anything still buffered is delivered, then the run drains.
    let horizon = drain_horizon(&space, f, all_requests.last().map(|r| r.arrival).unwrap_or(now));
    while let Some(req) = buffered.pop_front() {
        core.run_triggers(matcher, now, Some(req.arrival), false, horizon, false)?;
        now = req.arrival;
        core.arrive(matcher, req, now)?;
    }
    if !finalized {
        core.record(EventRecord::Finalize { t: now });
        let ems = matcher.finalize(now);
        core.apply(&ems, now)?;
    }
    core.run_triggers(matcher, now, None, true, horizon, true)?;

    let result = core.into_result();
    let instance = Instance {
        space,
        f,
        requests: all_requests,
        meta: source.meta(),
    };
    Ok((instance, result))
}

/// Adapter exposing a fixed instance through the adaptive-source
/// protocol; running it is identical to [`simulate`] on the instance.
pub struct StaticSource {
    instance: Instance,
    emitted: bool,
}

impl StaticSource {
    pub fn new(instance: Instance) -> Self {
        StaticSource {
            instance,
            emitted: false,
        }
    }
}

impl AdaptiveSource for StaticSource {
    fn space(&self) -> &MetricSpace {
        &self.instance.space
    }

    fn f(&self) -> TimeCostFunction {
        self.instance.f
    }

    fn next_checkpoint(&self) -> Option<f64> {
        None
    }

    fn observe(&mut self, _matches: &[Match], _now: f64) -> Result<SourceBatch, EngineError> {
        if self.emitted {
            return Ok(SourceBatch::End);
        }
        self.emitted = true;
        Ok(SourceBatch::Requests {
            requests: self.instance.requests.clone(),
            closes_stream: true,
        })
    }

    fn meta(&self) -> InstanceMeta {
        self.instance.meta.clone()
    }
}

/// Recomputes costs of a match list from scratch; audits matcher-reported
/// costs and prices offline matchings.
pub fn evaluate_costs(
    matches: &[Match],
    instance: &Instance,
) -> Result<SimulationResult, EngineError> {
    let by_id: BTreeMap<u64, &Request> = instance.requests.iter().map(|r| (r.id, r)).collect();
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    let mut space_cost = 0.0;
    let mut time_cost = 0.0;
    let mut waits = BTreeMap::new();
    let mut out = Vec::with_capacity(matches.len());

    for (i, m) in matches.iter().enumerate() {
        if m.a == m.b {
            return Err(EngineError::Audit(format!(
                "match {i} pairs request {} with itself",
                m.a
            )));
        }
        for id in [m.a, m.b] {
            if !by_id.contains_key(&id) {
                return Err(EngineError::Audit(format!(
                    "match {i} references unknown request {id}"
                )));
            }
            if let Some(prev) = seen.insert(id, i) {
                return Err(EngineError::Audit(format!(
                    "request {id} matched twice (matches {prev} and {i})"
                )));
            }
        }
        let (ra, rb) = (by_id[&m.a], by_id[&m.b]);
        for r in [ra, rb] {
            if m.time < r.arrival - 1e-12 * r.arrival.abs().max(1.0) {
                return Err(EngineError::Audit(format!(
                    "match {i} at time {} precedes arrival {} of request {}",
                    m.time, r.arrival, r.id
                )));
            }
        }
        let kind = if ra.point == rb.point {
            MatchKind::Internal
        } else {
            MatchKind::External
        };
        space_cost += instance.space.distance(ra.point, rb.point);
        let (wa, wb) = ((m.time - ra.arrival).max(0.0), (m.time - rb.arrival).max(0.0));
        time_cost += instance.f.eval_unchecked(wa) + instance.f.eval_unchecked(wb);
        waits.insert(ra.id, wa);
        waits.insert(rb.id, wb);
        out.push(Match { kind, ..*m });
    }
    if seen.len() != instance.len() {
        let missing: Vec<u64> = by_id
            .keys()
            .filter(|id| !seen.contains_key(id))
            .copied()
            .collect();
        return Err(EngineError::Audit(format!(
            "not a perfect matching; unmatched requests {missing:?}"
        )));
    }
    Ok(SimulationResult {
        space_cost,
        time_cost,
        total_cost: space_cost + time_cost,
        matches: out,
        per_request_wait: waits,
        event_log: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceMeta;

    fn tiny_instance() -> Instance {
        let space = MetricSpace::uniform(2, 1.0).unwrap();
        let f: TimeCostFunction = "monomial:2".parse().unwrap();
        Instance::from_schedule(
            space,
            f,
            vec![(0, 0.0), (1, 0.5)],
            1.0,
            InstanceMeta::default(),
        )
        .unwrap()
    }

    #[test]
    fn evaluate_costs_empty() {
        let space = MetricSpace::uniform(2, 1.0).unwrap();
        let f: TimeCostFunction = "monomial:2".parse().unwrap();
        let inst =
            Instance::from_schedule(space, f, vec![], 1.0, InstanceMeta::default()).unwrap();
        let r = evaluate_costs(&[], &inst).unwrap();
        assert_eq!(r.total_cost, 0.0);
    }

    #[test]
    fn evaluate_costs_prices_a_pair() {
        let inst = tiny_instance();
        let m = Match {
            a: 0,
            b: 1,
            time: 0.5,
            kind: MatchKind::External,
            initiator: None,
        };
        let r = evaluate_costs(&[m], &inst).unwrap();
        assert!((r.space_cost - 1.0).abs() < 1e-12);
        assert!((r.time_cost - 0.25).abs() < 1e-12);
    }

    #[test]
    fn evaluate_costs_rejects_imperfect_matching() {
        let inst = tiny_instance();
        let err = evaluate_costs(&[], &inst).unwrap_err();
        assert!(matches!(err, EngineError::Audit(_)));
    }

    #[test]
    fn evaluate_costs_rejects_time_violation() {
        let inst = tiny_instance();
        let m = Match {
            a: 0,
            b: 1,
            time: 0.1,
            kind: MatchKind::External,
            initiator: None,
        };
        let err = evaluate_costs(&[m], &inst).unwrap_err();
        assert!(matches!(err, EngineError::Audit(_)));
    }
}
