//! Adaptive lower-bound request source.
//!
//! The source feeds requests round by round and watches which points the
//! matcher has externally connected. Each round starts with one request
//! at `v0`; every iteration keeps all points outside the matcher-built
//! component of `v0` supplied with requests on a `τ` grid. Once the
//! component stops growing (or swallows everything) a single extra
//! request closes the round, forcing either a long pendency or many
//! external matches — round cost at least `k·δ` for any deterministic
//! matcher.

use std::collections::BTreeSet;

use serde_json::json;

use crate::costfn::TimeCostFunction;
use crate::engine::{AdaptiveSource, EngineError, Match, SourceBatch};
use crate::instance::{
    Instance, InstanceMeta, Request, RoundConstruction, RoundMeta,
};
use crate::metric::MetricSpace;

#[derive(Debug, thiserror::Error)]
pub enum AdversaryError {
    #[error("invalid adversary config: {0}")]
    Param(String),
}

/// Parameters of the adaptive construction on `K` uniform points.
#[derive(Debug, Clone, Copy)]
pub struct AdversaryConfig {
    pub big_k: usize,
    pub delta: f64,
    /// Number of grid steps per iteration window; even, at least 2.
    pub n: u64,
    pub rounds: u64,
    pub f: TimeCostFunction,
}

impl AdversaryConfig {
    /// Fixes `n` directly; `τ = T/n` with `f(T) = k·δ`, `k = K − 1`.
    pub fn with_n(
        big_k: usize,
        delta: f64,
        n: u64,
        rounds: u64,
        f: TimeCostFunction,
    ) -> Result<Self, AdversaryError> {
        if big_k < 2 {
            return Err(AdversaryError::Param(format!(
                "need at least two points, got K = {big_k}"
            )));
        }
        if !(delta > 0.0) {
            return Err(AdversaryError::Param(format!("delta must be > 0, got {delta}")));
        }
        if n < 2 || n % 2 != 0 {
            return Err(AdversaryError::Param(format!(
                "n must be an even integer >= 2, got {n}"
            )));
        }
        if rounds < 1 {
            return Err(AdversaryError::Param("need at least one round".into()));
        }
        Ok(AdversaryConfig {
            big_k,
            delta,
            n,
            rounds,
            f,
        })
    }

    /// Derives `n` from a step-size hint, rounding to the nearest even
    /// integer ≥ 2 and recomputing `τ = T/n` exactly.
    pub fn with_tau_hint(
        big_k: usize,
        delta: f64,
        tau_hint: f64,
        rounds: u64,
        f: TimeCostFunction,
    ) -> Result<Self, AdversaryError> {
        if !(tau_hint > 0.0) {
            return Err(AdversaryError::Param(format!(
                "tau hint must be > 0, got {tau_hint}"
            )));
        }
        let k = (big_k.max(2) - 1) as f64;
        let big_t = f.invert_unchecked(k * delta.max(f64::MIN_POSITIVE));
        let n = ((big_t / tau_hint / 2.0).round() as u64).max(1) * 2;
        Self::with_n(big_k, delta, n, rounds, f)
    }

    pub fn k(&self) -> usize {
        self.big_k - 1
    }

    /// Window length `T` with `f(T) = k·δ`.
    pub fn big_t(&self) -> f64 {
        self.f.invert_unchecked(self.k() as f64 * self.delta)
    }

    pub fn tau(&self) -> f64 {
        self.big_t() / self.n as f64
    }

    pub fn space(&self) -> MetricSpace {
        MetricSpace::uniform(self.big_k, self.delta)
            .expect("validated config")
            .with_labels((0..self.big_k).map(|i| format!("v{i}")).collect())
    }
}

enum Phase {
    StartRound,
    Iterate { h: u64, component: BTreeSet<usize> },
    AwaitClear,
    Finished,
}

/// The adaptive source; drive it with [`crate::engine::simulate_adaptive`].
pub struct AdaptiveLowerBound {
    cfg: AdversaryConfig,
    space: MetricSpace,
    phase: Phase,
    round: u64,
    round_start: f64,
    round_first_id: u64,
    next_id: u64,
    checkpoint: Option<f64>,
    emitted: Vec<Request>,
    rounds_meta: Vec<RoundMeta>,
}

impl AdaptiveLowerBound {
    pub fn new(cfg: AdversaryConfig) -> Self {
        AdaptiveLowerBound {
            space: cfg.space(),
            cfg,
            phase: Phase::StartRound,
            round: 0,
            round_start: 0.0,
            round_first_id: 0,
            next_id: 0,
            checkpoint: None,
            emitted: Vec::new(),
            rounds_meta: Vec::new(),
        }
    }

    fn tie_eps(&self) -> f64 {
        1e-9 * self.cfg.tau()
    }

    /// Pads a checkpoint past the tie-perturbation shifts so every grid
    /// arrival nominally at the window edge is already delivered.
    fn pad(&self) -> f64 {
        self.tie_eps() * (self.cfg.big_k as f64 + 2.0)
    }

    /// Emits one simultaneity group per grid step, points ascending,
    /// shifting ties like the instance codec does.
    fn emit_grid(
        &mut self,
        points: &[usize],
        j_lo: u64,
        j_hi: u64,
    ) -> Vec<Request> {
        let tau = self.cfg.tau();
        let eps = self.tie_eps();
        let mut batch = Vec::new();
        for j in j_lo..=j_hi {
            let t = self.round_start + j as f64 * tau;
            for (rank, &p) in points.iter().enumerate() {
                batch.push(Request {
                    id: self.next_id,
                    point: p,
                    arrival: t + rank as f64 * eps,
                });
                self.next_id += 1;
            }
        }
        self.emitted.extend(batch.iter().copied());
        batch
    }

    fn emit_single(&mut self, point: usize, t: f64) -> Vec<Request> {
        let r = Request {
            id: self.next_id,
            point,
            arrival: t,
        };
        self.next_id += 1;
        self.emitted.push(r);
        vec![r]
    }

    /// Points the matcher has connected to `v0` through external matches
    /// among this round's requests.
    fn component(&self, matches: &[Match]) -> BTreeSet<usize> {
        let k = self.cfg.big_k;
        let mut dsu: Vec<usize> = (0..k).collect();
        fn find(dsu: &mut [usize], x: usize) -> usize {
            let mut root = x;
            while dsu[root] != root {
                root = dsu[root];
            }
            let mut cur = x;
            while dsu[cur] != root {
                let next = dsu[cur];
                dsu[cur] = root;
                cur = next;
            }
            root
        }
        // Ids are assigned densely in emission order, so they index the
        // emitted list directly.
        let point_of = |id: u64| -> usize { self.emitted[id as usize].point };
        for m in matches {
            if m.a < self.round_first_id || m.b < self.round_first_id {
                continue;
            }
            let (pa, pb) = (point_of(m.a), point_of(m.b));
            if pa == pb {
                continue;
            }
            let (ra, rb) = (find(&mut dsu, pa), find(&mut dsu, pb));
            if ra != rb {
                dsu[ra] = rb;
            }
        }
        let root0 = find(&mut dsu, 0);
        (0..k).filter(|&p| find(&mut dsu, p) == root0).collect()
    }

    fn start_round(&mut self, now: f64) -> SourceBatch {
        let cfg = self.cfg;
        self.round_start = if self.round == 0 { now } else { now + cfg.big_t() };
        self.round_first_id = self.next_id;
        let mut requests = self.emit_single(0, self.round_start);
        let outside: Vec<usize> = (1..cfg.big_k).collect();
        requests.extend(self.emit_grid(&outside, 1, cfg.n));
        self.checkpoint = Some(self.round_start + cfg.big_t() + self.pad());
        self.phase = Phase::Iterate {
            h: 1,
            component: BTreeSet::from([0usize]),
        };
        SourceBatch::Requests {
            requests,
            closes_stream: false,
        }
    }
}

impl AdaptiveSource for AdaptiveLowerBound {
    fn space(&self) -> &MetricSpace {
        &self.space
    }

    fn f(&self) -> TimeCostFunction {
        self.cfg.f
    }

    fn next_checkpoint(&self) -> Option<f64> {
        self.checkpoint
    }

    fn observe(&mut self, matches: &[Match], now: f64) -> Result<SourceBatch, EngineError> {
        let cfg = self.cfg;
        match std::mem::replace(&mut self.phase, Phase::Finished) {
            Phase::StartRound => Ok(self.start_round(now)),
            Phase::Iterate { h, component } => {
                let grown = self.component(matches);
                if !component.is_subset(&grown) {
                    return Err(EngineError::Protocol(format!(
                        "connected component shrank from {component:?} to {grown:?}"
                    )));
                }
                let all: BTreeSet<usize> = (0..cfg.big_k).collect();
                if grown != component && grown != all {
                    // Component still growing: next iteration feeds all
                    // points outside it.
                    let outside: Vec<usize> =
                        (0..cfg.big_k).filter(|p| !grown.contains(p)).collect();
                    let requests = self.emit_grid(&outside, h * cfg.n + 1, (h + 1) * cfg.n);
                    self.checkpoint =
                        Some(self.round_start + (h + 1) as f64 * cfg.big_t() + self.pad());
                    self.phase = Phase::Iterate {
                        h: h + 1,
                        component: grown,
                    };
                    Ok(SourceBatch::Requests {
                        requests,
                        closes_stream: false,
                    })
                } else {
                    // Stalled or saturated: one extra request at the
                    // lowest-index point outside the previous component
                    // ends the round.
                    let extra_point = (0..cfg.big_k)
                        .find(|p| !component.contains(p))
                        .ok_or_else(|| {
                            EngineError::Protocol("no point outside the component".into())
                        })?;
                    let t = self.round_start + (h * cfg.n + 1) as f64 * cfg.tau();
                    let requests = self.emit_single(extra_point, t);
                    self.rounds_meta.push(RoundMeta {
                        construction: RoundConstruction::AdversaryRound,
                        start: self.round_start,
                        k: cfg.k(),
                        n: cfg.n,
                        tau: cfg.tau(),
                        anchor_point: 0,
                        last_point: extra_point,
                        first_id: self.round_first_id,
                        last_id: self.next_id - 1,
                    });
                    self.checkpoint = None;
                    self.phase = Phase::AwaitClear;
                    Ok(SourceBatch::Requests {
                        requests,
                        closes_stream: self.round + 1 == cfg.rounds,
                    })
                }
            }
            Phase::AwaitClear => {
                self.round += 1;
                if self.round < cfg.rounds {
                    Ok(self.start_round(now))
                } else {
                    self.phase = Phase::Finished;
                    Ok(SourceBatch::End)
                }
            }
            Phase::Finished => Ok(SourceBatch::End),
        }
    }

    fn meta(&self) -> InstanceMeta {
        let mut meta = InstanceMeta::named(
            "adversary",
            json!({"K": self.cfg.big_k, "delta": self.cfg.delta, "n": self.cfg.n,
                   "tau": self.cfg.tau(), "rounds": self.cfg.rounds,
                   "f": self.cfg.f.to_string()}),
        );
        meta.rounds = self.rounds_meta.clone();
        meta
    }
}

/// Pass/fail audit of one materialized round.
#[derive(Debug, Clone)]
pub struct RoundFacts {
    pub count_within_bound: bool,
    pub single_anchor_and_odd_tail: bool,
    pub even_elsewhere: bool,
    pub no_cross_round_matches: bool,
    pub witnesses: Vec<String>,
}

impl RoundFacts {
    pub fn all_pass(&self) -> bool {
        self.count_within_bound
            && self.single_anchor_and_odd_tail
            && self.even_elsewhere
            && self.no_cross_round_matches
    }
}

/// Audits the construction facts on a materialized adversary instance:
/// per-round request count at most `k²n + 2`, exactly one anchor request
/// and an odd count at the closing point, even counts elsewhere, and no
/// match spanning two rounds.
pub fn verify_round_facts(
    instance: &Instance,
    matches: &[Match],
) -> Result<Vec<RoundFacts>, AdversaryError> {
    if instance.meta.rounds.is_empty() {
        return Err(AdversaryError::Param(
            "instance carries no round metadata".into(),
        ));
    }
    let round_of = |id: u64| -> Option<usize> {
        instance
            .meta
            .rounds
            .iter()
            .position(|r| id >= r.first_id && id <= r.last_id)
    };
    let mut out = Vec::new();
    for (idx, round) in instance.meta.rounds.iter().enumerate() {
        let members: Vec<&crate::instance::Request> = instance
            .requests
            .iter()
            .filter(|r| r.id >= round.first_id && r.id <= round.last_id)
            .collect();
        let mut witnesses = Vec::new();

        let n_r = members.len() as u64;
        let bound = round.k as u64 * round.k as u64 * round.n + 2;
        let count_within_bound = n_r <= bound;
        if !count_within_bound {
            witnesses.push(format!("round {idx}: {n_r} requests exceed k²n+2 = {bound}"));
        }

        let mut counts = vec![0u64; instance.space.k()];
        for r in &members {
            counts[r.point] += 1;
        }
        let anchor_ok = counts[round.anchor_point] == 1;
        let tail_odd = counts[round.last_point] % 2 == 1;
        if !anchor_ok {
            witnesses.push(format!(
                "round {idx}: anchor point {} has {} requests",
                round.anchor_point, counts[round.anchor_point]
            ));
        }
        if !tail_odd {
            witnesses.push(format!(
                "round {idx}: closing point {} has even count {}",
                round.last_point, counts[round.last_point]
            ));
        }
        let mut even_elsewhere = true;
        for (p, &c) in counts.iter().enumerate() {
            if p != round.anchor_point && p != round.last_point && c % 2 != 0 {
                even_elsewhere = false;
                witnesses.push(format!("round {idx}: point {p} has odd count {c}"));
            }
        }

        let mut no_cross = true;
        for m in matches {
            let (ra, rb) = (round_of(m.a), round_of(m.b));
            if (ra == Some(idx) || rb == Some(idx)) && ra != rb {
                no_cross = false;
                witnesses.push(format!(
                    "match ({}, {}) spans rounds {ra:?} and {rb:?}",
                    m.a, m.b
                ));
            }
        }

        out.push(RoundFacts {
            count_within_bound,
            single_anchor_and_odd_tail: anchor_ok && tail_odd,
            even_elsewhere,
            no_cross_round_matches: no_cross,
            witnesses,
        });
    }
    Ok(out)
}

/// Matcher cost attributed to each round: space plus time cost of every
/// match whose endpoints both belong to the round.
pub fn per_round_matcher_costs(instance: &Instance, matches: &[Match]) -> Vec<f64> {
    let by_id: std::collections::BTreeMap<u64, &crate::instance::Request> =
        instance.requests.iter().map(|r| (r.id, r)).collect();
    instance
        .meta
        .rounds
        .iter()
        .map(|round| {
            matches
                .iter()
                .filter(|m| {
                    m.a >= round.first_id
                        && m.a <= round.last_id
                        && m.b >= round.first_id
                        && m.b <= round.last_id
                })
                .map(|m| {
                    let (ra, rb) = (by_id[&m.a], by_id[&m.b]);
                    instance.space.distance(ra.point, rb.point)
                        + instance.f.eval_unchecked((m.time - ra.arrival).max(0.0))
                        + instance.f.eval_unchecked((m.time - rb.arrival).max(0.0))
                })
                .sum()
        })
        .collect()
}
