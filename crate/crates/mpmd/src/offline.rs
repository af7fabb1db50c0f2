//! Offline optima and bounding matchings for competitive-ratio
//! measurements.
//!
//! The exact optimum pairs requests at the later of the two arrivals, so
//! a pair costs `μ(ℓa, ℓb) + f(|ta − tb|)`. Small instances get an exact
//! subset-DP optimum (independent brute-force enumeration doubles as its
//! oracle); structured instances additionally get an explicit feasible
//! pairing whose cost upper-bounds the optimum.

use crate::costfn::TimeCostFunction;
use crate::engine::{evaluate_costs, EngineError, Match, MatchKind};
use crate::instance::{Instance, InstanceError, Request, RoundConstruction, RoundMeta};
use crate::metric::MetricSpace;

/// Default request cap for the exact subset DP (~4M states).
pub const DP_CAP_DEFAULT: usize = 22;
/// Request cap for exhaustive enumeration ((n−1)!! matchings).
pub const BRUTE_CAP: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum OfflineError {
    #[error("{count} requests exceed the cap of {cap}; use structured bounds instead")]
    CapacityExceeded { count: usize, cap: usize },
    #[error("a perfect matching needs an even request count, got {0}")]
    OddCount(usize),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// A perfect matching priced offline. `exact` marks true optima as
/// opposed to feasible upper bounds.
#[derive(Debug, Clone)]
pub struct OfflineMatching {
    pub pairs: Vec<(u64, u64)>,
    pub cost: f64,
    pub exact: bool,
}

impl OfflineMatching {
    /// The induced match list, each pair timed at the later arrival.
    pub fn to_matches(&self, instance: &Instance) -> Vec<Match> {
        let by_id: std::collections::BTreeMap<u64, &Request> =
            instance.requests.iter().map(|r| (r.id, r)).collect();
        self.pairs
            .iter()
            .map(|&(a, b)| {
                let (ra, rb) = (by_id[&a], by_id[&b]);
                Match {
                    a,
                    b,
                    time: ra.arrival.max(rb.arrival),
                    kind: if ra.point == rb.point {
                        MatchKind::Internal
                    } else {
                        MatchKind::External
                    },
                    initiator: None,
                }
            })
            .collect()
    }
}

/// Offline price of pairing `a` with `b`: the pair is committed at
/// `max(t(a), t(b))`.
pub fn pair_cost(a: &Request, b: &Request, space: &MetricSpace, f: TimeCostFunction) -> f64 {
    space.distance(a.point, b.point) + f.eval_unchecked((a.arrival - b.arrival).abs())
}

/// Exact minimum-cost perfect matching by dynamic programming over
/// request subsets, with the default size cap.
pub fn optimal_dp(instance: &Instance) -> Result<OfflineMatching, OfflineError> {
    optimal_dp_capped(instance, DP_CAP_DEFAULT)
}

pub fn optimal_dp_capped(
    instance: &Instance,
    cap: usize,
) -> Result<OfflineMatching, OfflineError> {
    let n = instance.len();
    if n % 2 != 0 {
        return Err(OfflineError::OddCount(n));
    }
    if n > cap {
        return Err(OfflineError::CapacityExceeded { count: n, cap });
    }
    if n == 0 {
        return Ok(OfflineMatching {
            pairs: Vec::new(),
            cost: 0.0,
            exact: true,
        });
    }

    let reqs = &instance.requests;
    let mut w = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = pair_cost(&reqs[i], &reqs[j], &instance.space, instance.f);
            w[i * n + j] = c;
        }
    }

    let full: usize = (1usize << n) - 1;
    let mut dp = vec![f64::INFINITY; 1usize << n];
    let mut parent = vec![0u32; 1usize << n];
    dp[0] = 0.0;
    for mask in 0..=full {
        let cur = dp[mask];
        if !cur.is_finite() {
            continue;
        }
        if mask == full {
            break;
        }
        // Pair the lowest-index unmatched request with every candidate;
        // the fixed order makes the returned pairing deterministic.
        let i = (!mask).trailing_zeros() as usize;
        for j in (i + 1)..n {
            if mask & (1 << j) != 0 {
                continue;
            }
            let next = mask | (1 << i) | (1 << j);
            let cost = cur + w[i * n + j];
            if cost < dp[next] {
                dp[next] = cost;
                parent[next] = (i * 64 + j) as u32;
            }
        }
    }

    let mut pairs = Vec::with_capacity(n / 2);
    let mut mask = full;
    while mask != 0 {
        let code = parent[mask] as usize;
        let (i, j) = (code / 64, code % 64);
        pairs.push((reqs[i].id, reqs[j].id));
        mask &= !((1 << i) | (1 << j));
    }
    pairs.reverse();
    Ok(OfflineMatching {
        pairs,
        cost: dp[full],
        exact: true,
    })
}

/// Exhaustive enumeration of all perfect matchings; the independent
/// oracle for the DP.
pub fn brute_force_enumerate(instance: &Instance) -> Result<OfflineMatching, OfflineError> {
    let n = instance.len();
    if n % 2 != 0 {
        return Err(OfflineError::OddCount(n));
    }
    if n > BRUTE_CAP {
        return Err(OfflineError::CapacityExceeded {
            count: n,
            cap: BRUTE_CAP,
        });
    }
    if n == 0 {
        return Ok(OfflineMatching {
            pairs: Vec::new(),
            cost: 0.0,
            exact: true,
        });
    }
    let reqs = &instance.requests;

    fn recurse(
        used: &mut [bool],
        reqs: &[Request],
        space: &MetricSpace,
        f: TimeCostFunction,
        acc: f64,
        current: &mut Vec<(usize, usize)>,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        let Some(i) = used.iter().position(|u| !u) else {
            if acc < best.0 {
                *best = (acc, current.clone());
            }
            return;
        };
        used[i] = true;
        for j in (i + 1)..reqs.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            current.push((i, j));
            let c = pair_cost(&reqs[i], &reqs[j], space, f);
            recurse(used, reqs, space, f, acc + c, current, best);
            current.pop();
            used[j] = false;
        }
        used[i] = false;
    }

    let mut used = vec![false; n];
    let mut current = Vec::new();
    let mut best = (f64::INFINITY, Vec::new());
    recurse(
        &mut used,
        reqs,
        &instance.space,
        instance.f,
        0.0,
        &mut current,
        &mut best,
    );
    Ok(OfflineMatching {
        pairs: best.1.iter().map(|&(i, j)| (reqs[i].id, reqs[j].id)).collect(),
        cost: best.0,
        exact: true,
    })
}

/// The explicit feasible pairing of one structured round: the anchor
/// request pairs the earliest request at the odd-count point, everything
/// else pairs consecutively per point.
fn round_pairs(instance: &Instance, round: &RoundMeta) -> Result<Vec<(u64, u64)>, OfflineError> {
    let members: Vec<&Request> = instance
        .requests
        .iter()
        .filter(|r| r.id >= round.first_id && r.id <= round.last_id)
        .collect();
    if members.is_empty() {
        return Err(OfflineError::NotApplicable(format!(
            "round starting at {} has no requests",
            round.start
        )));
    }
    let mut by_point: std::collections::BTreeMap<usize, Vec<&Request>> = Default::default();
    for r in &members {
        by_point.entry(r.point).or_default().push(r);
    }
    for v in by_point.values_mut() {
        v.sort_by(|a, b| a.arrival.partial_cmp(&b.arrival).unwrap());
    }

    let anchors = by_point.get(&round.anchor_point).cloned().unwrap_or_default();
    if anchors.len() != 1 {
        return Err(OfflineError::NotApplicable(format!(
            "anchor point {} holds {} requests, expected exactly one",
            round.anchor_point,
            anchors.len()
        )));
    }
    let lasts = by_point.get(&round.last_point).cloned().unwrap_or_default();
    if lasts.len() % 2 != 1 {
        return Err(OfflineError::NotApplicable(format!(
            "point {} holds an even number of requests, expected odd",
            round.last_point
        )));
    }

    let mut pairs = vec![(anchors[0].id, lasts[0].id)];
    for (p, list) in &by_point {
        let rest: Vec<&&Request> = match *p {
            p if p == round.anchor_point => continue,
            p if p == round.last_point => list.iter().skip(1).collect(),
            _ => list.iter().collect(),
        };
        if rest.len() % 2 != 0 {
            return Err(OfflineError::NotApplicable(format!(
                "point {p} holds an odd number of pairable requests"
            )));
        }
        for c in rest.chunks(2) {
            pairs.push((c[0].id, c[1].id));
        }
    }
    Ok(pairs)
}

/// Feasible offline pairing of a structured instance (every round of the
/// requested construction), priced by the cost auditor. The result is an
/// upper bound on the optimum, never marked exact.
pub fn structured_round_bound(
    instance: &Instance,
    construction: RoundConstruction,
) -> Result<OfflineMatching, OfflineError> {
    if instance.meta.rounds.is_empty() {
        return Err(OfflineError::NotApplicable(
            "instance carries no structured round metadata".into(),
        ));
    }
    let mut pairs = Vec::new();
    for round in &instance.meta.rounds {
        if round.construction != construction {
            return Err(OfflineError::NotApplicable(format!(
                "round constructed as {:?}, requested {:?}",
                round.construction, construction
            )));
        }
        pairs.extend(round_pairs(instance, round)?);
    }
    let matching = OfflineMatching {
        pairs,
        cost: 0.0,
        exact: false,
    };
    let priced = evaluate_costs(&matching.to_matches(instance), instance)?;
    Ok(OfflineMatching {
        cost: priced.total_cost,
        ..matching
    })
}

/// Per-round costs of the structured pairing, in round order.
pub fn per_round_bound_costs(instance: &Instance) -> Result<Vec<f64>, OfflineError> {
    let by_id: std::collections::BTreeMap<u64, &Request> =
        instance.requests.iter().map(|r| (r.id, r)).collect();
    let mut out = Vec::new();
    for round in &instance.meta.rounds {
        let pairs = round_pairs(instance, round)?;
        let cost = pairs
            .iter()
            .map(|&(a, b)| pair_cost(by_id[&a], by_id[&b], &instance.space, instance.f))
            .sum();
        out.push(cost);
    }
    Ok(out)
}
