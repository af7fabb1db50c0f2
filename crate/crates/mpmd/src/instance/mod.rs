//! Request streams: instance types, the file codec, and generators.

mod codec;
mod generators;

pub use generators::{
    gen_example1, gen_example2, gen_example3, gen_random, gen_randomized_lb, Example3Params,
    EXAMPLE3_DEFAULT_BUDGET,
};

use serde::{Deserialize, Serialize};

use crate::costfn::{CostFnError, TimeCostFunction};
use crate::metric::{MetricError, MetricSpace};

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("tau={got} outside the admissible window ({lo}, {hi})")]
    Window { lo: f64, hi: f64, got: f64 },
    #[error("calibration failed within perturbation budget: {diagnostic}")]
    Calibration { diagnostic: String },
    #[error("arrival times not strictly increasing after tie perturbation (ids {a} and {b})")]
    NonMonotone { a: u64, b: u64 },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    CostFn(#[from] CostFnError),
}

/// A timed, located demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    pub id: u64,
    pub point: usize,
    pub arrival: f64,
}

/// Which structured construction a round of an instance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundConstruction {
    AdversaryRound,
    RandomizedRound,
}

/// Metadata for one structured round, enough to rebuild the explicit
/// feasible offline pairing and audit the construction facts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMeta {
    pub construction: RoundConstruction,
    /// Round start time.
    pub start: f64,
    /// Construction parameter k (one less than the number of points).
    pub k: usize,
    pub n: u64,
    pub tau: f64,
    /// Point holding the single anchor request of the round.
    pub anchor_point: usize,
    /// Point holding an odd number of requests (pairs the anchor).
    pub last_point: usize,
    /// Inclusive id range of the round's requests.
    pub first_id: u64,
    pub last_id: u64,
}

/// Generator name and parameters carried alongside the request list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InstanceMeta {
    #[serde(default)]
    pub generator: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rounds: Vec<RoundMeta>,
}

impl InstanceMeta {
    pub fn named(generator: &str, params: serde_json::Value) -> Self {
        InstanceMeta {
            generator: generator.to_string(),
            params,
            rounds: Vec::new(),
        }
    }
}

/// An ordered stream of requests over a metric space with a delay penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub space: MetricSpace,
    pub f: TimeCostFunction,
    pub requests: Vec<Request>,
    pub meta: InstanceMeta,
}

impl Instance {
    /// Builds an instance from `(point, time)` entries. Entries are stably
    /// sorted by time (emission order breaks ties), ids assigned in that
    /// order, and tied arrivals perturbed so all arrivals are distinct.
    pub fn from_schedule(
        space: MetricSpace,
        f: TimeCostFunction,
        schedule: Vec<(usize, f64)>,
        time_scale: f64,
        meta: InstanceMeta,
    ) -> Result<Self, InstanceError> {
        for &(p, t) in &schedule {
            if p >= space.k() {
                return Err(InstanceError::Param(format!(
                    "point index {p} out of range for {}-point space",
                    space.k()
                )));
            }
            if !(t >= 0.0) {
                return Err(InstanceError::Param(format!("negative arrival time {t}")));
            }
        }
        let mut order: Vec<usize> = (0..schedule.len()).collect();
        order.sort_by(|&a, &b| {
            schedule[a]
                .1
                .partial_cmp(&schedule[b].1)
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut requests: Vec<Request> = order
            .into_iter()
            .enumerate()
            .map(|(id, idx)| Request {
                id: id as u64,
                point: schedule[idx].0,
                arrival: schedule[idx].1,
            })
            .collect();
        perturb_ties(&mut requests, tie_epsilon(time_scale))?;
        Ok(Instance {
            space,
            f,
            requests,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn last_arrival(&self) -> Option<f64> {
        self.requests.last().map(|r| r.arrival)
    }

    pub fn request(&self, id: u64) -> Option<&Request> {
        // Ids are dense ranks in arrival order for generated instances, but
        // files may carry arbitrary unique ids.
        self.requests
            .iter()
            .find(|r| r.id == id)
    }

    /// Serializes to the JSON-lines file format.
    pub fn to_jsonl(&self) -> String {
        codec::to_jsonl(self)
    }

    /// Parses the JSON-lines file format.
    pub fn from_jsonl(text: &str) -> Result<Self, InstanceError> {
        codec::from_jsonl(text)
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, InstanceError> {
        let text = std::fs::read_to_string(path).map_err(|e| InstanceError::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
        Self::from_jsonl(&text)
    }
}

/// Perturbation unit for tied arrivals.
pub(crate) fn tie_epsilon(time_scale: f64) -> f64 {
    1e-9 * time_scale.abs().max(f64::MIN_POSITIVE)
}

/// Shifts the later request (by id order) of every tied group by
/// `rank * eps0`, then checks arrivals are strictly increasing.
pub(crate) fn perturb_ties(requests: &mut [Request], eps0: f64) -> Result<(), InstanceError> {
    let mut i = 0;
    while i < requests.len() {
        let mut j = i + 1;
        while j < requests.len() && requests[j].arrival == requests[i].arrival {
            j += 1;
        }
        for (rank, r) in requests[i..j].iter_mut().enumerate().skip(1) {
            r.arrival += rank as f64 * eps0;
        }
        i = j;
    }
    for w in 0..requests.len().saturating_sub(1) {
        if requests[w + 1].arrival <= requests[w].arrival {
            return Err(InstanceError::NonMonotone {
                a: requests[w].id,
                b: requests[w + 1].id,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> MetricSpace {
        MetricSpace::uniform(2, 1.0).unwrap()
    }

    #[test]
    fn schedule_sorted_and_ties_perturbed() {
        let f: TimeCostFunction = "monomial:2".parse().unwrap();
        let inst = Instance::from_schedule(
            two_point(),
            f,
            vec![(0, 0.0), (1, 0.0), (0, 0.5)],
            1.0,
            InstanceMeta::default(),
        )
        .unwrap();
        assert_eq!(inst.requests[0].id, 0);
        assert_eq!(inst.requests[0].point, 0);
        assert_eq!(inst.requests[0].arrival, 0.0);
        assert_eq!(inst.requests[1].point, 1);
        assert!(inst.requests[1].arrival > 0.0 && inst.requests[1].arrival < 1e-8);
        assert_eq!(inst.requests[2].arrival, 0.5);
    }

    #[test]
    fn codec_round_trip_is_bit_identical() {
        let f: TimeCostFunction = "monomial:2".parse().unwrap();
        let inst = Instance::from_schedule(
            two_point(),
            f,
            vec![(0, 0.1), (1, 0.30000000000000004), (0, 2.5), (1, 7.0)],
            1.0,
            InstanceMeta::named("test", serde_json::json!({"n": 2})),
        )
        .unwrap();
        let text = inst.to_jsonl();
        let back = Instance::from_jsonl(&text).unwrap();
        assert_eq!(back.requests.len(), inst.requests.len());
        for (a, b) in back.requests.iter().zip(&inst.requests) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.point, b.point);
            assert_eq!(a.arrival.to_bits(), b.arrival.to_bits());
        }
        assert_eq!(back.meta, inst.meta);
        assert_eq!(back.space, inst.space);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn codec_empty_instance() {
        let f: TimeCostFunction = "linear".parse().unwrap();
        let inst =
            Instance::from_schedule(two_point(), f, vec![], 1.0, InstanceMeta::default()).unwrap();
        let back = Instance::from_jsonl(&inst.to_jsonl()).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn codec_rejects_malformed_line() {
        let f: TimeCostFunction = "monomial:2".parse().unwrap();
        let inst = Instance::from_schedule(
            two_point(),
            f,
            vec![(0, 0.0), (1, 1.0)],
            1.0,
            InstanceMeta::default(),
        )
        .unwrap();
        let mut text = inst.to_jsonl();
        text.push_str("{\"id\":9,\"p\":0\n");
        let err = Instance::from_jsonl(&text).unwrap_err();
        match err {
            InstanceError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn codec_rejects_duplicate_ids() {
        let text = "{\"space\":{\"kind\":\"uniform\",\"k\":2,\"delta\":1.0},\"f\":\"monomial:2\",\"meta\":{\"generator\":\"\"}}\n{\"id\":0,\"p\":0,\"t\":0e0}\n{\"id\":0,\"p\":1,\"t\":1e0}\n";
        assert!(Instance::from_jsonl(text).is_err());
    }

    #[test]
    fn loader_perturbs_file_ties() {
        let text = "{\"space\":{\"kind\":\"uniform\",\"k\":2,\"delta\":1.0},\"f\":\"monomial:2\",\"meta\":{\"generator\":\"\"}}\n{\"id\":0,\"p\":0,\"t\":5e-1}\n{\"id\":1,\"p\":1,\"t\":5e-1}\n";
        let inst = Instance::from_jsonl(text).unwrap();
        assert!(inst.requests[1].arrival > inst.requests[0].arrival);
    }
}
