//! Baseline that never waits: every second pending request is matched on
//! the spot.

use crate::engine::{Emission, OnlineMatcher};
use crate::instance::Request;
use crate::metric::MetricSpace;

pub struct Greedy {
    space: MetricSpace,
    pending: Vec<Request>,
}

impl Greedy {
    pub fn new(space: MetricSpace) -> Self {
        Greedy {
            space,
            pending: Vec::new(),
        }
    }
}

impl OnlineMatcher for Greedy {
    fn observe_arrival(&mut self, req: &Request, _now: f64) -> Vec<Emission> {
        if self.pending.is_empty() {
            self.pending.push(*req);
            return Vec::new();
        }
        // Co-located partner first, then lowest distance, ties by lowest id.
        let best = self
            .pending
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| {
                let dx = self.space.distance(x.point, req.point);
                let dy = self.space.distance(y.point, req.point);
                dx.partial_cmp(&dy).unwrap().then(x.id.cmp(&y.id))
            })
            .map(|(i, _)| i)
            .unwrap();
        let partner = self.pending.swap_remove(best);
        vec![Emission::pair(partner.id, req.id)]
    }

    fn next_trigger(&mut self, _now: f64) -> Option<f64> {
        None
    }

    fn fire_trigger(&mut self, _now: f64) -> Vec<Emission> {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costfn::TimeCostFunction;
    use crate::engine::{simulate, MatchKind};
    use crate::instance::{Instance, InstanceMeta};

    fn run(schedule: Vec<(usize, f64)>) -> crate::engine::SimulationResult {
        let space = MetricSpace::uniform(3, 1.0).unwrap();
        let f: TimeCostFunction = "monomial:2".parse().unwrap();
        let inst =
            Instance::from_schedule(space.clone(), f, schedule, 1.0, InstanceMeta::default())
                .unwrap();
        let mut m = Greedy::new(space);
        simulate(&mut m, &inst).unwrap()
    }

    #[test]
    fn matches_on_second_arrival() {
        let r = run(vec![(0, 0.0), (1, 1.0)]);
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].time, 1.0);
        assert_eq!(r.matches[0].kind, MatchKind::External);
        // f(1) + f(0) + delta
        assert!((r.total_cost - 2.0).abs() < 1e-12);
    }

    #[test]
    fn never_waits_on_alternating_points() {
        let r = run(vec![(0, 0.0), (1, 0.5), (0, 1.0), (1, 1.5)]);
        assert_eq!(r.matches.len(), 2);
        assert!(r.matches.iter().all(|m| m.kind == MatchKind::External));
    }

    #[test]
    fn prefers_internal_then_external() {
        // Co-located pair plus a later pair at two other points.
        let r = run(vec![(0, 0.0), (0, 0.1), (1, 0.2), (2, 0.3)]);
        assert_eq!(r.matches[0].kind, MatchKind::Internal);
        assert_eq!(r.matches[1].kind, MatchKind::External);
    }
}
