//! Instance generators: the two-point and three-point threshold-beating
//! families, seeded random streams, and the permuted multi-point family
//! used for averaged lower-bound experiments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{Instance, InstanceError, InstanceMeta, RoundConstruction, RoundMeta};
use crate::costfn::TimeCostFunction;
use crate::metric::MetricSpace;

/// Absolute perturbation budget used by the CLI for the three-point
/// family when none is given.
pub const EXAMPLE3_DEFAULT_BUDGET: f64 = 1e-3;

/// Two-point family defeating the double-wait rule: point `u` receives
/// request pairs `ε` apart every `θ`, point `v` one request at time 0.
pub fn gen_example1(
    n: u64,
    theta: f64,
    epsilon: f64,
    delta: f64,
    f: TimeCostFunction,
) -> Result<Instance, InstanceError> {
    if n < 1 {
        return Err(InstanceError::Param("n must be >= 1".into()));
    }
    if !(theta > 0.0) {
        return Err(InstanceError::Param(format!("theta must be > 0, got {theta}")));
    }
    if !(epsilon > 0.0 && epsilon < theta) {
        return Err(InstanceError::Param(format!(
            "epsilon must lie in (0, theta), got {epsilon}"
        )));
    }
    let space = MetricSpace::uniform(2, delta)?.with_labels(vec!["u".into(), "v".into()]);
    let mut schedule = Vec::with_capacity(2 * n as usize + 2);
    for i in 0..=n {
        schedule.push((0, i as f64 * theta));
        if i >= 1 {
            schedule.push((0, i as f64 * theta - epsilon));
        }
    }
    schedule.push((1, 0.0));
    let meta = InstanceMeta::named(
        "example1",
        json!({"n": n, "theta": theta, "epsilon": epsilon, "delta": delta, "f": f.to_string()}),
    );
    Instance::from_schedule(space, f, schedule, theta, meta)
}

/// Admissible window for the two-point single-rate family:
/// `theta − epsilon < (n/2) f(tau) < theta`.
pub fn example2_window(
    n: u64,
    theta: f64,
    epsilon: f64,
    f: TimeCostFunction,
) -> Result<(f64, f64), InstanceError> {
    let half = n as f64 / 2.0;
    let lo = f.invert((theta - epsilon).max(0.0) / half)?;
    let hi = f.invert(theta / half)?;
    Ok((lo, hi))
}

/// Two-point family defeating the double-accumulator rule: requests drip
/// at `u` every `tau`, one request at `v` at time 0.
pub fn gen_example2(
    n: u64,
    tau: f64,
    delta: f64,
    theta: f64,
    epsilon: f64,
    f: TimeCostFunction,
) -> Result<Instance, InstanceError> {
    if n < 2 || n % 2 != 0 {
        return Err(InstanceError::Param(format!(
            "n must be a positive even integer, got {n}"
        )));
    }
    if !(theta > 0.0) || !(epsilon > 0.0) || !(tau > 0.0) {
        return Err(InstanceError::Param(
            "tau, theta and epsilon must be positive".into(),
        ));
    }
    let half = n as f64 / 2.0;
    let mid = half * f.evaluate(tau)?;
    if !(mid > theta - epsilon && mid < theta) {
        let (lo, hi) = example2_window(n, theta, epsilon, f)?;
        return Err(InstanceError::Window { lo, hi, got: tau });
    }
    let space = MetricSpace::uniform(2, delta)?.with_labels(vec!["u".into(), "v".into()]);
    let mut schedule: Vec<(usize, f64)> = (0..=n).map(|i| (0, i as f64 * tau)).collect();
    schedule.push((1, 0.0));
    let meta = InstanceMeta::named(
        "example2",
        json!({"n": n, "tau": tau, "delta": delta, "theta": theta,
               "epsilon": epsilon, "f": f.to_string()}),
    );
    Instance::from_schedule(space, f, schedule, tau, meta)
}

/// Parameters of the three-point family defeating the single-accumulator
/// rule. `tau` must satisfy `f(n·tau) = theta`.
#[derive(Debug, Clone, Copy)]
pub struct Example3Params {
    pub n: u64,
    pub tau: f64,
    pub t0: f64,
    pub m: u64,
    pub delta: f64,
    pub theta: f64,
    pub perturbation_budget: f64,
    pub f: TimeCostFunction,
}

impl Example3Params {
    /// Derives the `tau` with `f(n·tau) = theta`.
    pub fn solve_tau(f: TimeCostFunction, theta: f64, n: u64) -> Result<f64, InstanceError> {
        Ok(f.invert(theta)? / n as f64)
    }
}

/// Roles of the requests the calibration has to steer; `(point, time)`
/// resolves to a request id after the schedule is built.
struct Example3Layout {
    schedule: Vec<(usize, f64)>,
    expected_external_sites: Vec<((usize, f64), (usize, f64))>,
}

fn example3_layout(p: &Example3Params, e: f64) -> Example3Layout {
    let (n, m) = (p.n as i64, p.m as i64);
    let (tau, t0) = (p.tau, p.t0);
    let part_start = |j: i64| -> f64 {
        // T_1 = T_0 + (2n+1)tau, then T_j = T_{j-1} + 3n*tau.
        t0 + (2 * n + 1) as f64 * tau + (j - 1) as f64 * (3 * n) as f64 * tau
    };

    let mut u: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = Vec::new();
    let mut w: Vec<f64> = Vec::new();

    // Part 0.
    u.push(0.0);
    u.push(t0);
    for i in 1..=2 * n {
        u.push(t0 + (n + i) as f64 * tau);
    }
    for i in 1..=2 * n {
        let shift = if i == n { 3.0 * e } else { 0.0 };
        v.push(t0 + i as f64 * tau - shift);
    }
    w.push(0.0);
    for i in 1..=n {
        let shift = if i == n { e } else { 0.0 };
        w.push(t0 + i as f64 * tau - shift);
    }

    // Parts 1..=m.
    for j in 1..=m {
        let tj = part_start(j);
        for i in 1..=2 * n {
            u.push(tj + (2 * n + i - 1) as f64 * tau);
            v.push(tj + (n + i - 1) as f64 * tau);
            let shift = if i == 1 && j >= 2 { e } else { 0.0 };
            w.push(tj + (i - 1) as f64 * tau - shift);
        }
    }

    let site = |point: usize, t: f64| (point, t);
    let u_at = |t: f64| site(0, t);
    let v_at = |t: f64| site(1, t);
    let w_at = |t: f64| site(2, t);

    let mut expected = Vec::new();
    expected.push((u_at(0.0), w_at(0.0)));
    expected.push((u_at(t0), v_at(t0 + n as f64 * tau - 3.0 * e)));
    for j in 1..=m {
        let tj = part_start(j);
        expected.push((
            u_at(tj + (3 * n - 1) as f64 * tau),
            w_at(tj + (2 * n - 1) as f64 * tau),
        ));
    }
    for i in 1..m {
        let ti = part_start(i);
        let ti1 = part_start(i + 1);
        expected.push((
            u_at(ti + (4 * n - 1) as f64 * tau),
            v_at(ti1 + (2 * n - 1) as f64 * tau),
        ));
        let w_shift = if n == 1 { e } else { 0.0 };
        expected.push((
            v_at(ti + (3 * n - 1) as f64 * tau),
            w_at(ti1 + (n - 1) as f64 * tau - w_shift),
        ));
    }
    let tm = part_start(m);
    expected.push((
        u_at(tm + (4 * n - 1) as f64 * tau),
        v_at(tm + (3 * n - 1) as f64 * tau),
    ));

    let mut schedule: Vec<(usize, f64)> = Vec::new();
    schedule.extend(u.into_iter().map(|t| (0, t)));
    schedule.extend(v.into_iter().map(|t| (1, t)));
    schedule.extend(w.into_iter().map(|t| (2, t)));
    Example3Layout {
        schedule,
        expected_external_sites: expected,
    }
}

fn resolve_site(inst: &Instance, point: usize, t: f64) -> Option<u64> {
    inst.requests
        .iter()
        .filter(|r| r.point == point)
        .min_by(|a, b| {
            (a.arrival - t)
                .abs()
                .partial_cmp(&(b.arrival - t).abs())
                .unwrap()
        })
        .map(|r| r.id)
}

fn norm_pair(a: u64, b: u64) -> (u64, u64) {
    (a.min(b), a.max(b))
}

/// Three-point family plus a calibration search over a small arrival
/// perturbation, verified by simulating the single-accumulator strategy
/// and matching its external pattern exactly.
pub fn gen_example3(p: &Example3Params) -> Result<Instance, InstanceError> {
    if p.n < 1 || p.n % 2 == 0 {
        return Err(InstanceError::Param(format!(
            "n must be a positive odd integer, got {}",
            p.n
        )));
    }
    if p.m < 1 {
        return Err(InstanceError::Param("m must be >= 1".into()));
    }
    let fn_tau = p.f.evaluate(p.n as f64 * p.tau)?;
    if (fn_tau - p.theta).abs() > 1e-9 * p.theta.max(1.0) {
        return Err(InstanceError::Param(format!(
            "tau must satisfy f(n*tau) = theta; got f({} * {}) = {fn_tau} vs theta = {}",
            p.n, p.tau, p.theta
        )));
    }
    if !(p.t0 > p.n as f64 * p.tau) {
        return Err(InstanceError::Param(format!(
            "T0 must exceed n*tau = {}, got {}",
            p.n as f64 * p.tau,
            p.t0
        )));
    }
    if !(p.perturbation_budget >= 0.0) {
        return Err(InstanceError::Param("perturbation budget must be >= 0".into()));
    }

    let space = MetricSpace::uniform(3, p.delta)?
        .with_labels(vec!["u".into(), "v".into(), "w".into()]);
    let meta = |e: f64| {
        InstanceMeta::named(
            "example3",
            json!({"n": p.n, "m": p.m, "tau": p.tau, "T0": p.t0, "delta": p.delta,
                   "theta": p.theta, "f": p.f.to_string(), "calibration_offset": e}),
        )
    };

    // The largest offset keeps 3e within budget; halve until the pattern
    // locks or the offset underflows the tie-perturbation scale.
    let mut candidates = Vec::new();
    let cap = (p.perturbation_budget / 3.0).min(p.tau * 1e-3);
    let floor = p.tau * 1e-7;
    let mut e = cap;
    while e > floor {
        candidates.push(e);
        e /= 2.0;
    }
    if candidates.is_empty() {
        return Err(InstanceError::Calibration {
            diagnostic: format!(
                "perturbation budget {} leaves no usable offset (tau = {})",
                p.perturbation_budget, p.tau
            ),
        });
    }

    let mut last_diag = String::new();
    for &e in &candidates {
        let layout = example3_layout(p, e);
        let inst = Instance::from_schedule(
            space.clone(),
            p.f,
            layout.schedule,
            p.tau,
            meta(e),
        )?;
        let mut expected: Vec<(u64, u64)> = Vec::new();
        for ((pa, ta), (pb, tb)) in &layout.expected_external_sites {
            let a = resolve_site(&inst, *pa, *ta);
            let b = resolve_site(&inst, *pb, *tb);
            match (a, b) {
                (Some(a), Some(b)) => expected.push(norm_pair(a, b)),
                _ => {
                    return Err(InstanceError::Calibration {
                        diagnostic: "failed to resolve an expected external site".into(),
                    })
                }
            }
        }
        expected.sort_unstable();

        let mut matcher = crate::matchers::StrategyIII::new(3, p.f, p.theta);
        let sim = crate::engine::simulate(&mut matcher, &inst).map_err(|err| {
            InstanceError::Calibration {
                diagnostic: format!("simulation failed during calibration: {err}"),
            }
        })?;
        let mut got: Vec<(u64, u64)> = sim
            .matches
            .iter()
            .filter(|m| m.kind == crate::engine::MatchKind::External)
            .map(|m| norm_pair(m.a, m.b))
            .collect();
        got.sort_unstable();
        if got == expected {
            return Ok(inst);
        }
        last_diag = format!(
            "offset {e}: expected external pairs {expected:?}, strategy produced {got:?}"
        );
    }
    Err(InstanceError::Calibration {
        diagnostic: last_diag,
    })
}

/// Uniformly random request stream, deterministic in the seed.
pub fn gen_random(
    space: MetricSpace,
    count: u64,
    horizon: f64,
    seed: u64,
    f: TimeCostFunction,
) -> Result<Instance, InstanceError> {
    if count % 2 != 0 {
        return Err(InstanceError::Param(format!(
            "count must be even, got {count}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(InstanceError::Param(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = space.k();
    let schedule: Vec<(usize, f64)> = (0..count)
        .map(|_| (rng.random_range(0..k), rng.random_range(0.0..horizon)))
        .collect();
    let meta = InstanceMeta::named(
        "random",
        json!({"count": count, "horizon": horizon, "seed": seed, "k": k, "f": f.to_string()}),
    );
    Instance::from_schedule(space, f, schedule, horizon, meta)
}

/// Permuted multi-point family: point `σ(0)` gets one request, `σ(i)`
/// gets `n·i`, and `σ(k)` gets `k·n + 1`, all on a `τ` grid; rounds are
/// separated by a clearance margin plus `gap_policy`.
#[allow(clippy::too_many_arguments)]
pub fn gen_randomized_lb(
    big_k: usize,
    delta: f64,
    tau_hint: f64,
    sigma: &[usize],
    rounds: u64,
    gap_policy: f64,
    f: TimeCostFunction,
    allow_large: bool,
) -> Result<Instance, InstanceError> {
    if big_k < 2 {
        return Err(InstanceError::Param(format!(
            "need at least 2 points, got {big_k}"
        )));
    }
    if big_k > 6 && !allow_large {
        return Err(InstanceError::Param(format!(
            "K = {big_k} explodes the factorial time scale; pass allow_large to override"
        )));
    }
    if !(delta > 0.0) || !(tau_hint > 0.0) || rounds < 1 || !(gap_policy >= 0.0) {
        return Err(InstanceError::Param(
            "delta and tau must be positive, rounds >= 1, gap >= 0".into(),
        ));
    }
    let mut seen = vec![false; big_k];
    if sigma.len() != big_k || sigma.iter().any(|&s| s >= big_k || std::mem::replace(&mut seen[s], true)) {
        return Err(InstanceError::Param(format!(
            "sigma must be a permutation of 0..{big_k}"
        )));
    }

    let k = big_k - 1;
    let k_factorial: f64 = (1..=k as u64).product::<u64>() as f64;
    let target = k_factorial * delta * (k as f64).ln();
    let big_t = f.invert(target.max(0.0))?;
    let n = ((big_t / tau_hint / 2.0).round() as u64).max(1) * 2;
    let tau = big_t / n as f64;
    let per_round = 2 + k as u64 * n + n * (k as u64) * (k as u64 - 1) / 2;

    let mut schedule: Vec<(usize, f64)> = Vec::new();
    let mut rounds_meta = Vec::new();
    let mut start = 0.0_f64;
    let mut next_id = 0u64;
    for _ in 0..rounds {
        schedule.push((sigma[0], start));
        for i in 1..=k {
            let reps = if i == k {
                k as u64 * n + 1
            } else {
                n * i as u64
            };
            for j in 1..=reps {
                schedule.push((sigma[i], start + j as f64 * tau));
            }
        }
        let last_arrival = start + (k as u64 * n + 1) as f64 * tau;
        rounds_meta.push(RoundMeta {
            construction: RoundConstruction::RandomizedRound,
            start,
            k,
            n,
            tau,
            anchor_point: sigma[0],
            last_point: sigma[k],
            first_id: next_id,
            last_id: next_id + per_round - 1,
        });
        next_id += per_round;
        start = last_arrival + f.invert((2.0 * target).max(0.0))? + gap_policy;
    }

    let space = MetricSpace::uniform(big_k, delta)?
        .with_labels((0..big_k).map(|i| format!("v{i}")).collect());
    let mut meta = InstanceMeta::named(
        "randomized_lb",
        json!({"K": big_k, "delta": delta, "tau": tau, "n": n, "sigma": sigma,
               "rounds": rounds, "gap": gap_policy, "f": f.to_string()}),
    );
    meta.rounds = rounds_meta;
    Instance::from_schedule(space, f, schedule, tau.max(delta * 1e-3), meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> TimeCostFunction {
        "monomial:2".parse().unwrap()
    }

    #[test]
    fn example1_schedule_matches_construction() {
        let inst = gen_example1(1, 1.0, 0.1, 1.0, f2()).unwrap();
        // Nominal times {0@v, 0@u, 0.9@u, 1@u}; the 0-tie is perturbed.
        assert_eq!(inst.len(), 4);
        let mut at_u: Vec<f64> = inst
            .requests
            .iter()
            .filter(|r| r.point == 0)
            .map(|r| r.arrival)
            .collect();
        at_u.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(at_u[0], 0.0);
        assert!((at_u[1] - 0.9).abs() < 1e-12);
        assert!((at_u[2] - 1.0).abs() < 1e-12);
        let at_v: Vec<f64> = inst
            .requests
            .iter()
            .filter(|r| r.point == 1)
            .map(|r| r.arrival)
            .collect();
        assert_eq!(at_v.len(), 1);
        assert!(at_v[0] > 0.0 && at_v[0] < 1e-8);
    }

    #[test]
    fn example1_counts() {
        for n in [1u64, 2, 5, 10] {
            let inst = gen_example1(n, 1.0, 0.01, 1.0, f2()).unwrap();
            assert_eq!(inst.len() as u64, 2 * n + 2);
        }
        let inst = gen_example1(2, 1.0, 0.01, 1.0, f2()).unwrap();
        let at_u: Vec<f64> = inst
            .requests
            .iter()
            .filter(|r| r.point == 0)
            .map(|r| r.arrival)
            .collect();
        let expect = [0.0, 0.99, 1.0, 1.99, 2.0];
        for (a, b) in at_u.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn example2_window_is_enforced() {
        // n=4, f=t^2, theta=1, eps=0.1: window is 0.9 < 2 tau^2 < 1.
        assert!(gen_example2(4, 0.69, 1.0, 1.0, 0.1, f2()).is_ok());
        let err = gen_example2(4, 10.0, 1.0, 1.0, 0.1, f2()).unwrap_err();
        match err {
            InstanceError::Window { lo, hi, got } => {
                assert!((lo - (0.45f64).sqrt()).abs() < 1e-12);
                assert!((hi - (0.5f64).sqrt()).abs() < 1e-12);
                assert_eq!(got, 10.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn example2_schedule() {
        let inst = gen_example2(4, 0.69, 1.0, 1.0, 0.1, f2()).unwrap();
        assert_eq!(inst.len(), 6);
        let at_u: Vec<f64> = inst
            .requests
            .iter()
            .filter(|r| r.point == 0)
            .map(|r| r.arrival)
            .collect();
        for (i, t) in at_u.iter().enumerate() {
            assert!((t - 0.69 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn random_is_deterministic_and_in_range() {
        let space = MetricSpace::uniform(3, 1.0).unwrap();
        let a = gen_random(space.clone(), 8, 10.0, 42, f2()).unwrap();
        let b = gen_random(space.clone(), 8, 10.0, 42, f2()).unwrap();
        assert_eq!(a.requests, b.requests);
        assert!(a.requests.iter().all(|r| r.point < 3));
        assert!(a
            .requests
            .iter()
            .all(|r| r.arrival >= 0.0 && r.arrival < 10.0 + 1e-6));
        let c = gen_random(space.clone(), 8, 10.0, 43, f2()).unwrap();
        assert_ne!(a.requests, c.requests);
        let empty = gen_random(space, 0, 10.0, 1, f2()).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn randomized_lb_counts_per_point() {
        // K = 4 (k = 3), identity permutation, one round: counts are
        // {1, n, 2n, 3n+1}.
        let inst =
            gen_randomized_lb(4, 1.0, 0.9, &[0, 1, 2, 3], 1, 1.0, f2(), false).unwrap();
        let n = inst.meta.rounds[0].n;
        let mut counts = [0u64; 4];
        for r in &inst.requests {
            counts[r.point] += 1;
        }
        assert_eq!(counts[0], 1);
        assert_eq!(counts[1], n);
        assert_eq!(counts[2], 2 * n);
        assert_eq!(counts[3], 3 * n + 1);
        assert_eq!(inst.len() as u64 % 2, 0);
    }

    #[test]
    fn randomized_lb_permutation_moves_the_anchor() {
        let inst =
            gen_randomized_lb(4, 1.0, 0.9, &[1, 0, 2, 3], 1, 1.0, f2(), false).unwrap();
        let first = &inst.requests[0];
        assert_eq!(first.point, 1);
        let count_at_1 = inst.requests.iter().filter(|r| r.point == 1).count();
        assert_eq!(count_at_1, 1);
    }

    #[test]
    fn randomized_lb_round_total() {
        for big_k in [3usize, 4, 5] {
            let sigma: Vec<usize> = (0..big_k).collect();
            let inst =
                gen_randomized_lb(big_k, 1.0, 0.5, &sigma, 1, 1.0, f2(), false).unwrap();
            let k = (big_k - 1) as u64;
            let n = inst.meta.rounds[0].n;
            let expect = 1 + n * k * (k - 1) / 2 + k * n + 1;
            assert_eq!(inst.len() as u64, expect);
            assert_eq!(expect % 2, 0, "per-round count must be even");
        }
    }
}
