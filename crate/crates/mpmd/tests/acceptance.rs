//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured quantities. Run with `cargo test --test acceptance`
//! (add `-- --nocapture` to see the lines).

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mpmd::adversary::{
    per_round_matcher_costs, verify_round_facts, AdaptiveLowerBound, AdversaryConfig,
};
use mpmd::costfn::TimeCostFunction;
use mpmd::engine::{evaluate_costs, simulate, simulate_adaptive, Match, MatchKind, SimulationResult};
use mpmd::instance::{
    gen_example1, gen_example2, gen_example3, gen_random, gen_randomized_lb, Example3Params,
    Instance,
};
use mpmd::matchers::{MatcherSpec, TimerMatcher};
use mpmd::metric::MetricSpace;
use mpmd::offline::{
    brute_force_enumerate, optimal_dp, per_round_bound_costs, optimal_dp_capped,
    structured_round_bound, OfflineMatching, DP_CAP_DEFAULT,
};

fn f_mono(alpha: f64) -> TimeCostFunction {
    TimeCostFunction::monomial(alpha).unwrap()
}

/// Simulates and checks the run-level invariants every criterion relies
/// on: the reported costs survive an independent recompute and the match
/// list is a perfect matching.
fn audited_simulate(spec: MatcherSpec, inst: &Instance) -> SimulationResult {
    let mut matcher = spec.build(&inst.space, inst.f);
    let result = simulate(matcher.as_mut(), inst).expect("simulation completes");
    let audit = evaluate_costs(&result.matches, inst).expect("perfect matching");
    assert!(
        (audit.total_cost - result.total_cost).abs() <= 1e-9 * result.total_cost.abs().max(1.0),
        "audit mismatch: reported {} recomputed {}",
        result.total_cost,
        audit.total_cost
    );
    result
}

/// Exact optimum when the instance fits the DP cap, else the structured
/// feasible bound. Returns (cost, exact?).
fn offline_cost(inst: &Instance) -> (f64, bool) {
    if inst.len() <= DP_CAP_DEFAULT {
        let m = optimal_dp(inst).expect("dp");
        (m.cost, true)
    } else {
        let c = inst.meta.rounds[0].construction;
        let m = structured_round_bound(inst, c).expect("structured bound");
        (m.cost, false)
    }
}

fn example1_acceptance() -> Instance {
    gen_example1(10, 1.0, 0.01, 1.0, f_mono(2.0)).unwrap()
}

fn example2_acceptance() -> Instance {
    gen_example2(4, 0.69, 1.0, 1.0, 0.1, f_mono(2.0)).unwrap()
}

fn example3_acceptance(m: u64) -> Instance {
    let f = f_mono(2.0);
    let tau = Example3Params::solve_tau(f, 1.0, 1).unwrap();
    gen_example3(&Example3Params {
        n: 1,
        tau,
        t0: 2.0,
        m,
        delta: 1.0,
        theta: 1.0,
        perturbation_budget: 1e-3 * tau,
        f,
    })
    .unwrap()
}

/// The full grid behind criteria 5 and 7: the three constructed
/// families, seeded random instances, and single permuted rounds.
fn acceptance_grid() -> Vec<(String, Instance)> {
    let mut grid = vec![
        ("ex1".to_string(), example1_acceptance()),
        ("ex2".to_string(), example2_acceptance()),
        ("ex3".to_string(), example3_acceptance(2)),
    ];
    for big_k in 2..=6usize {
        for (ai, alpha) in [1.5, 2.0, 3.0].into_iter().enumerate() {
            let count = [8u64, 14, 20][(big_k + ai) % 3];
            let seed = 100 * big_k as u64 + ai as u64;
            let space = MetricSpace::uniform(big_k, 1.0).unwrap();
            let inst = gen_random(space, count, 10.0, seed, f_mono(alpha)).unwrap();
            grid.push((format!("rand K={big_k} alpha={alpha} count={count}"), inst));
        }
    }
    for big_k in 2..=6usize {
        let sigma: Vec<usize> = (0..big_k).collect();
        let inst =
            gen_randomized_lb(big_k, 1.0, 0.5, &sigma, 1, 1.0, f_mono(2.0), false).unwrap();
        grid.push((format!("perm-round K={big_k}"), inst));
    }
    grid
}

#[test]
fn acceptance_1_oracle_equivalence() {
    let start = Instant::now();
    let alphas = [1.5, 2.0, 3.0];
    let mut checked = 0;
    let mut max_delta: f64 = 0.0;
    for seed in 0..200u64 {
        let count = 2 + 2 * (seed % 5);
        let big_k = 2 + (seed % 4) as usize;
        let alpha = alphas[(seed % 3) as usize];
        let space = MetricSpace::uniform(big_k, 1.0 + (seed % 2) as f64).unwrap();
        let inst = gen_random(space, count, 8.0, seed, f_mono(alpha)).unwrap();
        let dp = optimal_dp(&inst).unwrap();
        let bf = brute_force_enumerate(&inst).unwrap();
        let delta = (dp.cost - bf.cost).abs();
        assert!(delta <= 1e-9, "seed {seed}: dp {} vs brute {}", dp.cost, bf.cost);
        max_delta = max_delta.max(delta);
        checked += 1;
    }
    let elapsed = start.elapsed();
    assert_eq!(checked, 200);
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "acceptance 1 PASS — optimal_dp == brute force on 200 instances (max |delta| = {max_delta:.2e}, {elapsed:?})"
    );
}

#[test]
fn acceptance_2_double_wait_reproduction() {
    let start = Instant::now();
    let (n, theta, eps, delta) = (10u64, 1.0, 0.01, 1.0);
    let f = f_mono(2.0);
    let inst = example1_acceptance();

    let result = audited_simulate("s1:1".parse().unwrap(), &inst);
    let expected = n as f64 * f.eval_unchecked(theta - eps)
        + f.eval_unchecked(n as f64 * theta)
        + delta;
    assert!(
        (result.total_cost - expected).abs() <= 1e-6,
        "strategy total {} vs formula {expected}",
        result.total_cost
    );

    let dp = optimal_dp(&inst).unwrap();
    let figure_pairing_cost = delta + n as f64 * f.eval_unchecked(eps);
    assert!(
        dp.cost <= figure_pairing_cost + 1e-9,
        "dp {} vs hand pairing {figure_pairing_cost}",
        dp.cost
    );

    let ratio = result.total_cost / dp.cost;
    assert!(ratio >= 100.0, "ratio {ratio}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "acceptance 2 PASS — double-wait total {:.6} = formula {expected:.6} +- 1e-6, optimum {:.6}, ratio {ratio:.1} (>= 100), {elapsed:?}",
        result.total_cost, dp.cost
    );
}

#[test]
fn acceptance_3_single_rate_reproduction() {
    let (n, tau, theta, delta) = (4u64, 0.69, 1.0, 1.0);
    let _ = theta;
    let f = f_mono(2.0);
    let inst = example2_acceptance();

    let result = audited_simulate("s2:1".parse().unwrap(), &inst);
    let externals: Vec<&Match> = result
        .matches
        .iter()
        .filter(|m| m.kind == MatchKind::External)
        .collect();
    assert_eq!(externals.len(), 1, "exactly one external match");
    let anchor = inst.requests.iter().find(|r| r.point == 1).unwrap().id;
    let tail = inst
        .requests
        .iter()
        .filter(|r| r.point == 0)
        .last()
        .unwrap()
        .id;
    assert_eq!(
        (externals[0].a, externals[0].b),
        (anchor.min(tail), anchor.max(tail)),
        "the external pairs the anchor with the last drip request"
    );

    let lower = n as f64 / 2.0 * f.eval_unchecked(tau)
        + f.eval_unchecked(n as f64 * tau)
        + delta;
    assert!(
        result.total_cost >= lower - 1e-9,
        "total {} vs lower bound {lower}",
        result.total_cost
    );

    let dp = optimal_dp(&inst).unwrap();
    let offline_bound = n as f64 / 2.0 * f.eval_unchecked(tau) + delta;
    assert!(
        dp.cost <= offline_bound + 1e-9,
        "dp {} vs figure pairing {offline_bound}",
        dp.cost
    );
    println!(
        "acceptance 3 PASS — single-rate family: one external (anchor-tail), total {:.4} >= {lower:.4}, optimum {:.4} <= {offline_bound:.4}",
        result.total_cost, dp.cost
    );
}

/// Expected external pattern of the three-point family, resolved from
/// nominal schedule positions (point, time).
fn example3_expected_externals(inst: &Instance, n: i64, m: i64, t0: f64, tau: f64) -> Vec<(u64, u64)> {
    let part_start =
        |j: i64| t0 + (2 * n + 1) as f64 * tau + (j - 1) as f64 * (3 * n) as f64 * tau;
    let resolve = |point: usize, t: f64| -> u64 {
        inst.requests
            .iter()
            .filter(|r| r.point == point)
            .min_by(|a, b| {
                (a.arrival - t)
                    .abs()
                    .partial_cmp(&(b.arrival - t).abs())
                    .unwrap()
            })
            .unwrap()
            .id
    };
    let norm = |a: u64, b: u64| (a.min(b), a.max(b));
    let mut expected = vec![
        norm(resolve(0, 0.0), resolve(2, 0.0)),
        norm(resolve(0, t0), resolve(1, t0 + n as f64 * tau)),
    ];
    for j in 1..=m {
        let tj = part_start(j);
        expected.push(norm(
            resolve(0, tj + (3 * n - 1) as f64 * tau),
            resolve(2, tj + (2 * n - 1) as f64 * tau),
        ));
    }
    for i in 1..m {
        let (ti, ti1) = (part_start(i), part_start(i + 1));
        expected.push(norm(
            resolve(0, ti + (4 * n - 1) as f64 * tau),
            resolve(1, ti1 + (2 * n - 1) as f64 * tau),
        ));
        expected.push(norm(
            resolve(1, ti + (3 * n - 1) as f64 * tau),
            resolve(2, ti1 + (n - 1) as f64 * tau),
        ));
    }
    let tm = part_start(m);
    expected.push(norm(
        resolve(0, tm + (4 * n - 1) as f64 * tau),
        resolve(1, tm + (3 * n - 1) as f64 * tau),
    ));
    expected.sort_unstable();
    expected
}

#[test]
fn acceptance_4_single_cost_reproduction() {
    let (n, m, t0, tau, theta, delta) = (1i64, 2i64, 2.0, 1.0, 1.0, 1.0);
    let f = f_mono(2.0);
    let inst = example3_acceptance(m as u64);

    let result = audited_simulate("s3:1".parse().unwrap(), &inst);
    let mut externals: Vec<(u64, u64)> = result
        .matches
        .iter()
        .filter(|mt| mt.kind == MatchKind::External)
        .map(|mt| (mt.a.min(mt.b), mt.a.max(mt.b)))
        .collect();
    externals.sort_unstable();
    let expected = example3_expected_externals(&inst, n, m, t0, tau);
    assert_eq!(externals, expected, "external pattern");

    let floor = 3.0 * m as f64 * (delta + theta);
    assert!(
        result.total_cost >= floor,
        "total {} vs floor {floor}",
        result.total_cost
    );

    // The internal-only pairing: consecutive arrivals per point.
    let mut pairs = Vec::new();
    for p in 0..3usize {
        let at: Vec<u64> = inst
            .requests
            .iter()
            .filter(|r| r.point == p)
            .map(|r| r.id)
            .collect();
        assert_eq!(at.len() % 2, 0);
        for c in at.chunks(2) {
            pairs.push((c[0], c[1]));
        }
    }
    let internal_only = OfflineMatching {
        pairs,
        cost: 0.0,
        exact: false,
    };
    let priced = evaluate_costs(&internal_only.to_matches(&inst), &inst).unwrap();
    assert!(priced.matches.iter().all(|mt| mt.kind == MatchKind::Internal));
    let bound = 2.0 * f.eval_unchecked(t0 + tau)
        + (6 * m * n + 5 * n - 1) as f64 / 2.0 * f.eval_unchecked(tau);
    assert!(
        priced.total_cost <= bound + 1e-9,
        "internal-only pairing {} vs bound {bound}",
        priced.total_cost
    );
    println!(
        "acceptance 4 PASS — single-cost family: exact external pattern ({} matches), total {:.3} >= {floor}, internal-only audit {:.3} <= {bound:.3}",
        expected.len(), result.total_cost, priced.total_cost
    );
}

#[test]
fn acceptance_5_timer_matcher_boundedness() {
    let mut worst: (f64, String) = (0.0, String::new());
    for (label, inst) in acceptance_grid() {
        let result = audited_simulate(MatcherSpec::AlgA, &inst);
        let (off, exact) = offline_cost(&inst);
        let ratio = if off > 0.0 { result.total_cost / off } else { 1.0 };
        let cap = 50.0 * inst.space.k() as f64;
        assert!(
            ratio <= cap,
            "{label}: ratio {ratio} exceeds 50K = {cap} (offline exact: {exact})"
        );
        if ratio / inst.space.k() as f64 > worst.0 {
            worst = (ratio / inst.space.k() as f64, label.clone());
        }
    }

    // The timer matcher strictly beats each failing baseline on its own
    // family, at the acceptance parameters and one shrink step further.
    let beats = [
        ("s1:1", example1_acceptance()),
        ("s1:1", gen_example1(10, 1.0, 0.005, 1.0, f_mono(2.0)).unwrap()),
        ("s2:1", example2_acceptance()),
        ("s2:1", gen_example2(4, 0.675, 1.0, 1.0, 0.1, f_mono(2.0)).unwrap()),
        ("s3:1", example3_acceptance(2)),
        ("s3:1", example3_acceptance(3)),
    ];
    for (spec, inst) in beats {
        let strategy = audited_simulate(spec.parse().unwrap(), &inst);
        let timer = audited_simulate(MatcherSpec::AlgA, &inst);
        assert!(
            timer.total_cost < strategy.total_cost,
            "timer {} should beat {spec} {} on {:?}",
            timer.total_cost,
            strategy.total_cost,
            inst.meta.generator
        );
    }
    println!(
        "acceptance 5 PASS — timer-matcher ratio <= 50K on the whole grid (max ratio/K = {:.3} at {}), beats each baseline on its family",
        worst.0, worst.1
    );
}

#[test]
fn acceptance_6_adversary_lower_bound() {
    let start = Instant::now();
    let f = f_mono(2.0);
    let delta = 1.0;
    let theta = 0.3;
    let specs = [
        "greedy".to_string(),
        format!("s1:{theta}"),
        format!("s2:{theta}"),
        format!("s3:{theta}"),
        "algA".to_string(),
    ];
    for big_k in [3usize, 4, 5] {
        let k = (big_k - 1) as f64;
        for spec in &specs {
            let mspec: MatcherSpec = spec.parse().unwrap();
            let mut mean_ratios = Vec::new();
            for n in [4u64, 8, 16] {
                let cfg = AdversaryConfig::with_n(big_k, delta, n, 3, f).unwrap();
                let tau = cfg.tau();
                let mut src = AdaptiveLowerBound::new(cfg);
                let mut matcher = mspec.build(&cfg.space(), f);
                let (inst, result) = simulate_adaptive(matcher.as_mut(), &mut src).unwrap();

                let audit = evaluate_costs(&result.matches, &inst).unwrap();
                assert!((audit.total_cost - result.total_cost).abs() <= 1e-9 * audit.total_cost.max(1.0));
                let facts = verify_round_facts(&inst, &result.matches).unwrap();
                assert!(
                    facts.iter().all(|fa| fa.all_pass()),
                    "{spec} K={big_k} n={n}: {facts:?}"
                );

                let costs = per_round_matcher_costs(&inst, &result.matches);
                let bounds = per_round_bound_costs(&inst).unwrap();
                assert_eq!(costs.len(), 3);
                let bound_formula =
                    delta + k * k * n as f64 / 2.0 * f.eval_unchecked(tau) + f.eval_unchecked(tau);
                for (r, (c, b)) in costs.iter().zip(&bounds).enumerate() {
                    assert!(
                        *c >= k * delta - 1e-6,
                        "{spec} K={big_k} n={n} round {r}: cost {c} < k delta = {k}"
                    );
                    assert!(
                        *b <= bound_formula + 1e-9,
                        "{spec} K={big_k} n={n} round {r}: bound {b} > formula {bound_formula}"
                    );
                }
                let mean =
                    costs.iter().zip(&bounds).map(|(c, b)| c / b).sum::<f64>() / costs.len() as f64;
                mean_ratios.push(mean);
            }
            for w in mean_ratios.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-9,
                    "{spec} K={big_k}: per-round ratio not nondecreasing: {mean_ratios:?}"
                );
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "acceptance 6 PASS — per-round cost >= (K-1)delta for 5 matchers x K in {{3,4,5}} x n in {{4,8,16}}, bounds within formula, ratios nondecreasing ({elapsed:?})"
    );
}

#[test]
fn acceptance_7_timer_invariant_suite() {
    let mut sims = 0;
    // Every timer-matcher simulation across the criterion 2-5 grid.
    for (label, inst) in acceptance_grid() {
        let mut matcher = TimerMatcher::new(&inst.space, inst.f);
        let result = simulate(&mut matcher, &inst).expect("simulation completes");
        let inv = matcher.invariants();
        assert!(inv.events_checked > 0, "{label}: no checks ran");
        assert!(inv.violations.is_empty(), "{label}: {:?}", inv.violations);
        let audit = evaluate_costs(&result.matches, &inst).expect("perfect matching");
        assert!((audit.total_cost - result.total_cost).abs() <= 1e-9 * audit.total_cost.max(1.0));
        sims += 1;
    }
    // And across the criterion-6 adversary runs.
    for big_k in [3usize, 4, 5] {
        for n in [4u64, 8, 16] {
            let cfg = AdversaryConfig::with_n(big_k, 1.0, n, 3, f_mono(2.0)).unwrap();
            let mut src = AdaptiveLowerBound::new(cfg);
            let mut matcher = TimerMatcher::new(&cfg.space(), f_mono(2.0));
            let (inst, result) = simulate_adaptive(&mut matcher, &mut src).unwrap();
            let inv = matcher.invariants();
            assert!(inv.violations.is_empty(), "K={big_k} n={n}: {:?}", inv.violations);
            let audit = evaluate_costs(&result.matches, &inst).expect("perfect matching");
            assert!((audit.total_cost - result.total_cost).abs() <= 1e-9 * audit.total_cost.max(1.0));
            sims += 1;
        }
    }
    println!(
        "acceptance 7 PASS — timer invariants (single pending, timer resets, suspect-set resets, <= 2k externals/round), perfect matching and audit equality over {sims} simulations"
    );
}

#[test]
fn acceptance_8_cost_function_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
    for i in 0..10_000 {
        let alpha = rng.random_range(1.01..4.0);
        let f = f_mono(alpha);
        let eta: f64 = rng.random_range(0.0..20.0);
        let xi = eta + rng.random_range(0.0..20.0);
        let zeta: f64 = rng.random_range(0.0..20.0);
        let lhs = f.eval_unchecked(f.invert_unchecked(xi) - f.invert_unchecked(eta)) + zeta;
        let rhs = f.eval_unchecked(f.invert_unchecked(xi + zeta) - f.invert_unchecked(eta));
        assert!(
            lhs >= rhs - 1e-9 * rhs.max(1.0),
            "sample {i}: alpha={alpha} xi={xi} eta={eta} zeta={zeta}: {lhs} < {rhs}"
        );
    }

    for i in 0..1_000 {
        let alpha: f64 = rng.random_range(1.01..4.0);
        let y: f64 = rng.random_range(0.1..10.0);
        let g = |x: f64| (x.powf(alpha) - y.powf(alpha)) / (x - y).powf(alpha);
        let mut prev = f64::INFINITY;
        for j in 0..20 {
            let x = y * (1.05 + 0.15 * j as f64);
            let v = g(x);
            assert!(
                v <= prev + 1e-9 * prev.abs().max(1.0),
                "sample {i}: g not nonincreasing at alpha={alpha} y={y} x={x}"
            );
            prev = v;
        }
    }

    let f = f_mono(2.0);
    assert_eq!(f.truncated_value(1.0, 2.0).unwrap(), 0.0);
    assert_eq!(f.truncated_value(5.0, 5.0).unwrap(), 0.0);
    assert!((f.truncated_value(8.0, 2.0).unwrap() - 2.0).abs() < 1e-12);
    for x in [0.0, 0.5, 3.0, 42.0] {
        assert!((f.truncated_value(x, 0.0).unwrap() - x).abs() <= 1e-9 * x.max(1.0));
    }
    println!(
        "acceptance 8 PASS — convexity inequality on 10000 samples, ratio monotonicity on 1000 grids, truncation branches"
    );
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for i in 0..k {
            let mut q = p.clone();
            q.insert(i, k - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn acceptance_9_permutation_family_trend() {
    let f = f_mono(2.0);
    let mut means = Vec::new();
    for big_k in [3usize, 4] {
        let perms = permutations(big_k);
        assert_eq!(perms.len(), if big_k == 3 { 6 } else { 24 });
        let mut ratios = Vec::new();
        for sigma in &perms {
            let inst = gen_randomized_lb(big_k, 1.0, 0.5, sigma, 1, 1.0, f, false).unwrap();
            let result = audited_simulate(MatcherSpec::AlgA, &inst);
            let (off, _exact) = offline_cost(&inst);
            ratios.push(result.total_cost / off);
        }
        means.push(ratios.iter().sum::<f64>() / ratios.len() as f64);
    }
    let (mean3, mean4) = (means[0], means[1]);
    assert!(mean4 >= 1.2, "K=4 mean ratio {mean4} < 1.2");
    assert!(
        mean4 > mean3,
        "K=4 mean ratio {mean4} does not exceed K=3 mean {mean3}"
    );
    println!(
        "acceptance 9 PASS — permutation family: mean ratio K=4 {mean4:.3} >= 1.2 and > K=3 {mean3:.3}"
    );
}

#[test]
fn offline_exact_caps_respected_on_grid() {
    // The DP is only consulted within its cap across the grid helpers.
    for (label, inst) in acceptance_grid() {
        if inst.len() > DP_CAP_DEFAULT {
            assert!(
                optimal_dp_capped(&inst, DP_CAP_DEFAULT).is_err(),
                "{label} should exceed the exact cap"
            );
            assert!(!inst.meta.rounds.is_empty(), "{label} has a structured fallback");
        }
    }
}
