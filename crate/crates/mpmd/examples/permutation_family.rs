//! The permuted multi-point family: one anchor request, geometrically
//! growing request columns, and a random relabeling of which point plays
//! which role. Averaging the timer matcher's ratio over all permutations
//! shows the gap widening with the point count.
//!
//! ```bash
//! cargo run -p mpmd --example permutation_family
//! ```

use mpmd::costfn::TimeCostFunction;
use mpmd::engine::simulate;
use mpmd::instance::gen_randomized_lb;
use mpmd::matchers::MatcherSpec;
use mpmd::offline::{optimal_dp, structured_round_bound, DP_CAP_DEFAULT};

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

fn main() {
    let f: TimeCostFunction = "monomial:2".parse().unwrap();
    for big_k in [3usize, 4] {
        let mut ratios = Vec::new();
        for sigma in permutations(big_k) {
            let inst = gen_randomized_lb(big_k, 1.0, 0.5, &sigma, 1, 1.0, f, false).unwrap();
            let mut matcher = MatcherSpec::AlgA.build(&inst.space, inst.f);
            let result = simulate(matcher.as_mut(), &inst).unwrap();
            let offline = if inst.len() <= DP_CAP_DEFAULT {
                optimal_dp(&inst).unwrap().cost
            } else {
                structured_round_bound(&inst, inst.meta.rounds[0].construction)
                    .unwrap()
                    .cost
            };
            ratios.push(result.total_cost / offline);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "K = {big_k}: {} permutations, mean timer-matcher ratio {mean:.3}, max {max:.3}",
            ratios.len()
        );
    }
}
