//! Offline optima: the subset-DP optimum against the exhaustive
//! enumeration oracle, and the structured feasible bound on a permuted
//! round that is too large for exact matching.
//!
//! ```bash
//! cargo run -p mpmd --example exact_offline
//! ```

use mpmd::costfn::TimeCostFunction;
use mpmd::instance::{gen_random, gen_randomized_lb, RoundConstruction};
use mpmd::metric::MetricSpace;
use mpmd::offline::{brute_force_enumerate, optimal_dp, structured_round_bound};

fn main() {
    let f: TimeCostFunction = "monomial:2".parse().unwrap();

    println!("subset DP vs exhaustive enumeration:");
    for seed in 0..8u64 {
        let k = 2 + (seed % 3) as usize;
        let count = 4 + 2 * (seed % 4);
        let space = MetricSpace::uniform(k, 1.0).unwrap();
        let inst = gen_random(space, count, 6.0, seed, f).unwrap();
        let dp = optimal_dp(&inst).unwrap();
        let bf = brute_force_enumerate(&inst).unwrap();
        println!(
            "  seed {seed}: {count:>2} requests on {k} points  dp {:.6}  brute {:.6}  |delta| {:.1e}",
            dp.cost,
            bf.cost,
            (dp.cost - bf.cost).abs()
        );
    }

    // A single permuted round on 6 points has hundreds of requests; the
    // explicit anchor-plus-consecutive pairing still prices it.
    let sigma: Vec<usize> = (0..6).collect();
    let inst = gen_randomized_lb(6, 1.0, 0.5, &sigma, 1, 1.0, f, false).unwrap();
    let bound = structured_round_bound(&inst, RoundConstruction::RandomizedRound).unwrap();
    println!(
        "\nstructured bound on a 6-point permuted round ({} requests): {:.4} (exact: {})",
        inst.len(),
        bound.cost,
        bound.exact
    );
}
