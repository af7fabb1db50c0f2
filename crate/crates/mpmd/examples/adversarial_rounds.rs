//! The adaptive lower-bound source against several matchers: it watches
//! which points the matcher connects and keeps feeding the rest, forcing
//! per-round cost at least (K-1)·delta while an explicit offline pairing
//! stays near delta. Halving the grid step widens the gap.
//!
//! ```bash
//! cargo run -p mpmd --example adversarial_rounds
//! ```

use mpmd::adversary::{
    per_round_matcher_costs, verify_round_facts, AdaptiveLowerBound, AdversaryConfig,
};
use mpmd::costfn::TimeCostFunction;
use mpmd::engine::simulate_adaptive;
use mpmd::matchers::MatcherSpec;
use mpmd::offline::per_round_bound_costs;

fn main() {
    let f: TimeCostFunction = "monomial:2".parse().unwrap();
    let big_k = 4;
    let k = (big_k - 1) as f64;

    for spec in ["greedy", "s1:0.3", "s3:0.3", "algA"] {
        let mspec: MatcherSpec = spec.parse().unwrap();
        println!("{spec} vs the adaptive source on {big_k} points (floor = {k} per round):");
        for n in [4u64, 8, 16] {
            let cfg = AdversaryConfig::with_n(big_k, 1.0, n, 3, f).unwrap();
            let mut source = AdaptiveLowerBound::new(cfg);
            let mut matcher = mspec.build(&cfg.space(), f);
            let (inst, result) = simulate_adaptive(matcher.as_mut(), &mut source).unwrap();

            let facts = verify_round_facts(&inst, &result.matches).unwrap();
            let facts_ok = facts.iter().all(|fa| fa.all_pass());
            let costs = per_round_matcher_costs(&inst, &result.matches);
            let bounds = per_round_bound_costs(&inst).unwrap();
            let ratios: Vec<String> = costs
                .iter()
                .zip(&bounds)
                .map(|(c, b)| format!("{:.2}", c / b))
                .collect();
            println!(
                "  n = {n:>2} (tau = {:.4}): {} requests, round costs {:?}, offline bounds {:?}, ratios [{}], facts {}",
                cfg.tau(),
                inst.len(),
                costs.iter().map(|c| format!("{c:.2}")).collect::<Vec<_>>(),
                bounds.iter().map(|b| format!("{b:.2}")).collect::<Vec<_>>(),
                ratios.join(", "),
                if facts_ok { "ok" } else { "VIOLATED" }
            );
        }
        println!();
    }
}
