//! Each threshold baseline has a request family that defeats it: the
//! double-wait rule pays for a long-held anchor, the double-cost rule
//! still starves one side, and the single-cost rule gets walked through
//! a three-point cycle of expensive externals. This example runs every
//! strategy on every family and prints cost tables against the optimum.
//!
//! ```bash
//! cargo run -p mpmd --example baseline_strategies
//! ```

use mpmd::engine::simulate;
use mpmd::harness::build_generated;
use mpmd::matchers::MatcherSpec;
use mpmd::offline::optimal_dp;

fn main() {
    let families = [
        ("double-wait killer", "ex1:n=10,theta=1,eps=0.01,delta=1,alpha=2"),
        ("double-cost killer", "ex2:n=4,tau=0.69,theta=1,eps=0.1,delta=1,alpha=2"),
        ("single-cost killer", "ex3:n=1,m=2,theta=1,delta=1,alpha=2,t0=2"),
    ];
    let matchers = ["s1:1", "s2:1", "s3:1", "greedy", "algA"];

    for (label, spec) in families {
        let inst = build_generated(spec).unwrap();
        let opt = optimal_dp(&inst).unwrap();
        println!("{label}: {spec}");
        println!("  requests: {}, offline optimum: {:.4}", inst.len(), opt.cost);
        for m in matchers {
            let mspec: MatcherSpec = m.parse().unwrap();
            let mut matcher = mspec.build(&inst.space, inst.f);
            let result = simulate(matcher.as_mut(), &inst).unwrap();
            println!(
                "  {m:<7} total {:>10.4}  (space {:>7.4} + time {:>8.4})  ratio {:>8.3}",
                result.total_cost,
                result.space_cost,
                result.time_cost,
                result.total_cost / opt.cost
            );
        }
        println!();
    }
}
