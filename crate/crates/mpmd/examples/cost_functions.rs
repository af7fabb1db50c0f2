//! Convex delay penalties: evaluation, exact rates and inverses,
//! truncated values, and the admissibility report.
//!
//! ```bash
//! cargo run -p mpmd --example cost_functions
//! ```

use mpmd::costfn::TimeCostFunction;

fn main() {
    let grid = [0.0, 0.5, 1.0, 2.0, 4.0];
    for spec in ["monomial:2", "monomial:1.5", "monomial:0.5", "linear"] {
        let f: TimeCostFunction = spec.parse().unwrap();
        println!("{spec}");
        for t in [0.0, 1.0, 3.0] {
            let rate = f
                .rate(t)
                .map(|r| format!("{r:.4}"))
                .unwrap_or_else(|_| "unbounded".into());
            println!(
                "  f({t}) = {:<10.4} f'({t}) = {rate:<10} f^-1(f({t})) = {:.4}",
                f.evaluate(t).unwrap(),
                f.invert(f.evaluate(t).unwrap()).unwrap()
            );
        }
        let report = f.check_admissible(&grid);
        println!(
            "  admissible: f(0)=0 {} | f'(0)=0 {} | monotone {} | convex {}",
            report.zero_at_origin, report.zero_rate_at_origin, report.monotone, report.convex
        );
    }

    // Truncated values: the part of x exceeding y, measured through f.
    let f: TimeCostFunction = "monomial:2".parse().unwrap();
    println!("\ntruncated values under t^2:");
    for (x, y) in [(1.0, 2.0), (8.0, 2.0), (5.0, 5.0), (9.0, 0.0)] {
        println!("  trun({x}; {y}) = {:.4}", f.truncated_value(x, y).unwrap());
    }
}
