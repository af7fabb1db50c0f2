//! Parameter sweeps: a grid over the adversary's point count and step
//! count, run for two matchers, emitted as diff-friendly CSV with a
//! max-ratio summary per matcher and point count.
//!
//! ```bash
//! cargo run -p mpmd --example ratio_sweep
//! ```

use std::collections::BTreeMap;

use mpmd::harness::{sweep, OfflineMode, SweepSpec};

fn main() {
    let mut axes = BTreeMap::new();
    axes.insert("K".to_string(), vec![3.into(), 4.into(), 5.into()]);
    axes.insert("n".to_string(), vec![4.into(), 8.into()]);
    let spec = SweepSpec {
        template: "adv5:K={K},delta=1,n={n},m=2".into(),
        matchers: vec!["greedy".into(), "algA".into()],
        offline: OfflineMode::Both,
        seed: 7,
        axes,
    };
    let out = sweep(&spec).unwrap();
    print!("{}", out.csv);
    let errors = out.cells.iter().filter(|c| c.error.is_some()).count();
    eprintln!("\n{} cells, {errors} errors", out.cells.len());
}
