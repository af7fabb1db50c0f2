//! Step-by-step trace of the timer-based matcher on a two-point space:
//! arrivals, analytic threshold crossings, and the committed matches,
//! with the per-point timers printed along the way.
//!
//! ```bash
//! cargo run -p mpmd --example timer_matcher_walkthrough
//! ```

use mpmd::costfn::TimeCostFunction;
use mpmd::engine::{simulate_traced, EventRecord};
use mpmd::instance::{Instance, InstanceMeta};
use mpmd::matchers::TimerMatcher;
use mpmd::metric::MetricSpace;

fn main() {
    let space = MetricSpace::uniform(2, 1.0)
        .unwrap()
        .with_labels(vec!["u".into(), "v".into()]);
    let f: TimeCostFunction = "monomial:2".parse().unwrap();

    // A lone pair, then a co-located burst, then a second lone pair that
    // has to climb past the doubled threshold because u is now suspect.
    let schedule = vec![
        (0, 0.0),
        (1, 0.1),
        (0, 2.0),
        (0, 2.4),
        (0, 5.0),
        (1, 5.1),
    ];
    let inst = Instance::from_schedule(space.clone(), f, schedule, 1.0, InstanceMeta::default())
        .unwrap();

    let mut matcher = TimerMatcher::new(&space, f);
    let result = simulate_traced(&mut matcher, &inst).unwrap();

    println!("threshold delta = {}, doubled = {}", matcher.delta_eff(), 2.0 * matcher.delta_eff());
    for ev in result.event_log.as_deref().unwrap_or(&[]) {
        match ev {
            EventRecord::Arrival { t, id, p } => {
                println!("t = {t:>6.3}  arrival  request {id} at {}", space.label(*p));
            }
            EventRecord::Trigger { t } => println!("t = {t:>6.3}  trigger  (timer crossing)"),
            EventRecord::Finalize { t } => println!("t = {t:>6.3}  stream end"),
            EventRecord::Matched { t, a, b, kind, initiator } => {
                let who = initiator
                    .map(|p| format!(", initiated by {}", space.label(p)))
                    .unwrap_or_default();
                println!("t = {t:>6.3}  match    ({a}, {b}) {kind:?}{who}");
            }
        }
    }
    println!(
        "\ntotal cost {:.4} = space {:.4} + time {:.4}",
        result.total_cost, result.space_cost, result.time_cost
    );
    println!(
        "suspect set after the run: {:?}, timer invariant checks: {} (violations: {})",
        matcher.psi(),
        matcher.invariants().events_checked,
        matcher.invariants().violations.len()
    );
}
