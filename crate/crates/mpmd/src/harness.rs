//! Experiment orchestration: run a matcher against an instance source,
//! price the offline side, compute the empirical ratio, sweep parameter
//! grids into CSV, and back the `mpmd` command-line binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::adversary::{AdaptiveLowerBound, AdversaryConfig, AdversaryError};
use crate::costfn::{CostFnError, TimeCostFunction};
use crate::engine::{
    evaluate_costs, simulate, simulate_adaptive, simulate_traced, EngineError, SimulationResult,
};
use crate::instance::{
    gen_example1, gen_example2, gen_example3, gen_random, gen_randomized_lb, Example3Params,
    Instance, InstanceError, EXAMPLE3_DEFAULT_BUDGET,
};
use crate::matchers::{MatcherSpec, MatcherSpecError};
use crate::metric::{MetricError, MetricSpace};
use crate::offline::{
    brute_force_enumerate, optimal_dp, structured_round_bound, OfflineError, OfflineMatching,
    DP_CAP_DEFAULT,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Offline(#[from] OfflineError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Matcher(#[from] MatcherSpecError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    CostFn(#[from] CostFnError),
    #[error("{0}")]
    Input(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// 1 for invariant violations, 2 for input problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Invariant(_) => 1,
            HarnessError::Engine(EngineError::Audit(_)) => 1,
            _ => 2,
        }
    }
}

/// How the offline side of a ratio is priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OfflineMode {
    Exact,
    Structured,
    Both,
}

impl FromStr for OfflineMode {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(OfflineMode::Exact),
            "structured" => Ok(OfflineMode::Structured),
            "both" => Ok(OfflineMode::Both),
            other => Err(HarnessError::Input(format!(
                "unknown offline mode {other:?}; expected exact, structured or both"
            ))),
        }
    }
}

/// Where the requests come from.
#[derive(Debug, Clone)]
pub enum InstanceSource {
    File(PathBuf),
    Generator(String),
    Adversary(AdversaryConfig),
}

fn parse_kv(rest: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| {
            HarnessError::Input(format!("expected key=value, got {part:?}"))
        })?;
        map.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
    }
    Ok(map)
}

struct Params {
    name: String,
    map: BTreeMap<String, String>,
}

impl Params {
    fn f64_or(&self, key: &str, default: f64) -> Result<f64, HarnessError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                HarnessError::Input(format!("{}: bad number for {key}: {v:?}", self.name))
            }),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, HarnessError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                HarnessError::Input(format!("{}: bad integer for {key}: {v:?}", self.name))
            }),
        }
    }

    fn f(&self) -> Result<TimeCostFunction, HarnessError> {
        if let Some(spec) = self.map.get("f") {
            return Ok(spec.parse::<TimeCostFunction>()?);
        }
        let alpha = self.f64_or("alpha", 2.0)?;
        Ok(TimeCostFunction::monomial(alpha)?)
    }
}

/// Builds an instance from a generator spec string such as
/// `ex1:n=10,theta=1,eps=0.01,delta=1,alpha=2`.
pub fn build_generated(spec: &str) -> Result<Instance, HarnessError> {
    let (name, rest) = spec
        .split_once(':')
        .map(|(n, r)| (n, r))
        .unwrap_or((spec, ""));
    let p = Params {
        name: name.to_string(),
        map: parse_kv(rest)?,
    };
    let f = p.f()?;
    match name.to_ascii_lowercase().as_str() {
        "ex1" => Ok(gen_example1(
            p.u64_or("n", 10)?,
            p.f64_or("theta", 1.0)?,
            p.f64_or("eps", 0.01)?,
            p.f64_or("delta", 1.0)?,
            f,
        )?),
        "ex2" => Ok(gen_example2(
            p.u64_or("n", 4)?,
            p.f64_or("tau", 0.69)?,
            p.f64_or("delta", 1.0)?,
            p.f64_or("theta", 1.0)?,
            p.f64_or("eps", 0.1)?,
            f,
        )?),
        "ex3" => {
            let n = p.u64_or("n", 1)?;
            let theta = p.f64_or("theta", 1.0)?;
            let tau = match p.map.get("tau") {
                Some(v) => v.parse().map_err(|_| {
                    HarnessError::Input(format!("ex3: bad number for tau: {v:?}"))
                })?,
                None => Example3Params::solve_tau(f, theta, n)?,
            };
            Ok(gen_example3(&Example3Params {
                n,
                tau,
                t0: p.f64_or("t0", 2.0 * n as f64 * tau)?,
                m: p.u64_or("m", 2)?,
                delta: p.f64_or("delta", 1.0)?,
                theta,
                perturbation_budget: p.f64_or("budget", EXAMPLE3_DEFAULT_BUDGET * tau)?,
                f,
            })?)
        }
        "rand" => {
            let k = p.u64_or("k", 3)? as usize;
            let delta = p.f64_or("delta", 1.0)?;
            let space = MetricSpace::uniform(k, delta)?;
            Ok(gen_random(
                space,
                p.u64_or("count", 8)?,
                p.f64_or("horizon", 10.0)?,
                p.u64_or("seed", 0)?,
                f,
            )?)
        }
        "lb6" => {
            let big_k = p.u64_or("k", 4)? as usize;
            let sigma: Vec<usize> = match p.map.get("sigma").map(String::as_str) {
                None | Some("id") => (0..big_k).collect(),
                Some(digits) => digits
                    .chars()
                    .map(|c| {
                        c.to_digit(10).map(|d| d as usize).ok_or_else(|| {
                            HarnessError::Input(format!("lb6: bad sigma digit {c:?}"))
                        })
                    })
                    .collect::<Result<_, _>>()?,
            };
            Ok(gen_randomized_lb(
                big_k,
                p.f64_or("delta", 1.0)?,
                p.f64_or("tau", 0.5)?,
                &sigma,
                p.u64_or("rounds", 1)?,
                p.f64_or("gap", 1.0)?,
                f,
                p.map.get("allow_large").is_some(),
            )?)
        }
        other => Err(HarnessError::Input(format!(
            "unknown generator {other:?}; expected ex1, ex2, ex3, rand or lb6"
        ))),
    }
}

/// Parses an instance source: the adversary virtual kind, a generator
/// spec, or a file path.
pub fn parse_source(s: &str) -> Result<InstanceSource, HarnessError> {
    let lower = s.trim().to_ascii_lowercase();
    if let Some(rest) = lower.strip_prefix("adv5:") {
        let p = Params {
            name: "adv5".into(),
            map: parse_kv(rest)?,
        };
        let cfg = AdversaryConfig::with_n(
            p.u64_or("k", 3)? as usize,
            p.f64_or("delta", 1.0)?,
            p.u64_or("n", 4)?,
            p.u64_or("m", 1)?,
            p.f()?,
        )?;
        return Ok(InstanceSource::Adversary(cfg));
    }
    for prefix in ["ex1", "ex2", "ex3", "rand", "lb6"] {
        if lower == *prefix || lower.starts_with(&format!("{prefix}:")) {
            return Ok(InstanceSource::Generator(s.trim().to_string()));
        }
    }
    Ok(InstanceSource::File(PathBuf::from(s)))
}

/// One experiment: an instance source, a matcher, and an offline mode.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source: InstanceSource,
    pub source_label: String,
    pub matcher: MatcherSpec,
    pub offline: OfflineMode,
    pub trace: Option<PathBuf>,
}

/// Costs and empirical ratio of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RatioRecord {
    pub instance: String,
    pub matcher: String,
    pub space_cost: f64,
    pub time_cost: f64,
    pub total: f64,
    pub offline_cost: f64,
    pub offline_exact: bool,
    pub ratio: f64,
}

fn offline_for(
    instance: &Instance,
    mode: OfflineMode,
) -> Result<OfflineMatching, HarnessError> {
    match mode {
        OfflineMode::Exact => Ok(optimal_dp(instance)?),
        OfflineMode::Structured => {
            let construction = instance
                .meta
                .rounds
                .first()
                .map(|r| r.construction)
                .ok_or_else(|| {
                    HarnessError::Input(
                        "structured offline needs an instance with round metadata".into(),
                    )
                })?;
            Ok(structured_round_bound(instance, construction)?)
        }
        OfflineMode::Both => {
            if instance.len() <= DP_CAP_DEFAULT {
                Ok(optimal_dp(instance)?)
            } else {
                offline_for(instance, OfflineMode::Structured)
            }
        }
    }
}

/// Simulates the spec's matcher on its instance and prices the offline
/// side. The reported costs are audited against a from-scratch recompute.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(RatioRecord, Instance), HarnessError> {
    let (instance, result) = match &spec.source {
        InstanceSource::Adversary(cfg) => {
            let mut src = AdaptiveLowerBound::new(*cfg);
            let mut matcher = spec.matcher.build(&cfg.space(), cfg.f);
            simulate_adaptive(matcher.as_mut(), &mut src)?
        }
        source => {
            let instance = match source {
                InstanceSource::File(path) => Instance::load(path)?,
                InstanceSource::Generator(g) => build_generated(g)?,
                InstanceSource::Adversary(_) => unreachable!(),
            };
            let mut matcher = spec.matcher.build(&instance.space, instance.f);
            let result = if spec.trace.is_some() {
                simulate_traced(matcher.as_mut(), &instance)?
            } else {
                simulate(matcher.as_mut(), &instance)?
            };
            (instance, result)
        }
    };

    if let Some(path) = &spec.trace {
        if let Some(log) = &result.event_log {
            let mut text = String::new();
            for ev in log {
                text.push_str(&serde_json::to_string(ev).expect("event serializes"));
                text.push('\n');
            }
            std::fs::write(path, text)?;
        }
    }

    let audit = evaluate_costs(&result.matches, &instance)?;
    let tol = 1e-9 * result.total_cost.abs().max(1.0);
    if (audit.total_cost - result.total_cost).abs() > tol {
        return Err(HarnessError::Invariant(format!(
            "reported cost {} differs from recomputed {}",
            result.total_cost, audit.total_cost
        )));
    }

    let offline = offline_for(&instance, spec.offline)?;
    let ratio = if offline.cost > 0.0 {
        result.total_cost / offline.cost
    } else if result.total_cost == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    if offline.exact && ratio < 1.0 - 1e-9 {
        return Err(HarnessError::Invariant(format!(
            "online cost {} beat the exact offline optimum {}",
            result.total_cost, offline.cost
        )));
    }
    Ok((
        RatioRecord {
            instance: spec.source_label.clone(),
            matcher: spec.matcher.to_string(),
            space_cost: result.space_cost,
            time_cost: result.time_cost,
            total: result.total_cost,
            offline_cost: offline.cost,
            offline_exact: offline.exact,
            ratio,
        },
        instance,
    ))
}

/// Wire format of the result JSON emitted by the CLI.
pub fn result_json(result: &SimulationResult, meta: serde_json::Value) -> serde_json::Value {
    let mut v = serde_json::to_value(result).expect("result serializes");
    v.as_object_mut()
        .expect("object")
        .insert("meta".into(), meta);
    v
}

/// A parameter grid; each axis substitutes its placeholder (`{K}`, `{n}`,
/// …) in the source template, and every combination runs once per
/// matcher with a seed derived from the cell index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Source template, e.g. `adv5:K={K},delta=1,n={n},m=3`.
    pub template: String,
    pub matchers: Vec<String>,
    #[serde(default = "default_offline")]
    pub offline: OfflineMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub axes: BTreeMap<String, Vec<serde_json::Value>>,
}

fn default_offline() -> OfflineMode {
    OfflineMode::Both
}

const AXIS_ORDER: [&str; 6] = ["K", "alpha", "theta", "tau", "n", "m"];

/// CSV column order is fixed so identical sweeps are byte-identical.
const CSV_HEADER: &str =
    "row,K,alpha,theta,tau,n,m,matcher,space_cost,time_cost,total,offline_cost,offline_exact,ratio,error";

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub axes: BTreeMap<String, String>,
    pub matcher: String,
    pub record: Option<RatioRecord>,
    pub error: Option<String>,
}

pub struct SweepOutput {
    pub cells: Vec<SweepCell>,
    pub csv: String,
    pub jsonl: String,
}

fn axis_values(spec: &SweepSpec, name: &str) -> Vec<Option<String>> {
    match spec.axes.get(name) {
        None => vec![None],
        Some(vals) => vals
            .iter()
            .map(|v| {
                Some(match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
            })
            .collect(),
    }
}

/// Runs every cell of the grid; per-cell failures land in the `error`
/// column and the sweep keeps going.
pub fn sweep(spec: &SweepSpec) -> Result<SweepOutput, HarnessError> {
    let matchers: Vec<MatcherSpec> = spec
        .matchers
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_, MatcherSpecError>>()?;

    let axes: Vec<(String, Vec<Option<String>>)> = AXIS_ORDER
        .iter()
        .map(|name| (name.to_string(), axis_values(spec, name)))
        .collect();

    let mut cells = Vec::new();
    let mut idx: Vec<usize> = vec![0; axes.len()];
    let mut cell_counter: u64 = 0;
    'grid: loop {
        let assignment: BTreeMap<String, String> = axes
            .iter()
            .zip(&idx)
            .filter_map(|((name, vals), &i)| vals[i].clone().map(|v| (name.clone(), v)))
            .collect();
        for matcher in &matchers {
            let seed = spec
                .seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(cell_counter);
            cell_counter += 1;
            let mut source = spec.template.clone();
            for (k, v) in &assignment {
                source = source.replace(&format!("{{{k}}}"), v);
            }
            source = source.replace("{seed}", &seed.to_string());
            let run = parse_source(&source).and_then(|src| {
                run_experiment(&ExperimentSpec {
                    source: src,
                    source_label: source.clone(),
                    matcher: *matcher,
                    offline: spec.offline,
                    trace: None,
                })
            });
            let (record, error) = match run {
                Ok((rec, _)) => (Some(rec), None),
                Err(e) => (None, Some(e.to_string())),
            };
            cells.push(SweepCell {
                axes: assignment.clone(),
                matcher: matcher.to_string(),
                record,
                error,
            });
        }
        for pos in (0..axes.len()).rev() {
            idx[pos] += 1;
            if idx[pos] < axes[pos].1.len() {
                continue 'grid;
            }
            idx[pos] = 0;
        }
        break;
    }

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut jsonl = String::new();
    let col = |cell: &SweepCell, name: &str| cell.axes.get(name).cloned().unwrap_or_default();
    for cell in &cells {
        let (sc, tc, tot, oc, ex, ratio, err) = match (&cell.record, &cell.error) {
            (Some(r), _) => (
                format!("{}", r.space_cost),
                format!("{}", r.time_cost),
                format!("{}", r.total),
                format!("{}", r.offline_cost),
                format!("{}", r.offline_exact),
                format!("{}", r.ratio),
                String::new(),
            ),
            (None, Some(e)) => (
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.replace(',', ";"),
            ),
            (None, None) => unreachable!(),
        };
        csv.push_str(&format!(
            "cell,{},{},{},{},{},{},{},{sc},{tc},{tot},{oc},{ex},{ratio},{err}\n",
            col(cell, "K"),
            col(cell, "alpha"),
            col(cell, "theta"),
            col(cell, "tau"),
            col(cell, "n"),
            col(cell, "m"),
            cell.matcher,
        ));
        jsonl.push_str(&serde_json::to_string(cell).expect("cell serializes"));
        jsonl.push('\n');
    }

    // Summary: max ratio per matcher per K, in grid order.
    let mut summary: BTreeMap<(String, String), f64> = BTreeMap::new();
    for cell in &cells {
        if let Some(r) = &cell.record {
            let key = (col(cell, "K"), cell.matcher.clone());
            let e = summary.entry(key).or_insert(f64::NEG_INFINITY);
            *e = e.max(r.ratio);
        }
    }
    for ((k, matcher), ratio) in &summary {
        csv.push_str(&format!(
            "summary,{k},,,,,,{matcher},,,,,,{ratio},\n"
        ));
    }

    Ok(SweepOutput { cells, csv, jsonl })
}

/// Invariant battery behind `mpmd verify`: cost-function identities, the
/// DP-vs-enumeration oracle, and the timer matcher's self-audit.
pub fn verify_invariants() -> Result<Vec<String>, HarnessError> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut failures = Vec::new();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);

    // Convexity inequality on random samples.
    for _ in 0..1000 {
        let alpha = rng.random_range(1.01..4.0);
        let f = TimeCostFunction::monomial(alpha)?;
        let eta = rng.random_range(0.0..10.0);
        let xi = eta + rng.random_range(0.0..10.0);
        let zeta = rng.random_range(0.0..10.0);
        let lhs = f.eval_unchecked(f.invert_unchecked(xi) - f.invert_unchecked(eta)) + zeta;
        let rhs = f.eval_unchecked(f.invert_unchecked(xi + zeta) - f.invert_unchecked(eta));
        if lhs < rhs - 1e-9 * rhs.max(1.0) {
            failures.push(format!(
                "convexity inequality failed: alpha={alpha} xi={xi} eta={eta} zeta={zeta}"
            ));
        }
    }

    // Inverse identities.
    for &alpha in &[1.5, 2.0, 3.0] {
        let f = TimeCostFunction::monomial(alpha)?;
        for i in 0..100 {
            let y = i as f64 * 0.37;
            let t = f.invert(y)?;
            if (f.evaluate(t)? - y).abs() > 1e-9 * y.max(1.0) {
                failures.push(format!("inverse identity failed at alpha={alpha} y={y}"));
            }
        }
    }

    // Oracle equivalence on small random instances.
    for seed in 0..20u64 {
        let k = 2 + (seed % 3) as usize;
        let space = MetricSpace::uniform(k, 1.0)?;
        let inst = gen_random(space, 2 + 2 * (seed % 5), 5.0, seed, "monomial:2".parse()?)?;
        let dp = optimal_dp(&inst)?;
        let bf = brute_force_enumerate(&inst)?;
        if (dp.cost - bf.cost).abs() > 1e-9 * bf.cost.max(1.0) {
            failures.push(format!(
                "optimal_dp {} != brute force {} on seed {seed}",
                dp.cost, bf.cost
            ));
        }
    }

    // Timer matcher self-audit across a few structured runs.
    for source in ["ex1:n=4,theta=1,eps=0.01", "ex2:", "rand:k=4,count=12,seed=3"] {
        let inst = build_generated(source)?;
        let mut m = crate::matchers::TimerMatcher::new(&inst.space, inst.f);
        let result = simulate(&mut m, &inst)?;
        if !m.invariants().violations.is_empty() {
            failures.push(format!(
                "timer invariants violated on {source}: {:?}",
                m.invariants().violations
            ));
        }
        let audit = evaluate_costs(&result.matches, &inst)?;
        if (audit.total_cost - result.total_cost).abs() > 1e-9 * audit.total_cost.max(1.0) {
            failures.push(format!("cost audit mismatch on {source}"));
        }
    }

    Ok(failures)
}

pub fn write_if_some(path: &Option<PathBuf>, content: &str) -> Result<(), HarnessError> {
    if let Some(p) = path {
        std::fs::write(p, content)?;
    } else {
        print!("{content}");
    }
    Ok(())
}

/// Metadata sidecar for sweep outputs; keeps timestamps out of the CSV so
/// repeated runs stay byte-identical.
pub fn sweep_meta_json(spec: &SweepSpec) -> serde_json::Value {
    json!({
        "spec": spec,
        "timestamp_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    })
}

pub fn load_sweep_spec(path: &Path) -> Result<SweepSpec, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::Input(format!("bad sweep spec {}: {e}", path.display())))
}
