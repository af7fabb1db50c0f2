use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpmd::harness::{
    self, build_generated, parse_source, result_json, ExperimentSpec, HarnessError, InstanceSource,
    OfflineMode,
};
use mpmd::instance::Instance;
use mpmd::matchers::MatcherSpec;
use mpmd::offline::{optimal_dp, structured_round_bound};

#[derive(Parser)]
#[command(
    name = "mpmd",
    about = "Online min-cost perfect matching with convex delay costs: generators, simulators, offline optima, adversarial runs and sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance to a JSON-lines file.
    Generate {
        /// Generator spec, e.g. ex1:n=10,theta=1,eps=0.01,delta=1,alpha=2
        #[arg(long)]
        instance: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an online matcher over an instance and report costs.
    Simulate {
        /// Instance file or generator spec.
        #[arg(long)]
        instance: String,
        /// Matcher spec: algA, greedy, s1:<theta>, s2:<theta>, s3:<theta>.
        #[arg(long)]
        matcher: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the event log as JSON-lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Offline mode for the reported ratio.
        #[arg(long, default_value = "both")]
        offline: String,
    },
    /// Price an instance offline (exact subset DP or structured bound).
    Offline {
        #[arg(long)]
        instance: String,
        #[arg(long, default_value = "exact")]
        offline: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a matcher against the adaptive lower-bound source.
    Adversary {
        /// Adversary spec: adv5:K=<k>,delta=<d>,n=<n>,m=<m>
        #[arg(long)]
        instance: String,
        #[arg(long)]
        matcher: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also save the materialized instance.
        #[arg(long)]
        save_instance: Option<PathBuf>,
    },
    /// Run a parameter grid from a JSON sweep spec into CSV.
    Sweep {
        /// Path to the sweep spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// CSV output path; a JSON-lines mirror and a .meta.json sidecar
        /// are written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in invariant suites.
    Verify,
}

fn load_instance(spec: &str) -> Result<Instance, HarnessError> {
    match parse_source(spec)? {
        InstanceSource::File(p) => Ok(Instance::load(&p)?),
        InstanceSource::Generator(g) => build_generated(&g),
        InstanceSource::Adversary(_) => Err(HarnessError::Input(
            "adaptive sources need a matcher; use the adversary subcommand".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Generate { instance, out } => {
            let inst = load_instance(&instance)?;
            harness::write_if_some(&out, &inst.to_jsonl())?;
        }
        Command::Simulate {
            instance,
            matcher,
            out,
            trace,
            offline,
        } => {
            let matcher: MatcherSpec = matcher.parse()?;
            let offline: OfflineMode = offline.parse()?;
            let spec = ExperimentSpec {
                source: parse_source(&instance)?,
                source_label: instance.clone(),
                matcher,
                offline,
                trace,
            };
            let (record, _) = harness::run_experiment(&spec)?;
            let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
            text.push('\n');
            harness::write_if_some(&out, &text)?;
        }
        Command::Offline {
            instance,
            offline,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let mode: OfflineMode = offline.parse()?;
            let matching = match mode {
                OfflineMode::Exact => optimal_dp(&inst)?,
                OfflineMode::Structured | OfflineMode::Both => {
                    match inst.meta.rounds.first().map(|r| r.construction) {
                        Some(c) if mode == OfflineMode::Structured => {
                            structured_round_bound(&inst, c)?
                        }
                        _ => optimal_dp(&inst)?,
                    }
                }
            };
            let priced = mpmd::evaluate_costs(&matching.to_matches(&inst), &inst)?;
            let mut text = serde_json::to_string_pretty(&result_json(
                &priced,
                serde_json::json!({"exact": matching.exact, "instance": instance}),
            ))
            .expect("json");
            text.push('\n');
            harness::write_if_some(&out, &text)?;
        }
        Command::Adversary {
            instance,
            matcher,
            out,
            save_instance,
        } => {
            let source = parse_source(&instance)?;
            if !matches!(source, InstanceSource::Adversary(_)) {
                return Err(HarnessError::Input(format!(
                    "adversary subcommand expects an adv5: spec, got {instance:?}"
                )));
            }
            let matcher: MatcherSpec = matcher.parse()?;
            let spec = ExperimentSpec {
                source,
                source_label: instance.clone(),
                matcher,
                offline: OfflineMode::Both,
                trace: None,
            };
            let (record, materialized) = harness::run_experiment(&spec)?;
            if let Some(path) = save_instance {
                materialized.save(&path)?;
            }
            let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
            text.push('\n');
            harness::write_if_some(&out, &text)?;
        }
        Command::Sweep { spec, out, seed } => {
            let mut sw = harness::load_sweep_spec(&spec)?;
            if let Some(s) = seed {
                sw.seed = s;
            }
            let result = harness::sweep(&sw)?;
            std::fs::write(&out, &result.csv)?;
            std::fs::write(out.with_extension("jsonl"), &result.jsonl)?;
            let meta = harness::sweep_meta_json(&sw);
            std::fs::write(
                out.with_extension("meta.json"),
                serde_json::to_string_pretty(&meta).expect("meta"),
            )?;
        }
        Command::Verify => {
            let failures = harness::verify_invariants()?;
            if !failures.is_empty() {
                for f in &failures {
                    eprintln!("FAIL {f}");
                }
                return Err(HarnessError::Invariant(format!(
                    "{} invariant checks failed",
                    failures.len()
                )));
            }
            println!("all invariant suites passed");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
