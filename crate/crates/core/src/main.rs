//! Command-line front end: campaigns, oracles, incentive checks, the
//! verification suites, and instance generation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use idvsel::distributions::RandomSource;
use idvsel::harness::suites::{run_all, run_suite, SuiteReport, DEFAULT_SUITE_SEED};
use idvsel::harness::{
    calibrate_threshold, run_campaign, ExperimentConfig, OutputFormat, CALIBRATION_STREAM,
};
use idvsel::instances::{indicator_chain, prefix_product, random_suite, threshold_trap};
use idvsel::mechanisms::{epic_check, PaymentRule};
use idvsel::oracles::{exact_alg, exact_opt};
use idvsel::rules::RuleSpec;
use idvsel::{Error, Result};

#[derive(Parser)]
#[command(
    name = "idvsel",
    version,
    about = "Online selection with interdependent values: stopping rules, truthful \
             mechanisms, oracles, and a Monte Carlo verification harness"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a Monte Carlo campaign from a JSON config file.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Override the worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the per-trial output format.
        #[arg(long, value_parser = parse_format)]
        format: Option<OutputFormat>,
        /// Also write a step-by-step decision trace of trial 0 to
        /// `<out>/trace.jsonl` (one JSON event per time step).
        #[arg(long)]
        trace: bool,
    },
    /// Exact expectations for an instance (and optionally a rule).
    Oracle {
        /// Instance JSON file.
        #[arg(long)]
        instance: PathBuf,
        /// Rule id, e.g. `guarded-threshold` or `fixed:3`.
        #[arg(long)]
        rule: Option<String>,
        /// Seed for threshold calibration when the rule needs one.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exhaustive ex-post incentive-compatibility check.
    Epic {
        /// Instance JSON file (finite supports).
        #[arg(long)]
        instance: PathBuf,
        /// Rule id.
        #[arg(long)]
        rule: String,
        /// Payment id: embedded | posted-price | critical-farsighted |
        /// critical-myopic | threshold-or-critical.
        #[arg(long, default_value = "embedded")]
        payment: String,
        /// Seed for threshold calibration when the rule needs one.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run registered verification suites (`all` for every suite).
    Suite {
        /// Suite id, or `all`.
        #[arg(default_value = "all")]
        id: String,
        /// Suite seed.
        #[arg(long, default_value_t = DEFAULT_SUITE_SEED)]
        seed: u64,
        /// Write the reports as JSON to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a named instance (or suite of instances) as JSON.
    Gen {
        /// indicator-chain | prefix-product | threshold-trap |
        /// suite:<own-signal|subadditive|submodular>
        name: String,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (single instance) or directory (suites); stdout when
        /// omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(format!("unknown format `{other}` (csv|json)")),
    }
}

fn load_instance(path: &PathBuf) -> Result<idvsel::instances::Instance> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let inst: idvsel::instances::Instance = serde_json::from_str(&text)?;
    inst.validate()?;
    Ok(inst)
}

fn resolve_rule(id: &str, inst: &idvsel::instances::Instance, seed: u64) -> Result<RuleSpec> {
    let mut rule = RuleSpec::parse_id(id)?;
    if rule.kind.needs_threshold() {
        let est = calibrate_threshold(inst, 100_000, &RandomSource::new(seed, CALIBRATION_STREAM))?;
        rule.threshold = Some(est.threshold);
    }
    Ok(rule)
}

fn print_suite_report(report: &SuiteReport) {
    println!("suite {}", report.suite);
    for line in &report.checks {
        let mark = if line.passed { "PASS" } else { "FAIL" };
        println!("  [{mark}] {} — {}", line.label, line.detail);
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            config,
            seed,
            trials,
            workers,
            out,
            format,
            trace,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                Error::InvalidInput(format!("cannot read {}: {e}", config.display()))
            })?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            if let Some(f) = format {
                cfg.format = f;
            }
            let result = run_campaign(&cfg)?;
            let mut trace_path = None;
            if trace {
                let dir = cfg.out_dir.clone().ok_or_else(|| {
                    Error::InvalidInput("--trace needs an output directory".into())
                })?;
                let mut inst = cfg.instance.load(cfg.seed)?.remove(0);
                if let Some(t) = cfg.temporality {
                    inst.temporality = t;
                }
                let mut rule = RuleSpec::parse_id(&cfg.rule)?;
                if rule.kind.needs_threshold() {
                    rule.threshold = result.threshold.map(|t| t.threshold);
                }
                let (events, _) = idvsel::harness::trace_trial(&inst, &rule, cfg.seed, 0)?;
                let path = dir.join("trace.jsonl");
                let mut lines = String::new();
                for e in &events {
                    lines.push_str(&serde_json::to_string(e)?);
                    lines.push('\n');
                }
                std::fs::write(&path, lines)?;
                trace_path = Some(path);
            }
            let summary = serde_json::json!({
                "rule": cfg.rule,
                "trials": cfg.trials,
                "seed": cfg.seed,
                "threshold": result.threshold,
                "estimate": result.estimate,
                "rows": result.rows_path,
                "trace": trace_path,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Cmd::Oracle {
            instance,
            rule,
            seed,
        } => {
            let inst = load_instance(&instance)?;
            let opt = exact_opt(&inst)?;
            let alg = match &rule {
                Some(id) => {
                    let spec = resolve_rule(id, &inst, seed)?;
                    Some(exact_alg(&spec, &inst)?)
                }
                None => None,
            };
            let out = serde_json::json!({ "oracle": { "opt": opt, "alg": alg } });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Cmd::Epic {
            instance,
            rule,
            payment,
            seed,
        } => {
            let inst = load_instance(&instance)?;
            let spec = resolve_rule(&rule, &inst, seed)?;
            let payment = PaymentRule::parse_id(&payment)?;
            let report = epic_check(&spec, payment, &inst, None, None)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.passed)
        }
        Cmd::Suite { id, seed, out } => {
            let reports = if id == "all" {
                run_all(seed)?
            } else {
                vec![run_suite(&id, seed)?]
            };
            let mut all_passed = true;
            for report in &reports {
                print_suite_report(report);
                all_passed &= report.passed();
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                for report in &reports {
                    let path = dir.join(format!("{}.json", report.suite));
                    std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
                }
            }
            println!(
                "{}: {}",
                if id == "all" { "suites" } else { "suite" },
                if all_passed { "PASS" } else { "FAIL" }
            );
            Ok(all_passed)
        }
        Cmd::Gen {
            name,
            n,
            eps,
            count,
            seed,
            out,
        } => {
            let instances = match name.as_str() {
                "indicator-chain" => vec![indicator_chain(n)?],
                "prefix-product" => vec![prefix_product(n)?],
                "threshold-trap" => vec![threshold_trap(n, eps)?],
                suite if suite.starts_with("suite:") => {
                    let family = match &suite[6..] {
                        "own-signal" => idvsel::instances::ValuationFamily::OwnSignal,
                        "subadditive" => idvsel::instances::ValuationFamily::Subadditive,
                        "submodular" => idvsel::instances::ValuationFamily::Submodular,
                        other => {
                            return Err(Error::InvalidInput(format!("unknown family `{other}`")))
                        }
                    };
                    random_suite(n, family, count, &RandomSource::new(seed, 0))?
                }
                other => return Err(Error::InvalidInput(format!("unknown generator `{other}`"))),
            };
            match (out, instances.len()) {
                (None, _) => {
                    for inst in &instances {
                        println!("{}", serde_json::to_string_pretty(inst)?);
                    }
                }
                (Some(path), 1) => {
                    std::fs::write(&path, serde_json::to_string_pretty(&instances[0])?)?;
                    eprintln!("wrote {}", path.display());
                }
                (Some(dir), _) => {
                    std::fs::create_dir_all(&dir)?;
                    for (i, inst) in instances.iter().enumerate() {
                        let path = dir.join(format!("instance_{i:03}.json"));
                        std::fs::write(&path, serde_json::to_string_pretty(inst)?)?;
                    }
                    eprintln!("wrote {} instances to {}", instances.len(), dir.display());
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
