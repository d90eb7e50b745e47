//! The `staleflow` command-line tool: hash fixtures, matching reports,
//! inference, evaluation, scenario simulation, the end-to-end pipeline, and
//! the quality bench.
//!
//! Exit codes: 0 success, 1 input error, 2 internal invariant violation.
//! Every command is deterministic for fixed flags; timestamps appear only
//! under `--stamp` and wall-clock timings only under `bench --timings`.

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use staleflow::cfg::{parse_binary_cfg, BinaryCfg};
use staleflow::inference::InferenceParams;
use staleflow::matching::{match_blocks, match_functions, staleness, staleness_from};
use staleflow::metrics::evaluate;
use staleflow::pipeline::{infer_profile, run_bench, run_pipeline, BenchCell};
use staleflow::profile::{read_profile, write_profile, ProfileFile};
use staleflow::sim::{make_scenario, write_scenario, GenConfig, MutationConfig, MutationKind};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "staleflow",
    version,
    about = "Re-use stale basic-block profiles across binary revisions"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct GlobalOpts {
    /// Worker threads for per-function work (default: one per core)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Per-unit penalty for raising a count above its initial value
    #[arg(long, global = true, default_value_t = 1)]
    k_inc: u64,
    /// Per-unit penalty for lowering a count below its initial value
    #[arg(long, global = true, default_value_t = 2)]
    k_dec: u64,
    /// Skip even redistribution across count-free regions
    #[arg(long, global = true)]
    no_rebalance: bool,
    /// Suppress warnings and progress lines
    #[arg(long, global = true)]
    quiet: bool,
    /// Add a unix-seconds stamp field to JSON reports
    #[arg(long, global = true)]
    stamp: bool,
}

impl GlobalOpts {
    fn params(&self) -> InferenceParams {
        InferenceParams {
            k_inc: self.k_inc,
            k_dec: self.k_dec,
            ..InferenceParams::default()
        }
    }

    fn rebalance(&self) -> bool {
        !self.no_rebalance
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Print per-block blended hashes (the cross-language fixture format)
    Hash {
        #[arg(long)]
        cfg: PathBuf,
    },
    /// Match a stale profile against a CFG and write a JSON report
    Match {
        #[arg(long)]
        cfg: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run flow inference on every matched function and write the profile
    Infer {
        #[arg(long)]
        cfg: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an inferred profile against fresh ground truth
    Eval {
        #[arg(long)]
        cfg: PathBuf,
        #[arg(long)]
        inferred: PathBuf,
        #[arg(long)]
        fresh: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Generate a synthetic evolution scenario directory
    Simulate {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        functions: u32,
        #[arg(long, default_value_t = 0.1)]
        mutation_rate: f64,
        /// Comma-separated mutation kinds (default: all)
        #[arg(long)]
        kinds: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Full transfer: match, pass exact functions through, infer the rest
    Pipeline {
        #[arg(long)]
        cfg: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score inference against the stale-discard baseline over scenarios
    Bench {
        /// Comma-separated scenario seeds
        #[arg(long, default_value = "1")]
        seeds: String,
        /// Comma-separated mutation rates
        #[arg(long, default_value = "0.02,0.05,0.1,0.2")]
        rates: String,
        #[arg(long, default_value_t = 200)]
        functions: u32,
        /// Comma-separated mutation kinds (default: all)
        #[arg(long)]
        kinds: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Include wall-clock runtime buckets (nondeterministic values)
        #[arg(long)]
        timings: bool,
    },
}

enum CliError {
    Input(String),
    Internal(String),
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print to stdout and succeed; usage mistakes
            // are input errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.global.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build_global()
        {
            eprintln!("internal error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.cmd {
        Cmd::Hash { cfg } => cmd_hash(cfg),
        Cmd::Match {
            cfg,
            profile,
            report,
        } => cmd_match(cfg, profile, report, g),
        Cmd::Infer { cfg, profile, out } => cmd_infer(cfg, profile, out, g),
        Cmd::Eval {
            cfg,
            inferred,
            fresh,
            report,
        } => cmd_eval(cfg, inferred, fresh, report, g),
        Cmd::Simulate {
            seed,
            functions,
            mutation_rate,
            kinds,
            out_dir,
        } => cmd_simulate(
            *seed,
            *functions,
            *mutation_rate,
            kinds.as_deref(),
            out_dir,
            g,
        ),
        Cmd::Pipeline { cfg, profile, out } => cmd_pipeline(cfg, profile, out, g),
        Cmd::Bench {
            seeds,
            rates,
            functions,
            kinds,
            out_dir,
            timings,
        } => cmd_bench(
            seeds,
            rates,
            *functions,
            kinds.as_deref(),
            out_dir,
            *timings,
            g,
        ),
    }
}

fn load_cfg(path: &Path) -> Result<BinaryCfg, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    parse_binary_cfg(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_profile(path: &Path) -> Result<ProfileFile, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    read_profile(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| input(format!("{}: {e}", path.display())))
}

/// Serializes through `Value` so every object's keys come out sorted.
fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serializing report: {e}")))?;
    text.push('\n');
    write_file(path, &text)
}

fn stamped(mut value: serde_json::Value, g: &GlobalOpts) -> serde_json::Value {
    if g.stamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        if let Some(obj) = value.as_object_mut() {
            obj.insert("stamp".to_string(), json!(now));
        }
    }
    value
}

fn emit_warnings(warnings: &[String], g: &GlobalOpts) {
    if !g.quiet {
        for w in warnings {
            eprintln!("warning: {w}");
        }
    }
}

fn cmd_hash(cfg_path: &Path) -> Result<(), CliError> {
    let binary = load_cfg(cfg_path)?;
    let mut out = String::new();
    for f in &binary.functions {
        let hashes = staleflow::hashing::blended_hashes(f);
        for b in &f.blocks {
            out.push_str(&format!(
                "{} {} {:016x}\n",
                f.name,
                b.id,
                hashes[&b.id].packed()
            ));
        }
    }
    print!("{out}");
    Ok(())
}

fn cmd_match(
    cfg_path: &Path,
    profile_path: &Path,
    report_path: &Path,
    g: &GlobalOpts,
) -> Result<(), CliError> {
    let binary = load_cfg(cfg_path)?;
    let profile = load_profile(profile_path)?;
    let (matches, discarded) = match_functions(&profile, &binary);
    let staleness = staleness_from(&profile, &matches, &discarded);

    let mut functions = Vec::with_capacity(matches.len());
    for m in &matches {
        let fp = profile
            .function(&m.profile_name)
            .expect("match names a profile function");
        let cfg = binary
            .function(&m.cfg_name)
            .expect("match names a cfg function");
        let mut levels: BTreeMap<&str, usize> = [
            ("entry-forced", 0),
            ("full", 0),
            ("loose", 0),
            ("strict", 0),
        ]
        .into_iter()
        .collect();
        for bm in match_blocks(fp, cfg) {
            *levels.get_mut(bm.level.as_str()).expect("known level") += 1;
        }
        functions.push(json!({
            "cfg": m.cfg_name,
            "exact": m.exact_profile,
            "kind": m.kind.as_str(),
            "levels": levels,
            "profile": m.profile_name,
        }));
    }
    let report = stamped(
        json!({
            "discarded": discarded,
            "functions": functions,
            "staleness": staleness,
        }),
        g,
    );
    write_json(report_path, &report)?;
    if !g.quiet {
        println!(
            "matched {} of {} profile functions ({} discarded), staleness {:.4}",
            matches.len(),
            profile.functions.len(),
            discarded.len(),
            staleness
        );
    }
    Ok(())
}

fn cmd_infer(
    cfg_path: &Path,
    profile_path: &Path,
    out_path: &Path,
    g: &GlobalOpts,
) -> Result<(), CliError> {
    let binary = load_cfg(cfg_path)?;
    let profile = load_profile(profile_path)?;
    let (inferred, warnings) = infer_profile(&profile, &binary, &g.params(), g.rebalance());
    emit_warnings(&warnings, g);
    write_file(out_path, &write_profile(&inferred))
}

fn cmd_eval(
    cfg_path: &Path,
    inferred_path: &Path,
    fresh_path: &Path,
    report_path: &Path,
    g: &GlobalOpts,
) -> Result<(), CliError> {
    let binary = load_cfg(cfg_path)?;
    let inferred = load_profile(inferred_path)?;
    let fresh = load_profile(fresh_path)?;
    let report = evaluate(&inferred, &fresh, &binary, staleness(&inferred, &binary));
    let value = serde_json::to_value(&report)
        .map_err(|e| CliError::Internal(format!("serializing report: {e}")))?;
    write_json(report_path, &stamped(value, g))?;
    if !g.quiet {
        println!(
            "edge_overlap {:.4}, tsp_score {:.4}",
            report.edge_overlap, report.tsp_score
        );
    }
    Ok(())
}

fn parse_kinds(arg: Option<&str>) -> Result<Vec<MutationKind>, CliError> {
    let Some(arg) = arg else {
        return Ok(MutationKind::ALL.to_vec());
    };
    let mut kinds = Vec::new();
    for tok in arg.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let kind = MutationKind::parse(tok).ok_or_else(|| {
            let valid: Vec<&str> = MutationKind::ALL.iter().map(|k| k.as_str()).collect();
            input(format!(
                "unknown mutation kind `{tok}` (valid: {})",
                valid.join(", ")
            ))
        })?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(input("at least one mutation kind is required"));
    }
    Ok(kinds)
}

fn parse_list<T: std::str::FromStr>(arg: &str, what: &str) -> Result<Vec<T>, CliError> {
    arg.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| input(format!("invalid {what} `{t}`")))
        })
        .collect()
}

fn cmd_simulate(
    seed: u64,
    functions: u32,
    mutation_rate: f64,
    kinds: Option<&str>,
    out_dir: &Path,
    g: &GlobalOpts,
) -> Result<(), CliError> {
    let gen = GenConfig {
        seed,
        n_functions: functions,
        ..GenConfig::default()
    };
    gen.validate().map_err(input)?;
    let m = MutationConfig {
        seed,
        rate: mutation_rate,
        kinds: parse_kinds(kinds)?,
    };
    m.validate().map_err(input)?;
    let scenario = make_scenario(&gen, &m)
        .map_err(|e| CliError::Internal(format!("simulating scenario: {e}")))?;
    write_scenario(out_dir, &scenario, &gen, &m)
        .map_err(|e| input(format!("{}: {e}", out_dir.display())))?;
    if !g.quiet {
        println!(
            "wrote scenario (seed {seed}, {} mutations) to {}",
            scenario.mutation_log.len(),
            out_dir.display()
        );
    }
    Ok(())
}

fn cmd_pipeline(
    cfg_path: &Path,
    profile_path: &Path,
    out_path: &Path,
    g: &GlobalOpts,
) -> Result<(), CliError> {
    let binary = load_cfg(cfg_path)?;
    let profile = load_profile(profile_path)?;
    let (out, summary, warnings) = run_pipeline(&profile, &binary, &g.params(), g.rebalance());
    emit_warnings(&warnings, g);
    write_file(out_path, &write_profile(&out))?;
    println!(
        "functions: {} total, {} exact, {} matched, {} discarded; staleness: {:.4}",
        summary.functions_total,
        summary.functions_exact,
        summary.functions_inferred,
        summary.functions_discarded,
        summary.staleness
    );
    Ok(())
}

fn bench_csv(rows: &[BenchCell]) -> String {
    let mut out = String::from(
        "seed,mutation_rate,staleness,overlap_stale_baseline,overlap_inferred,tsp_stale_baseline,tsp_inferred\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.seed,
            r.mutation_rate,
            r.staleness,
            r.overlap_stale_baseline,
            r.overlap_inferred,
            r.tsp_stale_baseline,
            r.tsp_inferred
        ));
    }
    out
}

fn cmd_bench(
    seeds: &str,
    rates: &str,
    functions: u32,
    kinds: Option<&str>,
    out_dir: &Path,
    timings: bool,
    g: &GlobalOpts,
) -> Result<(), CliError> {
    let seeds: Vec<u64> = parse_list(seeds, "seed")?;
    let rates: Vec<f64> = parse_list(rates, "rate")?;
    for &r in &rates {
        if !(0.0..=1.0).contains(&r) {
            return Err(input(format!("mutation rate {r} outside [0,1]")));
        }
    }
    let gen = GenConfig {
        n_functions: functions,
        ..GenConfig::default()
    };
    gen.validate().map_err(input)?;
    let kinds = parse_kinds(kinds)?;
    let rows = run_bench(
        &seeds,
        &rates,
        &gen,
        &kinds,
        &g.params(),
        g.rebalance(),
        timings,
    )
    .map_err(|e| CliError::Internal(format!("running bench: {e}")))?;

    std::fs::create_dir_all(out_dir).map_err(|e| input(format!("{}: {e}", out_dir.display())))?;
    let value = serde_json::to_value(&rows)
        .map_err(|e| CliError::Internal(format!("serializing bench rows: {e}")))?;
    write_json(
        &out_dir.join("bench.json"),
        &stamped(json!({ "cells": value }), g),
    )?;
    write_file(&out_dir.join("bench.csv"), &bench_csv(&rows))?;
    if !g.quiet {
        println!("wrote {} bench cells to {}", rows.len(), out_dir.display());
    }
    Ok(())
}
