//! The end-to-end transfer pipeline (match → infer → write) and the
//! scenario bench that measures its quality against synthetic ground truth.

use crate::cfg::BinaryCfg;
use crate::inference::{infer_opts, FlowFunction, InferenceParams};
use crate::matching::{
    assign_initial_counts, match_blocks, match_functions, staleness_from, FunctionMatch,
};
use crate::metrics::evaluate;
use crate::profile::{profile_from_execution, FunctionProfile, ProfileFile};
use crate::sim::{make_scenario, GenConfig, MutationConfig, MutationKind, SimError};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

/// Headline numbers for one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub functions_total: usize,
    pub functions_exact: usize,
    pub functions_inferred: usize,
    pub functions_discarded: usize,
    pub staleness: f64,
}

/// Matches blocks and runs flow inference for one function pair, producing
/// the complete inferred profile (zeros included: every edge is known).
fn infer_one(
    fp: &FunctionProfile,
    cfg: &crate::cfg::FunctionCfg,
    params: &InferenceParams,
    rebalance: bool,
) -> (FunctionProfile, Vec<String>) {
    let bm = match_blocks(fp, cfg);
    let counts = assign_initial_counts(&bm, fp, cfg);
    let ff = FlowFunction::from_cfg(cfg, &counts);
    let res = infer_opts(&ff, params, rebalance);
    let inferred = profile_from_execution(cfg, &res.vertex_flow, &res.edge_flow)
        .expect("inferred flow lies on the cfg");
    let warnings = res
        .warnings
        .into_iter()
        .map(|w| format!("{}: {w}", cfg.name))
        .collect();
    (inferred, warnings)
}

/// Transfers `profile` onto `binary`: exact functions pass through
/// unchanged, stale ones go through block matching and flow inference,
/// unmatched ones are dropped. The output keeps the input's function order
/// (minus drops) under the new binary's names; warnings carry per-function
/// notes from inference.
pub fn run_pipeline(
    profile: &ProfileFile,
    binary: &BinaryCfg,
    params: &InferenceParams,
    rebalance: bool,
) -> (ProfileFile, PipelineSummary, Vec<String>) {
    let (matches, discarded) = match_functions(profile, binary);
    let staleness = staleness_from(profile, &matches, &discarded);
    let match_of: BTreeMap<&str, &FunctionMatch> = matches
        .iter()
        .map(|m| (m.profile_name.as_str(), m))
        .collect();

    let results: Vec<Option<(FunctionProfile, Vec<String>)>> = profile
        .functions
        .par_iter()
        .map(|fp| {
            let m = match_of.get(fp.name.as_str())?;
            let cfg = binary
                .function(&m.cfg_name)
                .expect("match names a cfg function");
            if m.exact_profile {
                let mut out = fp.clone();
                out.name = m.cfg_name.clone();
                return Some((out, Vec::new()));
            }
            Some(infer_one(fp, cfg, params, rebalance))
        })
        .collect();

    let mut functions = Vec::with_capacity(matches.len());
    let mut warnings = Vec::new();
    for r in results.into_iter().flatten() {
        functions.push(r.0);
        warnings.extend(r.1);
    }

    let functions_exact = matches.iter().filter(|m| m.exact_profile).count();
    let summary = PipelineSummary {
        functions_total: profile.functions.len(),
        functions_exact,
        functions_inferred: matches.len() - functions_exact,
        functions_discarded: discarded.len(),
        staleness,
    };
    (ProfileFile { functions }, summary, warnings)
}

/// Runs flow inference on every matched function with no exactness bypass:
/// even exact profiles are re-derived as flows, which repairs any
/// conservation violations the samples carry. Unmatched functions drop.
pub fn infer_profile(
    profile: &ProfileFile,
    binary: &BinaryCfg,
    params: &InferenceParams,
    rebalance: bool,
) -> (ProfileFile, Vec<String>) {
    let (matches, _) = match_functions(profile, binary);
    let match_of: BTreeMap<&str, &FunctionMatch> = matches
        .iter()
        .map(|m| (m.profile_name.as_str(), m))
        .collect();
    let results: Vec<Option<(FunctionProfile, Vec<String>)>> = profile
        .functions
        .par_iter()
        .map(|fp| {
            let m = match_of.get(fp.name.as_str())?;
            let cfg = binary
                .function(&m.cfg_name)
                .expect("match names a cfg function");
            Some(infer_one(fp, cfg, params, rebalance))
        })
        .collect();
    let mut functions = Vec::with_capacity(matches.len());
    let mut warnings = Vec::new();
    for r in results.into_iter().flatten() {
        functions.push(r.0);
        warnings.extend(r.1);
    }
    (ProfileFile { functions }, warnings)
}

/// The discard strategy: keep only functions whose profile applies exactly,
/// drop everything stale. This is the baseline the pipeline is measured
/// against.
pub fn exact_only_profile(profile: &ProfileFile, binary: &BinaryCfg) -> ProfileFile {
    let (matches, _) = match_functions(profile, binary);
    let exact: BTreeMap<&str, &str> = matches
        .iter()
        .filter(|m| m.exact_profile)
        .map(|m| (m.profile_name.as_str(), m.cfg_name.as_str()))
        .collect();
    let functions = profile
        .functions
        .iter()
        .filter_map(|fp| {
            exact.get(fp.name.as_str()).map(|&cfg_name| {
                let mut out = fp.clone();
                out.name = cfg_name.to_string();
                out
            })
        })
        .collect();
    ProfileFile { functions }
}

/// One bench row: quality of the stale-discard baseline versus full
/// inference on one (seed, mutation rate) scenario. `runtime_ms` buckets
/// inference wall time by function size and is only populated on request
/// (timing is inherently nondeterministic).
#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub seed: u64,
    pub mutation_rate: f64,
    pub staleness: f64,
    pub overlap_stale_baseline: f64,
    pub overlap_inferred: f64,
    pub tsp_stale_baseline: f64,
    pub tsp_inferred: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<BTreeMap<String, u64>>,
}

fn size_bucket(nblocks: usize) -> &'static str {
    match nblocks {
        0..=10 => "1-10",
        11..=50 => "11-50",
        51..=200 => "51-200",
        _ => "201+",
    }
}

/// Times one full inference pass per stale function, grouped by function
/// size bucket, in milliseconds.
fn bucketed_runtimes(
    profile: &ProfileFile,
    binary: &BinaryCfg,
    params: &InferenceParams,
    rebalance: bool,
) -> BTreeMap<String, u64> {
    let mut micros: BTreeMap<&'static str, u128> =
        [("1-10", 0), ("11-50", 0), ("51-200", 0), ("201+", 0)]
            .into_iter()
            .collect();
    let (matches, _) = match_functions(profile, binary);
    for m in matches.iter().filter(|m| !m.exact_profile) {
        let fp = profile.function(&m.profile_name).expect("matched profile");
        let cfg = binary.function(&m.cfg_name).expect("matched cfg");
        let start = Instant::now();
        let bm = match_blocks(fp, cfg);
        let counts = assign_initial_counts(&bm, fp, cfg);
        let ff = FlowFunction::from_cfg(cfg, &counts);
        let _ = infer_opts(&ff, params, rebalance);
        *micros.get_mut(size_bucket(cfg.blocks.len())).unwrap() += start.elapsed().as_micros();
    }
    micros
        .into_iter()
        .map(|(k, us)| (k.to_string(), (us / 1000) as u64))
        .collect()
}

/// Runs one scenario per (seed, rate) pair and scores the discard baseline
/// against full inference, both evaluated on the fresh ground-truth profile.
/// Rows come out in input order, seeds outermost.
#[allow(clippy::too_many_arguments)]
pub fn run_bench(
    seeds: &[u64],
    rates: &[f64],
    gen_base: &GenConfig,
    kinds: &[MutationKind],
    params: &InferenceParams,
    rebalance: bool,
    timings: bool,
) -> Result<Vec<BenchCell>, SimError> {
    let mut rows = Vec::with_capacity(seeds.len() * rates.len());
    for &seed in seeds {
        for &rate in rates {
            let gen = GenConfig {
                seed,
                ..gen_base.clone()
            };
            let m = MutationConfig {
                seed,
                rate,
                kinds: kinds.to_vec(),
            };
            let scenario = make_scenario(&gen, &m)?;
            let (inferred, summary, _) = run_pipeline(
                &scenario.old_profile,
                &scenario.new_binary,
                params,
                rebalance,
            );
            let baseline = exact_only_profile(&scenario.old_profile, &scenario.new_binary);
            let eval_b = evaluate(
                &baseline,
                &scenario.fresh_profile,
                &scenario.new_binary,
                summary.staleness,
            );
            let eval_i = evaluate(
                &inferred,
                &scenario.fresh_profile,
                &scenario.new_binary,
                summary.staleness,
            );
            let runtime_ms = timings.then(|| {
                bucketed_runtimes(
                    &scenario.old_profile,
                    &scenario.new_binary,
                    params,
                    rebalance,
                )
            });
            rows.push(BenchCell {
                seed,
                mutation_rate: rate,
                staleness: summary.staleness,
                overlap_stale_baseline: eval_b.edge_overlap,
                overlap_inferred: eval_i.edge_overlap,
                tsp_stale_baseline: eval_b.tsp_score,
                tsp_inferred: eval_i.tsp_score,
                runtime_ms,
            });
        }
    }
    Ok(rows)
}
