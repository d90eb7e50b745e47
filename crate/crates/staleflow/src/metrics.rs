//! Profile quality metrics: edge overlap against a ground-truth profile and
//! the tsp score, which measures how well a profile drives basic-block
//! reordering (summed fallthrough counts under the true profile).

use crate::cfg::{BinaryCfg, FunctionCfg};
use crate::profile::{FunctionProfile, ProfileFile};
use serde::Serialize;
use std::collections::BTreeMap;

/// Similarity of two edge-count maps as the summed minima of their
/// normalized masses. Both totals zero → 1.0; exactly one zero → 0.0.
/// Symmetric and invariant under scaling either side.
pub fn edge_overlap(f: &BTreeMap<(u32, u32), u64>, gt: &BTreeMap<(u32, u32), u64>) -> f64 {
    let tf: u128 = f.values().map(|&v| v as u128).sum();
    let tg: u128 = gt.values().map(|&v| v as u128).sum();
    match (tf == 0, tg == 0) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    let mut acc = 0.0_f64;
    for (e, &fv) in f {
        if let Some(&gv) = gt.get(e) {
            let a = fv as f64 / tf as f64;
            let b = gv as f64 / tg as f64;
            acc += a.min(b);
        }
    }
    acc
}

/// Greedy chain-merging block layout: every block starts as a singleton
/// chain; edges are processed by descending count (ties by ascending
/// (src,dst)); an edge merges two chains when its source is a chain tail and
/// its destination the head of a different chain. The entry's chain comes
/// first, the rest follow by minimal block id. Zero-count edges never merge.
pub fn reorder_blocks(cfg: &FunctionCfg, counts: &BTreeMap<(u32, u32), u64>) -> Vec<u32> {
    let ids: Vec<u32> = cfg.blocks.iter().map(|b| b.id).collect();
    let edge_set: std::collections::BTreeSet<(u32, u32)> = cfg.edges().into_iter().collect();

    let mut order: Vec<((u32, u32), u64)> = counts
        .iter()
        .filter(|(e, &c)| c > 0 && edge_set.contains(e))
        .map(|(&e, &c)| (e, c))
        .collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut chains: Vec<Vec<u32>> = ids.iter().map(|&b| vec![b]).collect();
    let mut chain_of: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &b)| (b, i)).collect();

    for ((u, v), _) in order {
        let (cu, cv) = match (chain_of.get(&u), chain_of.get(&v)) {
            (Some(&a), Some(&b)) => (a, b),
            _ => continue,
        };
        if cu == cv {
            continue;
        }
        let tail_ok = chains[cu].last() == Some(&u);
        let head_ok = chains[cv].first() == Some(&v);
        if !(tail_ok && head_ok) {
            continue;
        }
        let moved = std::mem::take(&mut chains[cv]);
        for &b in &moved {
            chain_of.insert(b, cu);
        }
        chains[cu].extend(moved);
    }

    let mut rest: Vec<&Vec<u32>> = chains
        .iter()
        .filter(|c| !c.is_empty() && !c.contains(&cfg.entry))
        .collect();
    rest.sort_by_key(|c| c.iter().min().copied());

    let mut out = Vec::with_capacity(ids.len());
    if let Some(&ei) = chain_of.get(&cfg.entry) {
        out.extend_from_slice(&chains[ei]);
    }
    for c in rest {
        out.extend_from_slice(c);
    }
    out
}

/// Sum of counts over consecutive pairs of the layout — the mass that falls
/// through rather than jumps.
pub fn tsp_value(order: &[u32], counts: &BTreeMap<(u32, u32), u64>) -> u64 {
    order
        .windows(2)
        .map(|w| counts.get(&(w[0], w[1])).copied().unwrap_or(0))
        .sum()
}

/// A tsp score before and after clamping: the heuristic layout is not
/// optimal, so the raw ratio can exceed 1 when the evaluated profile happens
/// to produce a luckier layout than the ground truth's own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TspScore {
    pub score: f64,
    pub raw: f64,
}

/// How well the profile `f` drives reordering, judged by the ground truth:
/// the fallthrough mass of f's layout over that of gt's own layout. A zero
/// denominator scores 1.0 (no mass to place).
pub fn tsp_score(
    f: &BTreeMap<(u32, u32), u64>,
    gt: &BTreeMap<(u32, u32), u64>,
    cfg: &FunctionCfg,
) -> TspScore {
    let num = tsp_value(&reorder_blocks(cfg, f), gt);
    let den = tsp_value(&reorder_blocks(cfg, gt), gt);
    if den == 0 {
        return TspScore {
            score: 1.0,
            raw: 1.0,
        };
    }
    let raw = num as f64 / den as f64;
    TspScore {
        score: raw.min(1.0),
        raw,
    }
}

/// Per-function metric scores; `weight` is the fresh profile's sample mass
/// for the function (total block exec).
#[derive(Debug, Clone, Serialize)]
pub struct FunctionScore {
    pub name: String,
    pub weight: u64,
    pub edge_overlap: f64,
    pub tsp_score: f64,
    pub tsp_raw: f64,
}

/// Binary-level quality report. The headline values are exec-weighted means
/// over functions; unweighted means are included because either aggregation
/// is defensible.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub edge_overlap: f64,
    pub edge_overlap_unweighted: f64,
    pub tsp_score: f64,
    pub tsp_score_unweighted: f64,
    pub staleness: f64,
    pub functions: Vec<FunctionScore>,
}

/// Edge counts of one function profile as a map keyed by (src, dst).
pub fn profile_edge_counts(fp: &FunctionProfile) -> BTreeMap<(u32, u32), u64> {
    let mut out = BTreeMap::new();
    for b in &fp.blocks {
        for s in &b.succ {
            out.insert((b.bid, s.bid), s.cnt);
        }
    }
    out
}

/// Scores `inferred` against the ground-truth `fresh` profile over every
/// function of `binary`. A function missing from either profile reads as
/// all-zero counts on that side. `staleness` is the matcher's measure for
/// the stale input and is carried through for reporting.
pub fn evaluate(
    inferred: &ProfileFile,
    fresh: &ProfileFile,
    binary: &BinaryCfg,
    staleness: f64,
) -> MetricsReport {
    let by_name = |p: &ProfileFile| -> BTreeMap<String, usize> {
        p.functions
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i))
            .collect()
    };
    let inf_idx = by_name(inferred);
    let fresh_idx = by_name(fresh);

    let mut functions = Vec::with_capacity(binary.functions.len());
    for cfg in &binary.functions {
        let f_counts = inf_idx
            .get(&cfg.name)
            .map(|&i| profile_edge_counts(&inferred.functions[i]))
            .unwrap_or_default();
        let gt_counts = fresh_idx
            .get(&cfg.name)
            .map(|&i| profile_edge_counts(&fresh.functions[i]))
            .unwrap_or_default();
        let weight = fresh_idx
            .get(&cfg.name)
            .map(|&i| fresh.functions[i].total_exec())
            .unwrap_or(0);
        let overlap = edge_overlap(&f_counts, &gt_counts);
        let tsp = tsp_score(&f_counts, &gt_counts, cfg);
        functions.push(FunctionScore {
            name: cfg.name.clone(),
            weight,
            edge_overlap: overlap,
            tsp_score: tsp.score,
            tsp_raw: tsp.raw,
        });
    }

    let unweighted = |get: &dyn Fn(&FunctionScore) -> f64| -> f64 {
        if functions.is_empty() {
            1.0
        } else {
            functions.iter().map(get).sum::<f64>() / functions.len() as f64
        }
    };
    let weighted = |get: &dyn Fn(&FunctionScore) -> f64| -> f64 {
        let total: u128 = functions.iter().map(|f| f.weight as u128).sum();
        if total == 0 {
            unweighted(get)
        } else {
            functions
                .iter()
                .map(|f| get(f) * (f.weight as f64 / total as f64))
                .sum()
        }
    };

    MetricsReport {
        edge_overlap: weighted(&|f: &FunctionScore| f.edge_overlap),
        edge_overlap_unweighted: unweighted(&|f: &FunctionScore| f.edge_overlap),
        tsp_score: weighted(&|f: &FunctionScore| f.tsp_score),
        tsp_score_unweighted: unweighted(&|f: &FunctionScore| f.tsp_score),
        staleness,
        functions,
    }
}
