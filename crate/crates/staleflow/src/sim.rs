//! Synthetic ground truth for evaluating profile transfer: generates
//! realistic reducible CFGs, simulates execution profiles by random walks,
//! and applies controlled mutations emulating the code drift between two
//! releases of a binary. The OLD binary is produced by mutating the new one,
//! so the new side's distribution matches the generator exactly and the
//! fresh profile doubles as ground truth.

use crate::cfg::{BasicBlock, BinaryCfg, FunctionCfg, InstrKind, Instruction};
use crate::hashing::hash64;
use crate::profile::{profile_from_execution, write_profile, ProfileFile};
use crate::rng::SplitMix64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

/// Hard cap on the length of one simulated walk; walks trapped in loops are
/// abandoned at this many block visits (their partial counts are kept, as a
/// real sampling profiler would keep them).
pub const WALK_STEP_CAP: u32 = 100_000;

const STREAM_TABLES: u64 = 1 << 40;
const STREAM_OLD_WALKS: u64 = (1 << 40) + 1;
const STREAM_FRESH_WALKS: u64 = (1 << 40) + 2;

/// Configuration for synthetic binary generation.
#[derive(Debug, Clone, Serialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n_functions: u32,
    pub blocks_min: u32,
    pub blocks_max: u32,
    pub loop_probability: f64,
    pub branch_probability: f64,
    pub opcode_pool_size: u32,
    /// Simulated executions per function.
    pub walks: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 1,
            n_functions: 200,
            blocks_min: 3,
            blocks_max: 30,
            loop_probability: 0.25,
            branch_probability: 0.7,
            opcode_pool_size: 24,
            walks: 100,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_functions == 0 {
            return Err("n_functions must be positive".into());
        }
        if self.blocks_min == 0 || self.blocks_min > self.blocks_max {
            return Err("blocks range must be non-empty and start at 1 or above".into());
        }
        if self.opcode_pool_size == 0 {
            return Err("opcode_pool_size must be positive".into());
        }
        if self.walks == 0 {
            return Err("walks must be positive".into());
        }
        for (name, p) in [
            ("loop_probability", self.loop_probability),
            ("branch_probability", self.branch_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0,1]"));
            }
        }
        Ok(())
    }
}

/// The drift model applied to derive the old binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    OperandChange,
    OpcodeChange,
    NopInsert,
    BlockInsert,
    BlockDelete,
    BranchRetarget,
    InlineDuplicate,
}

impl MutationKind {
    pub const ALL: [MutationKind; 7] = [
        MutationKind::OperandChange,
        MutationKind::OpcodeChange,
        MutationKind::NopInsert,
        MutationKind::BlockInsert,
        MutationKind::BlockDelete,
        MutationKind::BranchRetarget,
        MutationKind::InlineDuplicate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MutationKind::OperandChange => "operand-change",
            MutationKind::OpcodeChange => "opcode-change",
            MutationKind::NopInsert => "nop-insert",
            MutationKind::BlockInsert => "block-insert",
            MutationKind::BlockDelete => "block-delete",
            MutationKind::BranchRetarget => "branch-retarget",
            MutationKind::InlineDuplicate => "inline-duplicate",
        }
    }

    pub fn parse(s: &str) -> Option<MutationKind> {
        MutationKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MutationConfig {
    pub seed: u64,
    pub rate: f64,
    pub kinds: Vec<MutationKind>,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            seed: 1,
            rate: 0.1,
            kinds: MutationKind::ALL.to_vec(),
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err("mutation rate must lie in [0,1]".into());
        }
        if self.kinds.is_empty() {
            return Err("at least one mutation kind must be enabled".into());
        }
        Ok(())
    }
}

/// One applied mutation, for the scenario log.
#[derive(Debug, Clone, Serialize)]
pub struct MutationRecord {
    pub function: String,
    pub block: u32,
    pub kind: MutationKind,
}

/// Per-block successor probabilities for every block with two or more
/// successors, keyed by (function name, block id).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTables {
    pub probs: BTreeMap<(String, u32), Vec<f64>>,
}

#[derive(Debug)]
pub enum SimError {
    MissingTable { function: String, block: u32 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::MissingTable { function, block } => write!(
                f,
                "branch table has no entry for block {block} of function {function}"
            ),
        }
    }
}

impl std::error::Error for SimError {}

struct FnBuilder<'a> {
    cfg: &'a GenConfig,
    rng: SplitMix64,
    blocks: Vec<BasicBlock>,
}

impl FnBuilder<'_> {
    fn new_block(&mut self) -> u32 {
        let id = self.blocks.len() as u32;
        self.blocks.push(BasicBlock {
            id,
            offset: 0,
            instructions: Vec::new(),
            successors: Vec::new(),
        });
        id
    }

    fn connect(&mut self, from: u32, to: u32) {
        self.blocks[from as usize].successors.push(to);
    }

    /// Builds a single-entry single-exit region of exactly `budget` blocks
    /// by recursive composition of sequence, if-then, if-then-else, and
    /// while shapes; returns (entry, exit) handles. The entry is always the
    /// first block created, so the function entry ends up with id 0.
    fn region(&mut self, budget: u32) -> (u32, u32) {
        if budget <= 1 {
            let b = self.new_block();
            return (b, b);
        }
        if self.rng.chance(self.cfg.loop_probability) {
            let header = self.new_block();
            let (body_in, body_out) = self.region(budget - 1);
            self.connect(header, body_in);
            self.connect(body_out, header);
            return (header, header);
        }
        if budget >= 3 && self.rng.chance(self.cfg.branch_probability) {
            if budget >= 4 && self.rng.chance(0.5) {
                let cond = self.new_block();
                let inner = budget - 2;
                let then_budget = 1 + self.rng.next_below((inner - 1) as u64) as u32;
                let (t_in, t_out) = self.region(then_budget);
                let (e_in, e_out) = self.region(inner - then_budget);
                let join = self.new_block();
                self.connect(cond, t_in);
                self.connect(cond, e_in);
                self.connect(t_out, join);
                self.connect(e_out, join);
                return (cond, join);
            }
            let cond = self.new_block();
            let (t_in, t_out) = self.region(budget - 2);
            let join = self.new_block();
            self.connect(cond, t_in);
            self.connect(cond, join);
            self.connect(t_out, join);
            return (cond, join);
        }
        let first = 1 + self.rng.next_below((budget - 1) as u64) as u32;
        let (a_in, a_out) = self.region(first);
        let (b_in, b_out) = self.region(budget - first);
        self.connect(a_out, b_in);
        (a_in, b_out)
    }

    fn fill_instructions(&mut self) {
        for i in 0..self.blocks.len() {
            let mut instrs = Vec::new();
            if self.rng.chance(0.05) {
                instrs.push(Instruction {
                    kind: InstrKind::Pseudo,
                    opcode: "phi".to_string(),
                    operands: vec![format!("r{}", self.rng.next_below(16))],
                });
            }
            let body = 1 + self.rng.next_below(4);
            for _ in 0..body {
                if self.rng.chance(0.08) {
                    instrs.push(Instruction {
                        kind: InstrKind::Call,
                        opcode: "call".to_string(),
                        operands: vec![format!("ext{}", self.rng.next_below(8))],
                    });
                } else {
                    let opcode = format!(
                        "op{}",
                        self.rng.next_below(self.cfg.opcode_pool_size as u64)
                    );
                    let n_ops = 1 + self.rng.next_below(2);
                    let operands = (0..n_ops)
                        .map(|_| {
                            if self.rng.chance(0.3) {
                                format!("${}", self.rng.next_below(128))
                            } else {
                                format!("r{}", self.rng.next_below(16))
                            }
                        })
                        .collect();
                    instrs.push(Instruction {
                        kind: InstrKind::Normal,
                        opcode,
                        operands,
                    });
                }
            }
            match self.blocks[i].successors.len() {
                0 => instrs.push(Instruction {
                    kind: InstrKind::Return,
                    opcode: "ret".to_string(),
                    operands: Vec::new(),
                }),
                1 => {
                    if self.rng.chance(0.5) {
                        instrs.push(Instruction {
                            kind: InstrKind::UncondBranch,
                            opcode: "jmp".to_string(),
                            operands: Vec::new(),
                        });
                    }
                }
                _ => instrs.push(Instruction {
                    kind: InstrKind::CondBranch,
                    opcode: "br".to_string(),
                    operands: vec![format!("r{}", self.rng.next_below(16))],
                }),
            }
            self.blocks[i].instructions = instrs;
        }
    }
}

/// Recomputes block offsets as the cumulative instruction count × 4 in
/// block-list order.
pub fn recompute_offsets(f: &mut FunctionCfg) {
    let mut count: u64 = 0;
    for b in &mut f.blocks {
        b.offset = count * 4;
        count += b.instructions.len() as u64;
    }
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    SplitMix64::stream(seed, stream).next_u64()
}

/// Deterministically derives successor probabilities for every branching
/// block. Probabilities depend only on (seed, function name, block id,
/// successor count), so blocks shared between two revisions of a binary
/// behave identically.
pub fn branch_tables(binary: &BinaryCfg, seed: u64) -> BranchTables {
    let mut probs = BTreeMap::new();
    for f in &binary.functions {
        for b in &f.blocks {
            let k = b.successors.len();
            if k < 2 {
                continue;
            }
            let mut key = Vec::with_capacity(f.name.len() + 24);
            key.extend_from_slice(&seed.to_le_bytes());
            key.extend_from_slice(f.name.as_bytes());
            key.push(0);
            key.extend_from_slice(&b.id.to_le_bytes());
            key.extend_from_slice(&(k as u32).to_le_bytes());
            let mut r = SplitMix64::new(hash64(&key));
            let weights: Vec<f64> = (0..k).map(|_| 0.05 + 0.9 * r.next_f64()).collect();
            let total: f64 = weights.iter().sum();
            probs.insert(
                (f.name.clone(), b.id),
                weights.into_iter().map(|w| w / total).collect(),
            );
        }
    }
    BranchTables { probs }
}

/// Generates a synthetic binary of structured, fully reachable CFGs together
/// with its branch-probability tables. Deterministic in the seed; each
/// function draws from its own derived stream.
pub fn generate_binary(cfg: &GenConfig) -> (BinaryCfg, BranchTables) {
    let mut functions = Vec::with_capacity(cfg.n_functions as usize);
    for i in 0..cfg.n_functions {
        let mut rng = SplitMix64::stream(cfg.seed, i as u64);
        let span = (cfg.blocks_max - cfg.blocks_min + 1) as u64;
        let budget = cfg.blocks_min + rng.next_below(span) as u32;
        let mut b = FnBuilder {
            cfg,
            rng,
            blocks: Vec::with_capacity(budget as usize),
        };
        let entry = if budget == 1 {
            b.new_block()
        } else {
            // Close the root region with a dedicated exit block so every
            // function terminates even when the root shape is a loop.
            let (entry, exit) = b.region(budget - 1);
            let last = b.new_block();
            b.connect(exit, last);
            entry
        };
        b.fill_instructions();
        let mut f = FunctionCfg {
            name: format!("fn_{i:05}"),
            entry,
            blocks: b.blocks,
        };
        recompute_offsets(&mut f);
        functions.push(f);
    }
    let binary = BinaryCfg { functions };
    let tables = branch_tables(&binary, derived_seed(cfg.seed, STREAM_TABLES));
    (binary, tables)
}

/// Simulates `walks` executions of every function: random walks from the
/// entry choosing successors by the branch tables, accumulating block and
/// taken-edge counts. Walks are capped at [`WALK_STEP_CAP`] block visits.
pub fn simulate_profile(
    binary: &BinaryCfg,
    tables: &BranchTables,
    walks: u32,
    seed: u64,
) -> Result<ProfileFile, SimError> {
    let mut functions = Vec::with_capacity(binary.functions.len());
    for (fi, f) in binary.functions.iter().enumerate() {
        let mut rng = SplitMix64::stream(seed, fi as u64);
        let index: BTreeMap<u32, usize> = f
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect();
        let succ: Vec<&[u32]> = f.blocks.iter().map(|b| b.successors.as_slice()).collect();
        let mut probs: Vec<Option<&[f64]>> = vec![None; f.blocks.len()];
        for (i, b) in f.blocks.iter().enumerate() {
            if b.successors.len() >= 2 {
                let p = tables
                    .probs
                    .get(&(f.name.clone(), b.id))
                    .filter(|p| p.len() == b.successors.len())
                    .ok_or_else(|| SimError::MissingTable {
                        function: f.name.clone(),
                        block: b.id,
                    })?;
                probs[i] = Some(p.as_slice());
            }
        }

        let mut block_counts: Vec<u64> = vec![0; f.blocks.len()];
        let mut edge_counts: Vec<Vec<u64>> = f
            .blocks
            .iter()
            .map(|b| vec![0; b.successors.len()])
            .collect();
        let entry_idx = index[&f.entry];
        for _ in 0..walks {
            let mut cur = entry_idx;
            for _ in 0..WALK_STEP_CAP {
                block_counts[cur] += 1;
                let outs = succ[cur];
                let si = match outs.len() {
                    0 => break,
                    1 => 0,
                    _ => {
                        let table = probs[cur].expect("branching block has a table");
                        let roll = rng.next_f64();
                        let mut acc = 0.0;
                        let mut chosen = outs.len() - 1;
                        for (i, p) in table.iter().enumerate() {
                            acc += p;
                            if roll < acc {
                                chosen = i;
                                break;
                            }
                        }
                        chosen
                    }
                };
                edge_counts[cur][si] += 1;
                cur = index[&outs[si]];
            }
        }

        let blocks: BTreeMap<u32, u64> = f
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, block_counts[i]))
            .collect();
        let mut jumps: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for (i, b) in f.blocks.iter().enumerate() {
            for (si, &s) in b.successors.iter().enumerate() {
                if edge_counts[i][si] > 0 {
                    jumps.insert((b.id, s), edge_counts[i][si]);
                }
            }
        }
        let fp = profile_from_execution(f, &blocks, &jumps)
            .expect("walk counts always reference real blocks and edges");
        functions.push(fp);
    }
    Ok(ProfileFile { functions })
}

/// Applies the drift model: visits every block of every function and, with
/// probability `rate`, applies one enabled mutation chosen uniformly.
/// Deterministic in the config seed; the output always validates.
pub fn mutate(binary: &BinaryCfg, m: &MutationConfig) -> (BinaryCfg, Vec<MutationRecord>) {
    let mut out = binary.clone();
    let mut log = Vec::new();
    for (fi, f) in out.functions.iter_mut().enumerate() {
        let mut rng = SplitMix64::stream(m.seed, fi as u64);
        let original_ids: Vec<u32> = f.blocks.iter().map(|b| b.id).collect();
        for bid in original_ids {
            if !rng.chance(m.rate) {
                continue;
            }
            let kind = m.kinds[rng.next_below(m.kinds.len() as u64) as usize];
            if apply_mutation(f, bid, kind, &mut rng, binary, fi) {
                log.push(MutationRecord {
                    function: f.name.clone(),
                    block: bid,
                    kind,
                });
            }
        }
        recompute_offsets(f);
        debug_assert!(
            f.validate().is_empty(),
            "mutated function must stay valid: {:?}",
            f.validate()
        );
    }
    (out, log)
}

fn apply_mutation(
    f: &mut FunctionCfg,
    bid: u32,
    kind: MutationKind,
    rng: &mut SplitMix64,
    donors: &BinaryCfg,
    self_index: usize,
) -> bool {
    let Some(pos) = f.blocks.iter().position(|b| b.id == bid) else {
        return false; // removed by an earlier mutation
    };
    match kind {
        MutationKind::OperandChange => {
            let b = &mut f.blocks[pos];
            let with_ops: Vec<usize> = b
                .instructions
                .iter()
                .enumerate()
                .filter(|(_, ins)| !ins.operands.is_empty())
                .map(|(i, _)| i)
                .collect();
            if with_ops.is_empty() {
                return false;
            }
            let ii = with_ops[rng.next_below(with_ops.len() as u64) as usize];
            let ins = &mut b.instructions[ii];
            let oi = rng.next_below(ins.operands.len() as u64) as usize;
            ins.operands[oi] = format!("q{}", rng.next_below(1 << 16));
            true
        }
        MutationKind::OpcodeChange => {
            let b = &mut f.blocks[pos];
            let normals: Vec<usize> = b
                .instructions
                .iter()
                .enumerate()
                .filter(|(_, ins)| ins.kind == InstrKind::Normal)
                .map(|(i, _)| i)
                .collect();
            if normals.is_empty() {
                return false;
            }
            let ii = normals[rng.next_below(normals.len() as u64) as usize];
            let ins = &mut b.instructions[ii];
            let mut opcode = format!("op{}", rng.next_below(32));
            if opcode == ins.opcode {
                opcode.push('x');
            }
            ins.opcode = opcode;
            true
        }
        MutationKind::NopInsert => {
            let b = &mut f.blocks[pos];
            let at = rng.next_below(b.instructions.len() as u64 + 1) as usize;
            b.instructions.insert(
                at,
                Instruction {
                    kind: InstrKind::Nop,
                    opcode: "nop".to_string(),
                    operands: Vec::new(),
                },
            );
            true
        }
        MutationKind::BlockInsert => {
            let len = f.blocks[pos].instructions.len();
            if len < 2 {
                return false;
            }
            let split = 1 + rng.next_below((len - 1) as u64) as usize;
            let new_id = f.blocks.iter().map(|b| b.id).max().unwrap_or(0) + 1;
            let b = &mut f.blocks[pos];
            let tail = b.instructions.split_off(split);
            let successors = std::mem::replace(&mut b.successors, vec![new_id]);
            f.blocks.insert(
                pos + 1,
                BasicBlock {
                    id: new_id,
                    offset: 0,
                    instructions: tail,
                    successors,
                },
            );
            true
        }
        MutationKind::BlockDelete => {
            if bid == f.entry || f.blocks.len() == 1 {
                return false;
            }
            let bridged: Vec<u32> = f.blocks[pos]
                .successors
                .iter()
                .copied()
                .filter(|&s| s != bid)
                .collect();
            f.blocks.remove(pos);
            for p in &mut f.blocks {
                if !p.successors.contains(&bid) {
                    continue;
                }
                let mut rewired = Vec::with_capacity(p.successors.len() + bridged.len());
                for &s in &p.successors {
                    if s == bid {
                        for &t in &bridged {
                            if !rewired.contains(&t) {
                                rewired.push(t);
                            }
                        }
                    } else if !rewired.contains(&s) {
                        rewired.push(s);
                    }
                }
                p.successors = rewired;
            }
            true
        }
        MutationKind::BranchRetarget => {
            if f.blocks[pos].successors.is_empty() {
                return false;
            }
            let si = rng.next_below(f.blocks[pos].successors.len() as u64) as usize;
            let reachable: Vec<u32> = f.reachable_blocks().into_iter().collect();
            for _ in 0..8 {
                let t = reachable[rng.next_below(reachable.len() as u64) as usize];
                let succ = &mut f.blocks[pos].successors;
                if t != succ[si] && !succ.contains(&t) {
                    succ[si] = t;
                    return true;
                }
            }
            false
        }
        MutationKind::InlineDuplicate => {
            if !f.blocks[pos]
                .instructions
                .iter()
                .any(|ins| ins.kind == InstrKind::Call)
            {
                return false;
            }
            let n = donors.functions.len();
            if n < 2 {
                return false;
            }
            let donor_idx = (self_index + 1 + rng.next_below((n - 1) as u64) as usize) % n;
            let donor = &donors.functions[donor_idx];
            let start = rng.next_below(donor.blocks.len() as u64) as usize;
            let maxlen = (donor.blocks.len() - start).min(3) as u64;
            let len = 1 + rng.next_below(maxlen) as usize;
            let slice = &donor.blocks[start..start + len];

            let base = f.blocks.iter().map(|b| b.id).max().unwrap_or(0) + 1;
            let id_map: BTreeMap<u32, u32> = slice
                .iter()
                .enumerate()
                .map(|(i, b)| (b.id, base + i as u32))
                .collect();
            let call_succ = f.blocks[pos].successors.clone();
            let mut copies: Vec<BasicBlock> = slice
                .iter()
                .map(|b| BasicBlock {
                    id: id_map[&b.id],
                    offset: 0,
                    instructions: b.instructions.clone(),
                    successors: b
                        .successors
                        .iter()
                        .filter_map(|s| id_map.get(s).copied())
                        .collect(),
                })
                .collect();
            // The copied region rejoins the caller's original control flow
            // where its own edges left the copied window.
            if let Some(last) = copies.last_mut() {
                if last.successors.is_empty() {
                    last.successors = call_succ;
                }
            }
            let first_id = copies[0].id;
            f.blocks[pos].successors.push(first_id);
            f.blocks.extend(copies);
            true
        }
    }
}

/// A complete synthetic evolution scenario: the current binary with its
/// ground-truth fresh profile, and the mutated older binary with the stale
/// profile collected on it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub new_binary: BinaryCfg,
    pub old_binary: BinaryCfg,
    pub new_tables: BranchTables,
    pub old_tables: BranchTables,
    pub old_profile: ProfileFile,
    pub fresh_profile: ProfileFile,
    pub mutation_log: Vec<MutationRecord>,
}

/// Builds a scenario: generate the new binary, mutate it backwards in time
/// into the old one, and simulate a profile on each side. The two profile
/// runs use the same branch behavior on unchanged blocks but distinct walk
/// seeds.
pub fn make_scenario(gen: &GenConfig, m: &MutationConfig) -> Result<Scenario, SimError> {
    let (new_binary, new_tables) = generate_binary(gen);
    let (old_binary, mutation_log) = mutate(&new_binary, m);
    let old_tables = branch_tables(&old_binary, derived_seed(gen.seed, STREAM_TABLES));
    let old_profile = simulate_profile(
        &old_binary,
        &old_tables,
        gen.walks,
        derived_seed(gen.seed, STREAM_OLD_WALKS),
    )?;
    let fresh_profile = simulate_profile(
        &new_binary,
        &new_tables,
        gen.walks,
        derived_seed(gen.seed, STREAM_FRESH_WALKS),
    )?;
    Ok(Scenario {
        new_binary,
        old_binary,
        new_tables,
        old_tables,
        old_profile,
        fresh_profile,
        mutation_log,
    })
}

/// Writes a scenario directory: old.cfg, new.cfg, old.prof, fresh.prof, and
/// scenario.json holding the configs plus the mutation log.
pub fn write_scenario(
    dir: &Path,
    scenario: &Scenario,
    gen: &GenConfig,
    m: &MutationConfig,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("old.cfg"),
        crate::cfg::write_binary_cfg(&scenario.old_binary),
    )?;
    fs::write(
        dir.join("new.cfg"),
        crate::cfg::write_binary_cfg(&scenario.new_binary),
    )?;
    fs::write(dir.join("old.prof"), write_profile(&scenario.old_profile))?;
    fs::write(
        dir.join("fresh.prof"),
        write_profile(&scenario.fresh_profile),
    )?;
    let doc = serde_json::json!({
        "gen": gen,
        "mutation": m,
        "mutations": scenario.mutation_log,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("scenario config serializes");
    text.push('\n');
    fs::write(dir.join("scenario.json"), text)?;
    Ok(())
}
