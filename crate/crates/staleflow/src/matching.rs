//! Phase one of profile transfer: pair profile functions with CFG functions,
//! pair blocks through the hash hierarchy, and turn profile counts into
//! initial counts on the new CFG (with ∅ for everything unmatched).

use crate::cfg::{BinaryCfg, FunctionCfg};
use crate::hashing::{self, BlendedHash};
use crate::profile::{FunctionProfile, ProfileFile};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionMatchKind {
    ExactName,
    HashAfterSuffixStrip,
    UniqueAfterSuffixStrip,
}

impl FunctionMatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FunctionMatchKind::ExactName => "exact-name",
            FunctionMatchKind::HashAfterSuffixStrip => "hash-after-suffix-strip",
            FunctionMatchKind::UniqueAfterSuffixStrip => "unique-after-suffix-strip",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionMatch {
    pub profile_name: String,
    pub cfg_name: String,
    pub kind: FunctionMatchKind,
    /// True when the stored function hash equals the new function's hash and
    /// the block counts agree — the profile applies verbatim.
    pub exact_profile: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchLevel {
    Full,
    Strict,
    Loose,
    EntryForced,
}

impl MatchLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchLevel::Full => "full",
            MatchLevel::Strict => "strict",
            MatchLevel::Loose => "loose",
            MatchLevel::EntryForced => "entry-forced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockMatch {
    pub profile_bid: u32,
    pub cfg_bid: u32,
    pub level: MatchLevel,
}

/// Initial counts on the new CFG. `None` is ∅ — no information — which is
/// distinct from a measured zero. Every block and edge of the CFG has an
/// entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InitialCounts {
    pub block: BTreeMap<u32, Option<u64>>,
    pub jump: BTreeMap<(u32, u32), Option<u64>>,
}

/// Strips trailing uniqueness suffixes of the form `.<token>.<digits>`
/// (as appended for internal-linkage symbols), repeatedly, as long as a
/// non-empty base remains: `"bar.llvm.123"` → `"bar"`,
/// `"f.llvm.1.lto.2"` → `"f"`, `"v1.2"` → `"v1.2"` (no token part).
pub fn strip_uniqueness_suffix(name: &str) -> &str {
    let mut s = name;
    loop {
        let Some(last) = s.rfind('.') else { return s };
        let digits = &s[last + 1..];
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return s;
        }
        let head = &s[..last];
        let Some(prev) = head.rfind('.') else {
            return s;
        };
        if head[prev + 1..].is_empty() || head[..prev].is_empty() {
            return s;
        }
        s = &head[..prev];
    }
}

/// Pairs profile functions with CFG functions one-to-one: exact names first,
/// then equal function hashes among same-stripped-name functions, then a
/// lone leftover pair per stripped name (despite hash mismatch). Unpaired
/// profile functions are discarded.
pub fn match_functions(
    profile: &ProfileFile,
    binary: &BinaryCfg,
) -> (Vec<FunctionMatch>, Vec<String>) {
    let cfg_hash: BTreeMap<&str, u64> = binary
        .functions
        .iter()
        .map(|f| (f.name.as_str(), hashing::function_hash(f)))
        .collect();
    let cfg_nblocks: BTreeMap<&str, usize> = binary
        .functions
        .iter()
        .map(|f| (f.name.as_str(), f.blocks.len()))
        .collect();

    let mut matches: Vec<FunctionMatch> = Vec::new();
    let mut used_cfg: BTreeSet<&str> = BTreeSet::new();
    let mut unmatched: Vec<&FunctionProfile> = Vec::new();

    for fp in &profile.functions {
        if cfg_hash.contains_key(fp.name.as_str()) {
            let name = fp.name.as_str();
            used_cfg.insert(name);
            matches.push(FunctionMatch {
                profile_name: fp.name.clone(),
                cfg_name: fp.name.clone(),
                kind: FunctionMatchKind::ExactName,
                exact_profile: fp.fhash == cfg_hash[name]
                    && fp.nblocks as usize == cfg_nblocks[name],
            });
        } else {
            unmatched.push(fp);
        }
    }

    // Group both leftovers by stripped name; names identical on both sides
    // were already taken by the exact pass, so these groups only contain
    // suffix-mangled variants.
    let mut groups: BTreeMap<&str, (Vec<&FunctionProfile>, Vec<&str>)> = BTreeMap::new();
    for fp in &unmatched {
        groups
            .entry(strip_uniqueness_suffix(&fp.name))
            .or_default()
            .0
            .push(fp);
    }
    for f in &binary.functions {
        if !used_cfg.contains(f.name.as_str()) {
            groups
                .entry(strip_uniqueness_suffix(&f.name))
                .or_default()
                .1
                .push(f.name.as_str());
        }
    }

    let mut matched_profiles: BTreeSet<&str> = BTreeSet::new();
    for (profs, cfgs) in groups.values() {
        let mut cfg_left: Vec<&str> = cfgs.clone();
        let mut prof_left: Vec<&FunctionProfile> = Vec::new();
        for fp in profs {
            let found = cfg_left.iter().position(|c| cfg_hash[c] == fp.fhash);
            match found {
                Some(i) => {
                    let cname = cfg_left.remove(i);
                    matched_profiles.insert(fp.name.as_str());
                    matches.push(FunctionMatch {
                        profile_name: fp.name.clone(),
                        cfg_name: cname.to_string(),
                        kind: FunctionMatchKind::HashAfterSuffixStrip,
                        exact_profile: fp.nblocks as usize == cfg_nblocks[cname],
                    });
                }
                None => prof_left.push(fp),
            }
        }
        if prof_left.len() == 1 && cfg_left.len() == 1 {
            let fp = prof_left[0];
            let cname = cfg_left[0];
            matched_profiles.insert(fp.name.as_str());
            matches.push(FunctionMatch {
                profile_name: fp.name.clone(),
                cfg_name: cname.to_string(),
                kind: FunctionMatchKind::UniqueAfterSuffixStrip,
                exact_profile: fp.fhash == cfg_hash[cname]
                    && fp.nblocks as usize == cfg_nblocks[cname],
            });
        }
    }

    let discarded: Vec<String> = unmatched
        .iter()
        .filter(|fp| !matched_profiles.contains(fp.name.as_str()))
        .map(|fp| fp.name.clone())
        .collect();
    // Keep reporting order stable regardless of which pass matched what.
    matches.sort_by(|a, b| a.profile_name.cmp(&b.profile_name));
    (matches, discarded)
}

/// Pairs profile blocks with CFG blocks: full hash (strict + neighbor), then
/// strict, then loose; closest `offset16` wins among equal candidates, then
/// the lowest CFG bid. The profile's entry block (its lowest bid) is always
/// mapped to the CFG entry. Blocks without any candidate stay unmatched;
/// several profile blocks may share one CFG block.
pub fn match_blocks(fp: &FunctionProfile, cfg: &FunctionCfg) -> Vec<BlockMatch> {
    let cfg_hashes = hashing::blended_hashes(cfg);
    let mut out: Vec<BlockMatch> = Vec::new();
    for pb in &fp.blocks {
        let ph = BlendedHash::from_packed(pb.hash);
        let pick = |pred: &dyn Fn(&BlendedHash) -> bool| -> Option<u32> {
            cfg_hashes
                .iter()
                .filter(|(_, h)| pred(h))
                .min_by_key(|(&bid, h)| ((h.offset16 as i32 - ph.offset16 as i32).abs(), bid))
                .map(|(&bid, _)| bid)
        };
        let full =
            pick(&|h: &BlendedHash| h.strict16 == ph.strict16 && h.neighbor16 == ph.neighbor16);
        let (cfg_bid, level) = if let Some(b) = full {
            (b, MatchLevel::Full)
        } else if let Some(b) = pick(&|h: &BlendedHash| h.strict16 == ph.strict16) {
            (b, MatchLevel::Strict)
        } else if let Some(b) = pick(&|h: &BlendedHash| h.loose16 == ph.loose16) {
            (b, MatchLevel::Loose)
        } else {
            continue;
        };
        out.push(BlockMatch {
            profile_bid: pb.bid,
            cfg_bid,
            level,
        });
    }
    if let Some(entry_pb) = fp.blocks.first() {
        match out.iter_mut().find(|m| m.profile_bid == entry_pb.bid) {
            Some(m) if m.cfg_bid == cfg.entry => {} // already right; keep its hash level
            Some(m) => {
                m.cfg_bid = cfg.entry;
                m.level = MatchLevel::EntryForced;
            }
            None => {
                out.push(BlockMatch {
                    profile_bid: entry_pb.bid,
                    cfg_bid: cfg.entry,
                    level: MatchLevel::EntryForced,
                });
                out.sort_by_key(|m| m.profile_bid);
            }
        }
    }
    out
}

/// Sums matched profile counts onto the new CFG. A block's count is the sum
/// of exec over profile blocks matched to it (∅ when none); a jump's count
/// sums succ records whose endpoints both matched across it (∅ when none).
/// Blocks unreachable from the entry are pinned to 0, not ∅.
pub fn assign_initial_counts(
    matches: &[BlockMatch],
    fp: &FunctionProfile,
    cfg: &FunctionCfg,
) -> InitialCounts {
    let p2c: BTreeMap<u32, u32> = matches.iter().map(|m| (m.profile_bid, m.cfg_bid)).collect();
    let mut block: BTreeMap<u32, Option<u64>> = cfg.blocks.iter().map(|b| (b.id, None)).collect();
    for pb in &fp.blocks {
        if let Some(cbid) = p2c.get(&pb.bid) {
            let slot = block.get_mut(cbid).expect("match targets a cfg block");
            *slot = Some(slot.unwrap_or(0).saturating_add(pb.exec));
        }
    }
    let mut jump: BTreeMap<(u32, u32), Option<u64>> =
        cfg.edges().into_iter().map(|e| (e, None)).collect();
    for pb in &fp.blocks {
        let Some(&cu) = p2c.get(&pb.bid) else {
            continue;
        };
        for sr in &pb.succ {
            let Some(&cv) = p2c.get(&sr.bid) else {
                continue;
            };
            // Profile edges with no counterpart edge in the new CFG are dropped.
            if let Some(slot) = jump.get_mut(&(cu, cv)) {
                *slot = Some(slot.unwrap_or(0).saturating_add(sr.cnt));
            }
        }
    }
    let reachable = cfg.reachable_blocks();
    for (id, slot) in block.iter_mut() {
        if !reachable.contains(id) {
            *slot = Some(0);
        }
    }
    InitialCounts { block, jump }
}

/// Fraction of profile samples in functions whose profile cannot be applied
/// exactly (or at all). 0 when the profile is empty.
pub fn staleness(profile: &ProfileFile, binary: &BinaryCfg) -> f64 {
    let (matches, discarded) = match_functions(profile, binary);
    staleness_from(profile, &matches, &discarded)
}

/// Same computation over an existing match result.
pub fn staleness_from(
    profile: &ProfileFile,
    matches: &[FunctionMatch],
    discarded: &[String],
) -> f64 {
    let exact: BTreeSet<&str> = matches
        .iter()
        .filter(|m| m.exact_profile)
        .map(|m| m.profile_name.as_str())
        .collect();
    let discarded: BTreeSet<&str> = discarded.iter().map(|s| s.as_str()).collect();
    let mut stale: u128 = 0;
    let mut total: u128 = 0;
    for f in &profile.functions {
        let mass: u128 = f.blocks.iter().map(|b| b.exec as u128).sum();
        total += mass;
        if discarded.contains(f.name.as_str()) || !exact.contains(f.name.as_str()) {
            stale += mass;
        }
    }
    if total == 0 {
        0.0
    } else {
        stale as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{BasicBlock, InstrKind, Instruction};
    use crate::profile::{profile_from_execution, BlockProfile};

    fn bb(id: u32, offset: u64, ops: &[(&str, &[&str])], succ: &[u32]) -> BasicBlock {
        BasicBlock {
            id,
            offset,
            instructions: ops
                .iter()
                .map(|(op, args)| Instruction::new(InstrKind::Normal, *op, args))
                .collect(),
            successors: succ.to_vec(),
        }
    }

    fn named(name: &str, blocks: Vec<BasicBlock>) -> FunctionCfg {
        let entry = blocks[0].id;
        FunctionCfg {
            name: name.to_string(),
            blocks,
            entry,
        }
    }

    fn diamond(name: &str) -> FunctionCfg {
        named(
            name,
            vec![
                bb(0, 0, &[("cmp", &["a", "b"])], &[1, 2]),
                bb(1, 8, &[("add", &["a", "c"])], &[3]),
                bb(2, 16, &[("sub", &["a", "c"])], &[3]),
                bb(3, 24, &[("ret", &[])], &[]),
            ],
        )
    }

    fn profile_of(
        cfg: &FunctionCfg,
        blocks: &[(u32, u64)],
        jumps: &[((u32, u32), u64)],
    ) -> FunctionProfile {
        profile_from_execution(
            cfg,
            &blocks.iter().copied().collect(),
            &jumps.iter().copied().collect(),
        )
        .unwrap()
    }

    #[test]
    fn strip_suffix_cases() {
        assert_eq!(strip_uniqueness_suffix("foo"), "foo");
        assert_eq!(strip_uniqueness_suffix("bar.llvm.123"), "bar");
        assert_eq!(strip_uniqueness_suffix("bar.lto.7"), "bar");
        assert_eq!(strip_uniqueness_suffix("f.llvm.1.lto.2"), "f");
        assert_eq!(strip_uniqueness_suffix("v1.2"), "v1.2");
        assert_eq!(strip_uniqueness_suffix("a.b"), "a.b");
        assert_eq!(strip_uniqueness_suffix(".llvm.123"), ".llvm.123");
        assert_eq!(strip_uniqueness_suffix("x.y.z"), "x.y.z");
    }

    #[test]
    fn exact_name_match() {
        let cfg = BinaryCfg {
            functions: vec![diamond("foo")],
        };
        let prof = ProfileFile {
            functions: vec![profile_of(&cfg.functions[0], &[(0, 5)], &[])],
        };
        let (m, d) = match_functions(&prof, &cfg);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].kind, FunctionMatchKind::ExactName);
        assert!(m[0].exact_profile);
        assert!(d.is_empty());
    }

    #[test]
    fn suffix_strip_hash_match() {
        let old = diamond("bar.llvm.123");
        let mut new = diamond("bar.llvm.999");
        new.name = "bar.llvm.999".to_string();
        let prof = ProfileFile {
            functions: vec![profile_of(&old, &[], &[])],
        };
        let binary = BinaryCfg {
            functions: vec![new],
        };
        let (m, d) = match_functions(&prof, &binary);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].kind, FunctionMatchKind::HashAfterSuffixStrip);
        assert_eq!(m[0].cfg_name, "bar.llvm.999");
        assert!(d.is_empty());
    }

    #[test]
    fn lone_leftovers_match_despite_hash_mismatch() {
        let old = diamond("baz.llvm.1");
        let mut new = diamond("baz.llvm.2");
        new.blocks[1].instructions[0].opcode = "xor".to_string(); // different fhash
        let prof = ProfileFile {
            functions: vec![profile_of(&old, &[], &[])],
        };
        let binary = BinaryCfg {
            functions: vec![new],
        };
        let (m, d) = match_functions(&prof, &binary);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].kind, FunctionMatchKind::UniqueAfterSuffixStrip);
        assert!(!m[0].exact_profile);
        assert!(d.is_empty());
    }

    #[test]
    fn unmatched_profile_function_is_discarded() {
        let cfg = BinaryCfg {
            functions: vec![diamond("foo")],
        };
        let gone = diamond("baz");
        let prof = ProfileFile {
            functions: vec![profile_of(&gone, &[], &[])],
        };
        let (m, d) = match_functions(&prof, &cfg);
        assert!(m.is_empty());
        assert_eq!(d, vec!["baz".to_string()]);
    }

    #[test]
    fn unchanged_function_matches_identity_at_full() {
        let cfg = diamond("f");
        let fp = profile_of(&cfg, &[(0, 10), (1, 4), (2, 6), (3, 10)], &[]);
        let ms = match_blocks(&fp, &cfg);
        assert_eq!(ms.len(), 4);
        for m in &ms {
            assert_eq!(m.profile_bid, m.cfg_bid);
            assert_eq!(m.level, MatchLevel::Full);
        }
    }

    #[test]
    fn operand_change_degrades_to_loose() {
        let old = diamond("f");
        let fp = profile_of(&old, &[], &[]);
        let mut new = diamond("f");
        new.blocks[1].instructions[0].operands[1] = "zz".to_string();
        let ms = match_blocks(&fp, &new);
        let by_bid: BTreeMap<u32, MatchLevel> =
            ms.iter().map(|m| (m.profile_bid, m.level)).collect();
        assert_eq!(by_bid[&1], MatchLevel::Loose);
        assert_eq!(by_bid[&0], MatchLevel::Full);
        assert_eq!(by_bid[&3], MatchLevel::Full);
    }

    #[test]
    fn closest_offset_wins_among_identical_blocks() {
        // Two identical non-entry blocks at offsets 0x10 and 0x80; the
        // profile knows a block at offset 0x14.
        let mk = |off1: u64, off2: u64| {
            named(
                "f",
                vec![
                    bb(0, 0, &[("start", &[])], &[1, 2]),
                    bb(1, off1, &[("mov", &["a", "b"])], &[]),
                    bb(2, off2, &[("mov", &["a", "b"])], &[]),
                ],
            )
        };
        let old = mk(0x14, 0x200);
        let new = mk(0x10, 0x80);
        let fp = profile_of(&old, &[], &[]);
        let ms = match_blocks(&fp, &new);
        let m1 = ms.iter().find(|m| m.profile_bid == 1).unwrap();
        assert_eq!(m1.cfg_bid, 1); // offset 0x10 beats 0x80 for profile offset 0x14
    }

    #[test]
    fn entry_is_always_forced() {
        // Entirely different code: no hash level matches anything, yet the
        // entry mapping must exist.
        let old = named("f", vec![bb(0, 0, &[("one", &["x"])], &[])]);
        let new = named("f", vec![bb(0, 0, &[("two", &["y"])], &[])]);
        let fp = profile_of(&old, &[(0, 9)], &[]);
        let ms = match_blocks(&fp, &new);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].level, MatchLevel::EntryForced);
        assert_eq!(ms[0].cfg_bid, 0);

        let counts = assign_initial_counts(&ms, &fp, &new);
        assert_eq!(counts.block[&0], Some(9));
    }

    #[test]
    fn initial_counts_carry_matched_and_leave_rest_empty() {
        let cfg = diamond("f");
        let fp = profile_of(
            &cfg,
            &[(0, 10), (1, 4), (2, 6), (3, 10)],
            &[((0, 1), 4), ((0, 2), 6), ((1, 3), 4), ((2, 3), 6)],
        );
        let ms = match_blocks(&fp, &cfg);
        let counts = assign_initial_counts(&ms, &fp, &cfg);
        assert_eq!(counts.block[&1], Some(4));
        assert_eq!(counts.jump[&(0, 2)], Some(6));

        // Same profile against a grown CFG: the new block gets ∅.
        let mut grown = diamond("f");
        grown.blocks[2].successors = vec![4];
        grown.blocks.push(bb(4, 32, &[("mul", &["q", "r"])], &[3]));
        let ms = match_blocks(&fp, &grown);
        let counts = assign_initial_counts(&ms, &fp, &grown);
        assert_eq!(counts.block[&4], None);
        assert_eq!(counts.jump[&(2, 4)], None);
        assert_eq!(counts.block[&1], Some(4));
    }

    #[test]
    fn many_to_one_counts_sum() {
        let cfg = named("f", vec![bb(0, 0, &[("mov", &["a", "b"])], &[])]);
        let hashes = crate::hashing::blended_hashes(&cfg);
        let h = hashes[&0].packed();
        // Hand-built profile with two blocks (inlining duplicates) that both
        // match cfg block 0.
        let fp = FunctionProfile {
            name: "f".to_string(),
            fhash: crate::hashing::function_hash(&cfg),
            exec: 5,
            nblocks: 2,
            blocks: vec![
                BlockProfile {
                    bid: 0,
                    hash: h,
                    exec: 5,
                    succ: vec![],
                },
                BlockProfile {
                    bid: 1,
                    hash: h,
                    exec: 7,
                    succ: vec![],
                },
            ],
        };
        let ms = match_blocks(&fp, &cfg);
        assert_eq!(ms.len(), 2);
        assert!(ms.iter().all(|m| m.cfg_bid == 0));
        let counts = assign_initial_counts(&ms, &fp, &cfg);
        assert_eq!(counts.block[&0], Some(12));
    }

    #[test]
    fn unreachable_blocks_get_zero_not_empty() {
        let cfg = named(
            "f",
            vec![
                bb(0, 0, &[("mov", &["a"])], &[1]),
                bb(1, 8, &[("ret", &[])], &[]),
                bb(2, 16, &[("island", &["z"])], &[]),
            ],
        );
        let old = named(
            "f",
            vec![
                bb(0, 0, &[("mov", &["a"])], &[1]),
                bb(1, 8, &[("ret", &[])], &[]),
            ],
        );
        let fp = profile_of(&old, &[(0, 3), (1, 3)], &[((0, 1), 3)]);
        let ms = match_blocks(&fp, &cfg);
        let counts = assign_initial_counts(&ms, &fp, &cfg);
        assert_eq!(counts.block[&2], Some(0));
    }

    #[test]
    fn dropped_profile_edges_do_not_reach_missing_cfg_edges() {
        // Old CFG jumps 0→1 directly; the new CFG routes 0→2→1, so the old
        // (0,1) record has no edge to land on.
        let old = named(
            "f",
            vec![
                bb(0, 0, &[("cmp", &["a"])], &[1]),
                bb(1, 8, &[("add", &["b"])], &[]),
                bb(2, 16, &[("sub", &["c"])], &[]),
            ],
        );
        let new = named(
            "f",
            vec![
                bb(0, 0, &[("cmp", &["a"])], &[2]),
                bb(1, 8, &[("add", &["b"])], &[]),
                bb(2, 16, &[("sub", &["c"])], &[1]),
            ],
        );
        let fp = profile_of(&old, &[(0, 5), (1, 5)], &[((0, 1), 5)]);
        let ms = match_blocks(&fp, &new);
        let counts = assign_initial_counts(&ms, &fp, &new);
        // The old 0→1 record has no (0,1) edge in the new CFG; the new edges
        // have no records of their own.
        assert_eq!(counts.jump[&(0, 2)], None);
        assert_eq!(counts.jump[&(2, 1)], None);
        assert_eq!(counts.block[&1], Some(5)); // block still matched by content
    }

    #[test]
    fn staleness_fractions() {
        let f1 = diamond("a");
        let f2 = diamond("b");
        let binary = BinaryCfg {
            functions: vec![f1.clone(), f2.clone()],
        };
        let p1 = profile_of(&f1, &[(0, 10), (3, 10)], &[]);
        let p2 = profile_of(&f2, &[(0, 10), (3, 10)], &[]);
        let both = ProfileFile {
            functions: vec![p1.clone(), p2.clone()],
        };
        assert_eq!(staleness(&both, &binary), 0.0);

        // Remove function b from the binary: half the mass goes stale.
        let half = BinaryCfg {
            functions: vec![f1.clone()],
        };
        assert_eq!(staleness(&both, &half), 0.5);

        // Empty binary: everything is stale.
        assert_eq!(staleness(&both, &BinaryCfg::default()), 1.0);

        // Empty profile: nothing to go stale.
        assert_eq!(staleness(&ProfileFile::default(), &binary), 0.0);
    }

    #[test]
    fn modified_function_counts_as_stale_mass() {
        let f = diamond("a");
        let fp = profile_of(&f, &[(0, 10), (3, 10)], &[]);
        let mut changed = f.clone();
        changed.blocks[1].instructions[0].operands[0] = "q".to_string();
        let binary = BinaryCfg {
            functions: vec![changed],
        };
        let prof = ProfileFile {
            functions: vec![fp],
        };
        assert_eq!(staleness(&prof, &binary), 1.0);
    }
}
