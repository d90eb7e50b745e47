//! Per-block hashing: the loose/strict/neighbor digests, their 16-bit
//! blended packing, and the function-level hash.
//!
//! The underlying digest is XXH64 with seed 0, implemented here so the values
//! are pinned independently of any library version. Reference vectors are
//! recorded in the tests; an external implementation is cross-checked there
//! as well.

use crate::cfg::{BasicBlock, FunctionCfg, InstrKind};
use std::collections::BTreeMap;

const PRIME64_1: u64 = 0x9E3779B185EBCA87;
const PRIME64_2: u64 = 0xC2B2AE3D27D4EB4F;
const PRIME64_3: u64 = 0x165667B19E3779F9;
const PRIME64_4: u64 = 0x85EBCA77C2B2AE63;
const PRIME64_5: u64 = 0x27D4EB2F165667C5;

/// Separator inserted between tokens in digest inputs so that
/// `["ab","c"]` and `["a","bc"]` cannot collide.
pub const SEP: u8 = 0x1F;

#[inline]
fn round(acc: u64, lane: u64) -> u64 {
    acc.wrapping_add(lane.wrapping_mul(PRIME64_2))
        .rotate_left(31)
        .wrapping_mul(PRIME64_1)
}

#[inline]
fn merge_round(acc: u64, val: u64) -> u64 {
    (acc ^ round(0, val))
        .wrapping_mul(PRIME64_1)
        .wrapping_add(PRIME64_4)
}

#[inline]
fn read_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b[..8].try_into().unwrap())
}

#[inline]
fn read_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b[..4].try_into().unwrap())
}

/// XXH64 with seed 0: deterministic, platform-independent 64-bit digest.
pub fn hash64(bytes: &[u8]) -> u64 {
    let len = bytes.len();
    let mut rest = bytes;
    let mut acc: u64;
    if len >= 32 {
        let mut a1 = PRIME64_1.wrapping_add(PRIME64_2);
        let mut a2 = PRIME64_2;
        let mut a3 = 0u64;
        let mut a4 = 0u64.wrapping_sub(PRIME64_1);
        while rest.len() >= 32 {
            a1 = round(a1, read_u64(&rest[0..]));
            a2 = round(a2, read_u64(&rest[8..]));
            a3 = round(a3, read_u64(&rest[16..]));
            a4 = round(a4, read_u64(&rest[24..]));
            rest = &rest[32..];
        }
        acc = a1
            .rotate_left(1)
            .wrapping_add(a2.rotate_left(7))
            .wrapping_add(a3.rotate_left(12))
            .wrapping_add(a4.rotate_left(18));
        acc = merge_round(acc, a1);
        acc = merge_round(acc, a2);
        acc = merge_round(acc, a3);
        acc = merge_round(acc, a4);
    } else {
        acc = PRIME64_5;
    }
    acc = acc.wrapping_add(len as u64);
    while rest.len() >= 8 {
        acc ^= round(0, read_u64(rest));
        acc = acc
            .rotate_left(27)
            .wrapping_mul(PRIME64_1)
            .wrapping_add(PRIME64_4);
        rest = &rest[8..];
    }
    if rest.len() >= 4 {
        acc ^= (read_u32(rest) as u64).wrapping_mul(PRIME64_1);
        acc = acc
            .rotate_left(23)
            .wrapping_mul(PRIME64_2)
            .wrapping_add(PRIME64_3);
        rest = &rest[4..];
    }
    for &b in rest {
        acc ^= (b as u64).wrapping_mul(PRIME64_5);
        acc = acc.rotate_left(11).wrapping_mul(PRIME64_1);
    }
    acc ^= acc >> 33;
    acc = acc.wrapping_mul(PRIME64_2);
    acc ^= acc >> 29;
    acc = acc.wrapping_mul(PRIME64_3);
    acc ^= acc >> 32;
    acc
}

/// The four 16-bit hash components of one block, packed as
/// `offset16 | loose16 | strict16 | neighbor16` from high to low bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlendedHash {
    pub offset16: u16,
    pub loose16: u16,
    pub strict16: u16,
    pub neighbor16: u16,
}

impl BlendedHash {
    pub fn packed(self) -> u64 {
        ((self.offset16 as u64) << 48)
            | ((self.loose16 as u64) << 32)
            | ((self.strict16 as u64) << 16)
            | self.neighbor16 as u64
    }

    pub fn from_packed(p: u64) -> BlendedHash {
        BlendedHash {
            offset16: (p >> 48) as u16,
            loose16: (p >> 32) as u16,
            strict16: (p >> 16) as u16,
            neighbor16: p as u16,
        }
    }
}

/// Instruction kinds that contribute nothing to loose/strict hashes: pseudo
/// and nop content is incidental, and unconditional branches come and go with
/// block reordering.
fn hashed(kind: InstrKind) -> bool {
    !matches!(
        kind,
        InstrKind::Pseudo | InstrKind::Nop | InstrKind::UncondBranch
    )
}

/// Digest of the sorted set of distinct opcodes (operands excluded).
pub fn loose_hash(block: &BasicBlock) -> u64 {
    let mut ops: Vec<&str> = block
        .instructions
        .iter()
        .filter(|i| hashed(i.kind))
        .map(|i| i.opcode.as_str())
        .collect();
    ops.sort_unstable();
    ops.dedup();
    let mut buf = Vec::new();
    for (i, op) in ops.iter().enumerate() {
        if i > 0 {
            buf.push(SEP);
        }
        buf.extend_from_slice(op.as_bytes());
    }
    hash64(&buf)
}

/// Digest of the ordered `opcode(operand,...)` sequence.
pub fn strict_hash(block: &BasicBlock) -> u64 {
    let mut buf = Vec::new();
    let mut first = true;
    for ins in block.instructions.iter().filter(|i| hashed(i.kind)) {
        if !first {
            buf.push(SEP);
        }
        first = false;
        buf.extend_from_slice(ins.opcode.as_bytes());
        buf.push(b'(');
        for (j, op) in ins.operands.iter().enumerate() {
            if j > 0 {
                buf.push(b',');
            }
            buf.extend_from_slice(op.as_bytes());
        }
        buf.push(b')');
    }
    hash64(&buf)
}

/// Digest of the sorted predecessor loose hashes, a separator, then the
/// sorted successor loose hashes. Each hash contributes its 8 little-endian
/// bytes; fixed width makes inter-value separators unnecessary.
pub fn neighbor_hash(block: &BasicBlock, cfg: &FunctionCfg) -> u64 {
    let loose: BTreeMap<u32, u64> = cfg.blocks.iter().map(|b| (b.id, loose_hash(b))).collect();
    neighbor_hash_with(block, cfg, &loose)
}

fn neighbor_hash_with(block: &BasicBlock, cfg: &FunctionCfg, loose: &BTreeMap<u32, u64>) -> u64 {
    let mut preds: Vec<u64> = cfg
        .blocks
        .iter()
        .filter(|b| b.successors.contains(&block.id))
        .map(|b| loose[&b.id])
        .collect();
    preds.sort_unstable();
    let mut succs: Vec<u64> = block.successors.iter().map(|s| loose[s]).collect();
    succs.sort_unstable();
    let mut buf = Vec::with_capacity(8 * (preds.len() + succs.len()) + 1);
    for h in preds {
        buf.extend_from_slice(&h.to_le_bytes());
    }
    buf.push(SEP);
    for h in succs {
        buf.extend_from_slice(&h.to_le_bytes());
    }
    hash64(&buf)
}

/// Blended hash of one block within its function.
pub fn blended_hash(block: &BasicBlock, cfg: &FunctionCfg) -> BlendedHash {
    BlendedHash {
        offset16: (block.offset & 0xFFFF) as u16,
        loose16: loose_hash(block) as u16,
        strict16: strict_hash(block) as u16,
        neighbor16: neighbor_hash(block, cfg) as u16,
    }
}

/// Blended hashes for every block of a function, keyed by block id.
/// Equivalent to calling [`blended_hash`] per block but shares the loose-hash
/// table across neighbor computations.
pub fn blended_hashes(cfg: &FunctionCfg) -> BTreeMap<u32, BlendedHash> {
    let loose: BTreeMap<u32, u64> = cfg.blocks.iter().map(|b| (b.id, loose_hash(b))).collect();
    cfg.blocks
        .iter()
        .map(|b| {
            (
                b.id,
                BlendedHash {
                    offset16: (b.offset & 0xFFFF) as u16,
                    loose16: loose[&b.id] as u16,
                    strict16: strict_hash(b) as u16,
                    neighbor16: neighbor_hash_with(b, cfg, &loose) as u16,
                },
            )
        })
        .collect()
}

/// Function-level hash: digest of every block's strict hash, in block order.
pub fn function_hash(cfg: &FunctionCfg) -> u64 {
    let mut buf = Vec::with_capacity(8 * cfg.blocks.len());
    for b in &cfg.blocks {
        buf.extend_from_slice(&strict_hash(b).to_le_bytes());
    }
    hash64(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::Instruction;

    fn bb(id: u32, offset: u64, instrs: Vec<Instruction>, succ: &[u32]) -> BasicBlock {
        BasicBlock {
            id,
            offset,
            instructions: instrs,
            successors: succ.to_vec(),
        }
    }

    fn ins(op: &str, operands: &[&str]) -> Instruction {
        Instruction::new(InstrKind::Normal, op, operands)
    }

    // Recorded reference vectors for XXH64 with seed 0, so ports in other
    // languages can verify bit-exactness without this crate.
    #[test]
    fn xxh64_reference_vectors() {
        assert_eq!(hash64(b""), 0xEF46DB3751D8E999);
        assert_eq!(hash64(b"a"), 0xD24EC4F1A98C6E5B);
        assert_eq!(hash64(b"abc"), 0x44BC2CF5AD770999);
        assert_eq!(hash64(b"Hello, world!"), 0xF58336A78B6F9476);
    }

    #[test]
    fn xxh64_matches_external_implementation() {
        // Independent oracle across the small/large-input code paths.
        let mut data = Vec::new();
        for i in 0..4096u32 {
            data.push((i.wrapping_mul(2654435761) >> 13) as u8);
            let h = hash64(&data);
            assert_eq!(h, xxhash_rust::xxh64::xxh64(&data, 0), "len {}", data.len());
        }
    }

    #[test]
    fn xxh64_content_only() {
        // Same bytes assembled differently hash the same.
        let whole = vec![0xABu8; 1 << 20];
        let mut chunked = Vec::new();
        for chunk in whole.chunks(4093) {
            chunked.extend_from_slice(chunk);
        }
        assert_eq!(hash64(&whole), hash64(&chunked));
    }

    #[test]
    fn loose_ignores_order_operands_and_nops() {
        let a = bb(
            0,
            0,
            vec![ins("mov", &["r1", "r2"]), ins("add", &["c"])],
            &[],
        );
        let b = bb(0, 0, vec![ins("add", &[]), ins("mov", &[])], &[]);
        assert_eq!(loose_hash(&a), loose_hash(&b));

        let mut c = a.clone();
        c.instructions
            .push(Instruction::new(InstrKind::Nop, "nop", &[]));
        c.instructions
            .insert(0, Instruction::new(InstrKind::Pseudo, "phi", &["x"]));
        assert_eq!(loose_hash(&a), loose_hash(&c));

        let d = bb(
            0,
            0,
            vec![ins("mov", &["r3", "r4"]), ins("add", &["z"])],
            &[],
        );
        assert_eq!(loose_hash(&a), loose_hash(&d));
    }

    #[test]
    fn loose_uses_distinct_opcode_set() {
        let once = bb(0, 0, vec![ins("mov", &[])], &[]);
        let twice = bb(0, 0, vec![ins("mov", &[]), ins("mov", &[])], &[]);
        assert_eq!(loose_hash(&once), loose_hash(&twice));
    }

    #[test]
    fn strict_is_order_and_operand_sensitive() {
        let a = bb(0, 0, vec![ins("mov", &["a", "b"]), ins("add", &["c"])], &[]);
        let b = bb(0, 0, vec![ins("add", &["c"]), ins("mov", &["a", "b"])], &[]);
        assert_ne!(strict_hash(&a), strict_hash(&b));
        assert_eq!(strict_hash(&a), strict_hash(&a.clone()));

        let c = bb(0, 0, vec![ins("mov", &["a", "b"]), ins("add", &["d"])], &[]);
        assert_ne!(strict_hash(&a), strict_hash(&c));
    }

    #[test]
    fn strict_skips_pseudo_nop_uncond() {
        let plain = bb(0, 0, vec![ins("mov", &["a", "b"])], &[]);
        let mut noisy = plain.clone();
        noisy
            .instructions
            .insert(0, Instruction::new(InstrKind::Pseudo, "label", &[]));
        noisy
            .instructions
            .push(Instruction::new(InstrKind::Nop, "nop", &[]));
        noisy
            .instructions
            .push(Instruction::new(InstrKind::UncondBranch, "jmp", &["x"]));
        assert_eq!(strict_hash(&plain), strict_hash(&noisy));
        assert_eq!(loose_hash(&plain), loose_hash(&noisy));
    }

    #[test]
    fn conditional_branches_participate() {
        let without = bb(0, 0, vec![ins("mov", &["a", "b"])], &[]);
        let mut with = without.clone();
        with.instructions
            .push(Instruction::new(InstrKind::CondBranch, "je", &["x"]));
        assert_ne!(strict_hash(&without), strict_hash(&with));
        assert_ne!(loose_hash(&without), loose_hash(&with));
    }

    #[test]
    fn neighbor_distinguishes_successors() {
        let mk = |succ0: &[u32]| {
            let blocks = vec![
                bb(0, 0, vec![ins("mov", &[])], succ0),
                bb(1, 4, vec![ins("add", &[])], &[]),
                bb(2, 8, vec![ins("sub", &[])], &[]),
            ];
            FunctionCfg {
                name: "f".to_string(),
                blocks,
                entry: 0,
            }
        };
        let f1 = mk(&[1]);
        let f2 = mk(&[2]);
        // Block 0 is textually identical in both but jumps elsewhere.
        assert_ne!(
            neighbor_hash(&f1.blocks[0], &f1),
            neighbor_hash(&f2.blocks[0], &f2)
        );
        // Permuting the successor list leaves the hash alone.
        let f3 = mk(&[1, 2]);
        let f4 = mk(&[2, 1]);
        assert_eq!(
            neighbor_hash(&f3.blocks[0], &f3),
            neighbor_hash(&f4.blocks[0], &f4)
        );
    }

    #[test]
    fn neighbor_of_isolated_block_is_separator_hash() {
        let f = FunctionCfg {
            name: "f".to_string(),
            blocks: vec![bb(0, 0, vec![ins("mov", &[])], &[])],
            entry: 0,
        };
        assert_eq!(neighbor_hash(&f.blocks[0], &f), hash64(&[SEP]));
    }

    #[test]
    fn blended_packing_layout() {
        let h = BlendedHash {
            offset16: 0x2345,
            loose16: 0x1111,
            strict16: 0x2222,
            neighbor16: 0x3333,
        };
        assert_eq!(h.packed(), 0x2345_1111_2222_3333);
        assert_eq!(BlendedHash::from_packed(h.packed()), h);
    }

    #[test]
    fn blended_offset_is_mod_2_16() {
        let f = FunctionCfg {
            name: "f".to_string(),
            blocks: vec![bb(0, 0x12345, vec![ins("mov", &[])], &[])],
            entry: 0,
        };
        let h = blended_hash(&f.blocks[0], &f);
        assert_eq!(h.offset16, 0x2345);
    }

    #[test]
    fn blended_offset_only_twiddles_top_bits() {
        let mk = |off: u64| FunctionCfg {
            name: "f".to_string(),
            blocks: vec![bb(0, off, vec![ins("mov", &["a"])], &[])],
            entry: 0,
        };
        let f1 = mk(0x10);
        let f2 = mk(0x80);
        let h1 = blended_hash(&f1.blocks[0], &f1).packed();
        let h2 = blended_hash(&f2.blocks[0], &f2).packed();
        assert_ne!(h1, h2);
        assert_eq!(h1 & 0x0000_FFFF_FFFF_FFFF, h2 & 0x0000_FFFF_FFFF_FFFF);
    }

    #[test]
    fn blended_hashes_matches_per_block_calls() {
        let f = FunctionCfg {
            name: "f".to_string(),
            blocks: vec![
                bb(0, 0, vec![ins("mov", &["a"])], &[1, 2]),
                bb(1, 4, vec![ins("add", &["b"])], &[2]),
                bb(2, 8, vec![ins("ret", &[])], &[]),
            ],
            entry: 0,
        };
        let all = blended_hashes(&f);
        for b in &f.blocks {
            assert_eq!(all[&b.id], blended_hash(b, &f));
        }
    }

    #[test]
    fn function_hash_depends_on_content_and_order() {
        let f = FunctionCfg {
            name: "f".to_string(),
            blocks: vec![
                bb(0, 0, vec![ins("mov", &["a", "b"])], &[1]),
                bb(1, 4, vec![ins("ret", &[])], &[]),
            ],
            entry: 0,
        };
        assert_eq!(function_hash(&f), function_hash(&f.clone()));

        let mut changed = f.clone();
        changed.blocks[0].instructions[0].operands[1] = "c".to_string();
        assert_ne!(function_hash(&f), function_hash(&changed));

        let mut reordered = f.clone();
        reordered.blocks.swap(0, 1);
        assert_ne!(function_hash(&f), function_hash(&reordered));
    }
}
