//! The profile file format: a restricted YAML-shaped structure with one
//! canonical byte representation.
//!
//! The format is deliberately narrow. Keys have a fixed order, indentation is
//! two spaces, blocks and successor records are sorted by block id, hashes
//! are 16 lowercase hex digits, and integers carry no sign or leading zeros.
//! The parser accepts exactly what the writer emits, which is what makes
//! `write(read(x)) == x` hold byte-for-byte.

use crate::cfg::FunctionCfg;
use crate::hashing;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// One measured jump: `cnt` executions of the edge to successor `bid`.
///
/// Jump counts are stored only on the source block's `succ` list. A CFG edge
/// with no record has an *unknown* count, not a zero: sampling can miss
/// edges, and inference treats the two very differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuccessorRecord {
    pub bid: u32,
    pub cnt: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockProfile {
    pub bid: u32,
    /// Packed blended hash of the block at collection time.
    pub hash: u64,
    pub exec: u64,
    /// Sorted by `bid`.
    pub succ: Vec<SuccessorRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionProfile {
    pub name: String,
    /// Function hash at collection time.
    pub fhash: u64,
    /// Entry count of the function.
    pub exec: u64,
    /// Block count at collection time; always equals `blocks.len()`.
    pub nblocks: u32,
    /// Sorted by `bid`.
    pub blocks: Vec<BlockProfile>,
}

impl FunctionProfile {
    pub fn block(&self, bid: u32) -> Option<&BlockProfile> {
        self.blocks.iter().find(|b| b.bid == bid)
    }

    /// Total sample mass: sum of block execution counts.
    pub fn total_exec(&self) -> u64 {
        self.blocks.iter().map(|b| b.exec).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProfileFile {
    pub functions: Vec<FunctionProfile>,
}

impl ProfileFile {
    pub fn function(&self, name: &str) -> Option<&FunctionProfile> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProfileError {
    /// The text deviates from the canonical grammar.
    Syntax { line: usize, message: String },
    /// The text parses but breaks a schema rule.
    Schema { path: String, rule: String },
}

impl fmt::Display for ProfileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileError::Syntax { line, message } => write!(f, "line {line}: {message}"),
            ProfileError::Schema { path, rule } => write!(f, "{path}: {rule}"),
        }
    }
}

impl std::error::Error for ProfileError {}

fn syntax(line: usize, message: impl Into<String>) -> ProfileError {
    ProfileError::Syntax {
        line,
        message: message.into(),
    }
}

fn schema(path: impl Into<String>, rule: impl Into<String>) -> ProfileError {
    ProfileError::Schema {
        path: path.into(),
        rule: rule.into(),
    }
}

/// Parses the canonical profile format. Rejects unknown keys, wrong key
/// order, negative or non-canonical numbers, duplicate names or bids, and
/// dangling successor references.
pub fn read_profile(text: &str) -> Result<ProfileFile, ProfileError> {
    if text.is_empty() {
        return Err(syntax(1, "empty input; expected `functions:`"));
    }
    if !text.ends_with('\n') {
        return Err(syntax(text.lines().count(), "missing trailing newline"));
    }
    let lines: Vec<&str> = {
        let mut v: Vec<&str> = text.split('\n').collect();
        v.pop(); // the empty tail after the final newline
        v
    };
    let mut cur = Cursor {
        lines: &lines,
        pos: 0,
    };

    let (n, first) = cur.next().ok_or_else(|| syntax(1, "empty input"))?;
    if first == "functions: []" {
        if let Some((n2, extra)) = cur.next() {
            return Err(syntax(
                n2,
                format!("unexpected content after empty list: `{extra}`"),
            ));
        }
        return Ok(ProfileFile::default());
    }
    if first != "functions:" {
        return Err(syntax(n, format!("expected `functions:`, found `{first}`")));
    }

    let mut functions = Vec::new();
    let mut names = BTreeSet::new();
    while cur.peek().is_some() {
        let func = parse_function(&mut cur)?;
        if !names.insert(func.name.clone()) {
            return Err(schema(
                format!("function \"{}\"", func.name),
                "duplicate function name",
            ));
        }
        functions.push(func);
    }
    if functions.is_empty() {
        return Err(syntax(
            n,
            "`functions:` with no entries (use `functions: []`)",
        ));
    }
    Ok(ProfileFile { functions })
}

struct Cursor<'a> {
    lines: &'a [&'a str],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        let line = *self.lines.get(self.pos)?;
        self.pos += 1;
        Some((self.pos, line))
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    /// Consumes a line that must start with `prefix`; returns the remainder.
    fn field(&mut self, prefix: &str) -> Result<(usize, &'a str), ProfileError> {
        let (n, line) = self.next().ok_or_else(|| {
            syntax(
                self.pos + 1,
                format!("unexpected end of input; expected `{}`", prefix.trim()),
            )
        })?;
        line.strip_prefix(prefix)
            .map(|rest| (n, rest))
            .ok_or_else(|| syntax(n, format!("expected `{}...`, found `{line}`", prefix)))
    }
}

fn parse_function(cur: &mut Cursor) -> Result<FunctionProfile, ProfileError> {
    let (n, rest) = cur.field("  - name: ")?;
    let name = parse_quoted(rest, n)?;
    let path = format!("function \"{name}\"");
    let (n, rest) = cur.field("    fhash: ")?;
    let fhash = parse_hex16(rest, n, &path)?;
    let (n, rest) = cur.field("    exec: ")?;
    let exec = parse_uint(rest, n, &format!("{path}.exec"))?;
    let (n, rest) = cur.field("    nblocks: ")?;
    let nblocks = parse_uint(rest, n, &format!("{path}.nblocks"))?;
    let (_, rest) = cur.field("    blocks:")?;
    if !rest.is_empty() {
        return Err(schema(
            format!("{path}.blocks"),
            "content on the `blocks:` line",
        ));
    }

    let mut blocks: Vec<BlockProfile> = Vec::new();
    while cur.peek().is_some_and(|l| l.starts_with("      - bid: ")) {
        let block = parse_block(cur, &path)?;
        if let Some(last) = blocks.last() {
            if block.bid <= last.bid {
                return Err(schema(
                    format!("{path} block {}", block.bid),
                    "bids must be unique and ascending",
                ));
            }
        }
        blocks.push(block);
    }
    if blocks.is_empty() {
        return Err(schema(
            format!("{path}.blocks"),
            "at least one block is required",
        ));
    }
    if nblocks == 0 || nblocks != blocks.len() as u64 {
        return Err(schema(
            format!("{path}.nblocks"),
            format!(
                "nblocks is {nblocks} but {} blocks are listed",
                blocks.len()
            ),
        ));
    }
    let bids: BTreeSet<u32> = blocks.iter().map(|b| b.bid).collect();
    for b in &blocks {
        for s in &b.succ {
            if !bids.contains(&s.bid) {
                return Err(schema(
                    format!("{path} block {} succ {}", b.bid, s.bid),
                    "successor bid not present in blocks",
                ));
            }
        }
    }
    Ok(FunctionProfile {
        name,
        fhash,
        exec,
        nblocks: nblocks as u32,
        blocks,
    })
}

fn parse_block(cur: &mut Cursor, fpath: &str) -> Result<BlockProfile, ProfileError> {
    let (n, rest) = cur.field("      - bid: ")?;
    let bid = parse_uint(rest, n, &format!("{fpath}.bid"))?;
    if bid > u32::MAX as u64 {
        return Err(schema(format!("{fpath}.bid"), "bid exceeds 32 bits"));
    }
    let path = format!("{fpath} block {bid}");
    let (n, rest) = cur.field("        hash: ")?;
    let hash = parse_hex16(rest, n, &path)?;
    let (n, rest) = cur.field("        exec: ")?;
    let exec = parse_uint(rest, n, &format!("{path}.exec"))?;
    let (n, rest) = cur.field("        succ: ")?;
    let succ = parse_succ_list(rest, n, &path)?;
    Ok(BlockProfile {
        bid: bid as u32,
        hash,
        exec,
        succ,
    })
}

fn parse_quoted(s: &str, line: usize) -> Result<String, ProfileError> {
    let inner = s
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .ok_or_else(|| {
            syntax(
                line,
                format!("expected a double-quoted string, found `{s}`"),
            )
        })?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('\\') => out.push('\\'),
                Some('"') => out.push('"'),
                _ => {
                    return Err(syntax(
                        line,
                        "bad escape in string (only \\\\ and \\\" are allowed)",
                    ))
                }
            },
            '"' => return Err(syntax(line, "unescaped quote inside string")),
            _ => out.push(c),
        }
    }
    Ok(out)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn parse_hex16(s: &str, line: usize, path: &str) -> Result<u64, ProfileError> {
    let inner = s
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .ok_or_else(|| syntax(line, format!("expected a quoted hash, found `{s}`")))?;
    if inner.len() != 16
        || !inner
            .bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
    {
        return Err(schema(
            path.to_string(),
            format!("hash must be 16 lowercase hex digits, found \"{inner}\""),
        ));
    }
    Ok(u64::from_str_radix(inner, 16).unwrap())
}

fn parse_uint(s: &str, line: usize, path: &str) -> Result<u64, ProfileError> {
    if s.starts_with('-') {
        return Err(schema(path.to_string(), format!("negative value {s}")));
    }
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(syntax(
            line,
            format!("expected an unsigned integer, found `{s}`"),
        ));
    }
    if s.len() > 1 && s.starts_with('0') {
        return Err(syntax(
            line,
            format!("leading zeros are not canonical: `{s}`"),
        ));
    }
    s.parse::<u64>()
        .map_err(|_| schema(path.to_string(), format!("value {s} exceeds 64 bits")))
}

fn parse_succ_list(s: &str, line: usize, path: &str) -> Result<Vec<SuccessorRecord>, ProfileError> {
    if s == "[]" {
        return Ok(Vec::new());
    }
    let inner = s
        .strip_prefix("[ ")
        .and_then(|t| t.strip_suffix(" ]"))
        .ok_or_else(|| syntax(line, format!("malformed succ list `{s}`")))?;
    let mut out: Vec<SuccessorRecord> = Vec::new();
    let mut rest = inner;
    loop {
        let after_open = rest
            .strip_prefix("{ bid: ")
            .ok_or_else(|| syntax(line, format!("malformed succ record near `{rest}`")))?;
        let comma = after_open
            .find(", cnt: ")
            .ok_or_else(|| syntax(line, format!("malformed succ record near `{after_open}`")))?;
        let bid_str = &after_open[..comma];
        let after_cnt = &after_open[comma + ", cnt: ".len()..];
        let close = after_cnt
            .find(" }")
            .ok_or_else(|| syntax(line, format!("malformed succ record near `{after_cnt}`")))?;
        let cnt_str = &after_cnt[..close];
        let bid = parse_uint(bid_str, line, &format!("{path}.succ.bid"))?;
        if bid > u32::MAX as u64 {
            return Err(schema(format!("{path}.succ"), "bid exceeds 32 bits"));
        }
        let cnt = parse_uint(cnt_str, line, &format!("{path}.succ[{bid}].cnt"))?;
        if let Some(last) = out.last() {
            if bid as u32 <= last.bid {
                return Err(schema(
                    format!("{path}.succ"),
                    "succ bids must be unique and ascending",
                ));
            }
        }
        out.push(SuccessorRecord {
            bid: bid as u32,
            cnt,
        });
        rest = &after_cnt[close + 2..];
        if rest.is_empty() {
            return Ok(out);
        }
        rest = rest
            .strip_prefix(", ")
            .ok_or_else(|| syntax(line, format!("malformed succ separator near `{rest}`")))?;
    }
}

/// Serializes to the canonical byte form. Blocks and successor records are
/// emitted in ascending bid order regardless of their in-memory order.
pub fn write_profile(p: &ProfileFile) -> String {
    let mut out = String::new();
    if p.functions.is_empty() {
        out.push_str("functions: []\n");
        return out;
    }
    out.push_str("functions:\n");
    for f in &p.functions {
        out.push_str("  - name: ");
        out.push_str(&quote(&f.name));
        out.push('\n');
        out.push_str(&format!("    fhash: \"{:016x}\"\n", f.fhash));
        out.push_str(&format!("    exec: {}\n", f.exec));
        out.push_str(&format!("    nblocks: {}\n", f.nblocks));
        out.push_str("    blocks:\n");
        let mut blocks: Vec<&BlockProfile> = f.blocks.iter().collect();
        blocks.sort_by_key(|b| b.bid);
        for b in blocks {
            out.push_str(&format!("      - bid: {}\n", b.bid));
            out.push_str(&format!("        hash: \"{:016x}\"\n", b.hash));
            out.push_str(&format!("        exec: {}\n", b.exec));
            let mut succ: Vec<&SuccessorRecord> = b.succ.iter().collect();
            succ.sort_by_key(|s| s.bid);
            if succ.is_empty() {
                out.push_str("        succ: []\n");
            } else {
                out.push_str("        succ: [ ");
                for (i, s) in succ.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&format!("{{ bid: {}, cnt: {} }}", s.bid, s.cnt));
                }
                out.push_str(" ]\n");
            }
        }
    }
    out
}

/// Builds a [`FunctionProfile`] from measured block and jump counts on `cfg`.
/// Hashes are recomputed from the CFG; absent map entries mean a count of
/// zero for blocks and *unknown* for jumps (no succ record is emitted).
pub fn profile_from_execution(
    cfg: &FunctionCfg,
    block_counts: &BTreeMap<u32, u64>,
    jump_counts: &BTreeMap<(u32, u32), u64>,
) -> Result<FunctionProfile, ProfileError> {
    let ids: BTreeSet<u32> = cfg.blocks.iter().map(|b| b.id).collect();
    for id in block_counts.keys() {
        if !ids.contains(id) {
            return Err(schema(
                format!("function \"{}\"", cfg.name),
                format!("unknown block id {id} in block counts"),
            ));
        }
    }
    let edges: BTreeSet<(u32, u32)> = cfg.edges().into_iter().collect();
    for e in jump_counts.keys() {
        if !edges.contains(e) {
            return Err(schema(
                format!("function \"{}\"", cfg.name),
                format!("unknown edge {:?} in jump counts", e),
            ));
        }
    }
    let hashes = hashing::blended_hashes(cfg);
    let mut blocks: Vec<BlockProfile> = cfg
        .blocks
        .iter()
        .map(|b| {
            let mut succ: Vec<SuccessorRecord> = b
                .successors
                .iter()
                .filter_map(|&s| {
                    jump_counts
                        .get(&(b.id, s))
                        .map(|&cnt| SuccessorRecord { bid: s, cnt })
                })
                .collect();
            succ.sort_by_key(|s| s.bid);
            BlockProfile {
                bid: b.id,
                hash: hashes[&b.id].packed(),
                exec: block_counts.get(&b.id).copied().unwrap_or(0),
                succ,
            }
        })
        .collect();
    blocks.sort_by_key(|b| b.bid);
    Ok(FunctionProfile {
        name: cfg.name.clone(),
        fhash: hashing::function_hash(cfg),
        exec: block_counts.get(&cfg.entry).copied().unwrap_or(0),
        nblocks: cfg.blocks.len() as u32,
        blocks,
    })
}
