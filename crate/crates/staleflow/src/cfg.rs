//! Program representation: functions as control-flow graphs of basic blocks,
//! plus validation and (de)serialization of the line-oriented CFG text format.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

/// Classification of an instruction, used by hashing (which ignores some
/// kinds) and by the mutation engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstrKind {
    Normal,
    Pseudo,
    Nop,
    UncondBranch,
    CondBranch,
    Call,
    Return,
}

impl InstrKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InstrKind::Normal => "normal",
            InstrKind::Pseudo => "pseudo",
            InstrKind::Nop => "nop",
            InstrKind::UncondBranch => "unconditional-branch",
            InstrKind::CondBranch => "conditional-branch",
            InstrKind::Call => "call",
            InstrKind::Return => "return",
        }
    }

    pub fn parse(s: &str) -> Option<InstrKind> {
        Some(match s {
            "normal" => InstrKind::Normal,
            "pseudo" => InstrKind::Pseudo,
            "nop" => InstrKind::Nop,
            "unconditional-branch" => InstrKind::UncondBranch,
            "conditional-branch" => InstrKind::CondBranch,
            "call" => InstrKind::Call,
            "return" => InstrKind::Return,
            _ => return None,
        })
    }
}

impl fmt::Display for InstrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub kind: InstrKind,
    pub opcode: String,
    pub operands: Vec<String>,
}

impl Instruction {
    pub fn new(kind: InstrKind, opcode: impl Into<String>, operands: &[&str]) -> Instruction {
        Instruction {
            kind,
            opcode: opcode.into(),
            operands: operands.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: u32,
    pub offset: u64,
    pub instructions: Vec<Instruction>,
    pub successors: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionCfg {
    pub name: String,
    /// Blocks in layout order; the entry block is listed first.
    pub blocks: Vec<BasicBlock>,
    pub entry: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BinaryCfg {
    pub functions: Vec<FunctionCfg>,
}

/// A broken invariant found by [`FunctionCfg::validate`]. Violations are data,
/// not errors: callers decide whether to reject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Offending block, when the rule concerns one block.
    pub block: Option<u32>,
    pub rule: String,
}

/// True if the token survives a write→parse round trip: non-empty, no
/// whitespace (tokens are space-separated), and no leading `#` (which would
/// start a comment).
fn writable_token(tok: &str) -> bool {
    !tok.is_empty() && !tok.chars().any(char::is_whitespace) && !tok.starts_with('#')
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.block {
            Some(b) => write!(f, "block {}: {}", b, self.rule),
            None => f.write_str(&self.rule),
        }
    }
}

impl FunctionCfg {
    pub fn block(&self, id: u32) -> Option<&BasicBlock> {
        self.blocks.iter().find(|b| b.id == id)
    }

    /// Block ids with no successors (the exit set T*).
    pub fn exits(&self) -> Vec<u32> {
        self.blocks
            .iter()
            .filter(|b| b.successors.is_empty())
            .map(|b| b.id)
            .collect()
    }

    /// All edges in deterministic order: block list order, then successor order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for &s in &b.successors {
                out.push((b.id, s));
            }
        }
        out
    }

    /// Predecessor lists keyed by block id; every block gets an entry.
    pub fn predecessors(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut preds: BTreeMap<u32, Vec<u32>> =
            self.blocks.iter().map(|b| (b.id, Vec::new())).collect();
        for b in &self.blocks {
            for &s in &b.successors {
                if let Some(p) = preds.get_mut(&s) {
                    p.push(b.id);
                }
            }
        }
        preds
    }

    /// Checks every structural invariant; empty result means the CFG is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut ids = BTreeSet::new();
        let mut offsets: BTreeMap<u64, u32> = BTreeMap::new();
        for b in &self.blocks {
            if !ids.insert(b.id) {
                out.push(Violation {
                    block: Some(b.id),
                    rule: "duplicate block id".to_string(),
                });
            }
            if let Some(&other) = offsets.get(&b.offset) {
                out.push(Violation {
                    block: Some(b.id),
                    rule: format!("duplicate offset {} (also on block {})", b.offset, other),
                });
            } else {
                offsets.insert(b.offset, b.id);
            }
            for ins in &b.instructions {
                if !writable_token(&ins.opcode) {
                    out.push(Violation {
                        block: Some(b.id),
                        rule: format!("bad opcode {:?}", ins.opcode),
                    });
                }
                for op in &ins.operands {
                    if !writable_token(op) {
                        out.push(Violation {
                            block: Some(b.id),
                            rule: format!("bad operand {:?}", op),
                        });
                    }
                }
                if ins.kind == InstrKind::Nop && !ins.operands.is_empty() {
                    out.push(Violation {
                        block: Some(b.id),
                        rule: "nop instruction with operands".to_string(),
                    });
                }
            }
            let mut seen = BTreeSet::new();
            for &s in &b.successors {
                if !seen.insert(s) {
                    out.push(Violation {
                        block: Some(b.id),
                        rule: format!("duplicate successor {}", s),
                    });
                }
            }
        }
        // Dangling successors need the complete id set.
        for b in &self.blocks {
            for &s in &b.successors {
                if !ids.contains(&s) {
                    out.push(Violation {
                        block: Some(b.id),
                        rule: format!("dangling successor {}", s),
                    });
                }
            }
        }
        if !ids.contains(&self.entry) {
            out.push(Violation {
                block: None,
                rule: format!("entry {} is not a block", self.entry),
            });
        }
        out
    }

    /// Ids reachable from the entry via directed paths (entry included).
    pub fn reachable_blocks(&self) -> BTreeSet<u32> {
        let by_id: BTreeMap<u32, &BasicBlock> = self.blocks.iter().map(|b| (b.id, b)).collect();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        if by_id.contains_key(&self.entry) {
            seen.insert(self.entry);
            queue.push_back(self.entry);
        }
        while let Some(id) = queue.pop_front() {
            for &s in &by_id[&id].successors {
                if by_id.contains_key(&s) && seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        seen
    }
}

impl BinaryCfg {
    pub fn function(&self, name: &str) -> Option<&FunctionCfg> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Validates every function plus the cross-function name-uniqueness rule.
    /// Returns (function name, violation) pairs.
    pub fn validate(&self) -> Vec<(String, Violation)> {
        let mut out = Vec::new();
        let mut names = BTreeSet::new();
        for f in &self.functions {
            if !names.insert(f.name.as_str()) {
                out.push((
                    f.name.clone(),
                    Violation {
                        block: None,
                        rule: "duplicate function name".to_string(),
                    },
                ));
            }
            for v in f.validate() {
                out.push((f.name.clone(), v));
            }
        }
        out
    }
}

/// Parse failure for the CFG text format, with a 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfgParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for CfgParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for CfgParseError {}

fn err(line: usize, message: impl Into<String>) -> CfgParseError {
    CfgParseError {
        line,
        message: message.into(),
    }
}

/// Parses the line-oriented CFG text format:
///
/// ```text
/// function <name>
/// block <id> offset <offset>
/// instr <kind> <opcode> [<operand> ...]
/// succ <id> [<id> ...]
/// end
/// ```
///
/// The first `block` of each function is its entry. Blank lines and `#`
/// comments are skipped. Files violating CFG invariants are rejected.
pub fn parse_binary_cfg(text: &str) -> Result<BinaryCfg, CfgParseError> {
    let mut functions: Vec<FunctionCfg> = Vec::new();
    let mut cur: Option<(String, Vec<BasicBlock>, usize)> = None; // name, blocks, "function" line
    let mut cur_block: Option<(BasicBlock, bool)> = None; // block, saw-succ-line

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap();
        match head {
            "function" => {
                if cur.is_some() {
                    return Err(err(lineno, "nested `function` (missing `end`?)"));
                }
                let name = tokens
                    .next()
                    .ok_or_else(|| err(lineno, "`function` requires a name"))?;
                if tokens.next().is_some() {
                    return Err(err(lineno, "trailing tokens after function name"));
                }
                cur = Some((name.to_string(), Vec::new(), lineno));
            }
            "block" => {
                let (_, blocks, _) = cur
                    .as_mut()
                    .ok_or_else(|| err(lineno, "`block` outside a function"))?;
                if let Some((b, _)) = cur_block.take() {
                    blocks.push(b);
                }
                let id = parse_num::<u32>(tokens.next(), lineno, "block id")?;
                match tokens.next() {
                    Some("offset") => {}
                    _ => return Err(err(lineno, "expected `offset` after block id")),
                }
                let offset = parse_num::<u64>(tokens.next(), lineno, "block offset")?;
                if tokens.next().is_some() {
                    return Err(err(lineno, "trailing tokens after block offset"));
                }
                cur_block = Some((
                    BasicBlock {
                        id,
                        offset,
                        instructions: Vec::new(),
                        successors: Vec::new(),
                    },
                    false,
                ));
            }
            "instr" => {
                let (b, saw_succ) = cur_block
                    .as_mut()
                    .ok_or_else(|| err(lineno, "`instr` outside a block"))?;
                if *saw_succ {
                    return Err(err(lineno, "`instr` after `succ`"));
                }
                let kind_tok = tokens
                    .next()
                    .ok_or_else(|| err(lineno, "`instr` requires a kind"))?;
                let kind = InstrKind::parse(kind_tok)
                    .ok_or_else(|| err(lineno, format!("unknown instruction kind `{kind_tok}`")))?;
                let opcode = tokens
                    .next()
                    .ok_or_else(|| err(lineno, "`instr` requires an opcode"))?;
                b.instructions.push(Instruction {
                    kind,
                    opcode: opcode.to_string(),
                    operands: tokens.map(|t| t.to_string()).collect(),
                });
            }
            "succ" => {
                let (b, saw_succ) = cur_block
                    .as_mut()
                    .ok_or_else(|| err(lineno, "`succ` outside a block"))?;
                if *saw_succ {
                    return Err(err(lineno, "duplicate `succ` line"));
                }
                *saw_succ = true;
                for t in tokens {
                    b.successors
                        .push(parse_num::<u32>(Some(t), lineno, "successor id")?);
                }
            }
            "end" => {
                let (name, mut blocks, _) = cur
                    .take()
                    .ok_or_else(|| err(lineno, "`end` outside a function"))?;
                if let Some((b, _)) = cur_block.take() {
                    blocks.push(b);
                }
                if blocks.is_empty() {
                    return Err(err(lineno, format!("function `{name}` has no blocks")));
                }
                let entry = blocks[0].id;
                let func = FunctionCfg {
                    name,
                    blocks,
                    entry,
                };
                if let Some(v) = func.validate().first() {
                    return Err(err(lineno, format!("function `{}`: {v}", func.name)));
                }
                functions.push(func);
            }
            other => return Err(err(lineno, format!("unknown directive `{other}`"))),
        }
    }
    if let Some((name, _, line)) = cur {
        return Err(err(line, format!("function `{name}` is missing `end`")));
    }
    let binary = BinaryCfg { functions };
    let mut names = BTreeSet::new();
    for f in &binary.functions {
        if !names.insert(f.name.as_str()) {
            return Err(err(0, format!("duplicate function name `{}`", f.name)));
        }
    }
    Ok(binary)
}

fn strip_comment(line: &str) -> &str {
    // A `#` at line start or after whitespace begins a comment; `#` embedded
    // in a token does not.
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

fn parse_num<T: std::str::FromStr>(
    tok: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, CfgParseError> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse::<T>()
        .map_err(|_| err(line, format!("invalid {what} `{tok}`")))
}

/// Serializes to the text format parsed by [`parse_binary_cfg`]. Blocks are
/// written in list order, so the entry must be first for a faithful
/// round-trip (true of every CFG this crate constructs).
pub fn write_binary_cfg(binary: &BinaryCfg) -> String {
    let mut out = String::new();
    for f in &binary.functions {
        out.push_str("function ");
        out.push_str(&f.name);
        out.push('\n');
        for b in &f.blocks {
            out.push_str(&format!("block {} offset {}\n", b.id, b.offset));
            for ins in &b.instructions {
                out.push_str(&format!("instr {} {}", ins.kind, ins.opcode));
                for op in &ins.operands {
                    out.push(' ');
                    out.push_str(op);
                }
                out.push('\n');
            }
            if !b.successors.is_empty() {
                out.push_str("succ");
                for s in &b.successors {
                    out.push_str(&format!(" {s}"));
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(id: u32, offset: u64, succ: &[u32]) -> BasicBlock {
        BasicBlock {
            id,
            offset,
            instructions: vec![Instruction::new(InstrKind::Normal, "mov", &["r1", "r2"])],
            successors: succ.to_vec(),
        }
    }

    fn func(blocks: Vec<BasicBlock>) -> FunctionCfg {
        let entry = blocks[0].id;
        FunctionCfg {
            name: "f".to_string(),
            blocks,
            entry,
        }
    }

    #[test]
    fn validate_minimal_ok() {
        let f = func(vec![block(0, 0, &[])]);
        assert!(f.validate().is_empty());
    }

    #[test]
    fn validate_dangling_successor() {
        let f = func(vec![block(0, 0, &[7])]);
        let v = f.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].rule.contains("dangling successor"), "{:?}", v);
        assert_eq!(v[0].block, Some(0));
    }

    #[test]
    fn validate_duplicate_offset() {
        let f = func(vec![block(0, 16, &[1]), block(1, 16, &[])]);
        let v = f.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].rule.contains("duplicate offset"), "{:?}", v);
    }

    #[test]
    fn validate_nop_with_operands() {
        let mut f = func(vec![block(0, 0, &[])]);
        f.blocks[0]
            .instructions
            .push(Instruction::new(InstrKind::Nop, "nop", &["x"]));
        assert!(f.validate()[0].rule.contains("nop"));
    }

    #[test]
    fn validate_rejects_operands_the_writer_cannot_represent() {
        // Leading `#` would re-parse as a comment; embedded spaces would split
        // into two tokens. Both must be caught before anything is written.
        let mut f = func(vec![block(0, 0, &[])]);
        f.blocks[0]
            .instructions
            .push(Instruction::new(InstrKind::Normal, "add", &["#7"]));
        f.blocks[0]
            .instructions
            .push(Instruction::new(InstrKind::Normal, "mov", &["a b"]));
        let v = f.validate();
        assert_eq!(v.len(), 2, "{:?}", v);
        assert!(v.iter().all(|x| x.rule.contains("bad operand")), "{:?}", v);
        // A `#` inside a token is fine: comments only start at token edges.
        let mut ok = func(vec![block(0, 0, &[])]);
        ok.blocks[0]
            .instructions
            .push(Instruction::new(InstrKind::Normal, "ld", &["base#4"]));
        assert!(ok.validate().is_empty());
    }

    #[test]
    fn reachable_chain() {
        let f = func(vec![block(0, 0, &[1]), block(1, 4, &[2]), block(2, 8, &[])]);
        assert_eq!(
            f.reachable_blocks().into_iter().collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn reachable_skips_isolated() {
        let f = func(vec![block(0, 0, &[1]), block(1, 4, &[]), block(2, 8, &[])]);
        assert_eq!(
            f.reachable_blocks().into_iter().collect::<Vec<_>>(),
            vec![0, 1]
        );
    }

    #[test]
    fn reachable_diamond() {
        let f = func(vec![
            block(0, 0, &[1, 2]),
            block(1, 4, &[3]),
            block(2, 8, &[3]),
            block(3, 12, &[]),
        ]);
        assert_eq!(f.reachable_blocks().len(), 4);
    }

    #[test]
    fn reachable_idempotent_and_monotone() {
        let f = func(vec![block(0, 0, &[1]), block(1, 4, &[]), block(2, 8, &[])]);
        let r1 = f.reachable_blocks();
        assert_eq!(r1, f.reachable_blocks());
        let mut g = f.clone();
        g.blocks[1].successors.push(2);
        let r2 = g.reachable_blocks();
        assert!(r1.is_subset(&r2));
    }

    #[test]
    fn parse_write_round_trip() {
        let text = "function main\n\
                    block 0 offset 0\n\
                    instr normal mov r1 r2\n\
                    instr conditional-branch je lbl1\n\
                    succ 1 2\n\
                    block 1 offset 8\n\
                    instr normal add r1 r3\n\
                    succ 2\n\
                    block 2 offset 16\n\
                    instr return ret\n\
                    end\n";
        let parsed = parse_binary_cfg(text).unwrap();
        assert_eq!(parsed.functions.len(), 1);
        let f = &parsed.functions[0];
        assert_eq!(f.entry, 0);
        assert_eq!(f.blocks[0].successors, vec![1, 2]);
        assert_eq!(f.blocks[0].instructions[1].operands, vec!["lbl1"]);
        assert_eq!(write_binary_cfg(&parsed), text);
        assert_eq!(
            parse_binary_cfg(&write_binary_cfg(&parsed)).unwrap(),
            parsed
        );
    }

    #[test]
    fn parse_allows_comments_and_blanks() {
        let text = "# a binary\nfunction f\nblock 0 offset 0\n\n  # entry block\ninstr normal mov a\nend\n";
        let parsed = parse_binary_cfg(text).unwrap();
        assert_eq!(parsed.functions[0].blocks[0].instructions.len(), 1);
    }

    #[test]
    fn parse_rejects_invariant_violations() {
        let text = "function f\nblock 0 offset 0\nsucc 9\nend\n";
        let e = parse_binary_cfg(text).unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("dangling successor"), "{e}");
    }

    #[test]
    fn parse_rejects_duplicate_function() {
        let text = "function f\nblock 0 offset 0\nend\nfunction f\nblock 0 offset 0\nend\n";
        let e = parse_binary_cfg(text).unwrap_err();
        assert!(e.message.contains("duplicate function name"), "{e}");
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "function f\nblock 0 offset 0\ninstr bogus mov\nend\n";
        let e = parse_binary_cfg(text).unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("bogus"));
    }

    #[test]
    fn exits_are_empty_successor_blocks() {
        let f = func(vec![
            block(0, 0, &[1, 2]),
            block(1, 4, &[]),
            block(2, 8, &[]),
        ]);
        assert_eq!(f.exits(), vec![1, 2]);
    }
}
