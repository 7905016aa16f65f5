//! PIM command IR: the ordered stream a kernel generator emits and the
//! timing engine consumes, plus validation, statistics and a line-oriented
//! text form.
//!
//! Text form, one command per line:
//!
//! ```text
//! # kernel=vector-sum size=4096 banks=16 word=32 preopen=-
//! ACT all 3 0 - - 0
//! PIM_LOAD even 3 0 0 - 0
//! PIM_STORE b5 7 12 - 4 0
//! ```
//!
//! Fields are `kind scope row col dst src data`; scope is `all`, `even`,
//! `odd` or `b<bank>`, registers are indices or `-`, data is 0/1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysmodel::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandKind {
    Act,
    PimLoad,
    PimAdd,
    PimMac,
    PimStore,
    Read,
    Write,
}

impl CommandKind {
    pub const ALL: [CommandKind; 7] = [
        CommandKind::Act,
        CommandKind::PimLoad,
        CommandKind::PimAdd,
        CommandKind::PimMac,
        CommandKind::PimStore,
        CommandKind::Read,
        CommandKind::Write,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::PimLoad => "PIM_LOAD",
            CommandKind::PimAdd => "PIM_ADD",
            CommandKind::PimMac => "PIM_MAC",
            CommandKind::PimStore => "PIM_STORE",
            CommandKind::Read => "READ",
            CommandKind::Write => "WRITE",
        }
    }

    pub fn is_compute(self) -> bool {
        matches!(
            self,
            CommandKind::PimLoad | CommandKind::PimAdd | CommandKind::PimMac | CommandKind::PimStore
        )
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    AllBank,
    EvenBanks,
    OddBanks,
    SingleBank(u16),
}

impl Scope {
    pub fn is_multi(self) -> bool {
        !matches!(self, Scope::SingleBank(_))
    }

    pub fn parity(self) -> Option<Parity> {
        match self {
            Scope::EvenBanks => Some(Parity::Even),
            Scope::OddBanks => Some(Parity::Odd),
            Scope::SingleBank(b) => Some(if b % 2 == 0 { Parity::Even } else { Parity::Odd }),
            Scope::AllBank => None,
        }
    }

    pub fn of_parity(p: Parity) -> Self {
        match p {
            Parity::Even => Scope::EvenBanks,
            Parity::Odd => Scope::OddBanks,
        }
    }

    pub fn contains(self, bank: u16) -> bool {
        match self {
            Scope::AllBank => true,
            Scope::EvenBanks => bank.is_multiple_of(2),
            Scope::OddBanks => bank % 2 == 1,
            Scope::SingleBank(b) => b == bank,
        }
    }

    /// Banks targeted within a pCH of `banks` banks.
    pub fn banks(self, banks: u16) -> impl Iterator<Item = u16> {
        let (start, step, end) = match self {
            Scope::AllBank => (0, 1, banks),
            Scope::EvenBanks => (0, 2, banks),
            Scope::OddBanks => (1, 2, banks),
            Scope::SingleBank(b) => (b, 1, b.saturating_add(1)),
        };
        (start..end).step_by(step as usize)
    }

    fn class(self) -> usize {
        match self {
            Scope::AllBank => 0,
            Scope::EvenBanks => 1,
            Scope::OddBanks => 2,
            Scope::SingleBank(_) => 3,
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::AllBank => f.write_str("all"),
            Scope::EvenBanks => f.write_str("even"),
            Scope::OddBanks => f.write_str("odd"),
            Scope::SingleBank(b) => write!(f, "b{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PimCommand {
    pub kind: CommandKind,
    pub scope: Scope,
    pub row: u32,
    /// Column in word units.
    pub col: u32,
    pub dst_reg: Option<u8>,
    pub src_reg: Option<u8>,
    /// An operand or payload travels on the pCH data bus.
    pub carries_data: bool,
}

impl PimCommand {
    pub fn act(scope: Scope, row: u32) -> Self {
        Self {
            kind: CommandKind::Act,
            scope,
            row,
            col: 0,
            dst_reg: None,
            src_reg: None,
            carries_data: false,
        }
    }

    pub fn load(scope: Scope, row: u32, col: u32, dst: u8) -> Self {
        Self {
            kind: CommandKind::PimLoad,
            scope,
            row,
            col,
            dst_reg: Some(dst),
            src_reg: None,
            carries_data: false,
        }
    }

    /// `dst = row[col] + src` (or `+ bus operand` when `carries_data`).
    pub fn add(scope: Scope, row: u32, col: u32, dst: u8, src: Option<u8>, carries_data: bool) -> Self {
        Self {
            kind: CommandKind::PimAdd,
            scope,
            row,
            col,
            dst_reg: Some(dst),
            src_reg: src,
            carries_data,
        }
    }

    /// `acc += row[col] * broadcast immediate`.
    pub fn mac(scope: Scope, row: u32, col: u32, acc: u8) -> Self {
        Self {
            kind: CommandKind::PimMac,
            scope,
            row,
            col,
            dst_reg: Some(acc),
            src_reg: Some(acc),
            carries_data: true,
        }
    }

    pub fn store(scope: Scope, row: u32, col: u32, src: u8) -> Self {
        Self {
            kind: CommandKind::PimStore,
            scope,
            row,
            col,
            dst_reg: None,
            src_reg: Some(src),
            carries_data: false,
        }
    }

    pub fn read(bank: u16, row: u32, col: u32) -> Self {
        Self {
            kind: CommandKind::Read,
            scope: Scope::SingleBank(bank),
            row,
            col,
            dst_reg: None,
            src_reg: None,
            carries_data: true,
        }
    }

    pub fn write(bank: u16, row: u32, col: u32) -> Self {
        Self {
            kind: CommandKind::Write,
            scope: Scope::SingleBank(bank),
            row,
            col,
            dst_reg: None,
            src_reg: None,
            carries_data: true,
        }
    }

    pub fn is_act(&self) -> bool {
        self.kind == CommandKind::Act
    }

    /// Multi-bank compute command (subject to FIFO issue).
    pub fn is_multibank_compute(&self) -> bool {
        self.kind.is_compute() && self.scope.is_multi()
    }

    pub fn reads_reg(&self) -> Option<u8> {
        match self.kind {
            CommandKind::PimAdd | CommandKind::PimMac | CommandKind::PimStore => self.src_reg,
            _ => None,
        }
    }

    pub fn writes_reg(&self) -> Option<u8> {
        match self.kind {
            CommandKind::PimLoad | CommandKind::PimAdd | CommandKind::PimMac => self.dst_reg,
            _ => None,
        }
    }

    fn to_line(self) -> String {
        let reg = |r: Option<u8>| r.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        format!(
            "{} {} {} {} {} {} {}",
            self.kind.name(),
            self.scope,
            self.row,
            self.col,
            reg(self.dst_reg),
            reg(self.src_reg),
            self.carries_data as u8
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub kernel: String,
    pub problem_size: u64,
    pub banks: u16,
    pub word_bytes: u32,
    /// Every bank starts with this row open and ready.
    pub preopened_row: Option<u32>,
}

impl StreamMeta {
    pub fn new(kernel: impl Into<String>, problem_size: u64, cfg: &SystemConfig) -> Self {
        Self {
            kernel: kernel.into(),
            problem_size,
            banks: cfg.geometry.banks_per_pch as u16,
            word_bytes: cfg.geometry.word_bytes,
            preopened_row: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandStream {
    pub meta: StreamMeta,
    pub commands: Vec<PimCommand>,
}

impl CommandStream {
    pub fn new(meta: StreamMeta) -> Self {
        Self {
            meta,
            commands: Vec::new(),
        }
    }

    pub fn with_commands(meta: StreamMeta, commands: Vec<PimCommand>) -> Self {
        Self { meta, commands }
    }

    pub fn push(&mut self, cmd: PimCommand) {
        self.commands.push(cmd);
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PimCommand> {
        self.commands.iter()
    }

    /// Parity tag of each command (`None` for all-bank scope).
    pub fn parity_tags(&self) -> Vec<Option<Parity>> {
        self.commands.iter().map(|c| c.scope.parity()).collect()
    }

    pub fn to_text(&self) -> String {
        let m = &self.meta;
        let mut out = format!(
            "# kernel={} size={} banks={} word={} preopen={}\n",
            m.kernel,
            m.problem_size,
            m.banks,
            m.word_bytes,
            m.preopened_row.map(|r| r.to_string()).unwrap_or_else(|| "-".into())
        );
        for c in &self.commands {
            out.push_str(&c.to_line());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut meta = StreamMeta {
            kernel: "unnamed".into(),
            problem_size: 0,
            banks: 16,
            word_bytes: 32,
            preopened_row: None,
        };
        let mut commands = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::TraceParse { line: line_no, msg };
            if let Some(header) = line.strip_prefix('#') {
                for tok in header.split_whitespace() {
                    let Some((k, v)) = tok.split_once('=') else { continue };
                    let bad = || err(format!("bad header value `{tok}`"));
                    match k {
                        "kernel" => meta.kernel = v.to_string(),
                        "size" => meta.problem_size = v.parse().map_err(|_| bad())?,
                        "banks" => meta.banks = v.parse().map_err(|_| bad())?,
                        "word" => meta.word_bytes = v.parse().map_err(|_| bad())?,
                        "preopen" => {
                            meta.preopened_row = if v == "-" {
                                None
                            } else {
                                Some(v.parse().map_err(|_| bad())?)
                            }
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 {
                return Err(err(format!("expected 7 fields, found {}", f.len())));
            }
            let kind = CommandKind::parse(f[0]).ok_or_else(|| err(format!("unknown kind `{}`", f[0])))?;
            let scope = match f[1] {
                "all" => Scope::AllBank,
                "even" => Scope::EvenBanks,
                "odd" => Scope::OddBanks,
                s => Scope::SingleBank(
                    s.strip_prefix('b')
                        .and_then(|b| b.parse().ok())
                        .ok_or_else(|| err(format!("bad scope `{s}`")))?,
                ),
            };
            let num = |s: &str, what: &str| -> Result<u32> {
                s.parse().map_err(|_| err(format!("bad {what} `{s}`")))
            };
            let reg = |s: &str| -> Result<Option<u8>> {
                if s == "-" {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| err(format!("bad register `{s}`")))
                }
            };
            let carries_data = match f[6] {
                "0" => false,
                "1" => true,
                s => return Err(err(format!("bad data flag `{s}`"))),
            };
            commands.push(PimCommand {
                kind,
                scope,
                row: num(f[2], "row")?,
                col: num(f[3], "col")?,
                dst_reg: reg(f[4])?,
                src_reg: reg(f[5])?,
                carries_data,
            });
        }
        Ok(Self { meta, commands })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    RegisterBounds,
    RegisterDependency,
    RowBounds,
    ColumnBounds,
    ScopeIllegal,
    MissingOperand,
    DataFlag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub position: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {:?}: {}", self.position, self.kind, self.detail)
    }
}

/// Maximum number of violations reported.
pub const MAX_VIOLATIONS: usize = 32;

pub fn validate(stream: &CommandStream, cfg: &SystemConfig) -> std::result::Result<(), Vec<Violation>> {
    let g = &cfg.geometry;
    let regs = cfg.pim.registers_per_alu;
    let banks = g.banks_per_pch;
    let units = g.pim_units_per_pch() as usize;
    let per_unit = g.banks_per_pim_unit() as u16;
    let words = g.words_per_row();
    // written[unit][reg]
    let mut written = vec![vec![false; regs as usize]; units];
    let mut out = Vec::new();

    for (pos, c) in stream.commands.iter().enumerate() {
        if out.len() >= MAX_VIOLATIONS {
            break;
        }
        let mut v = |kind, detail: String| {
            out.push(Violation {
                position: pos,
                kind,
                detail,
            })
        };

        if let Scope::SingleBank(b) = c.scope {
            if b as u32 >= banks {
                v(ViolationKind::ScopeIllegal, format!("bank {b} >= {banks} banks per pCH"));
                continue;
            }
        }
        if matches!(c.kind, CommandKind::Read | CommandKind::Write) && c.scope.is_multi() {
            v(ViolationKind::ScopeIllegal, format!("{} must be single-bank", c.kind.name()));
        }
        if c.row >= g.rows_per_bank {
            v(ViolationKind::RowBounds, format!("row {} >= {}", c.row, g.rows_per_bank));
        }
        if !c.is_act() && c.col >= words {
            v(ViolationKind::ColumnBounds, format!("col {} >= {words}", c.col));
        }

        let needs_dst = matches!(c.kind, CommandKind::PimLoad | CommandKind::PimAdd | CommandKind::PimMac);
        let needs_src = matches!(c.kind, CommandKind::PimStore | CommandKind::PimMac);
        if needs_dst && c.dst_reg.is_none() {
            v(ViolationKind::MissingOperand, format!("{} requires a destination register", c.kind.name()));
        }
        if needs_src && c.src_reg.is_none() {
            v(ViolationKind::MissingOperand, format!("{} requires a source register", c.kind.name()));
        }
        if !c.kind.is_compute() && (c.dst_reg.is_some() || c.src_reg.is_some()) {
            v(ViolationKind::MissingOperand, format!("{} takes no registers", c.kind.name()));
        }
        let data_ok = match c.kind {
            CommandKind::PimMac | CommandKind::Read | CommandKind::Write => c.carries_data,
            CommandKind::Act | CommandKind::PimLoad | CommandKind::PimStore => !c.carries_data,
            CommandKind::PimAdd => true,
        };
        if !data_ok {
            v(ViolationKind::DataFlag, format!("{} has inconsistent data flag", c.kind.name()));
        }

        let mut bounds_ok = true;
        for r in [c.dst_reg, c.src_reg].into_iter().flatten() {
            if r as u32 >= regs {
                v(ViolationKind::RegisterBounds, format!("register r{r} >= {regs} registers"));
                bounds_ok = false;
            }
        }
        if !bounds_ok {
            continue;
        }

        let unit_range = match c.scope {
            Scope::SingleBank(b) => {
                let u = (b / per_unit) as usize;
                u..u + 1
            }
            _ => 0..units,
        };
        if let Some(r) = c.reads_reg() {
            if let Some(u) = unit_range.clone().find(|&u| !written[u][r as usize]) {
                v(
                    ViolationKind::RegisterDependency,
                    format!("reads r{r} of PIM unit {u} before any write to it"),
                );
            }
        }
        if let Some(r) = c.writes_reg() {
            for u in unit_range {
                written[u][r as usize] = true;
            }
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        out.truncate(MAX_VIOLATIONS);
        Err(out)
    }
}

/// Validate, converting violations into [`Error::Validation`].
pub fn ensure_valid(stream: &CommandStream, cfg: &SystemConfig) -> Result<()> {
    validate(stream, cfg).map_err(Error::Validation)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StreamStats {
    /// counts[kind][scope class], scope class = all/even/odd/single.
    pub counts: [[u64; 4]; 7],
    pub rows_activated: Vec<u64>,
    pub data_bytes: u64,
    pub no_data_commands: u64,
    pub total: u64,
}

impl StreamStats {
    pub fn kind(&self, kind: CommandKind) -> u64 {
        self.counts[kind.index()].iter().sum()
    }

    pub fn multibank(&self, kind: CommandKind) -> u64 {
        self.counts[kind.index()][..3].iter().sum()
    }

    pub fn single_bank(&self, kind: CommandKind) -> u64 {
        self.counts[kind.index()][3]
    }

    pub fn acts_on_bank(&self, bank: u16) -> u64 {
        self.rows_activated.get(bank as usize).copied().unwrap_or(0)
    }

    pub fn compute_commands(&self) -> u64 {
        CommandKind::ALL
            .iter()
            .filter(|k| k.is_compute())
            .map(|&k| self.kind(k))
            .sum()
    }
}

pub fn stats(stream: &CommandStream) -> StreamStats {
    let banks = stream.meta.banks;
    let mut s = StreamStats {
        rows_activated: vec![0; banks as usize],
        ..Default::default()
    };
    for c in &stream.commands {
        s.counts[c.kind.index()][c.scope.class()] += 1;
        s.total += 1;
        if c.carries_data {
            s.data_bytes += stream.meta.word_bytes as u64;
        } else {
            s.no_data_commands += 1;
        }
        if c.is_act() {
            for b in c.scope.banks(banks) {
                s.rows_activated[b as usize] += 1;
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> StreamMeta {
        StreamMeta::new("t", 0, &SystemConfig::default())
    }

    #[test]
    fn empty_stream_is_valid_with_zero_stats() {
        let s = CommandStream::new(meta());
        assert!(validate(&s, &SystemConfig::default()).is_ok());
        let st = stats(&s);
        assert_eq!(st.total, 0);
        assert_eq!(st.data_bytes, 0);
        assert!(st.rows_activated.iter().all(|&r| r == 0));
    }

    #[test]
    fn register_off_by_one() {
        let cfg = SystemConfig::default();
        let s = CommandStream::with_commands(
            meta(),
            vec![PimCommand::add(Scope::EvenBanks, 0, 0, 16, None, false)],
        );
        let v = validate(&s, &cfg).unwrap_err();
        assert_eq!(v[0].kind, ViolationKind::RegisterBounds);
        assert_eq!(v[0].position, 0);
    }

    #[test]
    fn register_dependency_order() {
        let cfg = SystemConfig::default();
        let add = PimCommand::add(Scope::EvenBanks, 0, 0, 0, None, false);
        let store = PimCommand::store(Scope::EvenBanks, 1, 0, 0);
        let ok = CommandStream::with_commands(meta(), vec![add, store]);
        assert!(validate(&ok, &cfg).is_ok());
        let bad = CommandStream::with_commands(meta(), vec![store, add]);
        let v = validate(&bad, &cfg).unwrap_err();
        assert_eq!(v[0].kind, ViolationKind::RegisterDependency);
        assert_eq!(v[0].position, 0);
    }

    #[test]
    fn single_bank_write_does_not_cover_other_units() {
        let cfg = SystemConfig::default();
        let s = CommandStream::with_commands(
            meta(),
            vec![
                PimCommand::load(Scope::SingleBank(0), 0, 0, 3),
                PimCommand::store(Scope::SingleBank(1), 0, 0, 3),
                PimCommand::store(Scope::EvenBanks, 0, 0, 3),
            ],
        );
        let v = validate(&s, &cfg).unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].position, 2);
    }

    #[test]
    fn scope_and_bounds_violations() {
        let cfg = SystemConfig::default();
        let mut read_all = PimCommand::read(0, 0, 0);
        read_all.scope = Scope::AllBank;
        let s = CommandStream::with_commands(
            meta(),
            vec![
                read_all,
                PimCommand::read(16, 0, 0),
                PimCommand::read(0, 40_000, 0),
                PimCommand::read(0, 0, 32),
            ],
        );
        let v = validate(&s, &cfg).unwrap_err();
        let kinds: Vec<_> = v.iter().map(|x| x.kind.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                ViolationKind::ScopeIllegal,
                ViolationKind::ScopeIllegal,
                ViolationKind::RowBounds,
                ViolationKind::ColumnBounds
            ]
        );
    }

    #[test]
    fn violations_are_capped() {
        let cfg = SystemConfig::default();
        let cmds = vec![PimCommand::store(Scope::AllBank, 0, 0, 1); 100];
        let v = validate(&CommandStream::with_commands(meta(), cmds), &cfg).unwrap_err();
        assert_eq!(v.len(), MAX_VIOLATIONS);
    }

    #[test]
    fn stats_counts() {
        let s = CommandStream::with_commands(
            meta(),
            vec![
                PimCommand::act(Scope::AllBank, 1),
                PimCommand::act(Scope::EvenBanks, 2),
                PimCommand::mac(Scope::OddBanks, 1, 0, 0),
                PimCommand::read(3, 0, 0),
            ],
        );
        let st = stats(&s);
        assert_eq!(st.total, 4);
        assert_eq!(st.kind(CommandKind::Act), 2);
        assert_eq!(st.acts_on_bank(0), 2);
        assert_eq!(st.acts_on_bank(1), 1);
        assert_eq!(st.data_bytes, 64);
        assert_eq!(st.no_data_commands, 2);
        assert_eq!(st.counts.iter().flatten().sum::<u64>(), st.total);
    }

    #[test]
    fn text_round_trip() {
        let mut m = meta();
        m.preopened_row = Some(7);
        let s = CommandStream::with_commands(
            m,
            vec![
                PimCommand::act(Scope::AllBank, 1),
                PimCommand::load(Scope::EvenBanks, 1, 3, 2),
                PimCommand::add(Scope::SingleBank(9), 4, 5, 1, None, true),
                PimCommand::store(Scope::SingleBank(9), 4, 5, 1),
            ],
        );
        let text = s.to_text();
        assert!(text.lines().nth(2).unwrap() == "PIM_LOAD even 1 3 2 - 0");
        assert_eq!(CommandStream::from_text(&text).unwrap(), s);
        assert!(CommandStream::from_text("BOGUS all 0 0 - - 0").is_err());
    }
}
