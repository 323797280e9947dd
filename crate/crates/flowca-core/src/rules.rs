//! The (Omega, Lambda) rule language: an overarching motion (identity or a
//! uniform shift) plus a set of conditional traffic rules, compiled to
//! lookup tables.
//!
//! A traffic rule moves a particle one cell in a fixed direction when the
//! checked destination cell is empty and the joint state of the rule's
//! witness cells belongs to its condition set. Validity means the two
//! global requirements hold on every local pattern: no particle moves two
//! ways at once (R1) and no cell receives two particles at once (R2), plus
//! a visibility requirement that every cell state a move decision needs is
//! inside the neighborhood of each cell affected by that decision.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{NeighborhoodKind, Offset};
use crate::lut::Lut;

/// One of the eight compass moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Right,
    Left,
    Up,
    Down,
    UpRight,
    UpLeft,
    DownRight,
    DownLeft,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::Right,
        Direction::Left,
        Direction::Up,
        Direction::Down,
        Direction::UpRight,
        Direction::UpLeft,
        Direction::DownRight,
        Direction::DownLeft,
    ];

    pub const fn offset(self) -> Offset {
        match self {
            Direction::Right => Offset::new(1, 0),
            Direction::Left => Offset::new(-1, 0),
            Direction::Up => Offset::new(0, 1),
            Direction::Down => Offset::new(0, -1),
            Direction::UpRight => Offset::new(1, 1),
            Direction::UpLeft => Offset::new(-1, 1),
            Direction::DownRight => Offset::new(1, -1),
            Direction::DownLeft => Offset::new(-1, -1),
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Direction::Right => "right",
            Direction::Left => "left",
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::UpRight => "up-right",
            Direction::UpLeft => "up-left",
            Direction::DownRight => "down-right",
            Direction::DownLeft => "down-left",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Direction::ALL.into_iter().find(|d| d.name() == name)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The overarching regulation: every particle stands still or the whole
/// configuration shifts one cell per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Omega {
    Identity,
    Shift(Direction),
}

impl Omega {
    /// Default per-step displacement of every particle.
    pub fn offset(self) -> Offset {
        match self {
            Omega::Identity => Offset::ZERO,
            Omega::Shift(d) => d.offset(),
        }
    }

    /// A shift is expressible over `kind` iff the shifted-from cell is in
    /// the neighborhood.
    pub fn admissible_for(self, kind: NeighborhoodKind) -> bool {
        match self {
            Omega::Identity => true,
            Omega::Shift(d) => kind.contains(d.offset().neg()),
        }
    }

    pub fn name(self) -> String {
        match self {
            Omega::Identity => "id".to_string(),
            Omega::Shift(d) => format!("shift:{}", d.name()),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        if name == "id" {
            return Some(Omega::Identity);
        }
        name.strip_prefix("shift:")
            .and_then(Direction::from_name)
            .map(Omega::Shift)
    }
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A non-empty set of witness-cell patterns, stored as a bitmask over
/// pattern values. Pattern value = the witness string read as binary, most
/// significant bit first; e.g. for two witness cells, "10" has value 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    arity: u8,
    mask: u16,
}

impl Condition {
    pub fn new(arity: usize, mask: u16) -> Result<Self> {
        if !matches!(arity, 0 | 2 | 4) {
            return Err(Error::SpecJson(format!(
                "condition arity must be 0, 2 or 4, got {arity}"
            )));
        }
        let limit = 1u32 << (1usize << arity);
        if mask == 0 || (mask as u32) >= limit {
            return Err(Error::SpecJson(format!(
                "condition mask {mask:#x} out of range for arity {arity}"
            )));
        }
        Ok(Condition {
            arity: arity as u8,
            mask,
        })
    }

    /// The unconditional rule: every pattern allowed.
    pub fn full(arity: usize) -> Self {
        let mask = ((1u32 << (1usize << arity)) - 1) as u16;
        Condition::new(arity, mask).expect("full mask is valid")
    }

    pub fn single(arity: usize, value: u8) -> Self {
        Condition::new(arity, 1 << value).expect("singleton mask is valid")
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    pub fn mask(&self) -> u16 {
        self.mask
    }

    pub fn contains(&self, value: u8) -> bool {
        (self.mask >> value) & 1 == 1
    }

    /// Member patterns as binary strings in ascending order.
    pub fn patterns(&self) -> Vec<String> {
        (0..(1u8 << self.arity()))
            .filter(|&v| self.contains(v))
            .map(|v| {
                (0..self.arity())
                    .rev()
                    .map(|k| if (v >> k) & 1 == 1 { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }

    pub fn from_patterns<S: AsRef<str>>(patterns: &[S]) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::SpecJson("condition must be non-empty".into()));
        }
        let arity = patterns[0].as_ref().len();
        let mut mask = 0u16;
        for p in patterns {
            let p = p.as_ref();
            if p.len() != arity {
                return Err(Error::SpecJson(format!(
                    "condition patterns have mixed lengths ({arity} vs {})",
                    p.len()
                )));
            }
            let mut value = 0u8;
            for ch in p.chars() {
                value = (value << 1)
                    | match ch {
                        '0' => 0,
                        '1' => 1,
                        _ => {
                            return Err(Error::SpecJson(format!(
                                "condition pattern {p:?} contains {ch:?}"
                            )))
                        }
                    };
            }
            mask |= 1 << value;
        }
        Condition::new(arity, mask)
    }

    /// Number of distinct non-empty conditions over `arity` witness cells.
    pub fn count_nonempty(arity: usize) -> u64 {
        (1u64 << (1usize << arity)) - 1
    }

    /// All non-empty conditions over `arity` witness cells.
    pub fn enumerate(arity: usize) -> impl Iterator<Item = Condition> {
        (1..=Condition::count_nonempty(arity) as u16).map(move |mask| {
            Condition::new(arity, mask).expect("enumerated mask is in range")
        })
    }
}

/// A conditional traffic rule. `shifted` is meaningful only under a shift
/// overarching rule: the rule then redirects the particle's landing cell
/// sideways relative to the default shifted target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrafficRule {
    pub direction: Direction,
    pub shifted: bool,
    pub condition: Condition,
}

impl TrafficRule {
    pub fn new(direction: Direction, shifted: bool, condition: Condition) -> Self {
        TrafficRule {
            direction,
            shifted,
            condition,
        }
    }
}

/// A couple (Omega, Lambda) over a named neighborhood.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuleSpec {
    pub kind: NeighborhoodKind,
    pub omega: Omega,
    lambda: Vec<TrafficRule>,
}

impl RuleSpec {
    /// Rules are kept in a canonical order so that structural equality is
    /// set equality on Lambda.
    pub fn new(kind: NeighborhoodKind, omega: Omega, mut lambda: Vec<TrafficRule>) -> Self {
        lambda.sort_by_key(|r| (r.shifted, r.direction, r.condition));
        RuleSpec { kind, omega, lambda }
    }

    pub fn lambda(&self) -> &[TrafficRule] {
        &self.lambda
    }
}

/// Witness cells of a traffic rule, as offsets relative to the moving
/// particle, in row-major reading order (top row first, left to right).
///
/// Unshifted: the cells seen by both the source and its destination,
/// excluding the two themselves. Shifted (under a shift s): the default
/// landing cell s and the redirected landing cell s+d.
pub fn witness_offsets(
    kind: NeighborhoodKind,
    direction: Direction,
    shifted: bool,
    omega: Omega,
) -> Result<Vec<Offset>> {
    let d = direction.offset();
    let mut witnesses = if shifted {
        let s = match omega {
            Omega::Shift(sd) => sd.offset(),
            Omega::Identity => {
                return Err(Error::InadmissibleDirection {
                    direction: direction.name(),
                    kind,
                    reason: "shifted rules require a shift overarching rule".into(),
                })
            }
        };
        // Both landing cells must see the source, the checked cell and the
        // two witnesses.
        let required = [s.neg(), d.sub(s), d, d.neg(), s.add(d).neg()];
        if let Some(&missing) = required.iter().find(|&&o| !kind.contains(o)) {
            return Err(Error::InadmissibleDirection {
                direction: direction.name(),
                kind,
                reason: format!("a landing cell cannot see offset {missing}"),
            });
        }
        vec![s, s.add(d)]
    } else {
        if !kind.contains(d) {
            return Err(Error::InadmissibleDirection {
                direction: direction.name(),
                kind,
                reason: "the source cannot see the destination".into(),
            });
        }
        if !kind.contains(d.neg()) {
            return Err(Error::InadmissibleDirection {
                direction: direction.name(),
                kind,
                reason: "the destination cannot see the source".into(),
            });
        }
        kind.offsets()
            .iter()
            .copied()
            .filter(|&o| kind.contains(o.sub(d)) && o != Offset::ZERO && o != d)
            .collect()
    };
    witnesses.sort_by_key(|o| o.row_major_key());
    Ok(witnesses)
}

/// A concrete local pattern witnessing a requirement violation: cell
/// offsets (relative to the reported anchor cell) with their states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternWitness {
    pub cells: Vec<(Offset, bool)>,
}

impl fmt::Display for PatternWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .cells
            .iter()
            .map(|(o, b)| format!("{}={}", o, *b as u8))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Why a spec is not a valid number-conserving rule description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Malformed structure: inadmissible shift, duplicate rule slot,
    /// arity mismatch, or a shifted rule without a shift.
    Structure { reason: String },
    /// A cell state needed by a move decision is outside the neighborhood
    /// of a cell affected by that decision.
    Visibility { reason: String },
    /// Two rules enabled for the same particle (pattern relative to it).
    R1 {
        rules: (String, String),
        pattern: PatternWitness,
    },
    /// Two particles enabled to land on the same cell (pattern relative to
    /// the destination).
    R2 {
        moves: (String, String),
        pattern: PatternWitness,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Structure { reason } => write!(f, "structure: {reason}"),
            Violation::Visibility { reason } => write!(f, "visibility: {reason}"),
            Violation::R1 { rules, pattern } => write!(
                f,
                "R1: rules {} and {} both enabled on pattern [{pattern}]",
                rules.0, rules.1
            ),
            Violation::R2 { moves, pattern } => write!(
                f,
                "R2: moves {} and {} both target the same cell on pattern [{pattern}]",
                moves.0, moves.1
            ),
        }
    }
}

fn rule_label(rule: &TrafficRule) -> String {
    if rule.shifted {
        format!("shifted traffic-{}", rule.direction)
    } else {
        format!("traffic-{}", rule.direction)
    }
}

/// The move-resolution machinery shared by validation, compilation and the
/// particle simulator.
pub(crate) struct Engine<'a> {
    spec: &'a RuleSpec,
    omega_off: Offset,
    witnesses: Vec<Vec<Offset>>,
}

impl<'a> Engine<'a> {
    /// Requires structurally sound rules (witness templates must exist).
    pub(crate) fn new(spec: &'a RuleSpec) -> Result<Self> {
        let mut witnesses = Vec::with_capacity(spec.lambda.len());
        for rule in &spec.lambda {
            witnesses.push(witness_offsets(
                spec.kind,
                rule.direction,
                rule.shifted,
                spec.omega,
            )?);
        }
        Ok(Engine {
            spec,
            omega_off: spec.omega.offset(),
            witnesses,
        })
    }

    pub(crate) fn rule_count(&self) -> usize {
        self.spec.lambda.len()
    }

    pub(crate) fn omega_offset(&self) -> Offset {
        self.omega_off
    }

    /// Landing offset (relative to the particle) when rule `r` fires.
    pub(crate) fn rule_landing(&self, r: usize) -> Offset {
        let rule = &self.spec.lambda[r];
        let base = if rule.shifted {
            self.omega_off
        } else {
            Offset::ZERO
        };
        base.add(rule.direction.offset())
    }

    /// Whether rule `r` is enabled for a particle sitting at `base`,
    /// reading cell states through `at` (offsets relative to `at`'s frame).
    pub(crate) fn fires<F: Fn(Offset) -> bool>(&self, r: usize, base: Offset, at: &F) -> bool {
        let rule = &self.spec.lambda[r];
        if at(base.add(rule.direction.offset())) {
            return false; // checked destination occupied
        }
        let mut value = 0u8;
        for &w in &self.witnesses[r] {
            value = (value << 1) | at(base.add(w)) as u8;
        }
        rule.condition.contains(value)
    }

    /// Landing offset for a particle at `base`: the redirect when exactly
    /// one rule is enabled, the overarching default otherwise.
    pub(crate) fn resolve<F: Fn(Offset) -> bool>(&self, base: Offset, at: &F) -> Offset {
        let mut fired = None;
        let mut count = 0;
        for r in 0..self.rule_count() {
            if self.fires(r, base, at) {
                count += 1;
                fired = Some(r);
            }
        }
        match (count, fired) {
            (1, Some(r)) => base.add(self.rule_landing(r)),
            _ => base.add(self.omega_off),
        }
    }

    fn decision_offsets(&self, r: usize) -> Vec<Offset> {
        let mut cells = vec![self.spec.lambda[r].direction.offset()];
        cells.extend(self.witnesses[r].iter().copied());
        cells
    }

    fn all_decision_offsets(&self) -> Vec<Offset> {
        let mut cells = Vec::new();
        for r in 0..self.rule_count() {
            cells.extend(self.decision_offsets(r));
        }
        cells
    }
}

impl RuleSpec {
    /// Check the structural invariants, the visibility requirement, and
    /// requirements R1 and R2 exhaustively over local patterns. An empty
    /// result means the spec is valid; each violation carries a concrete
    /// witnessing pattern.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();

        if !self.omega.admissible_for(self.kind) {
            violations.push(Violation::Structure {
                reason: format!("{} is not expressible over {}", self.omega, self.kind),
            });
        }
        for (a, rule_a) in self.lambda.iter().enumerate() {
            for rule_b in self.lambda.iter().skip(a + 1) {
                if rule_a.direction == rule_b.direction && rule_a.shifted == rule_b.shifted {
                    violations.push(Violation::Structure {
                        reason: format!("duplicate rule slot {}", rule_label(rule_a)),
                    });
                }
            }
            if rule_a.shifted && self.omega == Omega::Identity {
                violations.push(Violation::Structure {
                    reason: format!(
                        "{} requires a shift overarching rule",
                        rule_label(rule_a)
                    ),
                });
            }
        }
        if !violations.is_empty() {
            return violations;
        }

        let engine = match Engine::new(self) {
            Ok(engine) => engine,
            Err(e) => {
                violations.push(Violation::Visibility {
                    reason: e.to_string(),
                });
                return violations;
            }
        };
        for (r, rule) in self.lambda.iter().enumerate() {
            if engine.witnesses[r].len() != rule.condition.arity() {
                violations.push(Violation::Structure {
                    reason: format!(
                        "{} condition has arity {}, its witness set has {} cells",
                        rule_label(rule),
                        rule.condition.arity(),
                        engine.witnesses[r].len()
                    ),
                });
            }
        }
        if !violations.is_empty() {
            return violations;
        }

        self.check_visibility(&engine, &mut violations);
        if !violations.is_empty() {
            return violations;
        }
        if let Some(v) = self.check_r1(&engine) {
            violations.push(v);
        }
        violations.extend(self.check_r2(&engine));
        violations
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    fn check_visibility(&self, engine: &Engine<'_>, violations: &mut Vec<Violation>) {
        let omega_off = engine.omega_offset();
        // The default landing cell decides "no rule fired", so it must see
        // every decision cell of every rule, plus the particle itself.
        let mut full = vec![Offset::ZERO];
        full.extend(engine.all_decision_offsets());
        for &cell in &full {
            let rel = cell.sub(omega_off);
            if !self.kind.contains(rel) {
                violations.push(Violation::Visibility {
                    reason: format!(
                        "the default landing cell (particle offset {omega_off}) cannot see decision cell {cell}"
                    ),
                });
                return;
            }
        }
        // Each redirected landing cell decides "this rule fired".
        for r in 0..engine.rule_count() {
            let landing = engine.rule_landing(r);
            let mut cells = vec![Offset::ZERO];
            cells.extend(engine.decision_offsets(r));
            for &cell in &cells {
                let rel = cell.sub(landing);
                if !self.kind.contains(rel) {
                    violations.push(Violation::Visibility {
                        reason: format!(
                            "the landing cell of {} (particle offset {landing}) cannot see decision cell {cell}",
                            rule_label(&self.lambda[r])
                        ),
                    });
                    return;
                }
            }
        }
    }

    /// R1: over every assignment of the 3x3 block around a particle, at
    /// most one rule is enabled. All decision cells of radius-one rules lie
    /// inside that block.
    fn check_r1(&self, engine: &Engine<'_>) -> Option<Violation> {
        let block: Vec<Offset> = NeighborhoodKind::Moore9
            .offsets()
            .iter()
            .copied()
            .filter(|&o| o != Offset::ZERO)
            .collect();
        for mask in 0..(1u32 << block.len()) {
            let at = |o: Offset| -> bool {
                if o == Offset::ZERO {
                    return true;
                }
                block
                    .iter()
                    .position(|&b| b == o)
                    .map(|k| (mask >> k) & 1 == 1)
                    .unwrap_or(false)
            };
            let fired: Vec<usize> = (0..engine.rule_count())
                .filter(|&r| engine.fires(r, Offset::ZERO, &at))
                .collect();
            if fired.len() >= 2 {
                let mut cells = vec![(Offset::ZERO, true)];
                cells.extend(block.iter().enumerate().map(|(k, &o)| (o, (mask >> k) & 1 == 1)));
                cells.sort_by_key(|(o, _)| o.row_major_key());
                return Some(Violation::R1 {
                    rules: (
                        rule_label(&self.lambda[fired[0]]),
                        rule_label(&self.lambda[fired[1]]),
                    ),
                    pattern: PatternWitness { cells },
                });
            }
        }
        None
    }

    /// R2: for every pair of distinct potential sources of the same
    /// destination cell, no assignment of their joint decision cells
    /// enables both moves.
    fn check_r2(&self, engine: &Engine<'_>) -> Vec<Violation> {
        #[derive(Clone, Copy)]
        enum Arrival {
            Default,
            Rule(usize),
        }

        // Potential sources whose move can land on the origin.
        let mut sources: Vec<(Offset, Arrival)> =
            vec![(engine.omega_offset().neg(), Arrival::Default)];
        for r in 0..engine.rule_count() {
            sources.push((engine.rule_landing(r).neg(), Arrival::Rule(r)));
        }

        let decision_cells = |&(p, arrival): &(Offset, Arrival)| -> Vec<Offset> {
            let rel = match arrival {
                Arrival::Default => engine.all_decision_offsets(),
                Arrival::Rule(r) => engine.decision_offsets(r),
            };
            rel.into_iter().map(|o| p.add(o)).collect()
        };
        let enabled = |&(p, arrival): &(Offset, Arrival), at: &dyn Fn(Offset) -> bool| -> bool {
            let get = |o: Offset| at(o);
            match arrival {
                Arrival::Default => (0..engine.rule_count()).all(|r| !engine.fires(r, p, &get)),
                Arrival::Rule(r) => engine.fires(r, p, &get),
            }
        };
        let label = |arrival: Arrival| -> String {
            match arrival {
                Arrival::Default => format!("default ({})", self.omega),
                Arrival::Rule(r) => rule_label(&self.lambda[r]),
            }
        };

        let mut violations = Vec::new();
        for a in 0..sources.len() {
            for b in a + 1..sources.len() {
                if sources[a].0 == sources[b].0 {
                    continue; // same particle: R1 territory
                }
                let mut cells: BTreeSet<Offset> = [sources[a].0, sources[b].0].into();
                cells.extend(decision_cells(&sources[a]));
                cells.extend(decision_cells(&sources[b]));
                let free: Vec<Offset> = cells
                    .iter()
                    .copied()
                    .filter(|&c| c != sources[a].0 && c != sources[b].0)
                    .collect();
                debug_assert!(free.len() <= 16);
                'assignments: for mask in 0..(1u64 << free.len()) {
                    let at = |o: Offset| -> bool {
                        if o == sources[a].0 || o == sources[b].0 {
                            return true;
                        }
                        free.iter()
                            .position(|&c| c == o)
                            .map(|k| (mask >> k) & 1 == 1)
                            .unwrap_or(false)
                    };
                    if enabled(&sources[a], &at) && enabled(&sources[b], &at) {
                        let mut pattern: Vec<(Offset, bool)> =
                            cells.iter().map(|&c| (c, at(c))).collect();
                        pattern.sort_by_key(|(o, _)| o.row_major_key());
                        violations.push(Violation::R2 {
                            moves: (label(sources[a].1), label(sources[b].1)),
                            pattern: PatternWitness { cells: pattern },
                        });
                        break 'assignments;
                    }
                }
            }
        }
        violations
    }

    /// Compile the spec to its lookup table. The output bit of a pattern is
    /// 1 iff some particle's resolved move targets the center; validity
    /// guarantees this is well-defined from the center's neighborhood.
    /// Compiled LUTs are number-conserving by construction.
    pub fn compile(&self) -> Result<Lut> {
        let violations = self.validate();
        if let Some(first) = violations.first() {
            return Err(Error::InvalidSpec(format!(
                "{first} ({} violations)",
                violations.len()
            )));
        }
        let engine = Engine::new(self).expect("validated spec has witness templates");
        let kind = self.kind;
        let m = kind.arity();
        Ok(Lut::from_fn(kind, |idx| {
            let at = |o: Offset| -> bool {
                let p = kind
                    .position(o)
                    .expect("visibility keeps compile reads inside the neighborhood");
                (idx >> (m - 1 - p)) & 1 == 1
            };
            // Default arrival: the particle whose overarching move lands
            // here, provided none of its rules fired.
            let q0 = engine.omega_offset().neg();
            if at(q0) && (0..engine.rule_count()).all(|r| !engine.fires(r, q0, &at)) {
                return true;
            }
            // Redirected arrivals, one candidate source per rule.
            (0..engine.rule_count()).any(|r| {
                let q = engine.rule_landing(r).neg();
                at(q) && engine.fires(r, q, &at)
            })
        }))
    }
}

fn subset_masks_by_size() -> Vec<u16> {
    let mut masks: Vec<u16> = (1..16).collect();
    masks.sort_by_key(|&m| (m.count_ones(), m));
    masks
}

/// The four mixed left/right condition pairs compatible with R1 and R2.
pub const MIXED_PAIRS: [(u16, u16); 4] = [
    (0b0001, 0b1000), // {00} with {11}
    (0b0010, 0b0010), // {01} with {01}
    (0b0100, 0b0100), // {10} with {10}
    (0b1000, 0b0001), // {11} with {00}
];

/// All 74 number-conserving rule specs over the 2x3 neighborhood: the
/// empty-regulation class (identity plus five shifts), 34 identity couples
/// and 34 shift-up couples.
pub fn enumerate_specs_2x3() -> Vec<RuleSpec> {
    let kind = NeighborhoodKind::Rect2x3;
    let mut out = Vec::with_capacity(74);
    out.push(RuleSpec::new(kind, Omega::Identity, vec![]));
    for d in [
        Direction::Left,
        Direction::Right,
        Direction::Up,
        Direction::UpLeft,
        Direction::UpRight,
    ] {
        out.push(RuleSpec::new(kind, Omega::Shift(d), vec![]));
    }
    for (omega, shifted) in [
        (Omega::Identity, false),
        (Omega::Shift(Direction::Up), true),
    ] {
        for direction in [Direction::Left, Direction::Right] {
            for mask in subset_masks_by_size() {
                out.push(RuleSpec::new(
                    kind,
                    omega,
                    vec![TrafficRule::new(
                        direction,
                        shifted,
                        Condition::new(2, mask).unwrap(),
                    )],
                ));
            }
        }
        for (left_mask, right_mask) in MIXED_PAIRS {
            out.push(RuleSpec::new(
                kind,
                omega,
                vec![
                    TrafficRule::new(
                        Direction::Left,
                        shifted,
                        Condition::new(2, left_mask).unwrap(),
                    ),
                    TrafficRule::new(
                        Direction::Right,
                        shifted,
                        Condition::new(2, right_mask).unwrap(),
                    ),
                ],
            ));
        }
    }
    out
}

/// The 4d+1 = 9 number-conserving rule specs over the two-dimensional von
/// Neumann neighborhood: identity, four shifts, and the unconditional
/// traffic rule in each of the four directions.
pub fn enumerate_specs_vn() -> Vec<RuleSpec> {
    let kind = NeighborhoodKind::VonNeumann5;
    let dirs = [
        Direction::Right,
        Direction::Left,
        Direction::Up,
        Direction::Down,
    ];
    let mut out = Vec::with_capacity(9);
    out.push(RuleSpec::new(kind, Omega::Identity, vec![]));
    for d in dirs {
        out.push(RuleSpec::new(kind, Omega::Shift(d), vec![]));
    }
    for d in dirs {
        out.push(RuleSpec::new(
            kind,
            Omega::Identity,
            vec![TrafficRule::new(d, false, Condition::full(0))],
        ));
    }
    out
}

fn recognition_table(specs: Vec<RuleSpec>) -> Vec<(String, RuleSpec)> {
    specs
        .into_iter()
        .map(|s| {
            let hex = s.compile().expect("enumerated specs are valid").to_hex();
            (hex, s)
        })
        .collect()
}

/// The unique spec among the 74 whose compilation equals `lut`, if any.
/// `None` means the LUT is not number-conserving (not representable).
pub fn recognize_2x3(lut: &Lut) -> Result<Option<RuleSpec>> {
    if lut.kind() != NeighborhoodKind::Rect2x3 {
        return Err(Error::WrongKind {
            got: lut.kind(),
            expected: NeighborhoodKind::Rect2x3,
        });
    }
    static TABLE: OnceLock<Vec<(String, RuleSpec)>> = OnceLock::new();
    let table = TABLE.get_or_init(|| recognition_table(enumerate_specs_2x3()));
    let hex = lut.to_hex();
    Ok(table.iter().find(|(h, _)| *h == hex).map(|(_, s)| s.clone()))
}

/// Table-driven recognition against the nine von Neumann specs.
pub fn recognize_vn(lut: &Lut) -> Result<Option<RuleSpec>> {
    if lut.kind() != NeighborhoodKind::VonNeumann5 {
        return Err(Error::WrongKind {
            got: lut.kind(),
            expected: NeighborhoodKind::VonNeumann5,
        });
    }
    static TABLE: OnceLock<Vec<(String, RuleSpec)>> = OnceLock::new();
    let table = TABLE.get_or_init(|| recognition_table(enumerate_specs_vn()));
    let hex = lut.to_hex();
    Ok(table.iter().find(|(h, _)| *h == hex).map(|(_, s)| s.clone()))
}

/// Rule slots (direction, shifted) admissible under `omega` over `kind`.
pub fn admissible_slots(kind: NeighborhoodKind, omega: Omega) -> Vec<(Direction, bool)> {
    let shifted = omega != Omega::Identity;
    Direction::ALL
        .into_iter()
        .filter(|&d| witness_offsets(kind, d, shifted, omega).is_ok())
        .map(|d| (d, shifted))
        .collect()
}

/// Best-effort recognition of a Moore LUT as an (Omega, Lambda) couple.
///
/// Candidate conditions are inferred from the LUT's action on sparse probe
/// patterns and refined to a fixpoint, then verified by compilation
/// equality: a returned spec is guaranteed to compile back to `lut`.
/// `None` means unknown, not non-representability. `budget` caps the
/// number of LUT probes spent.
pub fn recognize_moore(lut: &Lut, budget: u64) -> Result<Option<RuleSpec>> {
    if lut.kind() != NeighborhoodKind::Moore9 {
        return Err(Error::WrongKind {
            got: lut.kind(),
            expected: NeighborhoodKind::Moore9,
        });
    }
    let mut evals = 0u64;
    let mut omegas = vec![Omega::Identity];
    omegas.extend(Direction::ALL.into_iter().map(Omega::Shift));
    for omega in omegas {
        if evals >= budget {
            return Ok(None);
        }
        if let Some(spec) = recognize_moore_with_omega(lut, omega, &mut evals, budget) {
            return Ok(Some(spec));
        }
    }
    Ok(None)
}

fn recognize_moore_with_omega(
    lut: &Lut,
    omega: Omega,
    evals: &mut u64,
    budget: u64,
) -> Option<RuleSpec> {
    let kind = lut.kind();
    let m = kind.arity();
    let slots = admissible_slots(kind, omega);
    let templates: Vec<Vec<Offset>> = slots
        .iter()
        .map(|&(d, shifted)| witness_offsets(kind, d, shifted, omega).unwrap())
        .collect();
    let omega_off = omega.offset();

    let index_of = |cells: &[(Offset, bool)]| -> usize {
        let mut idx = 0usize;
        for (pos, &o) in kind.offsets().iter().enumerate() {
            let bit = cells.iter().find(|(c, _)| *c == o).map(|&(_, b)| b).unwrap_or(false);
            idx |= (bit as usize) << (m - 1 - pos);
        }
        idx
    };

    // The probe pattern for slot k with witness values `value`: a particle
    // at the slot's source, the witness cells set, everything else empty.
    let probe_cells = |k: usize, value: u8, with_particle: bool| -> Vec<(Offset, bool)> {
        let (d, shifted) = slots[k];
        let base = if shifted { omega_off } else { Offset::ZERO };
        let source = base.add(d.offset()).neg();
        let arity = templates[k].len();
        let mut cells = vec![(source, with_particle)];
        for (w_idx, &w) in templates[k].iter().enumerate() {
            let bit = (value >> (arity - 1 - w_idx)) & 1 == 1;
            let cell = source.add(w);
            if let Some(entry) = cells.iter_mut().find(|(c, _)| *c == cell) {
                entry.1 = bit;
            } else {
                cells.push((cell, bit));
            }
        }
        cells
    };

    // Initial hypothesis from difference probes: the arrival attributable
    // to the probe particle alone.
    let mut conds: Vec<u16> = Vec::with_capacity(slots.len());
    for k in 0..slots.len() {
        let arity = templates[k].len();
        let mut mask = 0u16;
        for value in 0..(1u16 << arity) as u8 {
            *evals += 2;
            if *evals > budget {
                return None;
            }
            let with = lut.get(index_of(&probe_cells(k, value, true)));
            let without = lut.get(index_of(&probe_cells(k, value, false)));
            if with && !without {
                mask |= 1 << value;
            }
        }
        conds.push(mask);
    }

    // Refine against the hypothesis: drop memberships explained by another
    // source's arrival under the current condition sets.
    for _ in 0..8 {
        let hypothesis = build_spec(kind, omega, &slots, &conds);
        let engine = Engine::new(&hypothesis).ok()?;
        let mut next = Vec::with_capacity(slots.len());
        for k in 0..slots.len() {
            let arity = templates[k].len();
            let (d, shifted) = slots[k];
            let base = if shifted { omega_off } else { Offset::ZERO };
            let source = base.add(d.offset()).neg();
            let mut mask = 0u16;
            for value in 0..(1u16 << arity) as u8 {
                *evals += 1;
                if *evals > budget {
                    return None;
                }
                let cells = probe_cells(k, value, true);
                if !lut.get(index_of(&cells)) {
                    continue;
                }
                let at = |o: Offset| -> bool {
                    cells.iter().find(|(c, _)| *c == o).map(|&(_, b)| b).unwrap_or(false)
                };
                let confounded = other_arrival(&engine, source, &at);
                if !confounded {
                    mask |= 1 << value;
                }
            }
            next.push(mask);
        }
        if next == conds {
            break;
        }
        conds = next;
    }

    let spec = build_spec(kind, omega, &slots, &conds);
    *evals += kind.table_len() as u64;
    if spec.is_valid() && spec.compile().ok()? == *lut {
        Some(spec)
    } else {
        None
    }
}

/// Whether some particle other than the one at `exclude` lands on the
/// origin under the engine's spec, for the pattern read through `at`.
fn other_arrival<F: Fn(Offset) -> bool>(engine: &Engine<'_>, exclude: Offset, at: &F) -> bool {
    let q0 = engine.omega_offset().neg();
    if q0 != exclude && at(q0) && (0..engine.rule_count()).all(|r| !engine.fires(r, q0, at)) {
        return true;
    }
    (0..engine.rule_count()).any(|r| {
        let q = engine.rule_landing(r).neg();
        q != exclude && at(q) && engine.fires(r, q, at)
    })
}

fn build_spec(
    kind: NeighborhoodKind,
    omega: Omega,
    slots: &[(Direction, bool)],
    conds: &[u16],
) -> RuleSpec {
    let lambda = slots
        .iter()
        .zip(conds)
        .filter(|(_, &mask)| mask != 0)
        .map(|(&(d, shifted), &mask)| {
            let arity = witness_offsets(kind, d, shifted, omega).unwrap().len();
            TrafficRule::new(d, shifted, Condition::new(arity, mask).unwrap())
        })
        .collect();
    RuleSpec::new(kind, omega, lambda)
}

/// Seeded sampling of a valid spec over `kind`, used by differential tests.
/// Conditions are biased towards per-cell constraint products, which is
/// where multi-rule couples tend to be compatible.
pub fn random_valid_spec(kind: NeighborhoodKind, seed: u64) -> RuleSpec {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..500 {
        let spec = sample_spec(kind, &mut rng);
        if spec.is_valid() {
            return spec;
        }
    }
    // Single-rule specs are always valid; fall back to one.
    let (omega, slots) = (Omega::Identity, admissible_slots(kind, Omega::Identity));
    if slots.is_empty() {
        return RuleSpec::new(kind, omega, vec![]);
    }
    let (d, shifted) = slots[rng.gen_range(0..slots.len())];
    let arity = witness_offsets(kind, d, shifted, omega).unwrap().len();
    let mask = rng.gen_range(1..Condition::count_nonempty(arity) + 1) as u16;
    RuleSpec::new(
        kind,
        omega,
        vec![TrafficRule::new(d, shifted, Condition::new(arity, mask).unwrap())],
    )
}

fn sample_spec(kind: NeighborhoodKind, rng: &mut impl Rng) -> RuleSpec {
    let omega = if rng.gen_bool(0.5) {
        Omega::Identity
    } else {
        let shifts: Vec<Direction> = Direction::ALL
            .into_iter()
            .filter(|&d| Omega::Shift(d).admissible_for(kind))
            .collect();
        Omega::Shift(shifts[rng.gen_range(0..shifts.len())])
    };
    let slots = admissible_slots(kind, omega);
    let mut lambda = Vec::new();
    for (d, shifted) in slots {
        if !rng.gen_bool(0.45) {
            continue;
        }
        let arity = witness_offsets(kind, d, shifted, omega).unwrap().len();
        let mask = if arity > 0 && rng.gen_bool(0.75) {
            // Product-form: each witness cell constrained to 0, 1 or free.
            let mut mask = 0u16;
            let constraints: Vec<Option<bool>> = (0..arity)
                .map(|_| match rng.gen_range(0..3) {
                    0 => Some(false),
                    1 => Some(true),
                    _ => None,
                })
                .collect();
            for value in 0..(1u16 << arity) as u8 {
                let ok = constraints.iter().enumerate().all(|(k, c)| match c {
                    Some(bit) => ((value >> (arity - 1 - k)) & 1 == 1) == *bit,
                    None => true,
                });
                if ok {
                    mask |= 1 << value;
                }
            }
            mask
        } else {
            rng.gen_range(1..Condition::count_nonempty(arity) + 1) as u16
        };
        if mask == 0 {
            continue;
        }
        lambda.push(TrafficRule::new(d, shifted, Condition::new(arity, mask).unwrap()));
    }
    RuleSpec::new(kind, omega, lambda)
}

// ---------------------------------------------------------------------------
// JSON codec
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDto {
    neighborhood: String,
    omega: String,
    lambda: Vec<RuleDto>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDto {
    direction: String,
    #[serde(default)]
    shifted: bool,
    condition: Vec<String>,
}

impl RuleSpec {
    /// Canonical JSON encoding: rules in canonical order, condition
    /// patterns ascending.
    pub fn to_json(&self) -> String {
        let dto = SpecDto {
            neighborhood: self.kind.name().to_string(),
            omega: self.omega.name(),
            lambda: self
                .lambda
                .iter()
                .map(|r| RuleDto {
                    direction: r.direction.name().to_string(),
                    shifted: r.shifted,
                    condition: r.condition.patterns(),
                })
                .collect(),
        };
        serde_json::to_string(&dto).expect("spec serialization cannot fail")
    }

    /// Parse the JSON rule-spec format. Unknown fields and names are
    /// rejected; validity is checked separately via [`RuleSpec::validate`].
    pub fn from_json(text: &str) -> Result<Self> {
        let dto: SpecDto =
            serde_json::from_str(text).map_err(|e| Error::SpecJson(e.to_string()))?;
        let kind = NeighborhoodKind::from_name(&dto.neighborhood).ok_or_else(|| {
            Error::SpecJson(format!("unknown neighborhood {:?}", dto.neighborhood))
        })?;
        let omega = Omega::from_name(&dto.omega)
            .ok_or_else(|| Error::SpecJson(format!("unknown omega {:?}", dto.omega)))?;
        let mut lambda = Vec::with_capacity(dto.lambda.len());
        for rule in &dto.lambda {
            let direction = Direction::from_name(&rule.direction).ok_or_else(|| {
                Error::SpecJson(format!("unknown direction {:?}", rule.direction))
            })?;
            lambda.push(TrafficRule::new(
                direction,
                rule.shifted,
                Condition::from_patterns(&rule.condition)?,
            ));
        }
        Ok(RuleSpec::new(kind, omega, lambda))
    }
}
