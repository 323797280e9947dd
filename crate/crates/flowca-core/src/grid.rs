//! Coordinates, radius-one neighborhoods, and bit-packed toroidal configurations.

use std::fmt;

use crate::error::{Error, Result};

/// Cell coordinate on a torus. `j` increases upward, so cell (i, j-1) sits
/// directly below (i, j).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub i: i64,
    pub j: i64,
}

impl Coord {
    pub const fn new(i: i64, j: i64) -> Self {
        Coord { i, j }
    }

    /// The coordinate one `offset` away (unnormalized).
    pub fn offset(self, d: Offset) -> Self {
        Coord::new(self.i + d.di as i64, self.j + d.dj as i64)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

/// Relative cell offset; radius-one work keeps the Chebyshev norm at most 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Offset {
    pub di: i32,
    pub dj: i32,
}

impl Offset {
    pub const ZERO: Offset = Offset { di: 0, dj: 0 };

    pub const fn new(di: i32, dj: i32) -> Self {
        Offset { di, dj }
    }

    pub fn chebyshev(self) -> u32 {
        self.di.unsigned_abs().max(self.dj.unsigned_abs())
    }

    pub fn add(self, other: Offset) -> Offset {
        Offset::new(self.di + other.di, self.dj + other.dj)
    }

    pub fn sub(self, other: Offset) -> Offset {
        Offset::new(self.di - other.di, self.dj - other.dj)
    }

    pub fn neg(self) -> Offset {
        Offset::new(-self.di, -self.dj)
    }

    /// Sort key for the row-major reading order: top row first, then left to right.
    pub fn row_major_key(self) -> (i32, i32) {
        (-self.dj, self.di)
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:+}, {:+})", self.di, self.dj)
    }
}

const MOORE9_OFFSETS: [Offset; 9] = [
    Offset::new(-1, 1),
    Offset::new(0, 1),
    Offset::new(1, 1),
    Offset::new(-1, 0),
    Offset::new(0, 0),
    Offset::new(1, 0),
    Offset::new(-1, -1),
    Offset::new(0, -1),
    Offset::new(1, -1),
];

const VON_NEUMANN5_OFFSETS: [Offset; 5] = [
    Offset::new(0, 1),
    Offset::new(-1, 0),
    Offset::new(0, 0),
    Offset::new(1, 0),
    Offset::new(0, -1),
];

const RECT2X3_OFFSETS: [Offset; 6] = [
    Offset::new(-1, 0),
    Offset::new(0, 0),
    Offset::new(1, 0),
    Offset::new(-1, -1),
    Offset::new(0, -1),
    Offset::new(1, -1),
];

/// Radius-one neighborhood shape, with a fixed canonical offset order.
///
/// The order fixes the LUT bit convention: the first offset is the most
/// significant pattern bit. Each list reads row by row, top row first,
/// left to right within a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeighborhoodKind {
    /// 3x3 Chebyshev ball, 9 cells.
    Moore9,
    /// Orthogonal cross, 5 cells.
    VonNeumann5,
    /// A cell's own row triple plus the row triple directly below, 6 cells.
    Rect2x3,
}

impl NeighborhoodKind {
    pub const ALL: [NeighborhoodKind; 3] = [
        NeighborhoodKind::Moore9,
        NeighborhoodKind::VonNeumann5,
        NeighborhoodKind::Rect2x3,
    ];

    pub const fn offsets(self) -> &'static [Offset] {
        match self {
            NeighborhoodKind::Moore9 => &MOORE9_OFFSETS,
            NeighborhoodKind::VonNeumann5 => &VON_NEUMANN5_OFFSETS,
            NeighborhoodKind::Rect2x3 => &RECT2X3_OFFSETS,
        }
    }

    /// Number of cells in the neighborhood.
    pub const fn arity(self) -> usize {
        self.offsets().len()
    }

    /// Number of entries in a lookup table over this neighborhood.
    pub const fn table_len(self) -> usize {
        1 << self.arity()
    }

    /// Length of the hexadecimal LUT encoding.
    pub const fn hex_len(self) -> usize {
        self.table_len() / 4
    }

    pub fn contains(self, offset: Offset) -> bool {
        self.position(offset).is_some()
    }

    /// Position of `offset` in the canonical order, if present.
    pub fn position(self, offset: Offset) -> Option<usize> {
        self.offsets().iter().position(|&o| o == offset)
    }

    /// Stable name used by the CLI and the rule-spec JSON format.
    pub const fn name(self) -> &'static str {
        match self {
            NeighborhoodKind::Moore9 => "moore",
            NeighborhoodKind::VonNeumann5 => "vonneumann",
            NeighborhoodKind::Rect2x3 => "2x3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "moore" => Some(NeighborhoodKind::Moore9),
            "vonneumann" => Some(NeighborhoodKind::VonNeumann5),
            "2x3" => Some(NeighborhoodKind::Rect2x3),
            _ => None,
        }
    }
}

impl fmt::Display for NeighborhoodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bit-valued toroidal grid. A cell in state 1 is a particle.
///
/// Configurations are immutable once built; evolving one produces a new
/// configuration, so values can be shared freely across threads.
///
/// Storage is row-major, 64 cells per word, least significant bit first
/// within a word. Unused tail bits of each row are kept zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    width: usize,
    height: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl Configuration {
    fn check_dims(width: usize, height: usize) -> Result<()> {
        if width < 3 || height < 3 {
            return Err(Error::DimensionTooSmall { width, height });
        }
        Ok(())
    }

    /// All-zero configuration.
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::check_dims(width, height)?;
        let words_per_row = width.div_ceil(64);
        Ok(Configuration {
            width,
            height,
            words_per_row,
            bits: vec![0; words_per_row * height],
        })
    }

    /// All-one configuration.
    pub fn filled(width: usize, height: usize) -> Result<Self> {
        let mut c = Self::empty(width, height)?;
        for j in 0..height as i64 {
            for i in 0..width as i64 {
                c.set(Coord::new(i, j), true);
            }
        }
        Ok(c)
    }

    /// Build from external row data. `rows[0]` is the TOP row of the grid,
    /// i.e. the row with the largest `j`. Any nonzero entry counts as 1.
    pub fn from_rows(width: usize, height: usize, rows: &[Vec<u8>]) -> Result<Self> {
        Self::check_dims(width, height)?;
        if rows.len() != height {
            return Err(Error::ShapeMismatch {
                row: rows.len().min(height),
                got: rows.len(),
                expected: height,
            });
        }
        let mut c = Self::empty(width, height)?;
        for (k, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::ShapeMismatch {
                    row: k,
                    got: row.len(),
                    expected: width,
                });
            }
            let j = (height - 1 - k) as i64;
            for (i, &cell) in row.iter().enumerate() {
                if cell != 0 {
                    c.set(Coord::new(i as i64, j), true);
                }
            }
        }
        Ok(c)
    }

    /// Seeded random configuration; each cell holds a particle with
    /// probability `density`.
    pub fn random(width: usize, height: usize, density: f64, seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut c = Self::empty(width, height)?;
        for j in 0..height as i64 {
            for i in 0..width as i64 {
                if rng.gen_bool(density) {
                    c.set(Coord::new(i, j), true);
                }
            }
        }
        Ok(c)
    }

    /// Fill from a seeded RNG stream (used by the torus oracle's random mode).
    pub(crate) fn random_from_rng(
        width: usize,
        height: usize,
        density: f64,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        let mut c = Self::empty(width, height)?;
        for j in 0..height as i64 {
            for i in 0..width as i64 {
                if rng.gen_bool(density) {
                    c.set(Coord::new(i, j), true);
                }
            }
        }
        Ok(c)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn wrap(&self, at: Coord) -> (usize, usize) {
        let i = at.i.rem_euclid(self.width as i64) as usize;
        let j = at.j.rem_euclid(self.height as i64) as usize;
        (i, j)
    }

    /// State of the cell at `at`; coordinates wrap, so this is total.
    pub fn get(&self, at: Coord) -> bool {
        let (i, j) = self.wrap(at);
        let word = self.bits[j * self.words_per_row + i / 64];
        (word >> (i % 64)) & 1 == 1
    }

    pub(crate) fn set(&mut self, at: Coord, value: bool) {
        let (i, j) = self.wrap(at);
        let idx = j * self.words_per_row + i / 64;
        let mask = 1u64 << (i % 64);
        if value {
            self.bits[idx] |= mask;
        } else {
            self.bits[idx] &= !mask;
        }
    }

    /// Number of particles (1-cells).
    pub fn population(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// States of `center`'s neighbors in the kind's canonical offset order.
    pub fn neighborhood_pattern(&self, center: Coord, kind: NeighborhoodKind) -> Vec<u8> {
        kind.offsets()
            .iter()
            .map(|&o| self.get(center.offset(o)) as u8)
            .collect()
    }

    /// LUT index of `center`'s neighborhood pattern (first offset = most
    /// significant bit).
    pub fn pattern_index_at(&self, center: Coord, kind: NeighborhoodKind) -> usize {
        let mut idx = 0usize;
        for &o in kind.offsets() {
            idx = (idx << 1) | self.get(center.offset(o)) as usize;
        }
        idx
    }

    /// The same pattern translated by (di, dj).
    pub fn translate(&self, di: i64, dj: i64) -> Configuration {
        let mut out = Configuration::empty(self.width, self.height).expect("dims already valid");
        for j in 0..self.height as i64 {
            for i in 0..self.width as i64 {
                let c = Coord::new(i, j);
                if self.get(c) {
                    out.set(Coord::new(i + di, j + dj), true);
                }
            }
        }
        out
    }

    /// Coordinates of all particles, sorted row-major from the top row down.
    pub fn particles(&self) -> Vec<Coord> {
        let mut out = Vec::new();
        for j in (0..self.height as i64).rev() {
            for i in 0..self.width as i64 {
                let c = Coord::new(i, j);
                if self.get(c) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Raw row access for the stepping fast path (row index = j).
    pub(crate) fn row_words(&self, j: usize) -> &[u64] {
        &self.bits[j * self.words_per_row..(j + 1) * self.words_per_row]
    }

    /// Plain-text PBM (P1) encoding: `P1`, dimensions, then rows from the
    /// top of the grid down, one character per cell.
    pub fn to_pbm(&self) -> String {
        let mut s = String::with_capacity(self.width * self.height + 16);
        s.push_str("P1\n");
        s.push_str(&format!("{} {}\n", self.width, self.height));
        for j in (0..self.height as i64).rev() {
            for i in 0..self.width as i64 {
                s.push(if self.get(Coord::new(i, j)) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    /// Parse the plain-text PBM (P1) format. The first pixel row is the top
    /// of the grid; whitespace between cells is tolerated. Magic numbers
    /// other than `P1` are rejected.
    pub fn parse_pbm(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let magic = tokens.next().ok_or_else(|| Error::Pbm("empty input".into()))?;
        if magic != "P1" {
            return Err(Error::Pbm(format!(
                "unsupported magic number {magic:?}, only plain-text P1 is accepted"
            )));
        }
        let mut dim = |name: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Pbm(format!("missing {name}")))?
                .parse::<usize>()
                .map_err(|_| Error::Pbm(format!("bad {name}")))
        };
        let width = dim("width")?;
        let height = dim("height")?;
        Self::check_dims(width, height)?;
        let mut cells = Vec::with_capacity(width * height);
        for token in tokens {
            for ch in token.chars() {
                match ch {
                    '0' => cells.push(0u8),
                    '1' => cells.push(1u8),
                    _ => return Err(Error::Pbm(format!("unexpected character {ch:?}"))),
                }
            }
        }
        if cells.len() != width * height {
            return Err(Error::Pbm(format!(
                "expected {} cells, found {}",
                width * height,
                cells.len()
            )));
        }
        let rows: Vec<Vec<u8>> = cells.chunks(width).map(|r| r.to_vec()).collect();
        Self::from_rows(width, height, &rows)
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({}x{})\n{}", self.width, self.height, self.to_pbm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_has_population_zero() {
        let c = Configuration::from_rows(3, 3, &vec![vec![0; 3]; 3]).unwrap();
        assert_eq!(c.population(), 0);
    }

    #[test]
    fn narrow_grids_are_rejected() {
        assert!(matches!(
            Configuration::from_rows(2, 4, &vec![vec![0; 2]; 4]),
            Err(Error::DimensionTooSmall { .. })
        ));
        assert!(matches!(
            Configuration::empty(5, 2),
            Err(Error::DimensionTooSmall { .. })
        ));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let rows = vec![vec![0, 0, 0], vec![0, 0], vec![0, 0, 0]];
        assert!(matches!(
            Configuration::from_rows(3, 3, &rows),
            Err(Error::ShapeMismatch { row: 1, .. })
        ));
    }

    #[test]
    fn singleton_round_trip() {
        // Row 0 is the top row (j = 3); a particle at (1, 2) sits in row 1.
        let mut rows = vec![vec![0u8; 4]; 4];
        rows[1][1] = 1;
        let c = Configuration::from_rows(4, 4, &rows).unwrap();
        assert_eq!(c.population(), 1);
        assert!(c.get(Coord::new(1, 2)));
        assert!(!c.get(Coord::new(0, 0)));
        // Torus wrap.
        assert!(c.get(Coord::new(5, 6)));
        assert!(c.get(Coord::new(-3, -2)));
    }

    #[test]
    fn population_counts() {
        assert_eq!(Configuration::filled(5, 5).unwrap().population(), 25);
        let mut rows = vec![vec![0u8; 4]; 4];
        for (j, row) in rows.iter_mut().enumerate() {
            for (i, cell) in row.iter_mut().enumerate() {
                *cell = ((i + j) % 2) as u8;
            }
        }
        let checker = Configuration::from_rows(4, 4, &rows).unwrap();
        assert_eq!(checker.population(), 8);
    }

    #[test]
    fn neighborhood_pattern_positions() {
        let empty = Configuration::empty(5, 5).unwrap();
        assert_eq!(
            empty.neighborhood_pattern(Coord::new(2, 2), NeighborhoodKind::Rect2x3),
            vec![0, 0, 0, 0, 0, 0]
        );

        let mut rows = vec![vec![0u8; 5]; 5];
        rows[2][2] = 1; // (2, 2)
        let c = Configuration::from_rows(5, 5, &rows).unwrap();
        let moore = c.neighborhood_pattern(Coord::new(2, 2), NeighborhoodKind::Moore9);
        assert_eq!(moore, vec![0, 0, 0, 0, 1, 0, 0, 0, 0]);

        // A particle at (2, 1), seen from center (2, 2), is offset (0, -1):
        // position 4 of the 2x3 order.
        let mut rows = vec![vec![0u8; 5]; 5];
        rows[3][2] = 1; // j = 1
        let c = Configuration::from_rows(5, 5, &rows).unwrap();
        let pattern = c.neighborhood_pattern(Coord::new(2, 2), NeighborhoodKind::Rect2x3);
        assert_eq!(pattern, vec![0, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn pattern_matches_pointwise_gets() {
        let c = Configuration::random(9, 7, 0.4, 11).unwrap();
        for kind in NeighborhoodKind::ALL {
            for j in -2..10 {
                for i in -2..12 {
                    let center = Coord::new(i, j);
                    let pattern = c.neighborhood_pattern(center, kind);
                    for (k, &o) in kind.offsets().iter().enumerate() {
                        assert_eq!(pattern[k] == 1, c.get(center.offset(o)));
                    }
                }
            }
        }
    }

    #[test]
    fn kind_offset_sets_nest_in_moore() {
        let moore = NeighborhoodKind::Moore9;
        for kind in [NeighborhoodKind::VonNeumann5, NeighborhoodKind::Rect2x3] {
            for &o in kind.offsets() {
                assert!(moore.contains(o));
            }
        }
        assert_eq!(NeighborhoodKind::Moore9.arity(), 9);
        assert_eq!(NeighborhoodKind::VonNeumann5.arity(), 5);
        assert_eq!(NeighborhoodKind::Rect2x3.arity(), 6);
    }

    #[test]
    fn pbm_round_trip_and_magic_check() {
        let c = Configuration::random(7, 5, 0.5, 3).unwrap();
        let text = c.to_pbm();
        let back = Configuration::parse_pbm(&text).unwrap();
        assert_eq!(back, c);

        let spaced = "P1\n4 4\n0 1 0 1\n1 0 1 0\n0 1 0 1\n1 0 1 0\n";
        assert_eq!(Configuration::parse_pbm(spaced).unwrap().population(), 8);

        assert!(matches!(
            Configuration::parse_pbm("P4\n4 4\n"),
            Err(Error::Pbm(_))
        ));
    }

    #[test]
    fn translation_preserves_population() {
        let c = Configuration::random(8, 6, 0.5, 5).unwrap();
        for (di, dj) in [(1, 0), (0, 1), (3, -2), (-7, 11)] {
            assert_eq!(c.translate(di, dj).population(), c.population());
        }
    }
}
