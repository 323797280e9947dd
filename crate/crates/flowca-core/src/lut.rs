//! Lookup tables for radius-one local rules and their hexadecimal codec.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{NeighborhoodKind, Offset};

/// LUT index of an ordered neighborhood pattern.
///
/// The first offset in the kind's canonical order is the most significant
/// bit: index = sum of pattern[k] * 2^(m-1-k). For the 2x3 neighborhood the
/// bit weights are x(i-1,j)=32, x(i,j)=16, x(i+1,j)=8, x(i-1,j-1)=4,
/// x(i,j-1)=2, x(i+1,j-1)=1.
pub fn pattern_index(kind: NeighborhoodKind, pattern: &[u8]) -> Result<usize> {
    let m = kind.arity();
    if pattern.len() != m {
        return Err(Error::ArityMismatch {
            got: pattern.len(),
            expected: m,
        });
    }
    let mut idx = 0usize;
    for &bit in pattern {
        idx = (idx << 1) | (bit != 0) as usize;
    }
    Ok(idx)
}

/// Lookup table of all 2^m outputs of a local rule f: {0,1}^m -> {0,1}.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Lut {
    kind: NeighborhoodKind,
    words: Vec<u64>,
}

impl Lut {
    /// All-zero-output table.
    pub fn zero(kind: NeighborhoodKind) -> Self {
        Lut {
            kind,
            words: vec![0; kind.table_len().div_ceil(64)],
        }
    }

    /// Build a table by evaluating `f` on every index.
    pub fn from_fn(kind: NeighborhoodKind, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut lut = Lut::zero(kind);
        for idx in 0..kind.table_len() {
            if f(idx) {
                lut.set(idx, true);
            }
        }
        lut
    }

    /// The projection rule f = x at `offset`, i.e. the shift that moves the
    /// whole pattern by `-offset`.
    pub fn projection(kind: NeighborhoodKind, offset: Offset) -> Result<Self> {
        let position = kind.position(offset).ok_or(Error::ArityMismatch {
            got: kind.arity(),
            expected: kind.arity(),
        })?;
        let weight = kind.arity() - 1 - position;
        Ok(Lut::from_fn(kind, |idx| (idx >> weight) & 1 == 1))
    }

    pub fn kind(&self) -> NeighborhoodKind {
        self.kind
    }

    /// Table length, 2^m.
    pub fn len(&self) -> usize {
        self.kind.table_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Output bit at a raw table index.
    pub fn get(&self, index: usize) -> bool {
        debug_assert!(index < self.len());
        (self.words[index / 64] >> (index % 64)) & 1 == 1
    }

    pub(crate) fn set(&mut self, index: usize, value: bool) {
        let mask = 1u64 << (index % 64);
        if value {
            self.words[index / 64] |= mask;
        } else {
            self.words[index / 64] &= !mask;
        }
    }

    /// A quiescent rule maps the all-zero pattern to 0. Every
    /// number-conserving LUT is quiescent.
    pub fn is_quiescent(&self) -> bool {
        !self.get(0)
    }

    /// Output of the local rule on an ordered pattern.
    pub fn eval(&self, pattern: &[u8]) -> Result<bool> {
        Ok(self.get(pattern_index(self.kind, pattern)?))
    }

    /// Uppercase hex encoding. The first character packs the four highest
    /// table indices, most significant first; no separators.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.kind.hex_len());
        for chunk in (0..self.len()).step_by(4).rev() {
            let nibble = (self.get(chunk + 3) as u8) << 3
                | (self.get(chunk + 2) as u8) << 2
                | (self.get(chunk + 1) as u8) << 1
                | self.get(chunk) as u8;
            s.push(char::from_digit(nibble as u32, 16).unwrap().to_ascii_uppercase());
        }
        s
    }

    /// Inverse of [`Lut::to_hex`]. ASCII whitespace is stripped and digits
    /// are case-insensitive.
    pub fn from_hex(text: &str, kind: NeighborhoodKind) -> Result<Self> {
        let mut lut = Lut::zero(kind);
        let expected = kind.hex_len();
        let digits: Vec<(usize, char)> = text
            .char_indices()
            .filter(|(_, ch)| !ch.is_ascii_whitespace())
            .collect();
        if digits.len() != expected {
            return Err(Error::BadLength {
                got: digits.len(),
                expected,
            });
        }
        for (k, &(position, ch)) in digits.iter().enumerate() {
            let nibble = ch
                .to_digit(16)
                .ok_or(Error::BadDigit { digit: ch, position })? as usize;
            let base = kind.table_len() - 4 * (k + 1);
            for bit in 0..4 {
                if (nibble >> bit) & 1 == 1 {
                    lut.set(base + bit, true);
                }
            }
        }
        Ok(lut)
    }

    /// The rule conjugated by a coordinate symmetry: output at a pattern is
    /// the original output at the pattern with every offset mapped through
    /// `map`. The map must permute the kind's offset set.
    pub fn permuted(&self, map: impl Fn(Offset) -> Offset) -> Lut {
        let offsets = self.kind.offsets();
        let m = offsets.len();
        let positions: Vec<usize> = offsets
            .iter()
            .map(|&o| {
                self.kind
                    .position(map(o))
                    .expect("symmetry must map the neighborhood onto itself")
            })
            .collect();
        Lut::from_fn(self.kind, |idx| {
            let mut src = 0usize;
            for (k, &p) in positions.iter().enumerate() {
                let bit = (idx >> (m - 1 - k)) & 1;
                src |= bit << (m - 1 - p);
            }
            self.get(src)
        })
    }

    /// Mirror across the vertical axis (i -> -i).
    pub fn mirror_horizontal(&self) -> Lut {
        self.permuted(|o| Offset::new(-o.di, o.dj))
    }
}

impl fmt::Debug for Lut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lut({}, {})", self.kind, self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NeighborhoodKind::{Moore9, Rect2x3, VonNeumann5};

    #[test]
    fn pattern_index_weights() {
        assert_eq!(pattern_index(Rect2x3, &[0; 6]).unwrap(), 0);
        // Center of the 2x3 neighborhood weighs 16.
        assert_eq!(pattern_index(Rect2x3, &[0, 1, 0, 0, 0, 0]).unwrap(), 16);
        // Center of the Moore neighborhood is position 4 of 9: weight 2^4.
        assert_eq!(
            pattern_index(Moore9, &[0, 0, 0, 0, 1, 0, 0, 0, 0]).unwrap(),
            16
        );
        assert_eq!(pattern_index(VonNeumann5, &[0, 0, 1, 0, 0]).unwrap(), 4);
        assert!(matches!(
            pattern_index(Rect2x3, &[0; 5]),
            Err(Error::ArityMismatch { got: 5, expected: 6 })
        ));
    }

    #[test]
    fn identity_lut_hex() {
        let id = Lut::projection(Rect2x3, Offset::ZERO).unwrap();
        assert_eq!(id.to_hex(), "FFFF0000FFFF0000");
        assert!(id.eval(&[0, 1, 0, 0, 0, 0]).unwrap());
        assert!(!id.eval(&[0; 6]).unwrap());
        assert!(id.is_quiescent());
    }

    /// The six projection rules pin the bit convention against the published
    /// hex strings for the empty-regulation class.
    #[test]
    fn projection_hex_table() {
        let cases = [
            (Offset::new(0, 0), "FFFF0000FFFF0000"),  // identity
            (Offset::new(1, 0), "FF00FF00FF00FF00"),  // shift left
            (Offset::new(-1, 0), "FFFFFFFF00000000"), // shift right
            (Offset::new(0, -1), "CCCCCCCCCCCCCCCC"), // shift up
            (Offset::new(1, -1), "AAAAAAAAAAAAAAAA"), // shift up-left
            (Offset::new(-1, -1), "F0F0F0F0F0F0F0F0"), // shift up-right
        ];
        for (offset, hex) in cases {
            let lut = Lut::projection(Rect2x3, offset).unwrap();
            assert_eq!(lut.to_hex(), hex, "projection at {offset}");
            assert_eq!(Lut::from_hex(hex, Rect2x3).unwrap(), lut);
        }
    }

    #[test]
    fn shift_up_semantics() {
        let up = Lut::from_hex("CCCCCCCCCCCCCCCC", Rect2x3).unwrap();
        // Only x(i,j-1) set: the particle below rises into the center.
        assert!(up.eval(&[0, 0, 0, 0, 1, 0]).unwrap());
        assert!(!up.eval(&[1, 1, 1, 1, 0, 1]).unwrap());
    }

    #[test]
    fn hex_decoding_errors() {
        assert!(matches!(
            Lut::from_hex("FFFF0000FFFF000", Rect2x3),
            Err(Error::BadLength { got: 15, expected: 16 })
        ));
        assert!(matches!(
            Lut::from_hex("FFFF0000FFFF000G", Rect2x3),
            Err(Error::BadDigit { digit: 'G', .. })
        ));
    }

    #[test]
    fn hex_input_is_whitespace_and_case_tolerant() {
        let a = Lut::from_hex("ffff 0000 FFFF 0000", Rect2x3).unwrap();
        assert_eq!(a.to_hex(), "FFFF0000FFFF0000");
    }

    #[test]
    fn mirror_swaps_left_and_right_shifts() {
        let left = Lut::from_hex("FF00FF00FF00FF00", Rect2x3).unwrap();
        let right = Lut::from_hex("FFFFFFFF00000000", Rect2x3).unwrap();
        assert_eq!(left.mirror_horizontal(), right);
        assert_eq!(right.mirror_horizontal(), left);
        let id = Lut::from_hex("FFFF0000FFFF0000", Rect2x3).unwrap();
        assert_eq!(id.mirror_horizontal(), id);
    }
}
