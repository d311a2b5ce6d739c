use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Storage width of a signed two's-complement integer variable.
///
/// Variants are declared narrowest first so the derived `Ord` is the
/// widening order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IntWidth {
    I8,
    I16,
    I32,
    I64,
}

impl IntWidth {
    pub const ALL: [IntWidth; 4] = [IntWidth::I8, IntWidth::I16, IntWidth::I32, IntWidth::I64];

    pub fn bits(self) -> u32 {
        match self {
            IntWidth::I8 => 8,
            IntWidth::I16 => 16,
            IntWidth::I32 => 32,
            IntWidth::I64 => 64,
        }
    }

    pub fn max(self) -> i128 {
        (1i128 << (self.bits() - 1)) - 1
    }

    pub fn min(self) -> i128 {
        -(1i128 << (self.bits() - 1))
    }

    pub fn contains(self, v: i128) -> bool {
        v >= self.min() && v <= self.max()
    }

    /// Number of representable values.
    pub fn cardinality(self) -> u128 {
        1u128 << self.bits()
    }

    /// Two's-complement wraparound of `v` into this width.
    pub fn wrap(self, v: i128) -> i128 {
        let bits = self.bits();
        let modulus = 1i128 << bits;
        let r = v.rem_euclid(modulus);
        if r > self.max() {
            r - modulus
        } else {
            r
        }
    }

    /// Next wider width, if any.
    pub fn wider(self) -> Option<IntWidth> {
        match self {
            IntWidth::I8 => Some(IntWidth::I16),
            IntWidth::I16 => Some(IntWidth::I32),
            IntWidth::I32 => Some(IntWidth::I64),
            IntWidth::I64 => None,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            IntWidth::I8 => "i8",
            IntWidth::I16 => "i16",
            IntWidth::I32 => "i32",
            IntWidth::I64 => "i64",
        }
    }
}

impl fmt::Display for IntWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for IntWidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "i8" => Ok(IntWidth::I8),
            "i16" => Ok(IntWidth::I16),
            "i32" => Ok(IntWidth::I32),
            "i64" => Ok(IntWidth::I64),
            other => Err(format!("unknown integer width `{other}`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_are_twos_complement() {
        assert_eq!(IntWidth::I8.max(), 127);
        assert_eq!(IntWidth::I8.min(), -128);
        assert_eq!(IntWidth::I16.max(), i16::MAX as i128);
        assert_eq!(IntWidth::I32.min(), i32::MIN as i128);
        assert_eq!(IntWidth::I64.max(), i64::MAX as i128);
        assert_eq!(IntWidth::I64.min(), i64::MIN as i128);
    }

    #[test]
    fn widening_order_is_total() {
        assert!(IntWidth::I8 < IntWidth::I16);
        assert!(IntWidth::I16 < IntWidth::I32);
        assert!(IntWidth::I32 < IntWidth::I64);
        assert_eq!(IntWidth::I64.wider(), None);
    }

    #[test]
    fn wrap_matches_native_casts() {
        for v in [-300i128, -129, -128, -1, 0, 127, 128, 255, 256, 1000] {
            assert_eq!(IntWidth::I8.wrap(v), v as i8 as i128);
            assert_eq!(IntWidth::I16.wrap(v * 300), (v * 300) as i16 as i128);
        }
        assert_eq!(IntWidth::I64.wrap(i64::MAX as i128 + 1), i64::MIN as i128);
    }
}
