//! Fixed-point scalars of the MAC datapath.
//!
//! Weights and activations are stored as [`Q7_8`] (16 bit, 8 fractional bits).
//! A product of two Q7.8 values is a Q14.16 number, which is sign-extended into
//! the 32-bit [`Q15_16`] accumulator without any rounding. Accumulation
//! saturates at the Q15.16 bounds; the `*_overflowing` variants report whether
//! saturation happened so callers can keep diagnostics.

use std::fmt;

/// Q7.8 fixed-point number: 1 sign bit, 7 integer bits, 8 fractional bits.
///
/// Range: `[-128.0, +127.99609375]`, resolution `2^-8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[repr(transparent)]
pub struct Q7_8(i16);

/// Q15.16 accumulator: 1 sign bit, 15 integer bits, 16 fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[repr(transparent)]
pub struct Q15_16(i32);

impl Q7_8 {
    pub const FRAC_BITS: u32 = 8;
    pub const SCALE: f64 = 256.0;
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1 << Self::FRAC_BITS);
    pub const MIN: Self = Self(i16::MIN);
    pub const MAX: Self = Self(i16::MAX);

    #[inline]
    pub const fn from_raw(raw: i16) -> Self {
        Self(raw)
    }

    #[inline]
    pub const fn raw(self) -> i16 {
        self.0
    }

    /// Quantizes a real number: nearest representable value, ties away from
    /// zero, saturating at the range bounds. NaN maps to zero.
    pub fn from_real(x: f64) -> Self {
        if x.is_nan() {
            return Self::ZERO;
        }
        let scaled = (x * Self::SCALE).round();
        if scaled >= i16::MAX as f64 {
            Self::MAX
        } else if scaled <= i16::MIN as f64 {
            Self::MIN
        } else {
            Self(scaled as i16)
        }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Widens without loss into the accumulator format.
    #[inline]
    pub const fn widen(self) -> Q15_16 {
        Q15_16((self.0 as i32) << 8)
    }
}

impl Q15_16 {
    pub const FRAC_BITS: u32 = 16;
    pub const SCALE: f64 = 65536.0;
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1 << Self::FRAC_BITS);
    pub const MIN: Self = Self(i32::MIN);
    pub const MAX: Self = Self(i32::MAX);

    #[inline]
    pub const fn from_raw(raw: i32) -> Self {
        Self(raw)
    }

    #[inline]
    pub const fn raw(self) -> i32 {
        self.0
    }

    /// Quantizes a real number into the accumulator format, same rounding and
    /// saturation rules as [`Q7_8::from_real`].
    pub fn from_real(x: f64) -> Self {
        if x.is_nan() {
            return Self::ZERO;
        }
        let scaled = (x * Self::SCALE).round();
        if scaled >= i32::MAX as f64 {
            Self::MAX
        } else if scaled <= i32::MIN as f64 {
            Self::MIN
        } else {
            Self(scaled as i32)
        }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE
    }

    #[inline]
    pub fn saturating_add(self, rhs: Self) -> Self {
        Self(self.0.saturating_add(rhs.0))
    }

    /// Saturating add that also reports whether the bound was hit.
    #[inline]
    pub fn overflowing_add(self, rhs: Self) -> (Self, bool) {
        match self.0.checked_add(rhs.0) {
            Some(v) => (Self(v), false),
            None => (Self(self.0.saturating_add(rhs.0)), true),
        }
    }

    /// Narrows to Q7.8: arithmetic shift (truncation toward negative
    /// infinity) followed by saturation.
    #[inline]
    pub fn to_q7_8_saturating(self) -> Q7_8 {
        let shifted = self.0 >> 8;
        Q7_8(shifted.clamp(i16::MIN as i32, i16::MAX as i32) as i16)
    }
}

/// Exact Q7.8 × Q7.8 product. `|raw_a · raw_b| ≤ 2^30`, so it always fits.
#[inline]
pub fn mul_q78(a: Q7_8, b: Q7_8) -> Q15_16 {
    Q15_16(a.0 as i32 * b.0 as i32)
}

/// One multiply-accumulate step under the saturating accumulator policy.
#[inline]
pub fn mac(acc: Q15_16, a: Q7_8, w: Q7_8) -> Q15_16 {
    acc.saturating_add(mul_q78(a, w))
}

/// [`mac`] plus an overflow flag.
#[inline]
pub fn mac_overflowing(acc: Q15_16, a: Q7_8, w: Q7_8) -> (Q15_16, bool) {
    acc.overflowing_add(mul_q78(a, w))
}

#[inline]
pub fn to_q78_saturating(acc: Q15_16) -> Q7_8 {
    acc.to_q7_8_saturating()
}

/// Accumulator register with an attached saturation counter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MacUnit {
    pub acc: Q15_16,
    pub overflows: u64,
}

impl MacUnit {
    #[inline]
    pub fn step(&mut self, a: Q7_8, w: Q7_8) {
        let (acc, overflowed) = mac_overflowing(self.acc, a, w);
        self.acc = acc;
        self.overflows += overflowed as u64;
    }

    #[inline]
    pub fn reset(&mut self) {
        self.acc = Q15_16::ZERO;
    }
}

impl fmt::Display for Q7_8 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl fmt::Display for Q15_16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl From<Q7_8> for Q15_16 {
    fn from(v: Q7_8) -> Self {
        v.widen()
    }
}
