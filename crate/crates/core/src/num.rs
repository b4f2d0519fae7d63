//! Extended-exponent real and complex arithmetic.
//!
//! Orbit magnitudes in this crate decay (or grow) like `c^(2^n)`, which
//! leaves the native f64 exponent range around n ≈ 10. [`ExtReal`] keeps a
//! native mantissa in `[1, 2)` next to a 64-bit binary exponent, so the
//! dynamic range is ±2^(±2^63) while relative precision stays at f64 level.
//! Logarithms of magnitudes are carried separately as [`LogMag`] values,
//! which remain plain doubles.

use thiserror::Error;

/// Natural log of 2, the bridge between binary exponents and [`LogMag`].
pub const LN_2: f64 = core::f64::consts::LN_2;

/// Exponent gap beyond which an addition returns the larger operand exactly
/// (64 guard bits plus the 53-bit mantissa).
const ADD_GAP_BITS: i64 = 64 + 53;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NumError {
    #[error("non-finite input to extended-exponent conversion")]
    NonFiniteInput,
}

/// Sign-magnitude extended float: value = `sign · mantissa · 2^exp2`.
///
/// Invariants: `sign == 0` iff the value is exactly zero, otherwise the
/// mantissa lies in `[1, 2)`. Exponent arithmetic saturates: blowing past
/// `i64::MAX` sets a sticky `overflow` flag (downstream classification treats
/// it as escape), while falling below `i64::MIN` flushes to exact zero.
#[derive(Clone, Copy, Debug)]
pub struct ExtReal {
    mantissa: f64,
    exp2: i64,
    sign: i8,
    overflow: bool,
}

impl ExtReal {
    pub const ZERO: Self = Self {
        mantissa: 0.0,
        exp2: 0,
        sign: 0,
        overflow: false,
    };

    pub const ONE: Self = Self {
        mantissa: 1.0,
        exp2: 0,
        sign: 1,
        overflow: false,
    };

    /// Saturated value used when exponent arithmetic overflows.
    pub fn overflowed(sign: i8) -> Self {
        Self {
            mantissa: 1.0,
            exp2: i64::MAX,
            sign: if sign == 0 { 1 } else { sign },
            overflow: true,
        }
    }

    /// Exact embedding of a finite f64.
    pub fn from_f64(x: f64) -> Result<Self, NumError> {
        if !x.is_finite() {
            return Err(NumError::NonFiniteInput);
        }
        if x == 0.0 {
            return Ok(Self::ZERO);
        }
        let (m, e) = frexp1_2(x.abs());
        Ok(Self {
            mantissa: m,
            exp2: e,
            sign: if x > 0.0 { 1 } else { -1 },
            overflow: false,
        })
    }

    /// Positive real from its natural logarithm (`LogMag::NEG_INFINITY` maps
    /// to zero). Accurate to the f64 precision of the log itself.
    pub fn from_log_mag(l: LogMag) -> Self {
        let v = l.0;
        if v == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        if v == f64::INFINITY {
            return Self::overflowed(1);
        }
        debug_assert!(v.is_finite());
        let e = (v / LN_2).round();
        if e >= i64::MAX as f64 {
            return Self::overflowed(1);
        }
        if e <= i64::MIN as f64 {
            return Self::ZERO;
        }
        let e = e as i64;
        let resid = v - (e as f64) * LN_2;
        // resid ∈ [-0.35, 0.35] up to rounding of the huge product; exp is safe.
        Self::compose(resid.exp(), e, false)
    }

    /// Nearest f64 (±∞ on exponent overflow, 0 on underflow).
    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            return 0.0;
        }
        if self.overflow {
            return if self.sign > 0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
        }
        let s = self.sign as f64;
        if self.exp2 > 1024 {
            return s * f64::INFINITY;
        }
        if self.exp2 < -1080 {
            return 0.0;
        }
        s * ldexp(self.mantissa, self.exp2)
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn is_overflow(self) -> bool {
        self.overflow
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    pub fn mantissa(self) -> f64 {
        self.mantissa
    }

    pub fn exp2(self) -> i64 {
        self.exp2
    }

    /// Build from a raw signed mantissa (any finite f64) and exponent,
    /// renormalizing into the `[1, 2)` invariant.
    fn compose(signed_mantissa: f64, exp2: i64, overflow: bool) -> Self {
        if overflow {
            return Self::overflowed(if signed_mantissa < 0.0 { -1 } else { 1 });
        }
        if signed_mantissa == 0.0 {
            return Self::ZERO;
        }
        let (m, e) = frexp1_2(signed_mantissa.abs());
        let sign = if signed_mantissa > 0.0 { 1 } else { -1 };
        match exp2.checked_add(e) {
            Some(total) => Self {
                mantissa: m,
                exp2: total,
                sign,
                overflow: false,
            },
            None => {
                if e > 0 {
                    Self::overflowed(sign)
                } else {
                    Self::ZERO
                }
            }
        }
    }

    pub fn neg(self) -> Self {
        Self {
            sign: -self.sign,
            ..self
        }
    }

    pub fn abs(self) -> Self {
        Self {
            sign: self.sign.abs(),
            ..self
        }
    }

    pub fn add(self, rhs: Self) -> Self {
        if self.overflow {
            return self;
        }
        if rhs.overflow {
            return rhs;
        }
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if magnitude_ge(self, rhs) {
            (self, rhs)
        } else {
            (rhs, self)
        };
        // Exponents may sit at opposite ends of the i64 range; widen.
        let gap = (big.exp2 as i128) - (small.exp2 as i128);
        debug_assert!(gap >= 0);
        if gap > ADD_GAP_BITS as i128 {
            return big;
        }
        let scaled = (small.sign as f64) * ldexp(small.mantissa, -(gap as i64));
        let sum = (big.sign as f64) * big.mantissa + scaled;
        Self::compose(sum, big.exp2, false)
    }

    pub fn sub(self, rhs: Self) -> Self {
        self.add(rhs.neg())
    }

    pub fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            // 0·overflow collapses to zero; the sticky flag only matters on
            // magnitudes that still participate downstream.
            return Self::ZERO;
        }
        let sign = self.sign * rhs.sign;
        if self.overflow || rhs.overflow {
            return Self::overflowed(sign);
        }
        let mut m = self.mantissa * rhs.mantissa; // in [1, 4)
        let mut carry = 0i64;
        if m >= 2.0 {
            m *= 0.5;
            carry = 1;
        }
        let total = (self.exp2 as i128) + (rhs.exp2 as i128) + (carry as i128);
        if total > i64::MAX as i128 {
            return Self::overflowed(sign);
        }
        if total < i64::MIN as i128 {
            return Self::ZERO;
        }
        Self {
            mantissa: m,
            exp2: total as i64,
            sign,
            overflow: false,
        }
    }

    pub fn div(self, rhs: Self) -> Self {
        assert!(rhs.sign != 0, "division by extended-exponent zero");
        if self.sign == 0 {
            return Self::ZERO;
        }
        let sign = self.sign * rhs.sign;
        if self.overflow || rhs.overflow {
            return if self.overflow {
                Self::overflowed(sign)
            } else {
                Self::ZERO
            };
        }
        let m = self.mantissa / rhs.mantissa; // in (0.5, 2)
        let total = (self.exp2 as i128) - (rhs.exp2 as i128);
        if total > i64::MAX as i128 {
            return Self::overflowed(sign);
        }
        if total < (i64::MIN as i128) + 2 {
            return Self::ZERO;
        }
        Self::compose(sign as f64 * m, total as i64, false)
    }

    /// Exact multiplication by 2^k.
    pub fn mul_pow2(self, k: i64) -> Self {
        if self.sign == 0 || self.overflow {
            return self;
        }
        match self.exp2.checked_add(k) {
            Some(e) => Self { exp2: e, ..self },
            None => {
                if k > 0 {
                    Self::overflowed(self.sign)
                } else {
                    Self::ZERO
                }
            }
        }
    }

    /// Square root of a non-negative value.
    pub fn sqrt(self) -> Self {
        assert!(self.sign >= 0, "sqrt of negative extended value");
        if self.sign == 0 {
            return Self::ZERO;
        }
        if self.overflow {
            return self;
        }
        let (m, e) = if self.exp2 & 1 == 0 {
            (self.mantissa.sqrt(), self.exp2 / 2)
        } else {
            ((2.0 * self.mantissa).sqrt(), (self.exp2 - 1) / 2)
        };
        Self {
            mantissa: m,
            exp2: e,
            sign: 1,
            overflow: false,
        }
    }

    /// Natural log of the magnitude.
    pub fn log_magnitude(self) -> LogMag {
        if self.sign == 0 {
            return LogMag::ZERO_MAG;
        }
        if self.overflow {
            return LogMag(f64::INFINITY);
        }
        LogMag((self.exp2 as f64) * LN_2 + self.mantissa.ln())
    }

    /// Magnitude comparison: `|self| >= |rhs|`. Overflowed values compare
    /// above everything finite.
    pub fn magnitude_ge(self, rhs: Self) -> bool {
        magnitude_ge(self, rhs)
    }
}

fn magnitude_ge(a: ExtReal, b: ExtReal) -> bool {
    if b.sign == 0 {
        return true;
    }
    if a.sign == 0 {
        return false;
    }
    match (a.overflow, b.overflow) {
        (true, _) => true,
        (false, true) => false,
        (false, false) => (a.exp2, a.mantissa) >= (b.exp2, b.mantissa),
    }
}

/// Decompose positive finite x as `m · 2^e` with m in `[1, 2)`.
fn frexp1_2(x: f64) -> (f64, i64) {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    if exp_field == 0 {
        // Subnormal: scale into the normal range first. 2^54 is exact.
        let (m, e) = frexp1_2(x * 1.8014398509481984e16);
        (m, e - 54)
    } else {
        let m = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | 0x3ff0_0000_0000_0000);
        (m, exp_field - 1023)
    }
}

/// `m · 2^e` with overflow/underflow to ±∞/0; split so subnormal results
/// round exactly once.
fn ldexp(m: f64, e: i64) -> f64 {
    if e == 0 {
        return m;
    }
    if e > 1100 {
        return m * f64::INFINITY;
    }
    if e < -1140 {
        return m * 0.0;
    }
    let e1 = (e / 2) as i32;
    let e2 = (e - e / 2) as i32;
    m * pow2i(e1) * pow2i(e2)
}

/// 2^e for e within the normal f64 exponent range.
fn pow2i(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Natural log of a magnitude; `NEG_INFINITY` marks zero and `INFINITY`
/// marks an overflowed (escaped) magnitude.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogMag(pub f64);

impl LogMag {
    pub const ZERO_MAG: Self = Self(f64::NEG_INFINITY);
    pub const UNIT: Self = Self(0.0);
    pub const OVERFLOW: Self = Self(f64::INFINITY);

    pub fn new(value: f64) -> Self {
        Self(value)
    }

    pub fn is_zero_mag(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn is_overflow(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Log of a product is the sum of logs.
    pub fn mul(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }

    /// Log of the t-th power.
    pub fn pow(self, t: f64) -> Self {
        Self(self.0 * t)
    }

    pub fn max(self, rhs: Self) -> Self {
        Self(self.0.max(rhs.0))
    }

    /// The magnitude itself, as f64 (may under/overflow).
    pub fn to_magnitude_f64(self) -> f64 {
        self.0.exp()
    }
}

/// Complex number with extended-exponent components.
#[derive(Clone, Copy, Debug)]
pub struct ExtComplex {
    pub re: ExtReal,
    pub im: ExtReal,
}

impl ExtComplex {
    pub const ZERO: Self = Self {
        re: ExtReal::ZERO,
        im: ExtReal::ZERO,
    };

    pub const ONE: Self = Self {
        re: ExtReal::ONE,
        im: ExtReal::ZERO,
    };

    pub const I: Self = Self {
        re: ExtReal::ZERO,
        im: ExtReal::ONE,
    };

    pub fn new(re: ExtReal, im: ExtReal) -> Self {
        Self { re, im }
    }

    /// Exact embedding of a finite (re, im) pair.
    pub fn from_f64_pair(re: f64, im: f64) -> Result<Self, NumError> {
        Ok(Self {
            re: ExtReal::from_f64(re)?,
            im: ExtReal::from_f64(im)?,
        })
    }

    pub fn from_real(re: ExtReal) -> Self {
        Self {
            re,
            im: ExtReal::ZERO,
        }
    }

    pub fn to_f64_pair(self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_zero(self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_overflow(self) -> bool {
        self.re.is_overflow() || self.im.is_overflow()
    }

    pub fn add(self, rhs: Self) -> Self {
        Self {
            re: self.re.add(rhs.re),
            im: self.im.add(rhs.im),
        }
    }

    pub fn sub(self, rhs: Self) -> Self {
        Self {
            re: self.re.sub(rhs.re),
            im: self.im.sub(rhs.im),
        }
    }

    pub fn neg(self) -> Self {
        Self {
            re: self.re.neg(),
            im: self.im.neg(),
        }
    }

    pub fn mul(self, rhs: Self) -> Self {
        Self {
            re: self.re.mul(rhs.re).sub(self.im.mul(rhs.im)),
            im: self.re.mul(rhs.im).add(self.im.mul(rhs.re)),
        }
    }

    /// Scale by a real factor.
    pub fn scale(self, r: ExtReal) -> Self {
        Self {
            re: self.re.mul(r),
            im: self.im.mul(r),
        }
    }

    /// Divide by a nonzero real factor.
    pub fn div_real(self, r: ExtReal) -> Self {
        Self {
            re: self.re.div(r),
            im: self.im.div(r),
        }
    }

    pub fn modulus_sq(self) -> ExtReal {
        self.re.mul(self.re).add(self.im.mul(self.im))
    }

    pub fn modulus(self) -> ExtReal {
        self.modulus_sq().sqrt()
    }

    /// Natural log of the modulus; never overflows the representation.
    pub fn log_modulus(self) -> LogMag {
        if self.is_overflow() {
            return LogMag::OVERFLOW;
        }
        if self.is_zero() {
            return LogMag::ZERO_MAG;
        }
        self.modulus_sq().log_magnitude().pow(0.5)
    }
}

/// Distance in units in the last place between two finite f64 values;
/// used by tests comparing extended ops against native arithmetic.
pub fn ulp_distance(a: f64, b: f64) -> u64 {
    fn key(x: f64) -> i64 {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN.wrapping_sub(bits).wrapping_neg() ^ i64::MIN
        } else {
            bits
        }
    }
    let (ka, kb) = (key(a), key(b));
    ka.abs_diff(kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ext(x: f64) -> ExtReal {
        ExtReal::from_f64(x).unwrap()
    }

    #[test]
    fn from_f64_round_trips_exactly() {
        for &x in &[
            0.0,
            1.0,
            -1.0,
            1.5,
            -0.1,
            core::f64::consts::PI,
            f64::MIN_POSITIVE,
            f64::MAX,
            3e-300,
            -7.25e250,
        ] {
            assert_eq!(ext(x).to_f64(), x, "round trip of {x}");
        }
    }

    #[test]
    fn from_f64_normalizes_mantissa() {
        let v = ext(1.5);
        assert_eq!(v.mantissa(), 1.5);
        assert_eq!(v.exp2(), 0);
        assert_eq!(v.sign(), 1);

        let v = ext(-6.0);
        assert_eq!(v.mantissa(), 1.5);
        assert_eq!(v.exp2(), 2);
        assert_eq!(v.sign(), -1);
    }

    #[test]
    fn subnormal_decomposition() {
        // 3·2^-1074 = 1.5·2^-1073, below the normal range.
        let tiny = 3.0 * f64::from_bits(1);
        let v = ext(tiny);
        assert_eq!(v.mantissa(), 1.5);
        assert_eq!(v.exp2(), -1073);
        assert_eq!(v.to_f64(), tiny);
    }

    #[test]
    fn non_finite_input_rejected() {
        assert!(ExtReal::from_f64(f64::NAN).is_err());
        assert!(ExtReal::from_f64(f64::INFINITY).is_err());
        assert!(ExtComplex::from_f64_pair(0.0, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn add_across_large_gap_returns_larger_operand() {
        let big = ExtReal {
            mantissa: 1.0,
            exp2: 200,
            sign: 1,
            overflow: false,
        };
        let small = ExtReal {
            mantissa: 1.0,
            exp2: -200,
            sign: 1,
            overflow: false,
        };
        let sum = big.add(small);
        assert_eq!(sum.mantissa(), 1.0);
        assert_eq!(sum.exp2(), 200);
    }

    /// Exact-rational oracle: at moderate exponents every ExtReal is the
    /// rational `sign · mantissa · 2^exp2`, and add/mul can be checked
    /// against `num::BigRational` exactly (up to one final rounding).
    mod rational_oracle {
        use super::*;
        use num::bigint::BigInt;
        use num::rational::BigRational;
        use num::traits::{One, Signed, Zero};

        pub fn to_rational(v: ExtReal) -> BigRational {
            if v.is_zero() {
                return BigRational::zero();
            }
            assert!(!v.is_overflow());
            // mantissa·2^52 is an integer for normalized mantissas.
            let scaled = v.mantissa() * (1u64 << 52) as f64;
            assert_eq!(scaled.fract(), 0.0);
            let mut r = BigRational::new(
                BigInt::from(scaled as i64 * v.sign() as i64),
                BigInt::from(1u64 << 52),
            );
            let e = v.exp2();
            let two = BigRational::from_integer(BigInt::from(2));
            let mut p = BigRational::one();
            for _ in 0..e.unsigned_abs() {
                p *= two.clone();
            }
            if e >= 0 {
                r *= p;
            } else {
                r /= p;
            }
            r
        }

        pub fn assert_close(v: ExtReal, r: &BigRational, rel_tol: f64) {
            let vr = to_rational(v);
            if r.is_zero() {
                assert!(vr.is_zero(), "expected zero, got {v:?}");
                return;
            }
            let err = (&vr - r).abs() / r.abs();
            // Compare the rational error against the tolerance via f64.
            let approx = rational_to_f64(&err);
            assert!(approx <= rel_tol, "relative error {approx} > {rel_tol}");
        }

        pub fn rational_to_f64(r: &BigRational) -> f64 {
            // Good enough for tolerances: use 200-bit truncation.
            let num = r.numer();
            let den = r.denom();
            let scale = BigInt::one() << 200u32;
            let q = (num * &scale) / den;
            let qs = q.to_string();
            let neg = qs.starts_with('-');
            let digits = qs.trim_start_matches('-');
            let mantissa: f64 = digits
                .chars()
                .take(17)
                .collect::<String>()
                .parse()
                .unwrap_or(0.0);
            let rest = digits.len().saturating_sub(17) as i32;
            let v = mantissa * 10f64.powi(rest) / 2f64.powi(200);
            if neg {
                -v
            } else {
                v
            }
        }
    }

    #[test]
    fn add_matches_rational_oracle_at_small_exponents() {
        use rational_oracle::*;
        let cases = [
            (ext(1.0), ext(1.0)),
            (ext(1.5).mul_pow2(40), ext(-1.25).mul_pow2(-40)),
            (ext(1.9999).mul_pow2(80), ext(1.0001).mul_pow2(-30)),
            (ext(-1.75).mul_pow2(10), ext(1.75).mul_pow2(10)),
        ];
        for (a, b) in cases {
            let sum = a.add(b);
            let want = to_rational(a) + to_rational(b);
            assert_close(sum, &want, 1e-15);
        }
    }

    #[test]
    fn mul_matches_rational_oracle_and_log_oracle() {
        use rational_oracle::*;
        let a = ExtReal {
            mantissa: 1.3,
            exp2: 500,
            sign: 1,
            overflow: false,
        };
        let b = ExtReal {
            mantissa: 1.6,
            exp2: 500,
            sign: 1,
            overflow: false,
        };
        let p = a.mul(b);
        assert_eq!(p.exp2(), 1001); // 1.3·1.6 = 2.08 carries one bit
        let want = to_rational(a) * to_rational(b);
        assert_close(p, &want, 1e-15);

        // Log-domain oracle: log(a·b) = log a + log b.
        let lhs = p.log_magnitude().value();
        let rhs = a.log_magnitude().value() + b.log_magnitude().value();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs());
    }

    #[test]
    fn complex_identities() {
        let i = ExtComplex::I;
        let m1 = i.mul(i);
        assert_eq!(m1.re.to_f64(), -1.0);
        assert!(m1.im.is_zero());

        let z = ExtComplex::from_f64_pair(1.0, 0.0).unwrap();
        let w = ExtComplex::from_f64_pair(0.0, 1.0).unwrap();
        let s = z.add(w);
        assert_eq!(s.to_f64_pair(), (1.0, 1.0));
    }

    #[test]
    fn log_modulus_values() {
        assert_eq!(ExtComplex::ONE.log_modulus().value(), 0.0);
        assert!(ExtComplex::ZERO.log_modulus().is_zero_mag());

        let big = ExtComplex::from_real(ExtReal::ONE.mul_pow2(1000));
        let got = big.log_modulus().value();
        let want = 1000.0 * LN_2;
        assert!((got - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn exponent_saturation_is_sticky() {
        let huge = ExtReal {
            mantissa: 1.5,
            exp2: i64::MAX - 1,
            sign: 1,
            overflow: false,
        };
        let sq = huge.mul(huge);
        assert!(sq.is_overflow());
        assert!(sq.add(ext(1.0)).is_overflow());
        assert!(sq.mul(ext(0.5)).is_overflow());
        assert_eq!(sq.to_f64(), f64::INFINITY);
        assert!(sq.log_magnitude().is_overflow());

        let tiny = ExtReal {
            mantissa: 1.5,
            exp2: i64::MIN + 1,
            sign: 1,
            overflow: false,
        };
        assert!(tiny.mul(tiny).is_zero());
    }

    #[test]
    fn from_log_mag_round_trip() {
        for &v in &[0.0, -1.0, -2187.0, -1e6, 300.0, -3f64.powi(30)] {
            let x = ExtReal::from_log_mag(LogMag(v));
            let back = x.log_magnitude().value();
            let tol = 1e-12 * v.abs().max(1.0);
            assert!((back - v).abs() <= tol, "log {v} -> {back}");
        }
        assert!(ExtReal::from_log_mag(LogMag::ZERO_MAG).is_zero());
    }

    proptest! {
        #[test]
        fn ext_add_matches_native(a in -1e12f64..1e12, b in -1e12f64..1e12) {
            let sum = ext(a).add(ext(b)).to_f64();
            prop_assert!(ulp_distance(sum, a + b) <= 2);
        }

        #[test]
        fn ext_mul_matches_native(a in -1e100f64..1e100, b in -1e100f64..1e100) {
            let prod = ext(a).mul(ext(b)).to_f64();
            prop_assert!(ulp_distance(prod, a * b) <= 2);
        }

        #[test]
        fn additive_identity(a in -1e300f64..1e300) {
            let x = ext(a);
            let sum = x.add(ExtReal::ZERO);
            prop_assert_eq!(sum.to_f64(), a);
            let prod = x.mul(ExtReal::ONE);
            prop_assert_eq!(prod.to_f64(), a);
        }

        #[test]
        fn normalization_idempotent(a in -1e300f64..1e300, k in -100_000i64..100_000) {
            prop_assume!(a != 0.0);
            let x = ext(a).mul_pow2(k);
            // Renormalizing a normalized value must be the identity.
            let y = ExtReal::compose(x.sign() as f64 * x.mantissa(), x.exp2(), false);
            prop_assert_eq!(x.mantissa(), y.mantissa());
            prop_assert_eq!(x.exp2(), y.exp2());
            prop_assert_eq!(x.sign(), y.sign());
        }

        #[test]
        fn log_homomorphism_under_mul(
            a in 1e-10f64..1e10,
            b in 1e-10f64..1e10,
            ka in -2000i64..2000,
            kb in -2000i64..2000,
        ) {
            let x = ext(a).mul_pow2(ka);
            let y = ext(b).mul_pow2(kb);
            let lhs = x.mul(y).log_magnitude().value();
            let rhs = x.log_magnitude().value() + y.log_magnitude().value();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn complex_mul_matches_native(
            ar in -1e3f64..1e3, ai in -1e3f64..1e3,
            br in -1e3f64..1e3, bi in -1e3f64..1e3,
        ) {
            let a = ExtComplex::from_f64_pair(ar, ai).unwrap();
            let b = ExtComplex::from_f64_pair(br, bi).unwrap();
            let p = a.mul(b);
            let (pr, pi) = p.to_f64_pair();
            prop_assert!(ulp_distance(pr, ar * br - ai * bi) <= 2);
            prop_assert!(ulp_distance(pi, ar * bi + ai * br) <= 2);
        }
    }
}
