//! Fixed-precision binary floating point with a multi-limb mantissa, plus a
//! complex type built on it.
//!
//! A nonzero [`MpFloat`] holds `(-1)^neg * 0.m * 2^exp`, where `m` is a
//! little-endian array of 64-bit limbs whose top bit is set. Every operation
//! rounds to the precision of its left operand with round-half-up on a guard
//! limb, so relative error per operation is at most one unit in the last
//! place.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use smallvec::{smallvec, SmallVec};

type Limbs = SmallVec<[u64; 12]>;

/// Number of limbs needed to hold `bits` bits of mantissa (at least one).
pub fn limbs_for_bits(bits: u32) -> usize {
    (bits.max(1) as usize).div_ceil(64)
}

/// Precision actually used for a request of `bits`: rounded up to whole limbs.
pub fn effective_bits(bits: u32) -> u32 {
    64 * limbs_for_bits(bits) as u32
}

#[derive(Clone, Debug)]
pub struct MpFloat {
    neg: bool,
    exp: i64,
    mant: Limbs,
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    if e > 3000 {
        return x * f64::INFINITY;
    }
    if e < -3000 {
        return x * 0.0;
    }
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Split a finite nonzero f64 into `(negative, m, e)` with `|x| = m * 2^e`.
fn decompose_f64(x: f64) -> (bool, u64, i64) {
    let bits = x.to_bits();
    let neg = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        (neg, frac, -1074)
    } else {
        (neg, frac | (1u64 << 52), biased - 1075)
    }
}

fn leading_zero_bits(buf: &[u64]) -> Option<u64> {
    let mut lz = 0u64;
    for &w in buf.iter().rev() {
        if w == 0 {
            lz += 64;
        } else {
            return Some(lz + w.leading_zeros() as u64);
        }
    }
    None
}

/// Shift `buf` left by `s` bits in place, discarding bits shifted past the top.
fn shl_in_place(buf: &mut [u64], s: u64) {
    let n = buf.len();
    let q = (s / 64) as usize;
    let r = (s % 64) as u32;
    if q >= n {
        buf.iter_mut().for_each(|w| *w = 0);
        return;
    }
    for i in (0..n).rev() {
        let src = i as isize - q as isize;
        let hi = if src >= 0 { buf[src as usize] } else { 0 };
        let lo = if src >= 1 { buf[src as usize - 1] } else { 0 };
        buf[i] = if r == 0 { hi } else { (hi << r) | (lo >> (64 - r)) };
    }
}

/// Shift `buf` right by `s` bits in place.
fn shr_in_place(buf: &mut [u64], s: u64) {
    let n = buf.len();
    let q = (s / 64) as usize;
    let r = (s % 64) as u32;
    if q >= n {
        buf.iter_mut().for_each(|w| *w = 0);
        return;
    }
    for i in 0..n {
        let src = i + q;
        let lo = if src < n { buf[src] } else { 0 };
        let hi = if src + 1 < n { buf[src + 1] } else { 0 };
        buf[i] = if r == 0 { lo } else { (lo >> r) | (hi << (64 - r)) };
    }
}

impl MpFloat {
    pub fn zero(bits: u32) -> Self {
        Self::zero_limbs(limbs_for_bits(bits))
    }

    fn zero_limbs(l: usize) -> Self {
        MpFloat { neg: false, exp: 0, mant: smallvec![0; l] }
    }

    pub fn one(bits: u32) -> Self {
        Self::from_u64(1, bits)
    }

    pub fn from_u64(v: u64, bits: u32) -> Self {
        Self::from_u64_limbs(v, limbs_for_bits(bits))
    }

    fn from_u64_limbs(v: u64, l: usize) -> Self {
        let mut x = Self::zero_limbs(l);
        if v != 0 {
            let lz = v.leading_zeros();
            x.mant[l - 1] = v << lz;
            x.exp = 64 - lz as i64;
        }
        x
    }

    pub fn from_i64(v: i64, bits: u32) -> Self {
        let mut x = Self::from_u64(v.unsigned_abs(), bits);
        x.neg = v < 0 && !x.is_zero();
        x
    }

    /// Exact conversion from a finite f64 (panics on NaN or infinity).
    pub fn from_f64(v: f64, bits: u32) -> Self {
        Self::from_f64_limbs(v, limbs_for_bits(bits))
    }

    fn from_f64_limbs(v: f64, l: usize) -> Self {
        assert!(v.is_finite(), "MpFloat::from_f64 needs a finite value, got {v}");
        if v == 0.0 {
            return Self::zero_limbs(l);
        }
        let (neg, m, e) = decompose_f64(v);
        let mut x = Self::from_u64_limbs(m, l);
        x.exp += e;
        x.neg = neg;
        x
    }

    pub fn limbs(&self) -> usize {
        self.mant.len()
    }

    pub fn precision_bits(&self) -> u32 {
        64 * self.mant.len() as u32
    }

    pub fn is_zero(&self) -> bool {
        self.mant[self.mant.len() - 1] == 0
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    /// Exponent `e` such that `2^(e-1) <= |x| < 2^e`; meaningless for zero.
    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn abs(&self) -> Self {
        let mut x = self.clone();
        x.neg = false;
        x
    }

    /// Same value at a different precision (rounded when narrowing).
    pub fn with_precision(&self, bits: u32) -> Self {
        let l = limbs_for_bits(bits);
        let n = self.mant.len();
        match l.cmp(&n) {
            Ordering::Equal => self.clone(),
            Ordering::Greater => {
                let mut mant: Limbs = smallvec![0; l];
                mant[l - n..].copy_from_slice(&self.mant);
                MpFloat { neg: self.neg, exp: self.exp, mant }
            }
            Ordering::Less => {
                if self.is_zero() {
                    return Self::zero_limbs(l);
                }
                Self::pack(self.neg, self.exp, &self.mant, l)
            }
        }
    }

    /// Round a normalized buffer (top bit set, `buf.len() >= l`) to `l` limbs.
    fn pack(neg: bool, mut exp: i64, buf: &[u64], l: usize) -> Self {
        let n = buf.len();
        debug_assert!(n >= l);
        let mut mant: Limbs = SmallVec::from_slice(&buf[n - l..]);
        if n > l && buf[n - l - 1] >> 63 == 1 {
            let mut carry = true;
            for w in mant.iter_mut() {
                let (s, c) = w.overflowing_add(1);
                *w = s;
                if !c {
                    carry = false;
                    break;
                }
            }
            if carry {
                mant[l - 1] = 1 << 63;
                exp += 1;
            }
        }
        MpFloat { neg, exp, mant }
    }

    /// Normalize an arbitrary buffer and round it to `l` limbs.
    fn normalize_pack(neg: bool, exp: i64, buf: &mut [u64], l: usize) -> Self {
        match leading_zero_bits(buf) {
            None => Self::zero_limbs(l),
            Some(lz) => {
                if lz > 0 {
                    shl_in_place(buf, lz);
                }
                Self::pack(neg, exp - lz as i64, buf, l)
            }
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let l = self.mant.len();
        let top = self.mant[l - 1];
        // Fold the next limb in as a sticky bit so the u64 -> f64 rounding
        // sees the full tail.
        let mut top = top;
        if l > 1 && self.mant[l - 2] != 0 {
            top |= 1;
        }
        let f = ldexp(top as f64, self.exp - 64);
        if self.neg {
            -f
        } else {
            f
        }
    }

    /// `(f, e)` with `self = f * 2^e` and `0.5 <= |f| < 1` (or `(0, 0)`).
    pub fn to_f64_exp(&self) -> (f64, i64) {
        if self.is_zero() {
            return (0.0, 0);
        }
        let l = self.mant.len();
        let f = ldexp(self.mant[l - 1] as f64, -64);
        let (f, e) = if f >= 1.0 { (0.5, self.exp + 1) } else { (f, self.exp) };
        (if self.neg { -f } else { f }, e)
    }

    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let (f, e) = self.to_f64_exp();
        f.abs().log2() + e as f64
    }

    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        if self.exp != other.exp {
            return self.exp.cmp(&other.exp);
        }
        let (a, b) = (&self.mant, &other.mant);
        let n = a.len().max(b.len());
        for i in 0..n {
            let x = if i < a.len() { a[a.len() - 1 - i] } else { 0 };
            let y = if i < b.len() { b[b.len() - 1 - i] } else { 0 };
            if x != y {
                return x.cmp(&y);
            }
        }
        Ordering::Equal
    }

    /// Exact value equality, ignoring precision.
    pub fn value_eq(&self, other: &Self) -> bool {
        if self.is_zero() && other.is_zero() {
            return true;
        }
        self.neg == other.neg && self.cmp_abs(other) == Ordering::Equal
    }

    fn add_signed(&self, other: &Self, negate_other: bool) -> Self {
        let l = self.mant.len();
        let other_neg = other.neg ^ negate_other;
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            let mut r = other.with_precision(64 * l as u32);
            r.neg = other_neg;
            return r;
        }
        let (big, big_neg, small, small_neg) = if self.cmp_abs(other) != Ordering::Less {
            (self, self.neg, other, other_neg)
        } else {
            (other, other_neg, self, self.neg)
        };
        // Work buffer: l limbs of mantissa plus one guard limb below.
        let w = l + 1;
        let d = (big.exp - small.exp) as u64;
        let mut a: Limbs = smallvec![0; w];
        place_top(&mut a, &big.mant);
        if d >= 64 * w as u64 {
            let mut r = big.with_precision(64 * l as u32);
            r.neg = big_neg;
            return r;
        }
        let mut b: Limbs = smallvec![0; w];
        place_top(&mut b, &small.mant);
        shr_in_place(&mut b, d);
        if big_neg == small_neg {
            let mut carry = 0u64;
            for i in 0..w {
                let (s1, c1) = a[i].overflowing_add(b[i]);
                let (s2, c2) = s1.overflowing_add(carry);
                a[i] = s2;
                carry = (c1 as u64) + (c2 as u64);
            }
            let mut exp = big.exp;
            if carry != 0 {
                shr_in_place(&mut a, 1);
                a[w - 1] |= 1 << 63;
                exp += 1;
            }
            Self::pack(big_neg, exp, &a, l)
        } else {
            let mut borrow = 0u64;
            for i in 0..w {
                let (s1, c1) = a[i].overflowing_sub(b[i]);
                let (s2, c2) = s1.overflowing_sub(borrow);
                a[i] = s2;
                borrow = (c1 as u64) + (c2 as u64);
            }
            debug_assert_eq!(borrow, 0);
            Self::normalize_pack(big_neg, big.exp, &mut a, l)
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_signed(other, false)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_signed(other, true)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let l = self.mant.len();
        if self.is_zero() || other.is_zero() {
            return Self::zero_limbs(l);
        }
        let (a, b) = (&self.mant, &other.mant);
        let mut p: Limbs = smallvec![0; a.len() + b.len()];
        for (i, &ai) in a.iter().enumerate() {
            let mut carry = 0u128;
            for (j, &bj) in b.iter().enumerate() {
                let t = (ai as u128) * (bj as u128) + p[i + j] as u128 + carry;
                p[i + j] = t as u64;
                carry = t >> 64;
            }
            p[i + b.len()] = carry as u64;
        }
        Self::normalize_pack(self.neg ^ other.neg, self.exp + other.exp, &mut p, l)
    }

    pub fn mul_u64(&self, v: u64) -> Self {
        let l = self.mant.len();
        if self.is_zero() || v == 0 {
            return Self::zero_limbs(l);
        }
        let mut p: Limbs = smallvec![0; l + 1];
        let mut carry = 0u128;
        for i in 0..l {
            let t = (self.mant[i] as u128) * (v as u128) + carry;
            p[i] = t as u64;
            carry = t >> 64;
        }
        p[l] = carry as u64;
        Self::normalize_pack(self.neg, self.exp + 64, &mut p, l)
    }

    pub fn div_u64(&self, v: u64) -> Self {
        assert!(v != 0, "division by zero");
        let l = self.mant.len();
        if self.is_zero() {
            return Self::zero_limbs(l);
        }
        // Two guard limbs so that a large divisor still leaves one after
        // normalization.
        let w = l + 2;
        let mut q: Limbs = smallvec![0; w];
        let mut r = 0u128;
        for i in (0..w).rev() {
            let src = if i >= 2 { self.mant[i - 2] } else { 0 };
            let cur = (r << 64) | src as u128;
            q[i] = (cur / v as u128) as u64;
            r = cur % v as u128;
        }
        Self::normalize_pack(self.neg, self.exp, &mut q, l)
    }

    /// Exact scaling by a power of two.
    pub fn mul_pow2(&self, k: i64) -> Self {
        let mut x = self.clone();
        if !x.is_zero() {
            x.exp += k;
        }
        x
    }

    pub fn mul_f64(&self, v: f64) -> Self {
        assert!(v.is_finite());
        if v == 0.0 || self.is_zero() {
            return Self::zero_limbs(self.mant.len());
        }
        let (neg, m, e) = decompose_f64(v);
        let mut r = self.mul_u64(m);
        r.exp += e;
        r.neg ^= neg;
        r
    }

    /// Reciprocal by Newton iteration from an f64 seed.
    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        let l = self.mant.len();
        let lw = l + 1;
        let (f, e) = self.to_f64_exp();
        let mut x = Self::from_f64_limbs(1.0 / f, lw);
        x.exp -= e;
        let b = self.with_precision(64 * lw as u32);
        let one = Self::from_u64_limbs(1, lw);
        let mut good_bits = 50u32;
        while good_bits < 64 * lw as u32 + 8 {
            let r = one.sub(&b.mul(&x));
            x = x.add(&x.mul(&r));
            good_bits *= 2;
        }
        x.with_precision(64 * l as u32)
    }

    pub fn div(&self, other: &Self) -> Self {
        let l = self.mant.len();
        if self.is_zero() {
            return Self::zero_limbs(l);
        }
        let lw = l + 1;
        let bits_w = 64 * lw as u32;
        let inv = other.with_precision(bits_w).recip();
        let a = self.with_precision(bits_w);
        let q = a.mul(&inv);
        let r = a.sub(&other.with_precision(bits_w).mul(&q));
        q.add(&r.mul(&inv)).with_precision(64 * l as u32)
    }

    /// Square root by Newton iteration on the reciprocal square root.
    pub fn sqrt(&self) -> Self {
        assert!(!self.neg || self.is_zero(), "sqrt of negative number");
        let l = self.mant.len();
        if self.is_zero() {
            return Self::zero_limbs(l);
        }
        let lw = l + 1;
        let bits_w = 64 * lw as u32;
        let a = self.with_precision(bits_w);
        // Seed y ~ 1/sqrt(a) from an even-exponent split.
        let (f, e) = a.to_f64_exp();
        let (f, e) = if e % 2 != 0 { (f * 2.0, e - 1) } else { (f, e) };
        let mut y = Self::from_f64_limbs(1.0 / f.sqrt(), lw);
        y.exp -= e / 2;
        let one = Self::from_u64_limbs(1, lw);
        let mut good_bits = 50u32;
        while good_bits < bits_w + 8 {
            let t = one.sub(&a.mul(&y.mul(&y)));
            y = y.add(&y.mul(&t).mul_pow2(-1));
            good_bits *= 2;
        }
        let s = a.mul(&y);
        let r = a.sub(&s.mul(&s));
        s.add(&r.mul(&y).mul_pow2(-1)).with_precision(64 * l as u32)
    }

    /// Hexadecimal float text, exact: `-0x0.<16 digits per limb>p<exp>`.
    pub fn to_hex(&self) -> String {
        if self.is_zero() {
            return format!("0x0.{}p+0", "0".repeat(16 * self.mant.len()));
        }
        let mut s = String::with_capacity(8 + 16 * self.mant.len());
        if self.neg {
            s.push('-');
        }
        s.push_str("0x0.");
        for w in self.mant.iter().rev() {
            s.push_str(&format!("{w:016x}"));
        }
        s.push_str(&format!("p{:+}", self.exp));
        s
    }

    /// Parse hexadecimal float text. Precision is taken from the digit count
    /// unless `bits` is given.
    pub fn from_hex(text: &str, bits: Option<u32>) -> Result<Self, ParseMpError> {
        let t = text.trim();
        let (neg, t) = match t.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let t = t
            .strip_prefix("0x")
            .or_else(|| t.strip_prefix("0X"))
            .ok_or_else(|| ParseMpError(format!("missing 0x prefix in {text:?}")))?;
        let (mantissa, exp) = match t.find(['p', 'P']) {
            Some(i) => {
                let e: i64 = t[i + 1..]
                    .parse()
                    .map_err(|_| ParseMpError(format!("bad exponent in {text:?}")))?;
                (&t[..i], e)
            }
            None => (t, 0),
        };
        let (int_part, frac_part) = match mantissa.find('.') {
            Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
            None => (mantissa, ""),
        };
        let digits: Vec<u8> = int_part
            .chars()
            .chain(frac_part.chars())
            .map(|c| c.to_digit(16).map(|d| d as u8))
            .collect::<Option<_>>()
            .ok_or_else(|| ParseMpError(format!("bad hex digit in {text:?}")))?;
        if digits.is_empty() {
            return Err(ParseMpError(format!("no digits in {text:?}")));
        }
        let nl = digits.len().div_ceil(16);
        let l = match bits {
            Some(b) => limbs_for_bits(b),
            None => limbs_for_bits(4 * frac_part.len().max(1) as u32),
        };
        // Fixed point: value = 0.digits * 16^(len(int_part)) * 2^exp.
        let mut buf: Limbs = smallvec![0; nl];
        for (k, &d) in digits.iter().enumerate() {
            let bitpos = 64 * nl - 4 * (k + 1);
            buf[bitpos / 64] |= (d as u64) << (bitpos % 64);
        }
        let e = exp + 4 * int_part.len() as i64;
        let mut r = if nl >= l {
            Self::normalize_pack(neg, e, &mut buf, l)
        } else {
            let mut wide: Limbs = smallvec![0; l];
            wide[l - nl..].copy_from_slice(&buf);
            Self::normalize_pack(neg, e, &mut wide, l)
        };
        if r.is_zero() {
            r.neg = false;
        }
        Ok(r)
    }
}

fn place_top(dst: &mut [u64], src: &[u64]) {
    let n = dst.len();
    let m = src.len();
    if m <= n {
        dst[n - m..].copy_from_slice(src);
    } else {
        dst.copy_from_slice(&src[m - n..]);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseMpError(pub String);

impl fmt::Display for ParseMpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseMpError {}

impl fmt::Display for MpFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl Neg for MpFloat {
    type Output = MpFloat;
    fn neg(mut self) -> MpFloat {
        if !self.is_zero() {
            self.neg = !self.neg;
        }
        self
    }
}

impl Neg for &MpFloat {
    type Output = MpFloat;
    fn neg(self) -> MpFloat {
        -(self.clone())
    }
}

impl Add for &MpFloat {
    type Output = MpFloat;
    fn add(self, rhs: &MpFloat) -> MpFloat {
        MpFloat::add(self, rhs)
    }
}

impl Sub for &MpFloat {
    type Output = MpFloat;
    fn sub(self, rhs: &MpFloat) -> MpFloat {
        MpFloat::sub(self, rhs)
    }
}

impl Mul for &MpFloat {
    type Output = MpFloat;
    fn mul(self, rhs: &MpFloat) -> MpFloat {
        MpFloat::mul(self, rhs)
    }
}

/// Complex number with [`MpFloat`] parts at a common precision.
#[derive(Clone, Debug)]
pub struct MpComplex {
    pub re: MpFloat,
    pub im: MpFloat,
}

impl MpComplex {
    pub fn zero(bits: u32) -> Self {
        MpComplex { re: MpFloat::zero(bits), im: MpFloat::zero(bits) }
    }

    pub fn one(bits: u32) -> Self {
        MpComplex { re: MpFloat::one(bits), im: MpFloat::zero(bits) }
    }

    pub fn new(re: MpFloat, im: MpFloat) -> Self {
        MpComplex { re, im }
    }

    pub fn from_c64(z: Complex64, bits: u32) -> Self {
        MpComplex { re: MpFloat::from_f64(z.re, bits), im: MpFloat::from_f64(z.im, bits) }
    }

    pub fn from_real(x: f64, bits: u32) -> Self {
        Self::from_c64(Complex64::new(x, 0.0), bits)
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn precision_bits(&self) -> u32 {
        self.re.precision_bits()
    }

    pub fn with_precision(&self, bits: u32) -> Self {
        MpComplex { re: self.re.with_precision(bits), im: self.im.with_precision(bits) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn value_eq(&self, other: &Self) -> bool {
        self.re.value_eq(&other.re) && self.im.value_eq(&other.im)
    }

    pub fn conj(&self) -> Self {
        MpComplex { re: self.re.clone(), im: -&self.im }
    }

    pub fn add(&self, o: &Self) -> Self {
        MpComplex { re: self.re.add(&o.re), im: self.im.add(&o.im) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        MpComplex { re: self.re.sub(&o.re), im: self.im.sub(&o.im) }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let re = self.re.mul(&o.re).sub(&self.im.mul(&o.im));
        let im = self.re.mul(&o.im).add(&self.im.mul(&o.re));
        MpComplex { re, im }
    }

    /// Product with an f64 complex number (cheaper than a full MP product).
    pub fn mul_c64(&self, z: Complex64) -> Self {
        let re = self.re.mul_f64(z.re).sub(&self.im.mul_f64(z.im));
        let im = self.re.mul_f64(z.im).add(&self.im.mul_f64(z.re));
        MpComplex { re, im }
    }

    pub fn mul_real(&self, x: &MpFloat) -> Self {
        MpComplex { re: self.re.mul(x), im: self.im.mul(x) }
    }

    pub fn mul_f64(&self, x: f64) -> Self {
        MpComplex { re: self.re.mul_f64(x), im: self.im.mul_f64(x) }
    }

    pub fn mul_u64(&self, v: u64) -> Self {
        MpComplex { re: self.re.mul_u64(v), im: self.im.mul_u64(v) }
    }

    pub fn div_u64(&self, v: u64) -> Self {
        MpComplex { re: self.re.div_u64(v), im: self.im.div_u64(v) }
    }

    pub fn mul_pow2(&self, k: i64) -> Self {
        MpComplex { re: self.re.mul_pow2(k), im: self.im.mul_pow2(k) }
    }

    pub fn norm_sqr(&self) -> MpFloat {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    pub fn div(&self, o: &Self) -> Self {
        let inv = o.norm_sqr().recip();
        self.mul(&o.conj()).mul_real(&inv)
    }

    /// `log2 |z|`, or `-inf` for zero.
    pub fn log2_abs(&self) -> f64 {
        let (fr, er) = self.re.to_f64_exp();
        let (fi, ei) = self.im.to_f64_exp();
        if fr == 0.0 && fi == 0.0 {
            return f64::NEG_INFINITY;
        }
        let e = if fr == 0.0 {
            ei
        } else if fi == 0.0 {
            er
        } else {
            er.max(ei)
        };
        let a = ldexp(fr, er - e);
        let b = ldexp(fi, ei - e);
        a.hypot(b).log2() + e as f64
    }

    /// Modulus as f64, safe for exponents outside the f64 range only in the
    /// sense that it saturates.
    pub fn abs_f64(&self) -> f64 {
        self.log2_abs().exp2()
    }

    /// Complex exponential: Taylor series on `z / 2^m`, then `m` squarings.
    pub fn exp(&self) -> Self {
        let bits = self.precision_bits();
        let lw_bits = bits + 64;
        let z = self.with_precision(lw_bits);
        let mag = z.log2_abs();
        let m: i64 = if mag.is_finite() { (mag + 16.0).ceil().max(0.0) as i64 } else { 0 };
        let w = z.mul_pow2(-m);
        // |w| <= 2^-16, so each term shrinks by at least 2^16.
        let mut sum = MpComplex::one(lw_bits);
        let mut term = MpComplex::one(lw_bits);
        let mut k = 1u64;
        loop {
            term = term.mul(&w).div_u64(k);
            if term.is_zero() || term.log2_abs() < -(lw_bits as f64) - 4.0 {
                break;
            }
            sum = sum.add(&term);
            k += 1;
        }
        for _ in 0..m {
            sum = sum.mul(&sum);
        }
        sum.with_precision(bits)
    }
}

impl fmt::Display for MpComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_c64())
    }
}

impl Add for &MpComplex {
    type Output = MpComplex;
    fn add(self, rhs: &MpComplex) -> MpComplex {
        MpComplex::add(self, rhs)
    }
}

impl Sub for &MpComplex {
    type Output = MpComplex;
    fn sub(self, rhs: &MpComplex) -> MpComplex {
        MpComplex::sub(self, rhs)
    }
}

impl Mul for &MpComplex {
    type Output = MpComplex;
    fn mul(self, rhs: &MpComplex) -> MpComplex {
        MpComplex::mul(self, rhs)
    }
}

impl Neg for &MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        MpComplex { re: -&self.re, im: -&self.im }
    }
}
