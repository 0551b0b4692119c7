//! Extended-precision polynomials and the two heat-type operators acting on
//! them.
//!
//! The additive operator `exp{δτ/(2N) d²/dz²}` is a terminating series and is
//! summed by a coefficient recurrence. The multiplicative operator
//! `exp{-δτ/(2N)(z² d²/dz² - (N-2) z d/dz - N)}` is diagonal on monomials and
//! multiplies the `z^k` coefficient by `exp{-δτ (k+1)(k-N)/(2N)}`.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{effective_bits, MpComplex, MpFloat};
use crate::pointset::PointSet;
use crate::Mode;

/// Working precision used when none is requested: `max(256, 2N + 128)`.
pub fn default_precision(n: usize) -> u32 {
    effective_bits(256.max(2 * n as u32 + 128))
}

/// Polynomial `sum_k coeffs[k] z^k` with extended-precision coefficients.
#[derive(Clone, Debug)]
pub struct Poly {
    coeffs: Vec<MpComplex>,
    precision_bits: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatStep {
    pub delta_tau: Complex64,
    pub n: usize,
    pub mode: Mode,
}

impl HeatStep {
    pub fn additive(delta_tau: Complex64, n: usize) -> Self {
        HeatStep { delta_tau, n, mode: Mode::Additive }
    }

    pub fn multiplicative(delta_tau: Complex64, n: usize) -> Self {
        HeatStep { delta_tau, n, mode: Mode::Multiplicative }
    }
}

impl Poly {
    /// Polynomial from coefficients, lowest degree first. Trailing zero
    /// coefficients are kept only if the whole polynomial is zero.
    pub fn from_coeffs(coeffs: Vec<MpComplex>, precision_bits: u32) -> Self {
        assert!(!coeffs.is_empty(), "a polynomial needs at least one coefficient");
        let bits = effective_bits(precision_bits.max(64));
        let mut coeffs: Vec<MpComplex> =
            coeffs.into_iter().map(|c| c.with_precision(bits)).collect();
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs, precision_bits: bits }
    }

    pub fn from_c64(coeffs: &[Complex64], precision_bits: u32) -> Self {
        let v = coeffs.iter().map(|&c| MpComplex::from_c64(c, precision_bits)).collect();
        Self::from_coeffs(v, precision_bits)
    }

    pub fn monomial(n: usize, precision_bits: u32) -> Self {
        let mut v = vec![MpComplex::zero(precision_bits); n + 1];
        v[n] = MpComplex::one(precision_bits);
        Self::from_coeffs(v, precision_bits)
    }

    /// Monic polynomial with the given zeros, expanded by a balanced product
    /// tree.
    pub fn from_roots(roots: &PointSet, precision_bits: u32) -> Self {
        assert!(roots.is_finite(), "from_roots needs finite points");
        let bits = effective_bits(precision_bits.max(64));
        if roots.is_empty() {
            return Self::monomial(0, bits);
        }
        let coeffs = product_tree(&roots.points, bits);
        Poly { coeffs, precision_bits: bits }
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_zero()
    }

    pub fn coeffs(&self) -> &[MpComplex] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &MpComplex {
        &self.coeffs[k]
    }

    pub fn leading(&self) -> &MpComplex {
        &self.coeffs[self.coeffs.len() - 1]
    }

    pub fn coeffs_c64(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| c.to_c64()).collect()
    }

    pub fn with_precision(&self, bits: u32) -> Self {
        Self::from_coeffs(self.coeffs.clone(), bits)
    }

    /// Largest coefficient modulus, as `log2`.
    pub fn log2_max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.log2_abs()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let bits = self.precision_bits;
        let zero = MpComplex::zero(bits);
        let v = (0..n)
            .map(|k| {
                let a = self.coeffs.get(k).unwrap_or(&zero);
                let b = other.coeffs.get(k).unwrap_or(&zero);
                a.add(b)
            })
            .collect();
        Self::from_coeffs(v, bits)
    }

    pub fn scale_c64(&self, c: Complex64) -> Poly {
        Self::from_coeffs(self.coeffs.iter().map(|a| a.mul_c64(c)).collect(), self.precision_bits)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        Self::from_coeffs(poly_mul(&self.coeffs, &other.coeffs), self.precision_bits)
    }

    /// Horner evaluation at an f64 point.
    pub fn evaluate(&self, z: Complex64) -> MpComplex {
        let mut acc = self.leading().clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul_c64(z).add(c);
        }
        acc
    }

    /// Horner evaluation at an extended-precision point.
    pub fn evaluate_mp(&self, z: &MpComplex) -> MpComplex {
        let z = z.with_precision(self.precision_bits);
        let mut acc = self.leading().clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(&z).add(c);
        }
        acc
    }

    /// Value and first derivative at an f64 point, in one Horner pass.
    pub fn evaluate_with_derivative(&self, z: Complex64) -> (MpComplex, MpComplex) {
        let mut p = self.leading().clone();
        let mut dp = MpComplex::zero(self.precision_bits);
        for c in self.coeffs.iter().rev().skip(1) {
            dp = dp.mul_c64(z).add(&p);
            p = p.mul_c64(z).add(c);
        }
        (p, dp)
    }

    /// Value and first derivative at an extended-precision point.
    pub fn evaluate_with_derivative_mp(&self, z: &MpComplex) -> (MpComplex, MpComplex) {
        let z = z.with_precision(self.precision_bits);
        let mut p = self.leading().clone();
        let mut dp = MpComplex::zero(self.precision_bits);
        for c in self.coeffs.iter().rev().skip(1) {
            dp = dp.mul(&z).add(&p);
            p = p.mul(&z).add(c);
        }
        (p, dp)
    }

    /// Formal derivative. The derivative of a constant is the zero polynomial.
    pub fn differentiate(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Self::from_coeffs(vec![MpComplex::zero(self.precision_bits)], self.precision_bits);
        }
        let v = self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c.mul_u64(k as u64)).collect();
        Self::from_coeffs(v, self.precision_bits)
    }

    /// Write as text: header comments, then one `k re_hex im_hex` line per
    /// coefficient.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# precision_bits {}", self.precision_bits)?;
        writeln!(w, "# degree {}", self.degree())?;
        for (k, c) in self.coeffs.iter().enumerate() {
            writeln!(w, "{k} {} {}", c.re.to_hex(), c.im.to_hex())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("hex text is ASCII")
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut bits: Option<u32> = None;
        let mut entries: Vec<(usize, MpComplex)> = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("precision_bits") {
                    let b = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Parse(format!("line {}: bad precision header", n + 1)))?;
                    bits = Some(b);
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected `k re_hex im_hex`", n + 1)));
            }
            let k: usize = fields[0].parse().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
            let parse = |s: &str| MpFloat::from_hex(s, bits).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)));
            entries.push((k, MpComplex::new(parse(fields[1])?, parse(fields[2])?)));
        }
        if entries.is_empty() {
            return Err(Error::Parse("no coefficients".into()));
        }
        let bits = bits.unwrap_or_else(|| entries.iter().map(|(_, c)| c.precision_bits()).max().unwrap_or(64));
        let deg = entries.iter().map(|(k, _)| *k).max().unwrap_or(0);
        let mut coeffs = vec![MpComplex::zero(bits); deg + 1];
        for (k, c) in entries {
            coeffs[k] = c;
        }
        Ok(Self::from_coeffs(coeffs, bits))
    }
}

fn poly_mul(a: &[MpComplex], b: &[MpComplex]) -> Vec<MpComplex> {
    let bits = a[0].precision_bits();
    let mut out = vec![MpComplex::zero(bits); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].add(&x.mul(y));
        }
    }
    out
}

/// Leaves of up to this many roots are expanded by successive linear factors,
/// which only needs extended-by-f64 products.
const LEAF: usize = 16;

fn product_tree(roots: &[Complex64], bits: u32) -> Vec<MpComplex> {
    if roots.len() <= LEAF {
        let mut c = vec![MpComplex::one(bits)];
        for &r in roots {
            // (z - r) * sum c_k z^k
            let mut next = vec![MpComplex::zero(bits); c.len() + 1];
            for (k, ck) in c.iter().enumerate() {
                next[k + 1] = next[k + 1].add(ck);
                next[k] = next[k].sub(&ck.mul_c64(r));
            }
            c = next;
        }
        return c;
    }
    let mid = roots.len() / 2;
    let left = product_tree(&roots[..mid], bits);
    let right = product_tree(&roots[mid..], bits);
    poly_mul(&left, &right)
}

/// Additive heat operator `exp{δτ/(2N) d²/dz²}`.
///
/// With `d_m` the coefficients of `c^m/m! p^(2m)`, the recurrence is
/// `d_{m+1,k} = d_{m,k+2} (k+2)(k+1) δτ / (2N(m+1))`.
pub fn heat_additive(p: &Poly, step: &HeatStep) -> Poly {
    assert_eq!(step.mode, Mode::Additive, "heat_additive needs an additive step");
    assert!(step.n >= 1);
    let bits = p.precision_bits;
    let deg = p.degree();
    let mut out = p.coeffs.clone();
    if step.delta_tau == Complex64::new(0.0, 0.0) || deg < 2 {
        return Poly::from_coeffs(out, bits);
    }
    let two_n = 2 * step.n as u64;
    let mut d = p.coeffs.clone();
    let mut m = 0u64;
    while 2 * (m as usize + 1) <= deg {
        let len = d.len() - 2;
        let next: Vec<MpComplex> = (0..len)
            .map(|k| {
                let f = ((k + 2) * (k + 1)) as u64;
                d[k + 2].mul_c64(step.delta_tau).mul_u64(f).div_u64(two_n * (m + 1))
            })
            .collect();
        for (k, v) in next.iter().enumerate() {
            out[k] = out[k].add(v);
        }
        d = next;
        m += 1;
    }
    Poly::from_coeffs(out, bits)
}

/// Diagonal factors `exp{-δτ (k+1)(k-N)/(2N)}` for `k = 0..=N`.
pub fn multiplicative_factors(step: &HeatStep, precision_bits: u32) -> Vec<MpComplex> {
    let n = step.n as u64;
    let dt = MpComplex::from_c64(step.delta_tau, precision_bits);
    (0..=n)
        .map(|k| {
            if k == n {
                return MpComplex::one(precision_bits);
            }
            // -(k+1)(k-N) = (k+1)(N-k) > 0
            dt.mul_u64((k + 1) * (n - k)).div_u64(2 * n).exp()
        })
        .collect()
}

/// Multiplicative heat-type operator, applied diagonally.
pub fn heat_multiplicative(p: &Poly, step: &HeatStep) -> Poly {
    assert_eq!(step.mode, Mode::Multiplicative, "heat_multiplicative needs a multiplicative step");
    let factors = multiplicative_factors(step, p.precision_bits);
    apply_factors(p, &factors)
}

/// Multiply coefficient `k` by `factors[k]`; the degree must not exceed
/// `factors.len() - 1`.
pub fn apply_factors(p: &Poly, factors: &[MpComplex]) -> Poly {
    assert!(p.degree() < factors.len(), "polynomial degree exceeds the operator's N");
    let v = p
        .coeffs
        .iter()
        .zip(factors)
        .enumerate()
        .map(|(k, (c, f))| if k + 1 == factors.len() { c.clone() } else { c.mul(f) })
        .collect();
    Poly::from_coeffs(v, p.precision_bits)
}

/// Apply the operator selected by `step.mode`.
pub fn heat(p: &Poly, step: &HeatStep) -> Poly {
    match step.mode {
        Mode::Additive => heat_additive(p, step),
        Mode::Multiplicative => heat_multiplicative(p, step),
    }
}

/// `exp{-1/(2N) d²/dz²} z^N`: a scaled Hermite polynomial with real zeros.
pub fn hermite(n: usize, precision_bits: u32) -> Poly {
    assert!(n >= 1);
    heat_additive(&Poly::monomial(n, precision_bits), &HeatStep::additive(Complex64::new(-1.0, 0.0), n))
}
