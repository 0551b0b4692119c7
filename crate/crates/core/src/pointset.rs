use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unordered multiset of complex points: eigenvalues or polynomial zeros.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<Complex64>,
}

impl PointSet {
    pub fn new(points: Vec<Complex64>) -> Self {
        PointSet { points }
    }

    pub fn from_real(xs: &[f64]) -> Self {
        PointSet { points: xs.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.points.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn conj(&self) -> Self {
        PointSet { points: self.points.iter().map(|z| z.conj()).collect() }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        PointSet { points: self.points.iter().map(|&z| f(z)).collect() }
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Smallest pairwise distance and the pair attaining it.
    pub fn min_separation(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                let d = (self.points[i] - self.points[j]).norm();
                if best.is_none_or(|b| d < b.2) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }

    pub fn sum(&self) -> Complex64 {
        self.points.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "re,im")?;
        for z in &self.points {
            writeln!(w, "{:e},{:e}", z.re, z.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with("re")) {
                continue;
            }
            let mut it = line.split(',');
            let mut next = || -> Result<f64> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("line {}: expected re,im", n + 1)))?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))
            };
            let re = next()?;
            let im = next()?;
            points.push(Complex64::new(re, im));
        }
        Ok(PointSet { points })
    }
}

impl From<Vec<Complex64>> for PointSet {
    fn from(points: Vec<Complex64>) -> Self {
        PointSet { points }
    }
}

impl FromIterator<Complex64> for PointSet {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        PointSet { points: iter.into_iter().collect() }
    }
}
