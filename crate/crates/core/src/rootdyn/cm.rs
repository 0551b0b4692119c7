//! Calogero–Moser velocity fields and accelerations for the zero flows.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::Mode;

fn check_separation(points: &[Complex64], guard: f64) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (points[i] - points[j]).norm();
            if d <= guard {
                return Err(Error::CollisionDetected { i, j, separation: d });
            }
        }
    }
    Ok(())
}

fn check_nonzero(points: &[Complex64]) -> Result<()> {
    match points.iter().position(|z| z.norm() == 0.0) {
        Some(index) => Err(Error::ZeroPoint { index }),
        None => Ok(()),
    }
}

/// `v_j = -(1/N) sum_{k != j} 1/(z_j - z_k)`.
pub fn cm_rational_rhs(points: &[Complex64], n: usize, guard: f64) -> Result<Vec<Complex64>> {
    check_separation(points, guard)?;
    let inv_n = 1.0 / n as f64;
    Ok((0..points.len())
        .map(|j| {
            let s: Complex64 = (0..points.len()).filter(|&k| k != j).map(|k| 1.0 / (points[j] - points[k])).sum();
            -s * inv_n
        })
        .collect())
}

/// `v_j = z_j/(2N) [1 + sum_{k != j} (z_j + z_k)/(z_j - z_k)]`.
pub fn cm_trig_rhs(points: &[Complex64], n: usize, guard: f64) -> Result<Vec<Complex64>> {
    check_nonzero(points)?;
    check_separation(points, guard)?;
    Ok(log_velocity(points, n).into_iter().zip(points).map(|(u, z)| u * z).collect())
}

/// `(1/z_j) dz_j/dτ`, the velocity of `log z_j`.
pub(crate) fn log_velocity(points: &[Complex64], n: usize) -> Vec<Complex64> {
    let c = 1.0 / (2.0 * n as f64);
    (0..points.len())
        .map(|j| {
            let s: Complex64 = (0..points.len())
                .filter(|&k| k != j)
                .map(|k| (points[j] + points[k]) / (points[j] - points[k]))
                .sum();
            (s + 1.0) * c
        })
        .collect()
}

/// Second τ-derivatives. Additive: of `z_j`, `-(2/N²) sum (z_j - z_k)^-3`.
/// Multiplicative: of `w_j = -i log z_j`,
/// `-(1/4N²) sum cos((w_j - w_k)/2) / sin³((w_j - w_k)/2)`.
pub fn cm_accel(points: &[Complex64], n: usize, mode: Mode, guard: f64) -> Result<Vec<Complex64>> {
    check_separation(points, guard)?;
    let n2 = (n * n) as f64;
    match mode {
        Mode::Additive => Ok((0..points.len())
            .map(|j| {
                let s: Complex64 = (0..points.len())
                    .filter(|&k| k != j)
                    .map(|k| {
                        let d = points[j] - points[k];
                        1.0 / (d * d * d)
                    })
                    .sum();
                -2.0 / n2 * s
            })
            .collect()),
        Mode::Multiplicative => {
            check_nonzero(points)?;
            let i = Complex64::new(0.0, 1.0);
            let w: Vec<Complex64> = points.iter().map(|z| -i * z.ln()).collect();
            Ok((0..points.len())
                .map(|j| {
                    let s: Complex64 = (0..points.len())
                        .filter(|&k| k != j)
                        .map(|k| {
                            let x = (w[j] - w[k]) / 2.0;
                            let sn = x.sin();
                            x.cos() / (sn * sn * sn)
                        })
                        .sum();
                    -s / (4.0 * n2)
                })
                .collect())
        }
    }
}
