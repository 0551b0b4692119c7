//! Adaptive Dormand–Prince 5(4) for complex vector fields.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rel_tol: 1e-9, abs_tol: 1e-12, max_step: 0.1, initial_step: 1e-3, min_step: 1e-14, max_steps: 1_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Outcome of [`Dopri5::advance`].
#[derive(Debug)]
pub enum Advance {
    /// Reached the requested end point.
    Reached,
    /// The caller's check asked to stop after the step ending at `t`.
    Stopped,
}

/// Integrator state; the caller drives it between output points.
pub struct Dopri5 {
    pub t: f64,
    pub y: Vec<Complex64>,
    pub h: f64,
    pub ctl: StepControl,
    pub steps: usize,
    k: Vec<Vec<Complex64>>,
    fsal_valid: bool,
}

impl Dopri5 {
    pub fn new(t: f64, y: Vec<Complex64>, ctl: StepControl) -> Self {
        let n = y.len();
        Dopri5 { t, y, h: ctl.initial_step, ctl, steps: 0, k: vec![vec![Complex64::new(0.0, 0.0); n]; 7], fsal_valid: false }
    }

    /// Replace the state (after an external jump).
    pub fn reset(&mut self, t: f64, y: Vec<Complex64>) {
        self.t = t;
        self.y = y;
        self.fsal_valid = false;
        self.h = self.h.max(self.ctl.initial_step);
    }

    /// Integrate to `t_end`. After each accepted step `check(t, y)` runs; if
    /// it returns true the integration stops early.
    pub fn advance<F, G>(&mut self, t_end: f64, f: &mut F, check: &mut G) -> Result<Advance>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()>,
        G: FnMut(f64, &[Complex64]) -> bool,
    {
        let n = self.y.len();
        let mut ytmp = vec![Complex64::new(0.0, 0.0); n];
        let mut ynew = vec![Complex64::new(0.0, 0.0); n];
        while self.t < t_end {
            if self.steps >= self.ctl.max_steps {
                return Err(Error::NoConvergence { what: "ODE step limit reached".into(), worst_residual: f64::NAN });
            }
            if !self.fsal_valid {
                f(self.t, &self.y, &mut self.k[0])?;
                self.fsal_valid = true;
            }
            let remaining = t_end - self.t;
            let mut h = self.h.min(self.ctl.max_step);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for r in 0..s {
                        if A[s][r] != 0.0 {
                            acc += self.k[r][i] * A[s][r];
                        }
                    }
                    ytmp[i] = self.y[i] + acc * h;
                }
                let (_, tail) = self.k.split_at_mut(s);
                f(self.t + C[s] * h, &ytmp, &mut tail[0])?;
            }
            // The last stage row equals the 5th-order weights, so ytmp is the new solution.
            let mut err = 0.0;
            for i in 0..n {
                ynew[i] = ytmp[i];
                let mut e = Complex64::new(0.0, 0.0);
                for s in 0..7 {
                    if E[s] != 0.0 {
                        e += self.k[s][i] * E[s];
                    }
                }
                let sc = self.ctl.abs_tol + self.ctl.rel_tol * self.y[i].norm().max(ynew[i].norm());
                let r = (e * h).norm() / sc;
                err += r * r;
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                self.h = h * 0.1;
                if self.h < self.ctl.min_step {
                    return Err(Error::NoConvergence { what: format!("ODE step size underflow at t = {}", self.t), worst_residual: err });
                }
                continue;
            }
            if err <= 1.0 {
                self.steps += 1;
                self.t = if last { t_end } else { self.t + h };
                std::mem::swap(&mut self.y, &mut ynew);
                self.k.swap(0, 6);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.h = h * fac;
                } else {
                    self.h = self.h.max(h * fac);
                }
                if check(self.t, &self.y) {
                    return Ok(Advance::Stopped);
                }
            } else {
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if self.h < self.ctl.min_step {
                    return Err(Error::NoConvergence { what: format!("ODE step size underflow at t = {}", self.t), worst_residual: err });
                }
            }
        }
        Ok(Advance::Reached)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let lam = Complex64::new(-0.5, 2.0);
        let mut ode = Dopri5::new(0.0, vec![Complex64::new(1.0, 0.0)], StepControl::default());
        let mut f = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            dy[0] = lam * y[0];
            Ok(())
        };
        ode.advance(3.0, &mut f, &mut |_, _| false).unwrap();
        assert_eq!(ode.t, 3.0);
        assert!((ode.y[0] - (lam * 3.0).exp()).norm() < 1e-9);
    }

    #[test]
    fn time_dependent_and_early_stop() {
        let mut ode = Dopri5::new(0.0, vec![Complex64::new(0.0, 0.0)], StepControl::default());
        let mut f = |t: f64, _y: &[Complex64], dy: &mut [Complex64]| {
            dy[0] = Complex64::new(t.cos(), 0.0);
            Ok(())
        };
        let r = ode.advance(2.0, &mut f, &mut |_, y| y[0].re > 0.5).unwrap();
        assert!(matches!(r, Advance::Stopped));
        assert!(ode.t < 2.0 && ode.y[0].re > 0.5);
        ode.advance(2.0, &mut f, &mut |_, _| false).unwrap();
        assert!((ode.y[0].re - 2f64.sin()).abs() < 1e-10);
    }
}
