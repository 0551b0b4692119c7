//! Root finding, root continuation in τ, and the Calogero–Moser systems that
//! govern the zeros of heat-evolved polynomials.

mod cm;
mod integrate;
mod matching;
pub mod ode;
mod roots;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use crate::pointset::PointSet;
pub use cm::{cm_accel, cm_rational_rhs, cm_trig_rhs};
pub use integrate::{coefficient_roots_along, integrate_coefficient, integrate_trajectories, IntegrationOpts};
pub use matching::{hungarian, match_points, match_points_lenient, max_pairing_distance, reorder, Matching};
pub use roots::{roots, roots_detailed, RootOpts, RootReport};


#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ode,
    Coefficient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub min_separation: f64,
    /// End of the window bridged by the coefficient route.
    pub resumed_at: f64,
}

/// Index-aligned zero paths over `τ(t) = τ₀ + t(τ₁ - τ₀)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryBundle {
    pub t_samples: Vec<f64>,
    pub tau_samples: Vec<Complex64>,
    /// `paths[j][s]`: position of zero `j` at sample `s`.
    pub paths: Vec<Vec<Complex64>>,
    pub collisions: Vec<CollisionEvent>,
    pub method: Method,
    /// Largest pairing distance between the ODE endpoint and the roots of the
    /// coefficient-evolved polynomial, when that check ran.
    pub endpoint_discrepancy: Option<f64>,
}

impl TrajectoryBundle {
    pub fn n_samples(&self) -> usize {
        self.t_samples.len()
    }

    pub fn at_sample(&self, s: usize) -> PointSet {
        self.paths.iter().map(|p| p[s]).collect()
    }

    pub fn endpoints(&self) -> PointSet {
        self.at_sample(self.n_samples() - 1)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t,tau_re,tau_im")?;
        for j in 1..=self.paths.len() {
            write!(w, ",z{j}_re,z{j}_im")?;
        }
        writeln!(w)?;
        for s in 0..self.n_samples() {
            let tau = self.tau_samples[s];
            write!(w, "{:e},{:e},{:e}", self.t_samples[s], tau.re, tau.im)?;
            for p in &self.paths {
                write!(w, ",{:e},{:e}", p[s].re, p[s].im)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_collisions_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.collisions)?;
        Ok(())
    }
}
