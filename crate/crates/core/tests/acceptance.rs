//! Acceptance suite. Runs every criterion in order and prints one PASS/FAIL
//! line each; positional arguments select criteria by number.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use heatflow::experiment::count_real;
use heatflow::models::{build_model_matrix, eigenvalues, sample_rng, InitialSpectrum, ModelSpec};
use heatflow::moment2::{self, PdeStencil};
use heatflow::mp::MpComplex;
use heatflow::observables::{
    energy_distance, evolve_moments, ks_against, median, median_abs_imag, moments, reference_sampler, semicircle_cdf,
    Reference,
};
use heatflow::polyheat::{default_precision, heat, hermite, HeatStep, Poly};
use heatflow::rootdyn::{
    cm_accel, integrate_coefficient, integrate_trajectories, max_pairing_distance, roots, IntegrationOpts, RootOpts,
};
use heatflow::{Complex64, Mode, PointSet, Result};
use rand::Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn sample(spec: &ModelSpec) -> PointSet {
    let mut rng = sample_rng(spec.seed, 0);
    eigenvalues(&build_model_matrix(spec, &mut rng).unwrap()).unwrap()
}

fn ginibre(n: usize, seed: u64) -> PointSet {
    let mut spec = ModelSpec::additive(n, 1.0, c(1.0, 0.0), InitialSpectrum::Zero);
    spec.seed = seed;
    sample(&spec)
}

fn gue(n: usize, seed: u64) -> PointSet {
    let mut spec = ModelSpec::additive(n, 1.0, c(0.0, 0.0), InitialSpectrum::Zero);
    spec.seed = seed;
    sample(&spec)
}

fn tight(samples: usize) -> IntegrationOpts {
    IntegrationOpts { rel_tol: 1e-12, abs_tol: 1e-14, samples, ..Default::default() }
}

/// log2 of the largest coefficient difference relative to the largest
/// coefficient of `b`.
fn rel_err_log2(a: &Poly, b: &Poly) -> f64 {
    assert_eq!(a.degree(), b.degree());
    let diff = (0..=a.degree()).map(|k| a.coeff(k).sub(b.coeff(k)).log2_abs()).fold(f64::NEG_INFINITY, f64::max);
    diff - b.log2_max_coeff()
}

fn criterion_1() -> Result<Outcome> {
    const BITS: u32 = 256;
    const TOL_LOG2: f64 = -128.0;
    let mut worst = f64::NEG_INFINITY;
    let mut monic = true;
    let mut rng = sample_rng(1, 0);
    for n in [1usize, 2, 5, 16, 33, 60, 64] {
        let zn = Poly::monomial(n, BITS);
        let h = heat(&zn, &HeatStep::additive(c(-1.0, 0.0), n));
        worst = worst.max(rel_err_log2(&h, &hermite(n, BITS)));
        worst = worst.max(rel_err_log2(&heat(&h, &HeatStep::additive(c(1.0, 0.0), n)), &zn));

        let pts: PointSet = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let p = Poly::from_roots(&pts, BITS);
        let (a, b) = (c(0.375, -0.25), c(-0.125, 0.5));
        for mode in [Mode::Additive, Mode::Multiplicative] {
            let step = |d: Complex64| HeatStep { delta_tau: d, n, mode };
            let twice = heat(&heat(&p, &step(a)), &step(b));
            worst = worst.max(rel_err_log2(&twice, &heat(&p, &step(a + b))));
        }
        let q = heat(&p, &HeatStep::multiplicative(c(0.7, -0.3), n));
        monic &= q.leading().value_eq(&MpComplex::one(BITS));
    }
    outcome(worst <= TOL_LOG2 && monic, format!("worst relative coefficient error 2^{worst:.1}, monic exact: {monic}"))
}

fn criterion_2() -> Result<Outcome> {
    const N: usize = 16;
    const TOL: f64 = 1e-6;
    let mut worst: f64 = 0.0;
    for trial in 0..50u64 {
        let mut rng = sample_rng(2, trial);
        let mode = if trial % 2 == 0 { Mode::Additive } else { Mode::Multiplicative };
        let start: PointSet = (0..N)
            .map(|_| {
                let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                match mode {
                    Mode::Additive => c(x, y),
                    Mode::Multiplicative => Complex64::from_polar((0.5 * x).exp(), std::f64::consts::PI * y),
                }
            })
            .collect();
        let delta = Complex64::from_polar(rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        let ode = integrate_trajectories(&start, N, c(0.0, 0.0), delta, mode, &tight(2))?;
        let coef = integrate_coefficient(&start, N, c(0.0, 0.0), delta, mode, 2, None)?;
        worst = worst.max(max_pairing_distance(&ode.endpoints().points, &coef.endpoints().points));
    }
    outcome(worst <= TOL, format!("largest endpoint pairing distance {worst:.2e} over 50 trials"))
}

fn criterion_3() -> Result<Outcome> {
    const N: usize = 16;
    const K: usize = 6;
    let (tau0, tau1) = (c(1.0, 0.0), c(0.3, 0.4));
    let (mut m1, mut m2, mut full) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..5 {
        let start = ginibre(N, 30 + seed);
        let bundle = integrate_trajectories(&start, N, tau0, tau1, Mode::Additive, &tight(11))?;
        let m0 = moments(&start, K);
        for (s, &tau) in bundle.tau_samples.iter().enumerate() {
            let traj = moments(&bundle.at_sample(s), K);
            let ode = evolve_moments(&m0, N, tau0, tau)?;
            m1 = m1.max((traj.m[1] - m0.m[1]).norm());
            m2 = m2.max((traj.m[2] - (m0.m[2] - (tau - tau0) * (1.0 - 1.0 / N as f64))).norm());
            for k in 0..=K {
                full = full.max((traj.m[k] - ode.m[k]).norm());
            }
        }
    }
    outcome(
        m1 <= 1e-10 && m2 <= 1e-8 && full <= 1e-6,
        format!("m1 drift {m1:.1e}, m2 closed form {m2:.1e}, moment ODE {full:.1e}"),
    )
}

struct DeformationCase {
    name: &'static str,
    spec: ModelSpec,
    tau0: Complex64,
    tau: Complex64,
    half_width: f64,
    falsify: bool,
}

fn criterion_4() -> Result<Outcome> {
    const M: usize = 200_000;
    const Z_THRESHOLD: f64 = 4.0;
    let add = |n: usize, tau0: f64, initial: InitialSpectrum| ModelSpec::additive(n, 1.0, c(tau0, 0.0), initial);
    let mult = |a: Vec<Complex64>| {
        let mut s = ModelSpec::multiplicative(a.len(), 0.5, c(0.5, 0.0), InitialSpectrum::Values(a));
        s.brownian_steps = Some(200);
        s
    };
    let one = c(1.0, 0.0);
    let cases = vec![
        DeformationCase { name: "add N=2 1->0", spec: add(2, 1.0, InitialSpectrum::Zero), tau0: c(1.0, 0.0), tau: c(0.0, 0.0), half_width: 2.0, falsify: false },
        DeformationCase { name: "add N=2 0->1", spec: add(2, 0.0, InitialSpectrum::Zero), tau0: c(0.0, 0.0), tau: c(1.0, 0.0), half_width: 2.0, falsify: false },
        DeformationCase { name: "add N=4 1->0", spec: add(4, 1.0, InitialSpectrum::Zero), tau0: c(1.0, 0.0), tau: c(0.0, 0.0), half_width: 2.0, falsify: false },
        DeformationCase { name: "add N=4 0->1", spec: add(4, 0.0, InitialSpectrum::Zero), tau0: c(0.0, 0.0), tau: c(1.0, 0.0), half_width: 2.0, falsify: false },
        DeformationCase {
            name: "add N=2 X0=diag(1,-1) 1->0",
            spec: add(2, 1.0, InitialSpectrum::Values(vec![one, -one])),
            tau0: c(1.0, 0.0),
            tau: c(0.0, 0.0),
            half_width: 2.0,
            falsify: false,
        },
        DeformationCase {
            name: "add N=2 X0=diag(i,-i) 0->1",
            spec: add(2, 0.0, InitialSpectrum::Values(vec![c(0.0, 1.0), c(0.0, -1.0)])),
            tau0: c(0.0, 0.0),
            tau: c(1.0, 0.0),
            half_width: 2.0,
            falsify: false,
        },
        DeformationCase { name: "add N=4 1->0.6+0.5i", spec: add(4, 1.0, InitialSpectrum::Zero), tau0: c(1.0, 0.0), tau: c(0.6, 0.5), half_width: 2.0, falsify: true },
        DeformationCase { name: "mult A0=I", spec: mult(vec![one, one]), tau0: c(0.5, 0.0), tau: c(0.5, 0.4), half_width: 2.0, falsify: true },
        DeformationCase { name: "mult A0=diag(1,4)", spec: mult(vec![one, c(4.0, 0.0)]), tau0: c(0.5, 0.0), tau: c(0.5, 0.4), half_width: 5.0, falsify: true },
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, case) in cases.iter().enumerate() {
        let w = case.half_width;
        let g = moment2::grid((-w, w), (-w, w), 3, 3);
        let mut lhs_spec = case.spec.clone();
        lhs_spec.params.tau = case.tau;
        lhs_spec.seed = 400 + 2 * k as u64;
        let mut rhs_spec = case.spec.clone();
        rhs_spec.seed = 401 + 2 * k as u64;
        let lhs = moment2::estimate_d_direct(&lhs_spec, &g, M)?;
        let rhs = moment2::estimate_d_heatflow(&rhs_spec, case.tau0, case.tau, &g, M)?;
        let v = moment2::verify_deformation(&lhs, &rhs, Z_THRESHOLD)?;
        pass &= v.passed();
        let mut part = format!("{} {:.2}", case.name, v.pass_fraction);
        if case.falsify {
            let wrong = moment2::estimate_d_heatflow(&rhs_spec, case.tau0, case.tau.conj(), &g, M)?;
            let vf = moment2::verify_deformation(&lhs, &wrong, Z_THRESHOLD)?;
            pass &= !vf.passed();
            part += &format!(" (conjugated {:.2})", vf.pass_fraction);
        }
        parts.push(part);
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5() -> Result<Outcome> {
    const M: usize = 500_000;
    const SIGMAS: f64 = 4.0;
    let one = c(1.0, 0.0);
    let mut add = ModelSpec::additive(2, 1.0, c(0.5, 0.1), InitialSpectrum::Values(vec![one, -one]));
    add.seed = 5;
    let mut mult = ModelSpec::multiplicative(2, 0.5, c(0.4, 0.1), InitialSpectrum::Values(vec![one, c(2.0, 0.0)]));
    mult.seed = 6;
    let cases = [
        ("additive", add, PdeStencil { tau0: c(0.5, 0.1), z0: c(0.4, 0.3), h_tau: 0.02, h_z: 0.02, common_random_numbers: true }),
        ("multiplicative", mult, PdeStencil { tau0: c(0.4, 0.1), z0: c(0.8, 0.3), h_tau: 0.02, h_z: 0.02, common_random_numbers: true }),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, spec, stencil) in cases {
        let r = moment2::pde_residual_check(&spec, &stencil, M)?;
        pass &= r.within(SIGMAS);
        parts.push(format!(
            "{name} residual {:.2e}{:+.2e}i, se {:.1e}/{:.1e}",
            r.residual.re, r.residual.im, r.se.re, r.se.im
        ));
    }
    outcome(pass, parts.join("; "))
}

fn re_parts(p: &PointSet) -> Vec<f64> {
    p.iter().map(|z| z.re).collect()
}

fn criterion_6() -> Result<Outcome> {
    const N: usize = 256;
    let mut good = 0;
    let mut worst_im: f64 = 0.0;
    let mut worst_ks: f64 = 0.0;
    for seed in 0..10 {
        let start = ginibre(N, 60 + seed);
        let end = integrate_trajectories(&start, N, c(1.0, 0.0), c(0.0, 0.0), Mode::Additive, &IntegrationOpts { samples: 2, ..Default::default() })?
            .endpoints();
        let im = median_abs_imag(&end);
        let ks = ks_against(&re_parts(&end), |x| semicircle_cdf(x, 1.0));
        worst_im = worst_im.max(im);
        worst_ks = worst_ks.max(ks);
        if im <= 0.1 && ks <= 0.08 {
            good += 1;
        }
    }
    outcome(good > 5, format!("{good}/10 seeds pass; worst median |Im| {worst_im:.4}, worst KS {worst_ks:.4}"))
}

fn evolve_coefficients(start: &PointSet, delta: f64) -> Result<PointSet> {
    let n = start.len();
    let p = Poly::from_roots(start, default_precision(n));
    roots(&heat(&p, &HeatStep::additive(c(delta, 0.0), n)), &RootOpts::fast())
}

fn criterion_7() -> Result<Outcome> {
    const N: usize = 60;
    let mut below = 0;
    let mut counts = Vec::new();
    for seed in 0..20 {
        let q = evolve_coefficients(&gue(N, 70 + seed), 0.05)?;
        let k = count_real(&q, 1e-8);
        if k < N {
            below += 1;
        }
        counts.push(k);
    }
    let mean = counts.iter().sum::<usize>() as f64 / (20 * N) as f64;
    let big = evolve_coefficients(&gue(256, 77), 1.0)?;
    let disk = reference_sampler(Reference::Disk, 4096, &mut sample_rng(7, 1))?;
    let e = energy_distance(&big.points, &disk.points);
    outcome(
        below >= 19 && (0.35..=0.65).contains(&mean) && e <= 0.1,
        format!("{below}/20 below N, mean real fraction {mean:.3}, counts {counts:?}; N=256 energy to disk {e:.4}"),
    )
}

fn criterion_8() -> Result<Outcome> {
    const N: usize = 256;
    let ellipse = reference_sampler(Reference::Ellipse { a: 1.5, b: 0.5 }, 4096, &mut sample_rng(8, 1))?;
    let disk = reference_sampler(Reference::Disk, 4096, &mut sample_rng(8, 2))?;
    let from_circle = integrate_trajectories(&ginibre(N, 81), N, c(1.0, 0.0), c(0.5, 0.0), Mode::Additive, &IntegrationOpts { samples: 2, ..Default::default() })?
        .endpoints();
    let from_semicircle = evolve_coefficients(&gue(N, 82), 0.5)?;
    let a = energy_distance(&from_circle.points, &ellipse.points);
    let b = energy_distance(&from_semicircle.points, &ellipse.points);
    let control = energy_distance(&from_circle.points, &disk.points);
    outcome(
        a <= 0.1 && b <= 0.1,
        format!("from circle {a:.4}, from semicircle {b:.4} (disk control {control:.4})"),
    )
}

fn criterion_9() -> Result<Outcome> {
    const N: usize = 32;
    let mut rng = sample_rng(9, 0);
    let mut angles: Vec<f64> = (0..N).map(|k| (k as f64 + rng.random_range(-0.3..0.3)) * std::f64::consts::TAU / N as f64).collect();
    angles.sort_by(f64::total_cmp);
    let start: PointSet = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
    let mut worst: f64 = 0.0;
    let mut min_sep = f64::INFINITY;
    // Backward flow spreads the points apart; forward flow pulls them
    // together, so it only runs a short way.
    for t1 in [-1.0, 0.05] {
        let opts = IntegrationOpts { fallback: false, ..tight(41) };
        let b = integrate_trajectories(&start, N, c(0.0, 0.0), c(t1, 0.0), Mode::Multiplicative, &opts)?;
        for (s, tau) in b.tau_samples.iter().enumerate() {
            let pts = b.at_sample(s);
            let scale = (-tau.re / (2.0 * N as f64)).exp();
            worst = worst.max(pts.iter().map(|z| (z.norm() * scale - 1.0).abs()).fold(0.0, f64::max));
            min_sep = min_sep.min(pts.min_separation().map_or(f64::INFINITY, |m| m.2));
        }
    }
    outcome(worst <= 1e-10, format!("largest radial defect {worst:.1e}, smallest separation {min_sep:.3}"))
}

/// Second differences at spacing `h` and `2h`, combined to cancel the
/// leading error term.
fn richardson_second(y: &[Complex64], s: usize, h: f64) -> Complex64 {
    let d1 = (y[s + 1] - 2.0 * y[s] + y[s - 1]) / (h * h);
    let d2 = (y[s + 2] - 2.0 * y[s] + y[s - 2]) / (4.0 * h * h);
    (4.0 * d1 - d2) / 3.0
}

fn criterion_10() -> Result<Outcome> {
    const N: usize = 8;
    const SAMPLES: usize = 161;
    let mut worst: f64 = 0.0;
    for (mode, seed) in [(Mode::Additive, 100), (Mode::Multiplicative, 101)] {
        let start = match mode {
            Mode::Additive => ginibre(N, seed),
            Mode::Multiplicative => ginibre(N, seed).map(|w| (c(0.0, 1.0) * w).exp()),
        };
        let delta = Complex64::from_polar(0.2, 0.7);
        let b = integrate_trajectories(&start, N, c(0.0, 0.0), delta, mode, &IntegrationOpts { fallback: false, rel_tol: 1e-13, abs_tol: 1e-15, ..tight(SAMPLES) })?;
        let dt = 1.0 / (SAMPLES - 1) as f64;
        for s in 2..SAMPLES - 2 {
            let pts = b.at_sample(s);
            let exact = cm_accel(&pts.points, N, mode, 0.0)?;
            for (j, path) in b.paths.iter().enumerate() {
                let y: Vec<Complex64> = match mode {
                    Mode::Additive => path.clone(),
                    Mode::Multiplicative => unwrap_log(path).into_iter().map(|l| l * c(0.0, -1.0)).collect(),
                };
                let fd = richardson_second(&y, s, dt) / (delta * delta);
                worst = worst.max((fd - exact[j]).norm() / exact[j].norm());
            }
        }
    }
    outcome(worst <= 1e-6, format!("largest relative acceleration mismatch {worst:.1e}"))
}

/// `log z` along a path, continued without branch jumps.
fn unwrap_log(path: &[Complex64]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(path.len());
    for &z in path {
        let mut l = z.ln();
        if let Some(prev) = out.last() {
            l.im += ((prev.im - l.im) / std::f64::consts::TAU).round() * std::f64::consts::TAU;
        }
        out.push(l);
    }
    out
}

fn criterion_11() -> Result<Outcome> {
    const N: usize = 256;
    let start = ginibre(N, 110);
    let b = integrate_trajectories(&start, N, c(1.0, 0.0), c(0.0, 0.0), Mode::Additive, &IntegrationOpts { samples: 21, ..Default::default() })?;
    let diam = start.diameter();
    let dev = median(b.paths.iter().map(|p| {
        let z0 = p[0];
        p.iter().zip(&b.t_samples).map(|(&z, &t)| (z - (z0 + t * z0.conj())).norm()).fold(0.0, f64::max)
    })) / diam;

    let mut spec = ModelSpec::additive(N, 1.0, c(1.0, 0.0), InitialSpectrum::Zero);
    spec.seed = 111;
    let end = integrate_trajectories(&sample(&spec), N, c(1.0, 0.0), c(-1.0, 0.0), Mode::Additive, &IntegrationOpts { samples: 2, ..Default::default() })?
        .endpoints();
    let im = median_abs_imag(&end);
    let ks = ks_against(&re_parts(&end), |x| semicircle_cdf(x, 2.0));
    outcome(
        dev <= 0.05 && im <= 0.1 && ks <= 0.1,
        format!("median chord deviation {dev:.4} of diameter; beyond run median |Im| {im:.4}, KS {ks:.4}"),
    )
}

type Criterion = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(u32, &str, Criterion); 11] = [
        (1, "exact operator algebra", criterion_1),
        (2, "ODE and coefficient routes agree", criterion_2),
        (3, "moment identities", criterion_3),
        (4, "deformation of the second moment", criterion_4),
        (5, "second-moment PDE residual", criterion_5),
        (6, "circle to semicircle", criterion_6),
        (7, "semicircle to circle", criterion_7),
        (8, "intermediate ellipses", criterion_8),
        (9, "multiplicative circle law", criterion_9),
        (10, "Calogero-Moser accelerations", criterion_10),
        (11, "straight trajectories and the beyond range", criterion_11),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&k) {
            continue;
        }
        let t = Instant::now();
        let o = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => Outcome { pass: false, detail: format!("error: {e}") },
            Err(_) => Outcome { pass: false, detail: "panicked".into() },
        };
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {k:>2} {}: {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
