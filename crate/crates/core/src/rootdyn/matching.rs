//! Minimum-total-distance pairing of two point multisets.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Optimal assignment for a square cost matrix (row-major), by shortest
/// augmenting paths. Returns `col[i]` for every row `i`.
pub fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    // 1-based potentials and matching as in the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            col[p[j] - 1] = j - 1;
        }
    }
    col
}

/// Result of a matching that does not fail on ties.
#[derive(Clone, Debug)]
pub struct Matching {
    /// `perm[i]` is the index in `next` paired with `prev[i]`.
    pub perm: Vec<usize>,
    pub total_cost: f64,
    /// Some pair of assignments differs in cost by less than the tie tolerance.
    pub ambiguous: bool,
    /// Smallest cost increase found by swapping two partners.
    pub best_swap_gap: f64,
}

fn greedy(prev: &[Complex64], next: &[Complex64]) -> Option<Vec<usize>> {
    let n = prev.len();
    let mut perm = vec![0usize; n];
    let mut taken = vec![false; n];
    for i in 0..n {
        let mut best = (f64::INFINITY, usize::MAX);
        let mut second = f64::INFINITY;
        for (j, q) in next.iter().enumerate() {
            let d = (prev[i] - q).norm();
            if d < best.0 {
                second = best.0;
                best = (d, j);
            } else if d < second {
                second = d;
            }
        }
        if n > 1 && !(second > 10.0 * best.0) {
            return None;
        }
        if taken[best.1] {
            return None;
        }
        taken[best.1] = true;
        perm[i] = best.1;
    }
    Some(perm)
}

/// Pairing with tie detection. Coincident points on either side never count
/// as a tie since swapping them changes nothing.
pub fn match_points_lenient(prev: &[Complex64], next: &[Complex64]) -> Matching {
    assert_eq!(prev.len(), next.len(), "match_points needs equal counts");
    let n = prev.len();
    let perm = match greedy(prev, next) {
        Some(p) => p,
        None => {
            let cost: Vec<f64> = prev.iter().flat_map(|a| next.iter().map(move |b| (a - b).norm())).collect();
            hungarian(n, &cost)
        }
    };
    let total_cost: f64 = (0..n).map(|i| (prev[i] - next[perm[i]]).norm()).sum();
    let scale = prev.iter().chain(next).map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let tie_tol = 1e-12 * scale;
    let coincide_tol = 1e-14 * scale;
    let mut best_swap_gap = f64::INFINITY;
    for i in 0..n {
        for k in i + 1..n {
            if (prev[i] - prev[k]).norm() <= coincide_tol || (next[perm[i]] - next[perm[k]]).norm() <= coincide_tol {
                continue;
            }
            let now = (prev[i] - next[perm[i]]).norm() + (prev[k] - next[perm[k]]).norm();
            let swapped = (prev[i] - next[perm[k]]).norm() + (prev[k] - next[perm[i]]).norm();
            best_swap_gap = best_swap_gap.min(swapped - now);
        }
    }
    Matching { perm, total_cost, ambiguous: best_swap_gap <= tie_tol, best_swap_gap }
}

/// Minimum-total-distance assignment; ties are reported as
/// [`Error::AmbiguousMatch`] instead of being broken silently.
pub fn match_points(prev: &[Complex64], next: &[Complex64]) -> Result<Vec<usize>> {
    let m = match_points_lenient(prev, next);
    if m.ambiguous {
        return Err(Error::AmbiguousMatch { best: m.total_cost, second: m.total_cost + m.best_swap_gap });
    }
    Ok(m.perm)
}

/// Reorder `next` so that entry `i` is the partner of `prev[i]`.
pub fn reorder(next: &[Complex64], perm: &[usize]) -> Vec<Complex64> {
    perm.iter().map(|&j| next[j]).collect()
}

/// Largest distance between matched partners.
pub fn max_pairing_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let m = match_points_lenient(a, b);
    (0..a.len()).map(|i| (a[i] - b[m.perm[i]]).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spec_examples() {
        let a = [c(0.0, 0.0), c(1.0, 0.0), c(0.3, 0.7)];
        assert_eq!(match_points(&a, &a).unwrap(), vec![0, 1, 2]);
        let shifted: Vec<Complex64> = a.iter().map(|z| z + c(0.01, -0.02)).collect();
        assert_eq!(match_points(&a, &shifted).unwrap(), vec![0, 1, 2]);
        let p = match_points(&[c(0.0, 0.0), c(1.0, 0.0)], &[c(1.01, 0.0), c(0.02, 0.0)]).unwrap();
        assert_eq!(p, vec![1, 0]);
    }

    #[test]
    fn ambiguity_is_reported() {
        // Square corners against the rotated square: two optimal pairings.
        let a = [c(1.0, 0.0), c(-1.0, 0.0)];
        let b = [c(0.0, 1.0), c(0.0, -1.0)];
        assert!(matches!(match_points(&a, &b), Err(Error::AmbiguousMatch { .. })));
        // Coincident points are not a tie.
        let d = [c(0.0, 0.0), c(0.0, 0.0)];
        assert!(match_points(&d, &d).is_ok());
    }

    fn brute_force(a: &[Complex64], b: &[Complex64]) -> f64 {
        fn rec(a: &[Complex64], b: &[Complex64], used: &mut Vec<bool>, i: usize) -> f64 {
            if i == a.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..b.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min((a[i] - b[j]).norm() + rec(a, b, used, i + 1));
                    used[j] = false;
                }
            }
            best
        }
        rec(a, b, &mut vec![false; b.len()], 0)
    }

    proptest! {
        #[test]
        fn optimal_against_brute_force(pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..7)) {
            let a: Vec<Complex64> = pts.iter().map(|p| c(p.0, p.1)).collect();
            let b: Vec<Complex64> = pts.iter().map(|p| c(p.2, p.3)).collect();
            let m = match_points_lenient(&a, &b);
            let mut seen = m.perm.clone();
            seen.sort();
            prop_assert_eq!(seen, (0..a.len()).collect::<Vec<_>>());
            prop_assert!((m.total_cost - brute_force(&a, &b)).abs() < 1e-12);
        }
    }
}
