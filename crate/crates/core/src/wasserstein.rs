//! p-Wasserstein distance between persistence diagrams.
//!
//! The diagrams are augmented with the diagonal and matched by an exact
//! assignment solver on the `(n+m) x (n+m)` cost matrix. Ground metric is
//! ℓ∞; a point's cost to the diagonal is `|b - d| / 2`.

use crate::diagram::{PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};

/// One side of a matched pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Point(usize),
    Diagonal,
}

/// Optimal bijection between two augmented diagrams.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `(left, right)` pairs; diagonal-to-diagonal pairs are omitted.
    pub pairs: Vec<(Slot, Slot)>,
    /// `(Σ cost^p)^(1/p)`.
    pub cost: f64,
    pub p: f64,
    left_len: usize,
    right_len: usize,
}

fn linf(a: &PersistencePoint, b: &PersistencePoint) -> f64 {
    (a.birth - b.birth).abs().max((a.death - b.death).abs())
}

fn diag_dist(a: &PersistencePoint) -> f64 {
    (a.birth - a.death).abs() / 2.0
}

fn check_inputs(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("Wasserstein order must be finite and >= 1, got {p}")));
    }
    if let (Some(a), Some(b)) = (d1.single_dim()?, d2.single_dim()?) {
        if a != b {
            return Err(Error::invalid(format!("cannot compare dimension {a} with dimension {b}")));
        }
    }
    Ok(())
}

fn pair_cost(d1: &PersistenceDiagram, d2: &PersistenceDiagram, left: Slot, right: Slot, p: f64) -> f64 {
    let dist = match (left, right) {
        (Slot::Point(i), Slot::Point(j)) => linf(&d1.points[i], &d2.points[j]),
        (Slot::Point(i), Slot::Diagonal) => diag_dist(&d1.points[i]),
        (Slot::Diagonal, Slot::Point(j)) => diag_dist(&d2.points[j]),
        (Slot::Diagonal, Slot::Diagonal) => 0.0,
    };
    dist.powf(p)
}

/// Exact p-Wasserstein distance with the optimal matching.
pub fn wasserstein(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: f64) -> Result<Matching> {
    check_inputs(d1, d2, p)?;
    let (n, m) = (d1.len(), d2.len());
    let size = n + m;
    let mut cost = vec![0.0; size * size];
    for i in 0..size {
        for j in 0..size {
            let left = if i < n { Slot::Point(i) } else { Slot::Diagonal };
            let right = if j < m { Slot::Point(j) } else { Slot::Diagonal };
            // A point may only use its own diagonal slot; this keeps the
            // solver's choice among equal-cost diagonal slots deterministic.
            let allowed = match (left, right) {
                (Slot::Point(a), Slot::Diagonal) => j - m == a,
                (Slot::Diagonal, Slot::Point(b)) => i - n == b,
                _ => true,
            };
            cost[i * size + j] = if allowed {
                pair_cost(d1, d2, left, right, p)
            } else {
                f64::INFINITY
            };
        }
    }
    let assignment = hungarian(&cost, size);
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (i, &j) in assignment.iter().enumerate() {
        let left = if i < n { Slot::Point(i) } else { Slot::Diagonal };
        let right = if j < m { Slot::Point(j) } else { Slot::Diagonal };
        if left == Slot::Diagonal && right == Slot::Diagonal {
            continue;
        }
        total += pair_cost(d1, d2, left, right, p);
        pairs.push((left, right));
    }
    Ok(Matching {
        pairs,
        cost: total.powf(1.0 / p),
        p,
        left_len: n,
        right_len: m,
    })
}

/// Minimum-cost perfect assignment (shortest augmenting path with
/// potentials). Returns `row -> column`. Infinite entries are forbidden.
fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let at = |i: usize, j: usize| cost[(i - 1) * n + (j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = at(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

/// Gradient of the matching cost with respect to each point's
/// `(birth, death)`, holding the matching fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagramGradient {
    pub left: Vec<[f64; 2]>,
    pub right: Vec<[f64; 2]>,
}

/// Subgradient of `matching.cost` at the fixed optimal matching.
///
/// For a point-to-point pair only the coordinate realising the ℓ∞ gap
/// receives gradient (birth on ties). Diagonal matches move along
/// `(±1/2, ∓1/2)`.
pub fn wasserstein_grad(
    matching: &Matching,
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
) -> Result<DiagramGradient> {
    if matching.left_len != d1.len() || matching.right_len != d2.len() {
        return Err(Error::invalid(format!(
            "stale matching: built for {}x{} points, given {}x{}",
            matching.left_len,
            matching.right_len,
            d1.len(),
            d2.len()
        )));
    }
    let p = matching.p;
    let mut grad = DiagramGradient {
        left: vec![[0.0; 2]; d1.len()],
        right: vec![[0.0; 2]; d2.len()],
    };
    let total = matching.cost.powf(p);
    if total <= 0.0 {
        return Ok(grad);
    }
    // d cost / d total
    let outer = total.powf(1.0 / p - 1.0) / p;
    let dpow = |gap: f64| p * gap.abs().powf(p - 1.0) * gap.signum() * outer;

    for &(left, right) in &matching.pairs {
        match (left, right) {
            (Slot::Point(i), Slot::Point(j)) => {
                let (a, b) = (&d1.points[i], &d2.points[j]);
                let (db, dd) = (b.birth - a.birth, b.death - a.death);
                if db == 0.0 && dd == 0.0 {
                    continue;
                }
                let coord = if db.abs() >= dd.abs() { 0 } else { 1 };
                let g = dpow(if coord == 0 { db } else { dd });
                grad.right[j][coord] += g;
                grad.left[i][coord] -= g;
            }
            (Slot::Point(i), Slot::Diagonal) => add_diag(&mut grad.left[i], &d1.points[i], &dpow),
            (Slot::Diagonal, Slot::Point(j)) => add_diag(&mut grad.right[j], &d2.points[j], &dpow),
            (Slot::Diagonal, Slot::Diagonal) => {}
        }
    }
    Ok(grad)
}

fn add_diag(g: &mut [f64; 2], pt: &PersistencePoint, dpow: &impl Fn(f64) -> f64) {
    let gap = pt.birth - pt.death;
    if gap == 0.0 {
        return;
    }
    // cost = |b - d| / 2, so d/db = sign(b - d) / 2 and d/dd = -d/db.
    let g_gap = dpow(gap.abs() / 2.0) * gap.signum() / 2.0;
    g[0] += g_gap;
    g[1] -= g_gap;
}

/// Largest `|D| + |D'|` accepted by [`brute_force_wasserstein`].
pub const BRUTE_FORCE_CAP: usize = 8;

/// Exhaustive minimum over all augmented bijections; test oracle.
pub fn brute_force_wasserstein(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: f64) -> Result<f64> {
    check_inputs(d1, d2, p)?;
    if d1.len() + d2.len() > BRUTE_FORCE_CAP {
        return Err(Error::invalid(format!(
            "brute force is capped at {BRUTE_FORCE_CAP} points in total, got {}",
            d1.len() + d2.len()
        )));
    }
    let mut used = vec![false; d2.len()];
    let mut best = f64::INFINITY;
    enumerate(d1, d2, p, 0, &mut used, 0.0, &mut best);
    Ok(best.powf(1.0 / p))
}

fn enumerate(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
    i: usize,
    used: &mut [bool],
    acc: f64,
    best: &mut f64,
) {
    if i == d1.len() {
        let rest: f64 = used
            .iter()
            .enumerate()
            .filter(|(_, &u)| !u)
            .map(|(j, _)| diag_dist(&d2.points[j]).powf(p))
            .sum();
        *best = best.min(acc + rest);
        return;
    }
    let a = &d1.points[i];
    enumerate(d1, d2, p, i + 1, used, acc + diag_dist(a).powf(p), best);
    for j in 0..d2.len() {
        if !used[j] {
            used[j] = true;
            enumerate(d1, d2, p, i + 1, used, acc + linf(a, &d2.points[j]).powf(p), best);
            used[j] = false;
        }
    }
}
