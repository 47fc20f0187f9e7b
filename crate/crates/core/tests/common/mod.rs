//! Reference implementations shared by the integration tests.
//!
//! These are deliberately naive: full boundary matrices reduced over Z/2,
//! exhaustive matching enumeration, and a threshold search for the
//! bottleneck distance.

#![allow(dead_code)]

use topojscc::diagram::PersistenceDiagram;
use topojscc::image::Image;

/// `(dim, birth, death, essential)` sorted, for comparing diagrams by value.
pub type Triple = (usize, f64, f64, bool);

pub fn triples(d: &PersistenceDiagram) -> Vec<Triple> {
    let mut v: Vec<Triple> = d.iter().map(|p| (p.dim, p.birth, p.death, p.essential)).collect();
    v.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    v
}

/// Standard column reduction. `columns[j]` lists boundary row indices of
/// cell `j` (cells in filtration order). Returns `low[j]` for every column
/// that is non-zero after reduction.
pub fn reduce(columns: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut cols: Vec<Vec<usize>> = columns
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_unstable();
            c
        })
        .collect();
    let mut owner: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut lows = vec![None; cols.len()];
    for j in 0..cols.len() {
        while let Some(&low) = cols[j].last() {
            match owner.get(&low) {
                Some(&k) => {
                    let other = cols[k].clone();
                    cols[j] = sym_diff(&cols[j], &other);
                }
                None => {
                    owner.insert(low, j);
                    lows[j] = Some(low);
                    break;
                }
            }
        }
    }
    lows
}

fn sym_diff(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            out.push(b[j]);
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    out
}

struct Cell {
    dim: usize,
    value: f64,
    /// Filtration position key: entry rank, then dimension, then id.
    key: (usize, usize, usize),
    boundary: Vec<usize>,
}

/// Superlevel persistence of the full cubical complex (pixels as closed
/// squares), by boundary-matrix reduction. Essential classes get death =
/// image minimum, matching the library convention.
pub fn cubical_oracle(image: &Image) -> Vec<Triple> {
    let (h, w) = (image.height(), image.width());
    let vals = image.data();
    let mut order: Vec<usize> = (0..h * w).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut rank = vec![0; h * w];
    for (r, &p) in order.iter().enumerate() {
        rank[p] = r;
    }
    // Grid vertices (h+1)x(w+1); horizontal edges h+1 rows of w; vertical
    // edges h rows of w+1; squares are pixels.
    let vid = |r: usize, c: usize| r * (w + 1) + c;
    let nv = (h + 1) * (w + 1);
    let hid = |r: usize, c: usize| nv + r * w + c;
    let nh = (h + 1) * w;
    let vid_e = |r: usize, c: usize| nv + nh + r * (w + 1) + c;
    let ne = nh + h * (w + 1);
    let pid = |p: usize| nv + ne + p;
    let total = nv + ne + h * w;

    // A cell enters with its earliest adjacent pixel.
    let mut entry = vec![usize::MAX; total];
    let mut boundary: Vec<Vec<usize>> = vec![Vec::new(); total];
    let mut dims = vec![0usize; total];
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            let faces_v = [vid(r, c), vid(r, c + 1), vid(r + 1, c), vid(r + 1, c + 1)];
            let faces_e = [hid(r, c), hid(r + 1, c), vid_e(r, c), vid_e(r, c + 1)];
            for &f in faces_v.iter().chain(&faces_e) {
                entry[f] = entry[f].min(rank[p]);
            }
            entry[pid(p)] = rank[p];
            boundary[pid(p)] = faces_e.to_vec();
            dims[pid(p)] = 2;
        }
    }
    for r in 0..=h {
        for c in 0..w {
            boundary[hid(r, c)] = vec![vid(r, c), vid(r, c + 1)];
            dims[hid(r, c)] = 1;
        }
    }
    for r in 0..h {
        for c in 0..=w {
            boundary[vid_e(r, c)] = vec![vid(r, c), vid(r + 1, c)];
            dims[vid_e(r, c)] = 1;
        }
    }
    let value_of_rank = |r: usize| vals[order[r]];
    let cells: Vec<Cell> = (0..total)
        .map(|id| Cell {
            dim: dims[id],
            value: value_of_rank(entry[id]),
            key: (entry[id], dims[id], id),
            boundary: boundary[id].clone(),
        })
        .collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    persistence_of(cells, min, 1)
}

/// Reduces a filtered complex and reports `(dim, birth, death, essential)`
/// for non-zero persistence; unpaired cells of dimension `<= max_dim` are
/// essential with death `cap`.
fn persistence_of(cells: Vec<Cell>, cap: f64, max_dim: usize) -> Vec<Triple> {
    let mut idx: Vec<usize> = (0..cells.len()).collect();
    idx.sort_by_key(|&i| cells[i].key);
    let mut pos = vec![0; cells.len()];
    for (k, &i) in idx.iter().enumerate() {
        pos[i] = k;
    }
    let columns: Vec<Vec<usize>> = idx
        .iter()
        .map(|&i| cells[i].boundary.iter().map(|&f| pos[f]).collect())
        .collect();
    let lows = reduce(&columns);
    let mut paired = vec![false; cells.len()];
    let mut out = Vec::new();
    for (j, low) in lows.iter().enumerate() {
        if let Some(i) = *low {
            paired[i] = true;
            paired[j] = true;
            let (b, d) = (&cells[idx[i]], &cells[idx[j]]);
            if b.value != d.value && b.dim <= max_dim {
                out.push((b.dim, b.value, d.value, false));
            }
        }
    }
    for (k, &i) in idx.iter().enumerate() {
        let c = &cells[i];
        if !paired[k] && lows[k].is_none() && c.dim <= max_dim && c.value != cap {
            out.push((c.dim, c.value, cap, true));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)).then(a.3.cmp(&b.3)));
    out
}

/// Rips persistence in dimensions 0 and 1 of points with pairwise
/// distances `dist`, truncated at `eps_max`, by full reduction of the
/// clique complex up to triangles.
pub fn rips_oracle(dist: &[Vec<f64>], eps_max: f64) -> Vec<Triple> {
    let n = dist.len();
    let mut cells = Vec::new();
    let mut edge_id = std::collections::HashMap::new();
    for v in 0..n {
        cells.push(Cell {
            dim: 0,
            value: 0.0,
            key: (0, 0, 0),
            boundary: vec![],
        });
        let _ = v;
    }
    for u in 0..n {
        for v in u + 1..n {
            if dist[u][v] <= eps_max {
                edge_id.insert((u, v), cells.len());
                cells.push(Cell {
                    dim: 1,
                    value: dist[u][v],
                    key: (0, 1, 0),
                    boundary: vec![u, v],
                });
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let (Some(&ab), Some(&ac), Some(&bc)) = (edge_id.get(&(a, b)), edge_id.get(&(a, c)), edge_id.get(&(b, c)))
                else {
                    continue;
                };
                let value = dist[a][b].max(dist[a][c]).max(dist[b][c]);
                cells.push(Cell {
                    dim: 2,
                    value,
                    key: (0, 2, 0),
                    boundary: vec![ab, ac, bc],
                });
            }
        }
    }
    // Order by value, then dimension, then creation order.
    let mut by_value: Vec<usize> = (0..cells.len()).collect();
    by_value.sort_by(|&i, &j| {
        cells[i]
            .value
            .total_cmp(&cells[j].value)
            .then(cells[i].dim.cmp(&cells[j].dim))
            .then(i.cmp(&j))
    });
    for (k, &i) in by_value.iter().enumerate() {
        cells[i].key = (k, cells[i].dim, i);
    }
    persistence_of(cells, eps_max, 1)
}

pub fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|q| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn to_diag(a: (f64, f64)) -> f64 {
    (a.1 - a.0).abs() / 2.0
}

fn pts(d: &PersistenceDiagram) -> Vec<(f64, f64)> {
    d.iter().map(|p| (p.birth, p.death)).collect()
}

/// Exhaustive p-Wasserstein distance: every bijection of the augmented
/// sets where each point may instead go to its own diagonal projection.
pub fn wasserstein_enumerate(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: f64) -> f64 {
    let (a, b) = (pts(d1), pts(d2));
    let mut best = f64::INFINITY;
    let mut used = vec![false; b.len()];
    fn go(i: usize, a: &[(f64, f64)], b: &[(f64, f64)], used: &mut [bool], acc: f64, p: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if i == a.len() {
            let rest: f64 = b
                .iter()
                .zip(used.iter())
                .filter(|(_, u)| !**u)
                .map(|(q, _)| to_diag(*q).powf(p))
                .sum();
            *best = best.min(acc + rest);
            return;
        }
        go(i + 1, a, b, used, acc + to_diag(a[i]).powf(p), p, best);
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                go(i + 1, a, b, used, acc + linf(a[i], b[j]).powf(p), p, best);
                used[j] = false;
            }
        }
    }
    go(0, &a, &b, &mut used, 0.0, p, &mut best);
    best.powf(1.0 / p)
}

/// Bottleneck distance by testing each candidate threshold for a perfect
/// matching (augmenting paths) in the augmented bipartite graph.
pub fn bottleneck(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> f64 {
    let (a, b) = (pts(d1), pts(d2));
    let (n, m) = (a.len(), b.len());
    let mut cands = vec![0.0];
    for x in &a {
        cands.push(to_diag(*x));
        for y in &b {
            cands.push(linf(*x, *y));
        }
    }
    for y in &b {
        cands.push(to_diag(*y));
    }
    cands.sort_by(f64::total_cmp);
    // Left: a points then m diagonal slots; right: b points then n slots.
    let ok = |t: f64| -> bool {
        let size = n + m;
        let adj = |l: usize, r: usize| -> bool {
            match (l < n, r < m) {
                (true, true) => linf(a[l], b[r]) <= t,
                (true, false) => r - m == l && to_diag(a[l]) <= t,
                (false, true) => l - n == r && to_diag(b[r]) <= t,
                (false, false) => true,
            }
        };
        let mut match_r = vec![usize::MAX; size];
        fn try_kuhn(l: usize, seen: &mut [bool], match_r: &mut [usize], size: usize, adj: &dyn Fn(usize, usize) -> bool) -> bool {
            for r in 0..size {
                if !seen[r] && adj(l, r) {
                    seen[r] = true;
                    if match_r[r] == usize::MAX || try_kuhn(match_r[r], seen, match_r, size, adj) {
                        match_r[r] = l;
                        return true;
                    }
                }
            }
            false
        }
        (0..size).all(|l| {
            let mut seen = vec![false; size];
            try_kuhn(l, &mut seen, &mut match_r, size, &adj)
        })
    };
    cands.into_iter().find(|&t| ok(t)).unwrap_or(f64::INFINITY)
}
