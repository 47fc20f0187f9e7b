//! Superlevel-set persistence of grayscale images on the cubical complex.
//!
//! Each pixel is a closed unit square; a square's edges and vertices enter
//! together with the first adjacent square. Bright components therefore
//! connect through corners (8-connectivity), while the complement connects
//! only through shared edges (4-connectivity). Pixels are swept in
//! descending intensity with row-major index tie-break.
//!
//! Dimension 0 is a union-find sweep with the elder rule. Dimension 1 uses
//! the dual sweep: the complement grows in reverse order with the region
//! outside the image acting as the eldest component, and every merge of
//! complement components corresponds to a loop in the forward filtration.
//!
//! Every diagram coordinate equals the intensity of a single pixel, recorded
//! as the point's birth/death cell, so the coordinates are differentiable
//! with respect to the image almost everywhere. At intensity ties the
//! gradient is the one-sided subgradient selected by the tie-break.
//! Zero-persistence pairs are not reported.

use std::cmp::Ordering;

use crate::diagram::{Cell, PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::union_find::DisjointSet;

/// Pixels of an image in superlevel filtration order.
#[derive(Debug, Clone)]
pub struct CubicalFiltration {
    pub height: usize,
    pub width: usize,
    /// Pixel indices, brightest first.
    pub order: Vec<usize>,
    /// `rank[p]` is the position of pixel `p` in `order`.
    pub rank: Vec<usize>,
}

fn validate(image: &Image) -> Result<()> {
    if image.is_empty() {
        return Err(Error::invalid("empty image"));
    }
    if image.height() < 2 || image.width() < 2 {
        return Err(Error::invalid(format!(
            "cubical persistence needs at least 2x2 pixels, got {}x{}",
            image.height(),
            image.width()
        )));
    }
    image.validate_unit_range()
}

/// Descending-intensity order of all pixels, ties by row-major index.
pub fn superlevel_order(image: &Image) -> Result<CubicalFiltration> {
    validate(image)?;
    let values = image.data();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| match values[b].partial_cmp(&values[a]) {
        Some(Ordering::Equal) | None => a.cmp(&b),
        Some(o) => o,
    });
    let mut rank = vec![0; order.len()];
    for (r, &p) in order.iter().enumerate() {
        rank[p] = r;
    }
    Ok(CubicalFiltration {
        height: image.height(),
        width: image.width(),
        order,
        rank,
    })
}

/// Persistence diagram of the superlevel filtration in dimensions
/// `0..=max_dim` (`max_dim` is 0 or 1).
///
/// The essential component is reported with death capped at the image
/// minimum and flagged `essential`.
pub fn cubical_diagram(image: &Image, max_dim: usize) -> Result<PersistenceDiagram> {
    if max_dim > 1 {
        return Err(Error::invalid(format!("max_dim must be 0 or 1, got {max_dim}")));
    }
    let filt = superlevel_order(image)?;
    let values = image.data();
    let mut points = components(&filt, values);
    if max_dim >= 1 {
        points.extend(loops(&filt, values));
    }
    Ok(PersistenceDiagram::new(points))
}

fn components(filt: &CubicalFiltration, values: &[f64]) -> Vec<PersistencePoint> {
    let (h, w) = (filt.height as isize, filt.width as isize);
    let n = filt.order.len();
    let mut ds = DisjointSet::new(n);
    // Brightest pixel of the component rooted at each representative.
    let mut eldest = vec![usize::MAX; n];
    let mut points = Vec::new();
    let mut roots = Vec::with_capacity(8);

    for &p in &filt.order {
        let (r, c) = ((p / filt.width) as isize, (p % filt.width) as isize);
        roots.clear();
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (nr, nc) = (r + dr, c + dc);
                if (dr, dc) == (0, 0) || nr < 0 || nc < 0 || nr >= h || nc >= w {
                    continue;
                }
                let q = (nr * w + nc) as usize;
                if filt.rank[q] < filt.rank[p] {
                    let root = ds.find(q);
                    if !roots.contains(&root) {
                        roots.push(root);
                    }
                }
            }
        }
        if roots.is_empty() {
            eldest[p] = p;
            continue;
        }
        let survivor = *roots
            .iter()
            .min_by_key(|&&root| filt.rank[eldest[root]])
            .unwrap();
        let survivor_birth = eldest[survivor];
        for &root in roots.iter().filter(|&&root| root != survivor) {
            let born = eldest[root];
            if values[born] != values[p] {
                points.push(PersistencePoint {
                    dim: 0,
                    birth: values[born],
                    death: values[p],
                    essential: false,
                    birth_cell: Cell::Pixel(born),
                    death_cell: Cell::Pixel(p),
                });
            }
        }
        let mut root = ds.union(p, survivor);
        for &other in &roots {
            root = ds.union(root, other);
        }
        eldest[root] = survivor_birth;
    }

    let first = filt.order[0];
    let last = filt.order[n - 1];
    points.push(PersistencePoint {
        dim: 0,
        birth: values[first],
        death: values[last],
        essential: true,
        birth_cell: Cell::Pixel(first),
        death_cell: Cell::Pixel(last),
    });
    points
}

fn loops(filt: &CubicalFiltration, values: &[f64]) -> Vec<PersistencePoint> {
    let (h, w) = (filt.height, filt.width);
    let n = filt.order.len();
    let outside = n;
    let mut ds = DisjointSet::new(n + 1);
    // Darkest pixel of each complement component; the outside has none.
    let mut eldest = vec![usize::MAX; n + 1];
    let mut points = Vec::new();
    let mut roots: Vec<usize> = Vec::with_capacity(5);
    // Reverse-sweep age: smaller is older. The outside is older than any pixel.
    let age = |px: usize| -> usize {
        if px == usize::MAX {
            0
        } else {
            n - filt.rank[px]
        }
    };

    for &p in filt.order.iter().rev() {
        let (r, c) = (p / w, p % w);
        roots.clear();
        if r == 0 || c == 0 || r + 1 == h || c + 1 == w {
            roots.push(ds.find(outside));
        }
        let neighbours = [
            (r > 0).then(|| p - w),
            (r + 1 < h).then(|| p + w),
            (c > 0).then(|| p - 1),
            (c + 1 < w).then(|| p + 1),
        ];
        for q in neighbours.into_iter().flatten() {
            if filt.rank[q] > filt.rank[p] {
                let root = ds.find(q);
                if !roots.contains(&root) {
                    roots.push(root);
                }
            }
        }
        if roots.is_empty() {
            eldest[p] = p;
            continue;
        }
        let survivor = *roots.iter().min_by_key(|&&root| age(eldest[root])).unwrap();
        let survivor_birth = eldest[survivor];
        for &root in roots.iter().filter(|&&root| root != survivor) {
            let filled_by = eldest[root];
            if values[filled_by] != values[p] {
                points.push(PersistencePoint {
                    dim: 1,
                    birth: values[p],
                    death: values[filled_by],
                    essential: false,
                    birth_cell: Cell::Pixel(p),
                    death_cell: Cell::Pixel(filled_by),
                });
            }
        }
        let mut root = ds.union(p, survivor);
        for &other in &roots {
            root = ds.union(root, other);
        }
        eldest[root] = survivor_birth;
    }
    points
}

/// Snaps intensities down onto the uniform grid `{0, 1/(L-1), ..., 1}`,
/// i.e. each pixel enters at the first grid threshold it clears.
pub fn snap_to_grid(image: &Image, levels: usize) -> Result<Image> {
    if levels < 2 {
        return Err(Error::invalid(format!("threshold grid needs >= 2 levels, got {levels}")));
    }
    let steps = (levels - 1) as f64;
    Ok(image.map(|v| ((v * steps + 1e-9).floor() / steps).clamp(0.0, 1.0)))
}

/// Betti numbers `(b0, b1)` of the superlevel set at threshold `tau`,
/// read off a diagram computed by [`cubical_diagram`].
pub fn betti_at(diagram: &PersistenceDiagram, tau: f64) -> (usize, usize) {
    let alive = |dim| {
        diagram
            .iter()
            .filter(|p| p.dim == dim && p.birth >= tau && (p.death < tau || p.essential))
            .count()
    };
    (alive(0), alive(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(h: usize, w: usize, data: &[f64]) -> Image {
        Image::new(h, w, data.to_vec()).unwrap()
    }

    #[test]
    fn order_is_descending_with_index_ties() {
        let f = superlevel_order(&img(1 + 1, 3, &[0.2, 0.9, 0.5, 0.2, 0.2, 0.2])).unwrap();
        assert_eq!(&f.order[..3], &[1, 2, 0]);
        assert_eq!(&f.order[3..], &[3, 4, 5]);
    }

    #[test]
    fn constant_image_has_single_essential_point() {
        let d = cubical_diagram(&Image::filled(4, 5, 0.7), 1).unwrap();
        assert_eq!(d.len(), 1);
        let p = d.points[0];
        assert!(p.essential);
        assert_eq!((p.dim, p.birth, p.death), (0, 0.7, 0.7));
    }

    #[test]
    fn two_peaks_on_dark_background() {
        let mut data = [0.0; 9];
        data[0] = 1.0;
        data[8] = 0.8;
        let d = cubical_diagram(&img(3, 3, &data), 1).unwrap();
        assert_eq!(d.sorted_triples(), vec![(0, 0.8, 0.0), (0, 1.0, 0.0)]);
        let ess: Vec<_> = d.iter().filter(|p| p.essential).collect();
        assert_eq!(ess.len(), 1);
        assert_eq!(ess[0].birth, 1.0);
    }

    #[test]
    fn annulus_has_one_loop() {
        let mut im = Image::filled(8, 8, 0.0);
        for r in 2..6 {
            for c in 2..6 {
                if r == 2 || r == 5 || c == 2 || c == 5 {
                    im.set(r, c, 1.0);
                }
            }
        }
        let d = cubical_diagram(&im, 1).unwrap();
        let loops: Vec<_> = d.of_dim(1).points;
        assert_eq!(loops.len(), 1);
        assert_eq!((loops[0].birth, loops[0].death), (1.0, 0.0));
        assert_eq!(betti_at(&d, 0.5), (1, 1));
    }

    #[test]
    fn diagonal_pixels_connect_but_do_not_enclose() {
        // Two bright pixels touching at a corner form one component.
        let d = cubical_diagram(&img(2, 2, &[1.0, 0.0, 0.0, 1.0]), 1).unwrap();
        assert_eq!(betti_at(&d, 0.5), (1, 0));
        // A diamond of 4 corner-connected pixels encloses the dark centre,
        // whose only complement neighbours are through edges.
        let mut im = Image::filled(5, 5, 0.0);
        for (r, c) in [(1, 2), (2, 1), (2, 3), (3, 2)] {
            im.set(r, c, 1.0);
        }
        let d = cubical_diagram(&im, 1).unwrap();
        assert_eq!(betti_at(&d, 0.5), (1, 1));
    }

    #[test]
    fn generator_cells_carry_the_coordinate_values() {
        let data: Vec<f64> = (0..36).map(|i| ((i * 17 % 23) as f64) / 22.0).collect();
        let im = img(6, 6, &data);
        let d = cubical_diagram(&im, 1).unwrap();
        for p in d.iter() {
            let (Cell::Pixel(b), Cell::Pixel(k)) = (p.birth_cell, p.death_cell) else {
                panic!("cubical generators must be pixels");
            };
            assert_eq!(im.data()[b], p.birth);
            assert_eq!(im.data()[k], p.death);
            assert!(p.birth >= p.death);
        }
    }

    #[test]
    fn rejects_invalid_images() {
        assert!(cubical_diagram(&img(2, 2, &[0.0, 0.5, 1.5, 0.0]), 1).is_err());
        assert!(cubical_diagram(&img(2, 2, &[0.0, f64::NAN, 0.5, 0.0]), 1).is_err());
        assert!(cubical_diagram(&img(0, 0, &[]), 1).is_err());
        assert!(cubical_diagram(&Image::filled(3, 3, 0.1), 2).is_err());
    }

    #[test]
    fn grid_snapping_is_floor_onto_levels() {
        let im = img(1 + 1, 2, &[1.0, 0.0, 0.5, 0.999]);
        let s = snap_to_grid(&im, 3).unwrap();
        assert_eq!(s.data(), &[1.0, 0.0, 0.5, 0.5]);
    }
}
