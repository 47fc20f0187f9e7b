//! Synthetic images with known Betti numbers.
//!
//! Every generated image is checked with the cubical diagram at threshold
//! 0.5 and redrawn until it has the declared `(β0, β1)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cubical::{betti_at, cubical_diagram};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::substream;

const MAX_ATTEMPTS: u64 = 200;
pub const VERIFY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// `r` disjoint bright disks: β = (r, 0).
    Blobs,
    /// `r` disjoint bright annuli: β = (r, r).
    Rings,
    /// Full-span horizontal and vertical lines: β = (1, (h-1)(v-1)).
    GridRoads,
    /// Alternates rings and grid-roads.
    RingsRoads,
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Blobs => "blobs",
            SynthKind::Rings => "rings",
            SynthKind::GridRoads => "grid-roads",
            SynthKind::RingsRoads => "rings-roads",
        })
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(SynthKind::Blobs),
            "rings" => Ok(SynthKind::Rings),
            "grid-roads" | "roads" => Ok(SynthKind::GridRoads),
            "rings-roads" | "mixed" => Ok(SynthKind::RingsRoads),
            other => Err(Error::invalid(format!("unknown synthetic kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SynthKind,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    /// Upper bound on objects per image (blobs, rings, or lines per axis).
    /// Each image draws its own count; `features = 0` is treated as 1.
    pub features: usize,
    /// Fixes every image to exactly `features` objects.
    pub exact: bool,
}

impl SyntheticSpec {
    pub fn new(kind: SynthKind, count: usize, height: usize, width: usize, seed: u64) -> Self {
        SyntheticSpec {
            kind,
            count,
            height,
            width,
            seed,
            features: 3,
            exact: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub images: Vec<Image>,
    /// Declared (β0, β1) per image.
    pub betti: Vec<(usize, usize)>,
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    let (h, w) = (spec.height, spec.width);
    if h < 16 || w < 16 || h % 4 != 0 || w % 4 != 0 {
        return Err(Error::invalid(format!(
            "synthetic images must be at least 16x16 with sides divisible by 4, got {h}x{w}"
        )));
    }
    let max = spec.features.max(1);
    let mut images = Vec::with_capacity(spec.count);
    let mut betti = Vec::with_capacity(spec.count);
    for idx in 0..spec.count {
        let kind = match spec.kind {
            SynthKind::RingsRoads if idx % 2 == 0 => SynthKind::Rings,
            SynthKind::RingsRoads => SynthKind::GridRoads,
            k => k,
        };
        let mut done = false;
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = substream(spec.seed, &[idx as u64, attempt]);
            let drawn = match kind {
                SynthKind::Blobs => {
                    let n = pick(&mut rng, 1, max, spec.exact);
                    blobs(&mut rng, h, w, n)
                }
                SynthKind::Rings => {
                    let n = pick(&mut rng, 1, max, spec.exact);
                    rings(&mut rng, h, w, n)
                }
                _ => {
                    let top = max.max(2);
                    let nh = pick(&mut rng, 2, top, spec.exact);
                    let nv = pick(&mut rng, 2, top, spec.exact);
                    roads(&mut rng, h, w, nh, nv)
                }
            };
            let Some((im, expected)) = drawn else { continue };
            if betti_at(&cubical_diagram(&im, 1)?, VERIFY_THRESHOLD) == expected {
                images.push(im);
                betti.push(expected);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Degenerate(format!(
                "could not place a valid {kind} image of size {h}x{w} with up to {max} features"
            )));
        }
    }
    Ok(SyntheticDataset { images, betti })
}

fn pick(rng: &mut ChaCha8Rng, lo: usize, hi: usize, exact: bool) -> usize {
    if exact {
        hi
    } else {
        rng.random_range(lo..=hi.max(lo))
    }
}

/// Places `n` circles of the given radii without overlap (gap included).
fn place(rng: &mut ChaCha8Rng, h: usize, w: usize, radii: &[f64], gap: f64) -> Option<Vec<(f64, f64)>> {
    let mut centers: Vec<(f64, f64)> = Vec::new();
    for &r in radii {
        let margin = r + 1.5;
        if 2.0 * margin >= h.min(w) as f64 {
            return None;
        }
        let mut placed = false;
        for _ in 0..100 {
            let cy = rng.random_range(margin..h as f64 - margin);
            let cx = rng.random_range(margin..w as f64 - margin);
            let clear = centers.iter().zip(radii).all(|(&(y, x), &r2)| {
                ((y - cy).powi(2) + (x - cx).powi(2)).sqrt() >= r + r2 + gap
            });
            if clear {
                centers.push((cy, cx));
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    Some(centers)
}

fn render(h: usize, w: usize, f: impl Fn(f64, f64) -> f64) -> Image {
    let mut im = Image::filled(h, w, 0.0);
    for r in 0..h {
        for c in 0..w {
            im.set(r, c, f(r as f64 + 0.5, c as f64 + 0.5).clamp(0.0, 1.0));
        }
    }
    im
}

fn blobs(rng: &mut ChaCha8Rng, h: usize, w: usize, n: usize) -> Option<(Image, (usize, usize))> {
    let radii: Vec<f64> = (0..n).map(|_| rng.random_range(1.5..3.5)).collect();
    let centers = place(rng, h, w, &radii, 3.0)?;
    let im = render(h, w, |y, x| {
        centers
            .iter()
            .zip(&radii)
            .map(|(&(cy, cx), &r)| (r + 0.75 - ((y - cy).powi(2) + (x - cx).powi(2)).sqrt()) / 1.25)
            .fold(0.0, f64::max)
    });
    Some((im, (n, 0)))
}

fn rings(rng: &mut ChaCha8Rng, h: usize, w: usize, n: usize) -> Option<(Image, (usize, usize))> {
    let top = (h.min(w) as f64 / 4.0).max(4.0);
    let radii: Vec<f64> = (0..n).map(|_| rng.random_range(3.0..top)).collect();
    let centers = place(rng, h, w, &radii, 3.0)?;
    let im = render(h, w, |y, x| {
        centers
            .iter()
            .zip(&radii)
            .map(|(&(cy, cx), &r)| {
                let d = ((y - cy).powi(2) + (x - cx).powi(2)).sqrt();
                (1.25 - (d - r).abs()) / 0.75
            })
            .fold(0.0, f64::max)
    });
    Some((im, (n, n)))
}

/// Distinct positions in `2..len-2` at least 3 apart.
fn line_positions(rng: &mut ChaCha8Rng, len: usize, n: usize) -> Option<Vec<usize>> {
    let mut pos: Vec<usize> = Vec::new();
    for _ in 0..100 {
        if pos.len() == n {
            break;
        }
        let p = rng.random_range(2..len - 2);
        if pos.iter().all(|&q| q.abs_diff(p) >= 3) {
            pos.push(p);
        }
    }
    (pos.len() == n).then_some(pos)
}

fn roads(rng: &mut ChaCha8Rng, h: usize, w: usize, nh: usize, nv: usize) -> Option<(Image, (usize, usize))> {
    let rows = line_positions(rng, h, nh)?;
    let cols = line_positions(rng, w, nv)?;
    let shade = rng.random_range(0.15..0.35);
    let mut im = Image::filled(h, w, 0.0);
    let mut paint = |r: usize, c: usize, v: f64| {
        if im.get(r, c) < v {
            im.set(r, c, v);
        }
    };
    for &r in &rows {
        for c in 0..w {
            paint(r, c, 1.0);
            paint(r - 1, c, shade);
            paint(r + 1, c, shade);
        }
    }
    for &c in &cols {
        for r in 0..h {
            paint(r, c, 1.0);
            paint(r, c - 1, shade);
            paint(r, c + 1, shade);
        }
    }
    Some((im, (1, (nh - 1) * (nv - 1))))
}
