//! Persistence diagrams with generator bookkeeping, plus the CSV exchange
//! format `dim,birth,death,essential,birth_cell,death_cell`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The cell whose filtration value a diagram coordinate equals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    /// Pixel index (row-major) of a cubical complex.
    Pixel(usize),
    /// Vertex of a point cloud.
    Vertex(usize),
    /// Edge `(i, j)` with `i < j` of a point cloud.
    Edge(usize, usize),
    /// Coordinate fixed by convention (e.g. an essential class capped at a
    /// constant); carries no gradient.
    Cap,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Pixel(p) => write!(f, "{p}"),
            Cell::Vertex(v) => write!(f, "v{v}"),
            Cell::Edge(i, j) => write!(f, "{i}-{j}"),
            Cell::Cap => f.write_str("-"),
        }
    }
}

impl FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("bad cell `{s}`");
        if s == "-" {
            return Ok(Cell::Cap);
        }
        if let Some(v) = s.strip_prefix('v') {
            return v.parse().map(Cell::Vertex).map_err(|_| bad());
        }
        if let Some((i, j)) = s.split_once('-') {
            let i = i.parse().map_err(|_| bad())?;
            let j = j.parse().map_err(|_| bad())?;
            return Ok(Cell::Edge(i, j));
        }
        s.parse().map(Cell::Pixel).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePoint {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    pub essential: bool,
    pub birth_cell: Cell,
    pub death_cell: Cell,
}

impl PersistencePoint {
    pub fn persistence(&self) -> f64 {
        (self.birth - self.death).abs()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub points: Vec<PersistencePoint>,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<PersistencePoint>) -> Self {
        PersistenceDiagram { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PersistencePoint> {
        self.points.iter()
    }

    /// Points of homology dimension `dim`, in their original order.
    pub fn of_dim(&self, dim: usize) -> PersistenceDiagram {
        PersistenceDiagram {
            points: self.points.iter().filter(|p| p.dim == dim).copied().collect(),
        }
    }

    pub fn without_essential(&self) -> PersistenceDiagram {
        PersistenceDiagram {
            points: self.points.iter().filter(|p| !p.essential).copied().collect(),
        }
    }

    /// Homology dimension shared by all points, `None` if empty.
    pub fn single_dim(&self) -> Result<Option<usize>> {
        let mut dims = self.points.iter().map(|p| p.dim);
        let Some(first) = dims.next() else {
            return Ok(None);
        };
        if dims.any(|d| d != first) {
            return Err(Error::invalid("diagram mixes homology dimensions"));
        }
        Ok(Some(first))
    }

    /// `(dim, birth, death)` triples sorted, for multiset comparison.
    pub fn sorted_triples(&self) -> Vec<(usize, f64, f64)> {
        let mut v: Vec<_> = self.points.iter().map(|p| (p.dim, p.birth, p.death)).collect();
        v.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        });
        v
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim,birth,death,essential,birth_cell,death_cell\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.dim,
                p.birth,
                p.death,
                u8::from(p.essential),
                p.birth_cell,
                p.death_cell
            ));
        }
        out
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "dim,birth,death,essential,birth_cell,death_cell" => {}
            _ => return Err(Error::format(origin, "missing diagram CSV header")),
        }
        let mut points = Vec::new();
        for (lineno, line) in lines {
            let err = |msg: String| Error::format(origin, format!("line {}: {msg}", lineno + 1));
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
            let essential = match fields[3] {
                "0" | "false" => false,
                "1" | "true" => true,
                other => return Err(err(format!("bad essential flag `{other}`"))),
            };
            points.push(PersistencePoint {
                dim: fields[0].parse().map_err(|_| err(format!("bad dim `{}`", fields[0])))?,
                birth: num(fields[1])?,
                death: num(fields[2])?,
                essential,
                birth_cell: fields[4].parse().map_err(err)?,
                death_cell: fields[5].parse().map_err(err)?,
            });
        }
        Ok(PersistenceDiagram { points })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }
}
