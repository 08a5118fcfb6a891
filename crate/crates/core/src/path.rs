//! Piecewise-linear paths and their truncated signatures.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SigError};
use crate::tensor::TruncatedTensor;

/// A piecewise-linear path through at least two vertices in `R^d`.
///
/// The path is closed exactly when its first and last vertices coincide.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyLine {
    dim: usize,
    /// Row-major `vertices x dim`.
    coords: Vec<f64>,
}

impl PolyLine {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(SigError::Domain("dimension must be positive".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(SigError::Shape(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.len() / dim < 2 {
            return Err(SigError::Domain("a polyline needs at least two vertices".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(SigError::Domain("non-finite vertex coordinate".into()));
        }
        Ok(PolyLine { dim, coords })
    }

    pub fn from_xy(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(2, points.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vertices(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn first(&self) -> &[f64] {
        self.vertex(0)
    }

    pub fn last(&self) -> &[f64] {
        self.vertex(self.num_vertices() - 1)
    }

    pub fn is_closed(&self) -> bool {
        self.first() == self.last()
    }

    /// Consecutive vertex pairs.
    pub fn segments(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.coords
            .chunks_exact(self.dim)
            .zip(self.coords.chunks_exact(self.dim).skip(1))
    }

    /// Vertices of a planar path as `[x, y]` pairs.
    pub fn xy(&self) -> Result<Vec<[f64; 2]>> {
        self.require_planar()?;
        Ok(self.coords.chunks_exact(2).map(|p| [p[0], p[1]]).collect())
    }

    pub(crate) fn require_planar(&self) -> Result<()> {
        if self.dim != 2 {
            return Err(SigError::Shape(format!(
                "expected a planar path, got dimension {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Euclidean length.
    pub fn length(&self) -> f64 {
        self.segments()
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (y - x).powi(2)).sum::<f64>().sqrt())
            .sum()
    }

    /// `offset + factor * p`.
    pub fn affine(&self, offset: &[f64], factor: f64) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(SigError::Shape("offset dimension differs from path".into()));
        }
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(offset).map(|(x, o)| o + factor * x))
            .collect();
        Self::new(self.dim, coords)
    }

    /// The same path shifted to start at the origin.
    pub fn anchored(&self) -> Self {
        let first = self.first().to_vec();
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(&first).map(|(x, o)| x - o).collect::<Vec<_>>())
            .collect();
        PolyLine {
            dim: self.dim,
            coords,
        }
    }

    /// Inserts `k - 1` equally spaced points inside every segment.
    pub fn refined(&self, k: usize) -> Self {
        assert!(k >= 1);
        let mut coords = self.first().to_vec();
        for (a, b) in self.segments() {
            for j in 1..=k {
                let t = j as f64 / k as f64;
                if j == k {
                    coords.extend_from_slice(b);
                } else {
                    coords.extend(a.iter().zip(b).map(|(x, y)| x + t * (y - x)));
                }
            }
        }
        PolyLine {
            dim: self.dim,
            coords,
        }
    }

    /// Appends a segment to `target` unless the path already ends there.
    pub fn close_by_chord(&self, target: &[f64]) -> Result<Self> {
        if target.len() != self.dim {
            return Err(SigError::Shape("target dimension differs from path".into()));
        }
        let mut out = self.clone();
        if out.last() != target {
            out.coords.extend_from_slice(target);
        }
        Ok(out)
    }

    /// Appends raw vertices.
    pub fn extended(&self, coords: &[f64]) -> Result<Self> {
        let mut all = self.coords.clone();
        all.extend_from_slice(coords);
        Self::new(self.dim, all)
    }
}

/// `exp` of the level-one tensor holding `increment`.
pub fn segment_signature(increment: &[f64], depth: usize) -> TruncatedTensor {
    let mut t = TruncatedTensor::identity(increment.len(), depth);
    t.mul_exp_vector_in_place(increment);
    t
}

/// Signature by Chen's identity over the segments.
pub fn polyline_signature(p: &PolyLine, depth: usize) -> TruncatedTensor {
    let mut s = TruncatedTensor::identity(p.dim(), depth);
    let mut inc = vec![0.0; p.dim()];
    for (a, b) in p.segments() {
        for ((d, x), y) in inc.iter_mut().zip(a).zip(b) {
            *d = y - x;
        }
        if inc.iter().any(|&d| d != 0.0) {
            s.mul_exp_vector_in_place(&inc);
        }
    }
    s
}

/// Signatures of many paths; results keep the input order.
pub fn batch_signatures(paths: &[PolyLine], depth: usize) -> Vec<TruncatedTensor> {
    paths.par_iter().map(|p| polyline_signature(p, depth)).collect()
}

/// `a ⋆ b`: `b` translated to start at the end of `a`, then appended.
pub fn concatenate(a: &PolyLine, b: &PolyLine) -> Result<PolyLine> {
    if a.dim() != b.dim() {
        return Err(SigError::Shape(format!(
            "cannot concatenate paths of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let shift: Vec<f64> = a.last().iter().zip(b.first()).map(|(x, y)| x - y).collect();
    let mut coords = a.coords.clone();
    for p in b.vertices().skip(1) {
        coords.extend(p.iter().zip(&shift).map(|(x, s)| x + s));
    }
    // Keep closure exact when b returns to its own start.
    if b.is_closed() {
        let n = coords.len();
        coords[n - a.dim()..].copy_from_slice(a.last());
    }
    PolyLine::new(a.dim(), coords)
}

/// Concatenation of a sequence of increments starting at the origin.
pub fn from_increments(dim: usize, increments: &[&[f64]]) -> Result<PolyLine> {
    let mut coords = vec![0.0; dim];
    let mut cur = vec![0.0; dim];
    for inc in increments {
        if inc.len() != dim {
            return Err(SigError::Shape("increment dimension differs".into()));
        }
        for (c, d) in cur.iter_mut().zip(inc.iter()) {
            *c += d;
        }
        coords.extend_from_slice(&cur);
    }
    PolyLine::new(dim, coords)
}

pub fn reverse(p: &PolyLine) -> PolyLine {
    let coords = p
        .coords
        .chunks_exact(p.dim)
        .rev()
        .flatten()
        .copied()
        .collect();
    PolyLine { dim: p.dim, coords }
}

/// Vertices `f(j/m)` for `j = 0..=m`.
pub fn sample_parametric(f: impl Fn(f64) -> [f64; 2], m: usize) -> Result<PolyLine> {
    if m == 0 {
        return Err(SigError::Domain("need at least one segment".into()));
    }
    let pts: Vec<[f64; 2]> = (0..=m).map(|j| f(j as f64 / m as f64)).collect();
    PolyLine::from_xy(&pts)
}

/// A random closed polygon with `3..=max_vertices` distinct corners drawn
/// uniformly from `[-half_width, half_width]^2`.
pub fn random_closed_polygon<R: Rng>(rng: &mut R, max_vertices: usize, half_width: f64) -> PolyLine {
    let n = rng.random_range(3..=max_vertices.max(3));
    let mut pts: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            [
                rng.random_range(-half_width..=half_width),
                rng.random_range(-half_width..=half_width),
            ]
        })
        .collect();
    pts.push(pts[0]);
    PolyLine::from_xy(&pts).expect("finite vertices")
}


/// `count` polygons from [`random_closed_polygon`] on a ChaCha8 stream
/// seeded with `seed`.
pub fn random_polygon_corpus(seed: u64, count: usize, max_vertices: usize, half_width: f64) -> Vec<PolyLine> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_closed_polygon(&mut rng, max_vertices, half_width)).collect()
}

/// Reads a planar path from CSV with header `x,y`.
pub fn read_csv<R: Read>(reader: R) -> Result<PolyLine> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| SigError::Parse {
        row: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(SigError::Parse {
            row: 1,
            message: format!("expected header `x,y`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut coords = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| SigError::Parse {
            row: e.position().map_or(row, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if rec.len() != 2 {
            return Err(SigError::Parse {
                row,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| SigError::Parse {
                row,
                message: format!("invalid number {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(SigError::Parse {
                    row,
                    message: format!("non-finite coordinate {field:?}"),
                });
            }
            coords.push(v);
        }
    }
    if coords.len() < 4 {
        return Err(SigError::Parse {
            row: coords.len() / 2 + 2,
            message: "a path needs at least two vertices".into(),
        });
    }
    PolyLine::new(2, coords)
}

pub fn write_csv<W: Write>(p: &PolyLine, writer: W) -> Result<()> {
    let pts = p.xy()?;
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| SigError::Io(e.to_string());
    w.write_record(["x", "y"]).map_err(io)?;
    for [x, y] in pts {
        w.write_record([x.to_string(), y.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
