//! Winding numbers of closed planar polylines and their polynomial moments.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Result, SigError};
use crate::lyndon::{lie_to_lyndon, lyndon_bracket};
use crate::path::{polyline_signature, PolyLine};
use crate::quadrature::gauss_legendre_unit;
use crate::tensor::{TruncatedTensor, Word};

/// Relative on-curve tolerance, scaled by the bounding-box diagonal.
pub const ON_CURVE_RELATIVE_EPS: f64 = 1e-12;

fn require_closed_planar(p: &PolyLine) -> Result<Vec<[f64; 2]>> {
    let pts = p.xy()?;
    if !p.is_closed() {
        return Err(SigError::Domain("the polyline is not closed".into()));
    }
    Ok(pts)
}

fn bbox(pts: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (lo, hi)
}

fn segment_distance(a: [f64; 2], b: [f64; 2], z: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((z[0] - a[0]) * dx + (z[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    (z[0] - a[0] - t * dx).hypot(z[1] - a[1] - t * dy)
}

/// Signed crossings of the rightward ray from `z`, half-open in `y`.
fn crossing_count(pts: &[[f64; 2]], z: [f64; 2]) -> i64 {
    let mut w = 0;
    for s in pts.windows(2) {
        let (a, b) = (s[0], s[1]);
        let side = (b[0] - a[0]) * (z[1] - a[1]) - (z[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= z[1] && z[1] < b[1] {
            if side > 0.0 {
                w += 1;
            }
        } else if b[1] <= z[1] && z[1] < a[1] && side < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Winding number of the closed polyline `p` around `z`.
pub fn winding_number(p: &PolyLine, z: [f64; 2]) -> Result<i64> {
    let pts = require_closed_planar(p)?;
    let (lo, hi) = bbox(&pts);
    let eps = ON_CURVE_RELATIVE_EPS * (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
    let distance = pts
        .windows(2)
        .map(|s| segment_distance(s[0], s[1], z))
        .fold(f64::INFINITY, f64::min);
    if distance <= eps {
        return Err(SigError::PointOnCurve {
            x: z[0],
            y: z[1],
            distance,
            epsilon: eps,
        });
    }
    Ok(crossing_count(&pts, z))
}

/// `∬ x^n y^k η(p - p_0, (x, y)) dx dy` by Green's theorem.
pub fn moment_exact(p: &PolyLine, n: usize, k: usize) -> Result<f64> {
    let pts = require_closed_planar(&p.anchored())?;
    Ok(moment_of_anchored(&pts, n, k))
}

fn moment_of_anchored(pts: &[[f64; 2]], n: usize, k: usize) -> f64 {
    // ∮ x^{n+1} y^k / (n+1) dy; the integrand has degree n+k+1 along a segment.
    let (t, wt) = gauss_legendre_unit((n + k + 2).div_ceil(2));
    let mut total = 0.0;
    for s in pts.windows(2) {
        let (a, b) = (s[0], s[1]);
        let dy = b[1] - a[1];
        if dy == 0.0 {
            continue;
        }
        let seg: f64 = t
            .iter()
            .zip(&wt)
            .map(|(&u, &w)| {
                let x = a[0] + u * (b[0] - a[0]);
                let y = a[1] + u * dy;
                w * x.powi(n as i32 + 1) * y.powi(k as i32)
            })
            .sum();
        total += seg * dy;
    }
    total / (n + 1) as f64
}

/// Winding moments `M(n, k)` for all `n + k + 2 <= depth`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentTable {
    pub depth: usize,
    #[serde(serialize_with = "serialize_moments")]
    pub values: BTreeMap<(usize, usize), f64>,
}

fn serialize_moments<S: serde::Serializer>(
    m: &BTreeMap<(usize, usize), f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Entry {
        n: usize,
        k: usize,
        value: f64,
    }
    let v: Vec<Entry> = m.iter().map(|(&(n, k), &value)| Entry { n, k, value }).collect();
    v.serialize(s)
}

impl MomentTable {
    pub fn compute(p: &PolyLine, depth: usize) -> Result<Self> {
        let pts = require_closed_planar(&p.anchored())?;
        let mut values = BTreeMap::new();
        for total in 0..=depth.saturating_sub(2) {
            for n in 0..=total {
                values.insert((n, total - n), moment_of_anchored(&pts, n, total - n));
            }
        }
        Ok(MomentTable { depth, values })
    }

    pub fn zeros(depth: usize) -> Self {
        let mut values = BTreeMap::new();
        for total in 0..=depth.saturating_sub(2) {
            for n in 0..=total {
                values.insert((n, total - n), 0.0);
            }
        }
        MomentTable { depth, values }
    }

    pub fn get(&self, n: usize, k: usize) -> Option<f64> {
        self.values.get(&(n, k)).copied()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .map(|(key, v)| match other.values.get(key) {
                Some(w) => (v - w).abs(),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

/// Midpoint-rule estimate of the moment over a `resolution^2` grid on the
/// bounding box, ignoring cells whose centre is on the curve.
pub fn moment_grid(p: &PolyLine, n: usize, k: usize, resolution: usize) -> Result<f64> {
    if resolution < 16 {
        return Err(SigError::Domain("grid resolution must be at least 16".into()));
    }
    let q = p.anchored();
    let pts = require_closed_planar(&q)?;
    let (lo, hi) = bbox(&pts);
    let (hx, hy) = ((hi[0] - lo[0]) / resolution as f64, (hi[1] - lo[1]) / resolution as f64);
    if hx == 0.0 || hy == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..resolution {
        let y = lo[1] + (i as f64 + 0.5) * hy;
        let mut row = 0.0;
        for j in 0..resolution {
            let x = lo[0] + (j as f64 + 0.5) * hx;
            match winding_number(&q, [x, y]) {
                Ok(w) if w != 0 => row += w as f64 * x.powi(n as i32) * y.powi(k as i32),
                _ => {}
            }
        }
        total += row;
    }
    Ok(total * hx * hy)
}

/// `(-1)^k / (n! k!)`.
pub fn moment_weight(n: usize, k: usize) -> f64 {
    let fact = |m: usize| (1..=m).map(|i| i as f64).product::<f64>();
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / (fact(n) * fact(k))
}

/// One row of [`Theorem1Report`].
#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Row {
    pub word: String,
    pub n: usize,
    pub k: usize,
    pub lyndon: f64,
    pub word_coefficient: f64,
    pub weighted_moment: f64,
    pub max_abs_error: f64,
}

/// Three-way comparison of the Lyndon coordinate at `1^{n+1} 2^{k+1}`, the
/// signature coefficient at that word, and the weighted winding moment.
#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    pub level: usize,
    pub max_abs_error: f64,
    /// Largest gap between the two algebraic routes only.
    pub algebraic_max_abs_error: f64,
    pub per_word_table: Vec<Theorem1Row>,
}

pub fn verify_theorem1(p: &PolyLine, depth: usize) -> Result<Theorem1Report> {
    if depth < 2 {
        return Err(SigError::Domain("level must be at least 2".into()));
    }
    let moments = MomentTable::compute(p, depth)?;
    let sig = polyline_signature(p, depth);
    let lyn = lie_to_lyndon(&sig.log()?)?;
    let mut rows = Vec::new();
    for (&(n, k), &m) in &moments.values {
        let word = Word::power_pair(1, n + 1, 2, k + 1);
        let a = lyn.get(&word).expect("1^a 2^b is Lyndon");
        let b = sig.word_coefficient(&word)?;
        let c = moment_weight(n, k) * m;
        rows.push(Theorem1Row {
            word: word.to_string(),
            n,
            k,
            lyndon: a,
            word_coefficient: b,
            weighted_moment: c,
            max_abs_error: (a - b).abs().max((a - c).abs()).max((b - c).abs()),
        });
    }
    Ok(Theorem1Report {
        level: depth,
        max_abs_error: rows.iter().map(|r| r.max_abs_error).fold(0.0, f64::max),
        algebraic_max_abs_error: rows
            .iter()
            .map(|r| (r.lyndon - r.word_coefficient).abs())
            .fold(0.0, f64::max),
        per_word_table: rows,
    })
}

/// The level-two-to-four log-signature rebuilt from the six moments with
/// `n + k <= 2`.
pub fn fourth_level_from_winding(m: &MomentTable) -> Result<TruncatedTensor> {
    let mut out = TruncatedTensor::zeros(2, 4);
    for n in 0..=2usize {
        for k in 0..=2 - n {
            let v = m.get(n, k).ok_or_else(|| {
                SigError::Domain(format!("moment table lacks entry ({n}, {k})"))
            })?;
            let word = Word::power_pair(1, n + 1, 2, k + 1);
            let bracket = lyndon_bracket(&word, 2, 4)?;
            out = TruncatedTensor::linear_combine(1.0, &out, moment_weight(n, k) * v, &bracket)?;
        }
    }
    Ok(out)
}

/// Two unit-step closed curves with identical winding functions whose
/// signatures differ at word `12121`.
pub fn sharpness_pair() -> (PolyLine, PolyLine) {
    let gamma = PolyLine::from_xy(&[
        [0.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
        [0.0, 0.0],
        [-1.0, 0.0],
        [-1.0, -1.0],
        [0.0, -1.0],
        [0.0, 0.0],
    ])
    .expect("static vertices");
    let gamma_tilde = PolyLine::from_xy(&[
        [0.0, 0.0],
        [-1.0, 0.0],
        [-1.0, -1.0],
        [0.0, -1.0],
        [0.0, 0.0],
        [1.0, 0.0],
        [1.0, 1.0],
        [0.0, 1.0],
        [0.0, 0.0],
    ])
    .expect("static vertices");
    (gamma, gamma_tilde)
}

/// `‖η(p, ·)‖_{L²}` integrated exactly along `resolution` horizontal
/// scanlines and by the midpoint rule across them.
pub fn lsq_winding_norm(p: &PolyLine, resolution: usize) -> Result<f64> {
    if resolution == 0 {
        return Err(SigError::Domain("resolution must be positive".into()));
    }
    let pts = require_closed_planar(p)?;
    let (lo, hi) = bbox(&pts);
    let h = (hi[1] - lo[1]) / resolution as f64;
    if h == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut hits: Vec<(f64, i64)> = Vec::new();
    for i in 0..resolution {
        let y = lo[1] + (i as f64 + 0.5) * h;
        hits.clear();
        for s in pts.windows(2) {
            let (a, b) = (s[0], s[1]);
            let sign = if a[1] <= y && y < b[1] {
                1
            } else if b[1] <= y && y < a[1] {
                -1
            } else {
                continue;
            };
            let x = a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            hits.push((x, sign));
        }
        hits.sort_by(|u, v| u.0.total_cmp(&v.0));
        // Left of every crossing the winding number is the total, i.e. 0.
        let mut w: i64 = hits.iter().map(|h| h.1).sum();
        let mut row = 0.0;
        for pair in hits.windows(2) {
            w -= pair[0].1;
            row += (w * w) as f64 * (pair[1].0 - pair[0].0);
        }
        total += row;
    }
    Ok((total * h).sqrt())
}

/// Isoperimetric comparison `4π‖η‖² <= length²`.
#[derive(Clone, Debug, Serialize)]
pub struct IsoperimetricReport {
    pub norm_squared: f64,
    pub length: f64,
    /// `4π‖η‖² / length²`; at most one up to the grid slack.
    pub ratio: f64,
    pub slack: f64,
    pub holds: bool,
}

pub fn isoperimetric_check(p: &PolyLine, resolution: usize, slack: f64) -> Result<IsoperimetricReport> {
    let norm = lsq_winding_norm(p, resolution)?;
    let length = p.length();
    let norm_squared = norm * norm;
    let lhs = 4.0 * std::f64::consts::PI * norm_squared;
    let ratio = if length > 0.0 { lhs / (length * length) } else { 0.0 };
    Ok(IsoperimetricReport {
        norm_squared,
        length,
        ratio,
        slack,
        holds: lhs <= (1.0 + slack) * length * length,
    })
}
