//! Chordal SLE traces by discretised Loewner evolution, transport to the
//! disc `½(1+D)`, closed loops, Monte Carlo expected signatures, and the
//! level-four assembly for κ = 8/3.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SigError};
use crate::lyndon::lyndon_bracket;
use crate::path::{polyline_signature, segment_signature, PolyLine};
use crate::tensor::{TruncatedTensor, Word};
use crate::winding::{fourth_level_from_winding, MomentTable};

/// Parameters of a Monte Carlo run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SleConfig {
    pub kappa: f64,
    pub steps: usize,
    /// Capacity time at which the trace is stopped.
    pub horizon: f64,
    pub samples: usize,
    pub seed: u64,
    pub level: usize,
    pub arc_points: usize,
}

impl Default for SleConfig {
    fn default() -> Self {
        SleConfig {
            kappa: 8.0 / 3.0,
            steps: 20_000,
            horizon: 16.0,
            samples: 1000,
            seed: 0,
            level: 4,
            arc_points: 512,
        }
    }
}

impl SleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=4.0).contains(&self.kappa) {
            return Err(SigError::Domain(format!(
                "kappa must lie in [0, 4], got {}",
                self.kappa
            )));
        }
        if self.steps == 0 || self.samples == 0 || self.arc_points == 0 {
            return Err(SigError::Domain("steps, samples and arc_points must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SigError::Domain("horizon must be positive and finite".into()));
        }
        if self.level == 0 || self.level > 8 {
            return Err(SigError::Domain("level must be in 1..=8".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

/// Driver values `W_0 = 0, W_1, …, W_steps` with independent `N(0, κΔ)`
/// increments drawn from the stream `(seed, sample_index)`.
pub fn sample_driver(cfg: &SleConfig, sample_index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(sample_index);
    let scale = (cfg.kappa * cfg.dt()).sqrt();
    let mut w = Vec::with_capacity(cfg.steps + 1);
    let mut cur = 0.0;
    w.push(cur);
    for _ in 0..cfg.steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        cur += scale * z;
        w.push(cur);
    }
    w
}

/// `u + sqrt((z - u)^2 - 4Δ)` on the branch with nonnegative imaginary part;
/// real inputs keep the sign of `z - u`.
#[inline(always)]
fn slit_inverse(re: f64, im: f64, u: f64, four_dt: f64) -> (f64, f64) {
    let x = re - u;
    let a = x * x - im * im - four_dt;
    let b = 2.0 * x * im;
    let r = (a * a + b * b).sqrt();
    let t = (0.5 * (r + a.abs())).sqrt();
    let q = b / (2.0 * t);
    if a >= 0.0 {
        (u + t.copysign(b), q.abs())
    } else {
        (u + q, t)
    }
}

const LANES: usize = 8;

/// Trace points `γ(t_n) = φ_1 ∘ … ∘ φ_{n-1}(U_n + 2i√Δ)` for
/// `n = 1..len(driver)-1` with `U_i = W_{i-1}`, preceded by the origin.
///
/// Points are pushed through the shared tail of maps in blocks so that
/// independent evaluations overlap; each point sees the same operations in
/// the same order as a one-at-a-time evaluation.
pub fn loewner_trace(driver: &[f64], dt: f64) -> Result<PolyLine> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(SigError::Domain("time step must be positive".into()));
    }
    if driver.len() < 2 {
        return Err(SigError::Domain("driver needs at least two values".into()));
    }
    let steps = driver.len() - 1;
    let four_dt = 4.0 * dt;
    let tip = 2.0 * dt.sqrt();
    // u[i] = U_i for i = 1..=steps.
    let u = |i: usize| driver[i - 1];
    let mut coords = Vec::with_capacity(2 * (steps + 1));
    coords.extend_from_slice(&[0.0, 0.0]);
    let mut start = 1;
    while start <= steps {
        let lanes = LANES.min(steps + 1 - start);
        let mut re = [0.0f64; LANES];
        let mut im = [1.0f64; LANES];
        for l in 0..lanes {
            let n = start + l;
            let (mut zr, mut zi) = (u(n), tip);
            for i in (start..n).rev() {
                (zr, zi) = slit_inverse(zr, zi, u(i), four_dt);
            }
            re[l] = zr;
            im[l] = zi;
        }
        for i in (1..start).rev() {
            let ui = u(i);
            for l in 0..LANES {
                (re[l], im[l]) = slit_inverse(re[l], im[l], ui, four_dt);
            }
        }
        for l in 0..lanes {
            if !(re[l].is_finite() && im[l].is_finite()) {
                return Err(SigError::NumericalInstability {
                    step: start + l,
                    detail: format!("trace point ({}, {}) is not finite", re[l], im[l]),
                });
            }
            coords.extend_from_slice(&[re[l], im[l]]);
        }
        start += lanes;
    }
    PolyLine::new(2, coords)
}

/// Vertexwise image under `w ↦ w / (w + i)`.
pub fn map_to_disc(p: &PolyLine) -> Result<PolyLine> {
    let pts = p.xy()?;
    let mut out = Vec::with_capacity(pts.len() * 2);
    for [x, y] in pts {
        if y < 0.0 {
            return Err(SigError::Domain(format!("vertex ({x}, {y}) is below the real axis")));
        }
        let d = x * x + (y + 1.0) * (y + 1.0);
        if d == 0.0 {
            return Err(SigError::Pole("vertex at -i".into()));
        }
        out.push((x * x + y * y + y) / d);
        out.push(-x / d);
    }
    PolyLine::new(2, out)
}

/// Joins the endpoint of `p` to `1` and returns along the upper half of
/// the circle `|z - ½| = ½` to `0` through `arc_points` vertices.
pub fn close_curve_phi(p: &PolyLine, arc_points: usize) -> Result<PolyLine> {
    p.require_planar()?;
    if p.first() != [0.0, 0.0] {
        return Err(SigError::Domain("the curve must start at the origin".into()));
    }
    if arc_points == 0 {
        return Err(SigError::Domain("arc_points must be positive".into()));
    }
    let with_chord = p.close_by_chord(&[1.0, 0.0])?;
    let mut arc = Vec::with_capacity(2 * arc_points);
    for j in 1..arc_points {
        let theta = PI * j as f64 / arc_points as f64;
        arc.push(0.5 + 0.5 * theta.cos());
        arc.push(0.5 * theta.sin());
    }
    arc.extend_from_slice(&[0.0, 0.0]);
    with_chord.extended(&arc)
}

/// The closed loop for sample `index`.
pub fn sample_loop(cfg: &SleConfig, index: u64) -> Result<PolyLine> {
    let driver = sample_driver(cfg, index);
    let trace = loewner_trace(&driver, cfg.dt())?;
    close_curve_phi(&map_to_disc(&trace)?, cfg.arc_points)
}

/// Per-word sample mean and standard error of loop signatures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub config: SleConfig,
    pub samples_used: usize,
    pub failures: usize,
    pub mean: TruncatedTensor,
    pub std_error: TruncatedTensor,
}

impl McEstimate {
    /// Mean and standard error at `word`.
    pub fn word(&self, word: &Word) -> Result<(f64, f64)> {
        Ok((self.mean.word_coefficient(word)?, self.std_error.word_coefficient(word)?))
    }

    /// Mean and standard error of `Σ c_w S^w`, bounding the error of the
    /// combination by `Σ |c_w| SE_w`.
    pub fn linear(&self, terms: &[(Word, f64)]) -> Result<(f64, f64)> {
        let mut m = 0.0;
        let mut s = 0.0;
        for (w, c) in terms {
            let (mw, sw) = self.word(w)?;
            m += c * mw;
            s += c.abs() * sw;
        }
        Ok((m, s))
    }
}

/// Mean and standard error over samples listed in index order.
pub fn reduce_samples(
    config: &SleConfig,
    samples: &[TruncatedTensor],
    failures: usize,
) -> Result<McEstimate> {
    let dim = 2;
    let depth = config.level;
    let mut mean = TruncatedTensor::zeros(dim, depth);
    let mut std_error = TruncatedTensor::zeros(dim, depth);
    let n = samples.len();
    if n > 0 {
        for s in samples {
            mean = TruncatedTensor::linear_combine(1.0, &mean, 1.0, s)?;
        }
        mean = mean.scaled(1.0 / n as f64);
        if n > 1 {
            for k in 0..=depth {
                let m = mean.level(k).to_vec();
                let out = std_error.level_mut(k);
                for s in samples {
                    for ((o, x), mu) in out.iter_mut().zip(s.level(k)).zip(&m) {
                        *o += (x - mu) * (x - mu);
                    }
                }
                for o in out.iter_mut() {
                    *o = (*o / (n as f64 - 1.0) / n as f64).sqrt();
                }
            }
        }
    }
    Ok(McEstimate {
        config: config.clone(),
        samples_used: n,
        failures,
        mean,
        std_error,
    })
}

/// Monte Carlo expected loop signature.
pub fn mc_expected_signature(cfg: &SleConfig) -> Result<McEstimate> {
    mc_expected_signature_keeping(cfg, 0).map(|(e, _)| e)
}

/// As [`mc_expected_signature`], also returning the loops of the first
/// `keep` samples (failed samples are skipped).
pub fn mc_expected_signature_keeping(
    cfg: &SleConfig,
    keep: usize,
) -> Result<(McEstimate, Vec<PolyLine>)> {
    cfg.validate()?;
    let results: Vec<Result<(TruncatedTensor, Option<PolyLine>)>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let lp = sample_loop(cfg, i as u64)?;
            let sig = polyline_signature(&lp, cfg.level);
            Ok((sig, (i < keep).then_some(lp)))
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_err()).count();
    if failures * 100 > cfg.samples {
        return Err(SigError::TooManyFailures {
            failed: failures,
            total: cfg.samples,
        });
    }
    let mut sigs = Vec::with_capacity(cfg.samples - failures);
    let mut loops = Vec::new();
    for (sig, lp) in results.into_iter().flatten() {
        sigs.push(sig);
        loops.extend(lp);
    }
    Ok((reduce_samples(cfg, &sigs, failures)?, loops))
}

fn bracket(a: &TruncatedTensor, b: &TruncatedTensor) -> TruncatedTensor {
    a.commutator(b).expect("same shape")
}

/// Closed form of the level-four signature of the loop made of the arc
/// `½(-cos t, sin t)`, `t ∈ [0, π]`, and the segment back to `(-½, 0)`.
pub fn semicircle_signature(depth: usize) -> Result<TruncatedTensor> {
    if depth > 4 {
        return Err(SigError::Range(format!(
            "closed form known through level 4, asked for {depth}"
        )));
    }
    let e1 = TruncatedTensor::letter(2, 4, 1);
    let e2 = TruncatedTensor::letter(2, 4, 2);
    let b12 = bracket(&e1, &e2);
    let terms: [(f64, TruncatedTensor); 8] = [
        (1.0, TruncatedTensor::identity(2, 4)),
        (-PI / 8.0, b12.clone()),
        (-1.0 / 12.0, bracket(&e2, &b12)),
        (-PI / 16.0, bracket(&e1, &b12)),
        (-5.0 * PI / 256.0, bracket(&e1, &bracket(&e1, &b12))),
        (-PI / 256.0, bracket(&bracket(&b12, &e2), &e2)),
        (PI * PI / 128.0, &b12 * &b12),
        (-1.0 / 24.0, bracket(&e1, &bracket(&e2, &b12))),
    ];
    let mut out = TruncatedTensor::zeros(2, 4);
    for (c, t) in &terms {
        out = TruncatedTensor::linear_combine(1.0, &out, *c, t)?;
    }
    Ok(out.truncated(depth))
}

/// Polygonal version of the semicircle loop with `m` arc segments.
pub fn semicircle_loop(m: usize) -> Result<PolyLine> {
    if m == 0 {
        return Err(SigError::Domain("need at least one arc segment".into()));
    }
    let mut pts: Vec<[f64; 2]> = (0..=m)
        .map(|j| {
            let t = PI * j as f64 / m as f64;
            [-0.5 * t.cos(), 0.5 * t.sin()]
        })
        .collect();
    pts[0] = [-0.5, 0.0];
    pts[m] = [0.5, 0.0];
    pts.push([-0.5, 0.0]);
    PolyLine::from_xy(&pts)
}

/// One-point moments for κ = 8/3 in `½(1+D)`, given the Catalan constant.
pub fn one_point_moments(catalan: f64, free: [f64; 3]) -> MomentTable {
    let mut t = MomentTable::zeros(4);
    let [m10, m20, m02] = free;
    t.values.insert((0, 0), PI / 8.0);
    t.values.insert((0, 1), (1.5 - catalan) / 8.0);
    t.values.insert((1, 1), (3.0 - 2.0 * catalan) / 32.0);
    t.values.insert((1, 0), m10);
    t.values.insert((2, 0), m20);
    t.values.insert((0, 2), m02);
    t
}

/// `1 + Σ moments · brackets + ½ A [e1,e2]⊗[e1,e2]`, the level-four
/// expected loop signature in terms of one- and two-point integrals.
pub fn expected_loop_signature(moments: &MomentTable, a: f64) -> Result<TruncatedTensor> {
    let lie = fourth_level_from_winding(moments)?;
    let b12 = lyndon_bracket(&Word::parse("12")?, 2, 4)?;
    let one = TruncatedTensor::identity(2, 4);
    let sum = TruncatedTensor::linear_combine(1.0, &one, 1.0, &lie)?;
    TruncatedTensor::linear_combine(1.0, &sum, 0.5 * a, &(&b12 * &b12))
}

/// Expected signature of the SLE_{8/3} curve from 0 to 1 in `½(1+D)`
/// through level four: loop expectation, then the semicircle loop, then `e1`.
pub fn theorem6_assemble(catalan: f64, a: f64, free_moments: [f64; 3]) -> Result<TruncatedTensor> {
    let lp = expected_loop_signature(&one_point_moments(catalan, free_moments), a)?;
    let tail = &semicircle_signature(4)? * &segment_signature(&[1.0, 0.0], 4);
    lp.try_mul(&tail)
}

/// Reference closed form of the level-four term:
/// `e1⊗⁴/4! − (5/96 − K/16)[e1,[[e1,e2],e2]] − (1/8)(5/6 − K)[[e1,e2],e2]⊗e1
/// + (π²/128 + A/2)[e1,e2]⊗[e1,e2]`.
pub fn theorem6_display(catalan: f64, a: f64) -> Result<TruncatedTensor> {
    let e1 = TruncatedTensor::letter(2, 4, 1);
    let e2 = TruncatedTensor::letter(2, 4, 2);
    let b12 = bracket(&e1, &e2);
    let b122 = bracket(&b12, &e2);
    let e1111 = TruncatedTensor::monomial(2, 4, &Word::parse("1111")?, 1.0 / 24.0);
    let terms: [(f64, TruncatedTensor); 4] = [
        (1.0, e1111),
        (-(5.0 / 96.0 - catalan / 16.0), bracket(&e1, &b122)),
        (-(5.0 / 6.0 - catalan) / 8.0, &b122 * &e1),
        (PI * PI / 128.0 + a / 2.0, &b12 * &b12),
    ];
    let mut out = TruncatedTensor::zeros(2, 4);
    for (c, t) in &terms {
        out = TruncatedTensor::linear_combine(1.0, &out, *c, t)?;
    }
    Ok(out)
}

/// Keeps words with an even number of letter 2.
pub fn even_two_projection(t: &TruncatedTensor) -> TruncatedTensor {
    t.filter_words(|w| w.count(2) % 2 == 0)
}

#[derive(Clone, Debug, Serialize)]
pub struct WordComparison {
    pub word: String,
    pub assembled: f64,
    pub display: f64,
    pub difference: f64,
}

/// Level-four comparison of [`theorem6_assemble`] against
/// [`theorem6_display`] on words with an even number of 2s.
#[derive(Clone, Debug, Serialize)]
pub struct Theorem6Report {
    pub catalan: f64,
    pub a: f64,
    /// Largest change of the even projection when the free moments move.
    pub free_moment_sensitivity: f64,
    pub max_abs_difference: f64,
    pub words: Vec<WordComparison>,
}

pub fn theorem6_check(catalan: f64, a: f64) -> Result<Theorem6Report> {
    let base = even_two_projection(&theorem6_assemble(catalan, a, [0.0, 0.0, 0.0])?);
    let moved = even_two_projection(&theorem6_assemble(catalan, a, [7.0, -3.0, 11.0])?);
    let display = theorem6_display(catalan, a)?;
    let level4 = base.homogeneous_part(4);
    let mut words = Vec::new();
    let mut max_abs_difference: f64 = 0.0;
    for (w, x) in level4.iter_words().filter(|(w, _)| w.degree() == 4 && w.count(2) % 2 == 0) {
        let y = display.coeff(&w);
        max_abs_difference = max_abs_difference.max((x - y).abs());
        words.push(WordComparison {
            word: w.to_string(),
            assembled: x,
            display: y,
            difference: x - y,
        });
    }
    Ok(Theorem6Report {
        catalan,
        a,
        free_moment_sensitivity: base.max_abs_diff(&moved)?,
        max_abs_difference,
        words,
    })
}

/// Word coefficients of `t` as a digit-keyed map.
pub fn word_table(t: &TruncatedTensor) -> BTreeMap<String, f64> {
    t.iter_words().map(|(w, c)| (w.to_string(), c)).collect()
}
