//! Lyndon words, their bracket elements `P_w`, triangular extraction of
//! Lyndon-basis coordinates, and shuffle products.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Serialize, Serializer};

use crate::error::{Result, SigError};
use crate::tensor::{TruncatedTensor, Word};

/// Default residual tolerance for [`lie_to_lyndon`].
pub const DEFAULT_LIE_TOLERANCE: f64 = 1e-9;

/// `u < v` in the lexicographic order with proper prefixes smaller.
pub fn word_less(u: &Word, v: &Word) -> bool {
    u < v
}

/// A nonempty word is Lyndon iff it is strictly smaller than each of its
/// proper nonempty suffixes.
pub fn is_lyndon(w: &Word) -> Result<bool> {
    if w.is_empty() {
        return Err(SigError::Domain("the empty word is not Lyndon".into()));
    }
    let l = w.letters();
    Ok((1..l.len()).all(|i| l < &l[i..]))
}

/// All Lyndon words over `1..=d` of degree at most `max_degree`, increasing.
pub fn lyndon_words(d: usize, max_degree: usize) -> Vec<Word> {
    if d == 0 || max_degree == 0 {
        return Vec::new();
    }
    // Duval's generation: successor of w is obtained by repeating w to
    // length n, dropping trailing maximal letters and bumping the last.
    let top = d as u8;
    let mut out = Vec::new();
    let mut w: Vec<u8> = vec![1];
    loop {
        out.push(Word::new(w.clone()).expect("letters >= 1"));
        let m = w.len();
        while w.len() < max_degree {
            let c = w[w.len() - m];
            w.push(c);
        }
        while w.last() == Some(&top) {
            w.pop();
        }
        match w.last_mut() {
            Some(last) => *last += 1,
            None => break,
        }
    }
    out.sort();
    out
}

/// The split `w = u v` with `v` the smallest Lyndon proper suffix.
pub fn standard_factorization(w: &Word) -> Result<(Word, Word)> {
    if !is_lyndon(w)? || w.degree() < 2 {
        return Err(SigError::Domain(format!(
            "standard factorization needs a Lyndon word of degree >= 2, got {w}"
        )));
    }
    let l = w.letters();
    let (split, _) = (1..l.len())
        .map(|i| (i, &l[i..]))
        .filter(|(_, v)| is_lyndon(&Word::new(v.to_vec()).expect("valid")).unwrap_or(false))
        .min_by(|a, b| a.1.cmp(b.1))
        .expect("a Lyndon word of degree >= 2 has a Lyndon proper suffix");
    Ok((
        Word::new(l[..split].to_vec())?,
        Word::new(l[split..].to_vec())?,
    ))
}

/// Homogeneous integer polynomial in words.
type Poly = BTreeMap<Word, i64>;

fn poly_commutator(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (u, &x) in a {
        for (v, &y) in b {
            *out.entry(u.concat(v)).or_insert(0) += x * y;
            *out.entry(v.concat(u)).or_insert(0) -= x * y;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

fn bracket_poly(w: &Word, cache: &mut HashMap<Word, Poly>) -> Result<Poly> {
    if let Some(p) = cache.get(w) {
        return Ok(p.clone());
    }
    let p = if w.degree() == 1 {
        Poly::from([(w.clone(), 1)])
    } else {
        let (u, v) = standard_factorization(w)?;
        let pu = bracket_poly(&u, cache)?;
        let pv = bracket_poly(&v, cache)?;
        poly_commutator(&pu, &pv)
    };
    cache.insert(w.clone(), p.clone());
    Ok(p)
}

/// Integer word expansion of `P_w` (sorted by word).
pub fn lyndon_bracket_expansion(w: &Word) -> Result<Vec<(Word, i64)>> {
    if !is_lyndon(w)? {
        return Err(SigError::Domain(format!("{w} is not a Lyndon word")));
    }
    let p = bracket_poly(w, &mut HashMap::new())?;
    Ok(p.into_iter().collect())
}

/// `P_w` as a tensor in `T^depth(R^d)` with `d` the largest letter of `w`
/// unless `dim` is larger.
pub fn lyndon_bracket(w: &Word, dim: usize, depth: usize) -> Result<TruncatedTensor> {
    if w.degree() > depth {
        return Err(SigError::Range(format!(
            "word {w} has degree above truncation level {depth}"
        )));
    }
    let mut t = TruncatedTensor::zeros(dim.max(w.max_letter() as usize), depth);
    for (word, c) in lyndon_bracket_expansion(w)? {
        t.set(&word, c as f64)?;
    }
    Ok(t)
}

type BasisCache = HashMap<(usize, usize), Arc<LyndonBasis>>;

/// Lyndon words of `(d, N)` together with their sparse bracket expansions.
#[derive(Debug)]
pub struct LyndonBasis {
    dim: usize,
    depth: usize,
    /// Words sorted by degree, then lexicographically.
    words: Vec<Word>,
    /// Expansion of each word as (level index, integer coefficient).
    expansions: Vec<Vec<(usize, i64)>>,
}

impl LyndonBasis {
    pub fn new(dim: usize, depth: usize) -> Self {
        let mut words = lyndon_words(dim, depth);
        words.sort_by(|a, b| a.degree().cmp(&b.degree()).then_with(|| a.cmp(b)));
        let mut cache = HashMap::new();
        let expansions = words
            .iter()
            .map(|w| {
                bracket_poly(w, &mut cache)
                    .expect("enumerated words are Lyndon")
                    .into_iter()
                    .map(|(u, c)| (u.index(dim), c))
                    .collect()
            })
            .collect();
        LyndonBasis {
            dim,
            depth,
            words,
            expansions,
        }
    }

    /// Process-wide memoized basis. Concurrent fills build identical values.
    pub fn shared(dim: usize, depth: usize) -> Arc<LyndonBasis> {
        static CACHE: OnceLock<Mutex<BasisCache>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(b) = cache.lock().expect("cache lock").get(&(dim, depth)) {
            return Arc::clone(b);
        }
        let built = Arc::new(LyndonBasis::new(dim, depth));
        let mut guard = cache.lock().expect("cache lock");
        Arc::clone(guard.entry((dim, depth)).or_insert(built))
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Triangular sweep: per degree, in increasing word order, read the
    /// residual at `w` and subtract that multiple of `P_w`.
    pub fn extract(&self, t: &TruncatedTensor, tolerance: f64) -> Result<LyndonExpansion> {
        if t.dim() != self.dim || t.depth() != self.depth {
            return Err(SigError::Shape(format!(
                "basis is (d={}, N={}), tensor is (d={}, N={})",
                self.dim,
                self.depth,
                t.dim(),
                t.depth()
            )));
        }
        if t.scalar() != 0.0 {
            return Err(SigError::Domain(
                "Lie elements have zero scalar part".into(),
            ));
        }
        let mut residual = t.clone();
        let mut coords = BTreeMap::new();
        for (w, expansion) in self.words.iter().zip(&self.expansions) {
            let level = residual.level_mut(w.degree());
            let c = level[w.index(self.dim)];
            if c != 0.0 {
                for &(idx, k) in expansion {
                    level[idx] -= c * k as f64;
                }
            }
            coords.insert(w.clone(), c);
        }
        let norm = residual.max_abs();
        if norm > tolerance {
            return Err(SigError::NotLie {
                residual: norm,
                tolerance,
            });
        }
        Ok(LyndonExpansion {
            dim: self.dim,
            depth: self.depth,
            coords,
            residual: norm,
        })
    }

    /// `Σ c_w P_w` as a tensor.
    pub fn assemble(&self, coords: &BTreeMap<Word, f64>) -> Result<TruncatedTensor> {
        let mut t = TruncatedTensor::zeros(self.dim, self.depth);
        for (w, expansion) in self.words.iter().zip(&self.expansions) {
            let Some(&c) = coords.get(w) else { continue };
            let level = t.level_mut(w.degree());
            for &(idx, k) in expansion {
                level[idx] += c * k as f64;
            }
        }
        Ok(t)
    }
}

/// Coordinates of a Lie element in the Lyndon basis.
#[derive(Clone, Debug, PartialEq)]
pub struct LyndonExpansion {
    pub dim: usize,
    pub depth: usize,
    pub coords: BTreeMap<Word, f64>,
    /// Max-abs residual left after the sweep.
    pub residual: f64,
}

impl LyndonExpansion {
    pub fn get(&self, w: &Word) -> Option<f64> {
        self.coords.get(w).copied()
    }
}

impl Serialize for LyndonExpansion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m: BTreeMap<String, f64> = self
            .coords
            .iter()
            .map(|(w, c)| (w.to_string(), *c))
            .collect();
        m.serialize(s)
    }
}

/// Lyndon coordinates of `t` with the default tolerance.
pub fn lie_to_lyndon(t: &TruncatedTensor) -> Result<LyndonExpansion> {
    lie_to_lyndon_with_tolerance(t, DEFAULT_LIE_TOLERANCE)
}

pub fn lie_to_lyndon_with_tolerance(t: &TruncatedTensor, tolerance: f64) -> Result<LyndonExpansion> {
    LyndonBasis::shared(t.dim(), t.depth()).extract(t, tolerance)
}

/// The shuffle product `u ⧢ v` as word multiplicities.
pub fn shuffle(u: &Word, v: &Word) -> BTreeMap<Word, u64> {
    fn go(a: &[u8], b: &[u8], prefix: &mut Vec<u8>, out: &mut BTreeMap<Word, u64>) {
        if a.is_empty() || b.is_empty() {
            let mut w = prefix.clone();
            w.extend_from_slice(a);
            w.extend_from_slice(b);
            *out.entry(Word::new(w).expect("letters >= 1")).or_insert(0) += 1;
            return;
        }
        prefix.push(a[0]);
        go(&a[1..], b, prefix, out);
        prefix.pop();
        prefix.push(b[0]);
        go(a, &b[1..], prefix, out);
        prefix.pop();
    }
    let mut out = BTreeMap::new();
    go(u.letters(), v.letters(), &mut Vec::new(), &mut out);
    out
}

/// Shuffle of several words, folded left to right.
pub fn shuffle_many(words: &[Word]) -> BTreeMap<Word, u64> {
    let mut acc = BTreeMap::from([(Word::empty(), 1u64)]);
    for w in words {
        let mut next = BTreeMap::new();
        for (u, &m) in &acc {
            for (s, k) in shuffle(u, w) {
                *next.entry(s).or_insert(0) += m * k;
            }
        }
        acc = next;
    }
    acc
}

/// Applies a word-multiplicity functional to a tensor.
pub fn apply_functional(t: &TruncatedTensor, f: &BTreeMap<Word, u64>) -> Result<f64> {
    f.iter()
        .map(|(w, &m)| t.word_coefficient(w).map(|c| c * m as f64))
        .sum()
}
