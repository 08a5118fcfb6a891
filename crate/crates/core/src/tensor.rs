//! Truncated tensor algebra `T^N(R^d)`.
//!
//! Coefficients are stored densely, one array per level. Level `k` holds
//! `d^k` entries indexed by the base-`d` encoding of a word, first letter
//! most significant. Letters are `1..=d`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SigError};

/// A finite sequence of letters in `1..=d`.
///
/// The derived ordering is the lexicographic order used for Lyndon words:
/// a proper prefix is smaller, otherwise the first differing letter decides.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(letters: Vec<u8>) -> Result<Self> {
        if letters.contains(&0) {
            return Err(SigError::Domain("letters start at 1".into()));
        }
        Ok(Word(letters))
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(l: u8) -> Self {
        assert!(l >= 1, "letters start at 1");
        Word(vec![l])
    }

    /// `a` repeated `n` times followed by `b` repeated `k` times.
    pub fn power_pair(a: u8, n: usize, b: u8, k: usize) -> Self {
        let mut v = vec![a; n];
        v.extend(std::iter::repeat_n(b, k));
        Word(v)
    }

    /// Parses a digit string such as `"1122"`; the empty string is the empty word.
    pub fn parse(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c.to_digit(10) {
                Some(v) if v >= 1 => Ok(v as u8),
                _ => Err(SigError::Domain(format!("invalid letter {c:?} in word {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Word(letters))
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_letter(&self) -> u8 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Number of occurrences of `letter`.
    pub fn count(&self, letter: u8) -> usize {
        self.0.iter().filter(|&&l| l == letter).count()
    }

    /// Position of the word inside its level array.
    pub fn index(&self, dim: usize) -> usize {
        self.0
            .iter()
            .fold(0usize, |acc, &l| acc * dim + (l as usize - 1))
    }

    /// Inverse of [`Word::index`].
    pub fn from_index(mut index: usize, degree: usize, dim: usize) -> Word {
        let mut v = vec![0u8; degree];
        for slot in v.iter_mut().rev() {
            *slot = (index % dim) as u8 + 1;
            index /= dim;
        }
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Word {
    type Err = SigError;
    fn from_str(s: &str) -> Result<Self> {
        Word::parse(s)
    }
}

/// An element of `T^N(R^d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TensorJson", try_from = "TensorJson")]
pub struct TruncatedTensor {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedTensor {
    pub fn zeros(dim: usize, depth: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        let levels = (0..=depth).map(|k| vec![0.0; dim.pow(k as u32)]).collect();
        TruncatedTensor { dim, depth, levels }
    }

    /// The unit `1` of the algebra.
    pub fn identity(dim: usize, depth: usize) -> Self {
        let mut t = Self::zeros(dim, depth);
        t.levels[0][0] = 1.0;
        t
    }

    /// The degree-one tensor holding `v`.
    pub fn from_vector(depth: usize, v: &[f64]) -> Self {
        let mut t = Self::zeros(v.len(), depth);
        if depth >= 1 {
            t.levels[1].copy_from_slice(v);
        }
        t
    }

    /// The basis vector `e_letter`.
    pub fn letter(dim: usize, depth: usize, letter: u8) -> Self {
        let mut t = Self::zeros(dim, depth);
        if depth >= 1 {
            t.levels[1][letter as usize - 1] = 1.0;
        }
        t
    }

    /// A single word with coefficient `coeff`; words above the depth vanish.
    pub fn monomial(dim: usize, depth: usize, word: &Word, coeff: f64) -> Self {
        let mut t = Self::zeros(dim, depth);
        if word.degree() <= depth {
            t.levels[word.degree()][word.index(dim)] = coeff;
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Scalar part.
    pub fn scalar(&self) -> f64 {
        self.levels[0][0]
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        if w.degree() > self.depth {
            return Err(SigError::Range(format!(
                "word {w} has degree {} above truncation level {}",
                w.degree(),
                self.depth
            )));
        }
        if w.max_letter() as usize > self.dim {
            return Err(SigError::Range(format!(
                "word {w} uses a letter above dimension {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// The coefficient of `w`, i.e. the dual word applied to the tensor.
    pub fn word_coefficient(&self, w: &Word) -> Result<f64> {
        self.check_word(w)?;
        Ok(self.levels[w.degree()][w.index(self.dim)])
    }

    /// Like [`Self::word_coefficient`] but panics on an out-of-range word.
    pub fn coeff(&self, w: &Word) -> f64 {
        self.word_coefficient(w).expect("word within range")
    }

    pub fn set(&mut self, w: &Word, value: f64) -> Result<()> {
        self.check_word(w)?;
        let idx = w.index(self.dim);
        self.levels[w.degree()][idx] = value;
        Ok(())
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.depth != other.depth {
            return Err(SigError::Shape(format!(
                "(d={}, N={}) vs (d={}, N={})",
                self.dim, self.depth, other.dim, other.depth
            )));
        }
        Ok(())
    }

    /// Entrywise `alpha * a + beta * b`.
    pub fn linear_combine(alpha: f64, a: &Self, beta: f64, b: &Self) -> Result<Self> {
        a.check_shape(b)?;
        let levels = a
            .levels
            .iter()
            .zip(&b.levels)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| alpha * p + beta * q).collect())
            .collect();
        Ok(TruncatedTensor {
            dim: a.dim,
            depth: a.depth,
            levels,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.levels
            .iter_mut()
            .flatten()
            .for_each(|c| *c *= s);
        out
    }

    /// Truncated tensor product.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let d = self.dim;
        let mut out = Self::zeros(d, self.depth);
        for n in 0..=self.depth {
            let target = &mut out.levels[n];
            for i in 0..=n {
                let a = &self.levels[i];
                let b = &other.levels[n - i];
                let width = b.len();
                for (ia, &x) in a.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let row = &mut target[ia * width..(ia + 1) * width];
                    for (slot, &y) in row.iter_mut().zip(b) {
                        *slot += x * y;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `self ⊗ exp(v)` for a degree-one `v`, updated in place.
    ///
    /// Level `n` of the product is `Σ_i S_i ⊗ v^{n-i}/(n-i)!`, evaluated
    /// Horner-style from the top level down so lower levels are still the
    /// old values when read.
    pub fn mul_exp_vector_in_place(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.dim, "increment dimension");
        let d = self.dim;
        let mut acc: Vec<f64> = Vec::new();
        let mut next: Vec<f64> = Vec::new();
        for n in (1..=self.depth).rev() {
            acc.clear();
            acc.extend(self.levels[0].iter().map(|&x| x / n as f64));
            for j in 1..=n {
                // acc <- acc ⊗ v, then scale and add level j
                next.clear();
                next.reserve(acc.len() * d);
                for &a in &acc {
                    next.extend(v.iter().map(|&x| a * x));
                }
                let add = &self.levels[j];
                if j < n {
                    let s = 1.0 / (n - j) as f64;
                    for (slot, &b) in next.iter_mut().zip(add) {
                        *slot = (*slot + b) * s;
                    }
                } else {
                    for (slot, &b) in next.iter_mut().zip(add) {
                        *slot += b;
                    }
                }
                std::mem::swap(&mut acc, &mut next);
            }
            self.levels[n].copy_from_slice(&acc);
        }
    }

    /// `[a, b] = a ⊗ b − b ⊗ a`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.try_mul(other)?;
        let ba = other.try_mul(self)?;
        Self::linear_combine(1.0, &ab, -1.0, &ba)
    }

    /// Exponential of a tensor with zero scalar part, exact in the truncated algebra.
    pub fn exp(&self) -> Result<Self> {
        if self.scalar() != 0.0 {
            return Err(SigError::Domain(format!(
                "exp needs a zero scalar part, got {}",
                self.scalar()
            )));
        }
        let one = Self::identity(self.dim, self.depth);
        let mut r = one.clone();
        for j in (1..=self.depth).rev() {
            let t = self.try_mul(&r)?;
            r = Self::linear_combine(1.0, &one, 1.0 / j as f64, &t)?;
        }
        Ok(r)
    }

    /// Logarithm of a tensor with unit scalar part, exact in the truncated algebra.
    pub fn log(&self) -> Result<Self> {
        if self.scalar() != 1.0 {
            return Err(SigError::Domain(format!(
                "log needs a unit scalar part, got {}",
                self.scalar()
            )));
        }
        let n = self.depth;
        let mut x = self.clone();
        x.levels[0][0] = 0.0;
        if n == 0 {
            return Ok(x);
        }
        let one = Self::identity(self.dim, n);
        let sign = |j: usize| if j % 2 == 1 { 1.0 } else { -1.0 };
        let mut r = one.scaled(sign(n) / n as f64);
        for j in (1..n).rev() {
            let t = x.try_mul(&r)?;
            r = Self::linear_combine(sign(j) / j as f64, &one, 1.0, &t)?;
        }
        x.try_mul(&r)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.levels
            .iter()
            .flatten()
            .map(|c| c.abs())
            .fold(0.0, f64::max)
    }

    /// Copy with levels above `depth` dropped (or zero-padded if larger).
    pub fn truncated(&self, depth: usize) -> Self {
        let mut out = Self::zeros(self.dim, depth);
        for k in 0..=depth.min(self.depth) {
            out.levels[k].copy_from_slice(&self.levels[k]);
        }
        out
    }

    /// Copy keeping only the level-`k` component.
    pub fn homogeneous_part(&self, k: usize) -> Self {
        let mut out = Self::zeros(self.dim, self.depth);
        out.levels[k].copy_from_slice(&self.levels[k]);
        out
    }

    /// Copy with every word failing `keep` set to zero.
    pub fn filter_words(&self, keep: impl Fn(&Word) -> bool) -> Self {
        let mut out = self.clone();
        for (k, level) in out.levels.iter_mut().enumerate() {
            for (i, c) in level.iter_mut().enumerate() {
                if !keep(&Word::from_index(i, k, self.dim)) {
                    *c = 0.0;
                }
            }
        }
        out
    }

    /// Every `(word, coefficient)` pair, level by level.
    pub fn iter_words(&self) -> impl Iterator<Item = (Word, f64)> + '_ {
        let d = self.dim;
        self.levels.iter().enumerate().flat_map(move |(k, level)| {
            level
                .iter()
                .enumerate()
                .map(move |(i, &c)| (Word::from_index(i, k, d), c))
        })
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().flatten().all(|c| c.is_finite())
    }
}

fn panic_on_shape<T>(r: Result<T>) -> T {
    r.unwrap_or_else(|e| panic!("{e}"))
}

impl Add for &TruncatedTensor {
    type Output = TruncatedTensor;
    fn add(self, rhs: Self) -> TruncatedTensor {
        panic_on_shape(TruncatedTensor::linear_combine(1.0, self, 1.0, rhs))
    }
}

impl Sub for &TruncatedTensor {
    type Output = TruncatedTensor;
    fn sub(self, rhs: Self) -> TruncatedTensor {
        panic_on_shape(TruncatedTensor::linear_combine(1.0, self, -1.0, rhs))
    }
}

impl Mul for &TruncatedTensor {
    type Output = TruncatedTensor;
    fn mul(self, rhs: Self) -> TruncatedTensor {
        panic_on_shape(self.try_mul(rhs))
    }
}

impl Mul<f64> for &TruncatedTensor {
    type Output = TruncatedTensor;
    fn mul(self, rhs: f64) -> TruncatedTensor {
        self.scaled(rhs)
    }
}

impl Neg for &TruncatedTensor {
    type Output = TruncatedTensor;
    fn neg(self) -> TruncatedTensor {
        self.scaled(-1.0)
    }
}

/// Wire format: `{"d": 2, "N": 4, "coeffs": {"": 1.0, "12": 0.5, ...}}`.
#[derive(Serialize, Deserialize)]
struct TensorJson {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    coeffs: BTreeMap<String, f64>,
}

impl From<TruncatedTensor> for TensorJson {
    fn from(t: TruncatedTensor) -> Self {
        let coeffs = t
            .iter_words()
            .filter(|(_, c)| *c != 0.0)
            .map(|(w, c)| (w.to_string(), c))
            .collect();
        TensorJson {
            d: t.dim,
            n: t.depth,
            coeffs,
        }
    }
}

impl TryFrom<TensorJson> for TruncatedTensor {
    type Error = SigError;
    fn try_from(j: TensorJson) -> Result<Self> {
        if j.d == 0 || j.d > 9 {
            return Err(SigError::Domain(format!(
                "serialized tensors need 1 <= d <= 9, got {}",
                j.d
            )));
        }
        let mut t = TruncatedTensor::zeros(j.d, j.n);
        for (key, value) in j.coeffs {
            let w = Word::parse(&key)?;
            t.set(&w, value)?;
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Word::parse(s).unwrap()
    }

    #[test]
    fn word_index_round_trip() {
        for k in 0..5 {
            for i in 0..3usize.pow(k as u32) {
                assert_eq!(Word::from_index(i, k, 3).index(3), i);
            }
        }
        assert_eq!(w("21").index(2), 2);
        assert_eq!(w("12").index(2), 1);
    }

    #[test]
    fn linear_combine_examples() {
        let z = TruncatedTensor::zeros(2, 3);
        assert_eq!(TruncatedTensor::linear_combine(1.0, &z, 1.0, &z).unwrap(), z);
        let x = TruncatedTensor::letter(2, 3, 1).exp().unwrap();
        let c = TruncatedTensor::linear_combine(1.0, &x, -1.0, &x).unwrap();
        assert_eq!(c.max_abs(), 0.0);
        let one = TruncatedTensor::identity(2, 3);
        let five = TruncatedTensor::linear_combine(2.0, &one, 3.0, &one).unwrap();
        assert_eq!(five.scalar(), 5.0);
        assert_eq!(five.max_abs(), 5.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = TruncatedTensor::zeros(2, 3);
        let b = TruncatedTensor::zeros(2, 4);
        let c = TruncatedTensor::zeros(3, 3);
        assert!(matches!(a.try_mul(&b), Err(SigError::Shape(_))));
        assert!(matches!(
            TruncatedTensor::linear_combine(1.0, &a, 1.0, &c),
            Err(SigError::Shape(_))
        ));
    }

    #[test]
    fn two_term_product() {
        let one = TruncatedTensor::identity(2, 3);
        let a = &one + &TruncatedTensor::letter(2, 3, 1);
        let b = &one + &TruncatedTensor::letter(2, 3, 2);
        let p = &a * &b;
        let mut expected = TruncatedTensor::zeros(2, 3);
        for (s, v) in [("", 1.0), ("1", 1.0), ("2", 1.0), ("12", 1.0)] {
            expected.set(&w(s), v).unwrap();
        }
        assert_eq!(p, expected);
        assert_eq!(&a * &one, a);
    }

    #[test]
    fn exp_of_letter() {
        let e = TruncatedTensor::letter(2, 4, 1).exp().unwrap();
        assert_eq!(e.coeff(&w("1")), 1.0);
        assert_eq!(e.coeff(&w("11")), 0.5);
        assert!((e.coeff(&w("111")) - 1.0 / 6.0).abs() < 1e-16);
        assert!((e.coeff(&w("1111")) - 1.0 / 24.0).abs() < 1e-16);
        assert_eq!(e.coeff(&w("12")), 0.0);
        assert_eq!(e.coeff(&w("2")), 0.0);
        let inv = TruncatedTensor::letter(2, 4, 1).scaled(-1.0).exp().unwrap();
        let id = TruncatedTensor::identity(2, 4);
        assert!((&e * &inv).max_abs_diff(&id).unwrap() < 1e-12);
        assert_eq!(TruncatedTensor::zeros(2, 4).exp().unwrap(), id);
    }

    #[test]
    fn exp_of_diagonal_vector() {
        let e = TruncatedTensor::from_vector(2, &[1.0, 1.0]).exp().unwrap();
        for s in ["11", "12", "21", "22"] {
            assert!((e.coeff(&w(s)) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_and_log_domain_errors() {
        let one = TruncatedTensor::identity(2, 3);
        assert!(matches!(one.exp(), Err(SigError::Domain(_))));
        let z = TruncatedTensor::zeros(2, 3);
        assert!(matches!(z.log(), Err(SigError::Domain(_))));
        assert_eq!(one.log().unwrap(), z);
    }

    #[test]
    fn word_coefficient_range() {
        let id = TruncatedTensor::identity(2, 3);
        assert_eq!(id.word_coefficient(&Word::empty()).unwrap(), 1.0);
        assert!(matches!(
            id.word_coefficient(&w("1111")),
            Err(SigError::Range(_))
        ));
        assert!(matches!(id.word_coefficient(&w("13")), Err(SigError::Range(_))));
        let e = TruncatedTensor::letter(2, 3, 1).exp().unwrap();
        assert!((e.word_coefficient(&w("111")).unwrap() - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn in_place_segment_update_matches_product() {
        let v = [0.3, -1.2, 0.7];
        let mut s = TruncatedTensor::from_vector(5, &[0.5, 0.1, -0.4]).exp().unwrap();
        s.level_mut(2)[4] += 0.25;
        let expected = &s * &TruncatedTensor::from_vector(5, &v).exp().unwrap();
        s.mul_exp_vector_in_place(&v);
        assert!(s.max_abs_diff(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn json_round_trip_omits_zeros() {
        let e = TruncatedTensor::from_vector(2, &[1.0, 0.0]).exp().unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"d":2,"N":2,"coeffs":{"":1.0,"1":1.0,"11":0.5}}"#);
        let back: TruncatedTensor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        let bad = r#"{"d":2,"N":1,"coeffs":{"11":1.0}}"#;
        assert!(serde_json::from_str::<TruncatedTensor>(bad).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn tensor(dim: usize, depth: usize, scalar: Option<f64>) -> impl Strategy<Value = TruncatedTensor> {
            let total: usize = (0..=depth).map(|k| dim.pow(k as u32)).sum();
            prop::collection::vec(-0.3f64..0.3, total).prop_map(move |v| {
                let mut t = TruncatedTensor::zeros(dim, depth);
                let mut it = v.into_iter();
                for k in 0..=depth {
                    for x in t.level_mut(k) {
                        *x = it.next().unwrap();
                    }
                }
                if let Some(c) = scalar {
                    t.level_mut(0)[0] = c;
                }
                t
            })
        }

        fn shape() -> impl Strategy<Value = (usize, usize)> {
            (1usize..=3, 1usize..=6)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn product_is_associative(
                (a, b, c) in shape().prop_flat_map(|(d, n)| (tensor(d, n, None), tensor(d, n, None), tensor(d, n, None)))
            ) {
                let left = &(&a * &b) * &c;
                let right = &a * &(&b * &c);
                prop_assert!(left.max_abs_diff(&right).unwrap() < 1e-12);
            }

            #[test]
            fn exp_and_log_invert(
                (x, g) in shape().prop_flat_map(|(d, n)| (tensor(d, n, Some(0.0)), tensor(d, n, Some(1.0))))
            ) {
                let back = x.exp().unwrap().log().unwrap();
                prop_assert!(back.max_abs_diff(&x).unwrap() < 1e-12);
                let again = g.log().unwrap().exp().unwrap();
                prop_assert!(again.max_abs_diff(&g).unwrap() < 1e-12);
            }

            #[test]
            fn product_respects_grading(
                (a, b, cut) in shape().prop_flat_map(|(d, n)| (tensor(d, n, None), tensor(d, n, None), 0..=n))
            ) {
                let full = &a * &b;
                let mut a_cut = a.clone();
                let mut b_cut = b.clone();
                for k in cut + 1..=a.depth() {
                    a_cut.level_mut(k).iter_mut().for_each(|x| *x = 1e3);
                    b_cut.level_mut(k).iter_mut().for_each(|x| *x = -7.0);
                }
                let part = &a_cut * &b_cut;
                for k in 0..=cut {
                    prop_assert_eq!(full.level(k), part.level(k));
                }
            }
        }
    }
}
