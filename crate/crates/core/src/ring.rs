//! Exact arithmetic in the integral cohomology ring of a Bott manifold,
//!
//! ```text
//! H*(B_n) = Z[x_1, ..., x_n] / (x_j^2 - alpha_j x_j),   alpha_j = sum_{l < j} a[j][l] x_l.
//! ```
//!
//! Because `alpha_j` only involves generators of smaller index, rewriting `x_j^2 -> alpha_j x_j`
//! terminates and is confluent, and the square-free monomials form a Z-basis. Elements are
//! stored in that basis as a sparse map from monomial (a bit set of generator indices) to a
//! nonzero coefficient.
//!
//! Generators are 0-based internally (`x_1` is index 0). Serialized forms and `Display` output
//! use the 1-based names.
//!
//! All integer arithmetic is checked. Ring operations report overflow as
//! [`RingError::Overflow`]; the linear operators on [`ClassDeg2`] panic on overflow.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice;

/// Generators are indexed by the bits of a `u32`.
pub const MAX_HEIGHT: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("integer overflow in exact arithmetic")]
    Overflow,
    #[error("height mismatch: expected {expected}, found {found}")]
    HeightMismatch { expected: usize, found: usize },
    #[error("invalid tower: {0}")]
    InvalidTower(String),
    #[error("invalid element: {0}")]
    InvalidElement(String),
}

type Result<T> = std::result::Result<T, RingError>;

fn ck<T>(v: Option<T>) -> Result<T> {
    v.ok_or(RingError::Overflow)
}

// ---------------------------------------------------------------------------
// Towers

/// The integer data `a[j][l]` (`l < j`) of a Bott tower.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "TowerRepr", into = "TowerRepr")]
pub struct BottTower {
    // rows[j] has exactly j entries: a[j][0..j].
    rows: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct TowerRepr {
    n: usize,
    #[serde(default)]
    coeffs: Vec<(usize, usize, i64)>,
}

impl TryFrom<TowerRepr> for BottTower {
    type Error = RingError;

    fn try_from(repr: TowerRepr) -> Result<Self> {
        if repr.n > MAX_HEIGHT {
            return Err(RingError::InvalidTower(format!(
                "height {} exceeds the supported maximum {MAX_HEIGHT}",
                repr.n
            )));
        }
        let mut rows: Vec<Vec<i64>> = (0..repr.n).map(|j| vec![0; j]).collect();
        let mut seen = vec![vec![false; repr.n]; repr.n];
        for (j, l, a) in repr.coeffs {
            if !(1 <= l && l < j && j <= repr.n) {
                return Err(RingError::InvalidTower(format!(
                    "entry [{j}, {l}, {a}] must satisfy 1 <= l < j <= n = {}",
                    repr.n
                )));
            }
            if std::mem::replace(&mut seen[j - 1][l - 1], true) {
                return Err(RingError::InvalidTower(format!("duplicate entry for ({j}, {l})")));
            }
            rows[j - 1][l - 1] = a;
        }
        Ok(BottTower { rows })
    }
}

impl From<BottTower> for TowerRepr {
    fn from(t: BottTower) -> Self {
        let mut coeffs = Vec::new();
        for (j, row) in t.rows.iter().enumerate() {
            for (l, &a) in row.iter().enumerate() {
                if a != 0 {
                    coeffs.push((j + 1, l + 1, a));
                }
            }
        }
        TowerRepr { n: t.rows.len(), coeffs }
    }
}

impl BottTower {
    /// The height-0 tower; its ring is Z.
    pub fn point() -> Self {
        BottTower { rows: Vec::new() }
    }

    /// `(CP^1)^n`: every `alpha_j` vanishes.
    pub fn trivial(n: usize) -> Self {
        BottTower { rows: (0..n).map(|j| vec![0; j]).collect() }
    }

    /// The Hirzebruch surface `Sigma_a` as the height-2 tower with `a[2][1] = a`.
    pub fn hirzebruch(a: i64) -> Self {
        BottTower { rows: vec![vec![], vec![a]] }
    }

    /// Builds a tower from its rows; row `j` (0-based) must have exactly `j` entries.
    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        if rows.len() > MAX_HEIGHT {
            return Err(RingError::InvalidTower(format!("height {} too large", rows.len())));
        }
        for (j, row) in rows.iter().enumerate() {
            if row.len() != j {
                return Err(RingError::InvalidTower(format!(
                    "row {} has {} entries, expected {j}",
                    j + 1,
                    row.len()
                )));
            }
        }
        Ok(BottTower { rows })
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    /// `a[j][l]` with 0-based indices; zero unless `l < j`.
    #[inline]
    pub fn coeff(&self, j: usize, l: usize) -> i64 {
        if l < j {
            self.rows[j][l]
        } else {
            0
        }
    }

    /// `alpha_j` as a class of the full tower.
    pub fn alpha(&self, j: usize) -> ClassDeg2 {
        let mut coords = vec![0; self.height()];
        coords[..j].copy_from_slice(&self.rows[j]);
        ClassDeg2(coords)
    }

    /// Appends a stage whose twisting class is `alpha` (a class of this tower).
    pub fn extend(&self, alpha: &ClassDeg2) -> Result<Self> {
        if alpha.height() != self.height() {
            return Err(RingError::HeightMismatch { expected: self.height(), found: alpha.height() });
        }
        if self.height() + 1 > MAX_HEIGHT {
            return Err(RingError::InvalidTower("height limit reached".into()));
        }
        let mut rows = self.rows.clone();
        rows.push(alpha.0.clone());
        Ok(BottTower { rows })
    }

    /// The first `k` stages.
    pub fn truncate(&self, k: usize) -> Self {
        BottTower { rows: self.rows[..k.min(self.height())].to_vec() }
    }
}

impl fmt::Display for BottTower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B_{}", self.height())?;
        let mut first = true;
        for j in 1..self.height() {
            let alpha = self.alpha(j);
            if !alpha.is_zero() {
                write!(f, "{}alpha_{} = {}", if first { " [" } else { ", " }, j + 1, alpha)?;
                first = false;
            }
        }
        if !first {
            write!(f, "]")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Degree-2 classes

/// An element of `H^2(B_n)` in the basis `x_1, ..., x_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassDeg2(Vec<i64>);

impl ClassDeg2 {
    pub fn new(coords: Vec<i64>) -> Self {
        ClassDeg2(coords)
    }

    pub fn zero(n: usize) -> Self {
        ClassDeg2(vec![0; n])
    }

    /// The generator `x_{j+1}` (0-based `j`).
    pub fn basis(n: usize, j: usize) -> Self {
        let mut c = vec![0; n];
        c[j] = 1;
        ClassDeg2(c)
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn height(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    /// Even means every coordinate in the standard basis is even.
    pub fn is_even(&self) -> bool {
        self.0.iter().all(|v| v % 2 == 0)
    }

    /// `num/den * self` when that is integral.
    pub fn scaled(&self, num: i64, den: i64) -> Option<ClassDeg2> {
        assert!(den != 0, "zero denominator");
        self.0
            .iter()
            .map(|&v| {
                let p = v.checked_mul(num)?;
                (p % den == 0).then(|| p / den)
            })
            .collect::<Option<Vec<_>>>()
            .map(ClassDeg2)
    }

    /// Pads with zero coordinates up to height `n` (pull-back along a tower projection).
    pub fn embed(&self, n: usize) -> ClassDeg2 {
        assert!(n >= self.height(), "cannot embed into a shorter tower");
        let mut c = self.0.clone();
        c.resize(n, 0);
        ClassDeg2(c)
    }

    /// The first `n` coordinates.
    pub fn truncate(&self, n: usize) -> ClassDeg2 {
        ClassDeg2(self.0[..n].to_vec())
    }

    pub fn max_abs(&self) -> i64 {
        self.0.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn as_element(&self) -> RingElement {
        let mut terms = BTreeMap::new();
        for (j, &v) in self.0.iter().enumerate() {
            if v != 0 {
                terms.insert(Monomial::generator(j), v);
            }
        }
        RingElement { terms }
    }
}

/// `c / 2` when every coordinate of `c` is even.
pub fn halve(c: &ClassDeg2) -> Option<ClassDeg2> {
    c.scaled(1, 2)
}

fn zip_with(a: &ClassDeg2, b: &ClassDeg2, f: impl Fn(i64, i64) -> Option<i64>) -> ClassDeg2 {
    assert_eq!(a.height(), b.height(), "degree-2 classes of different heights");
    ClassDeg2(
        a.0.iter()
            .zip(&b.0)
            .map(|(&x, &y)| f(x, y).expect("overflow in degree-2 class arithmetic"))
            .collect(),
    )
}

impl Add for &ClassDeg2 {
    type Output = ClassDeg2;
    fn add(self, rhs: &ClassDeg2) -> ClassDeg2 {
        zip_with(self, rhs, i64::checked_add)
    }
}

impl Sub for &ClassDeg2 {
    type Output = ClassDeg2;
    fn sub(self, rhs: &ClassDeg2) -> ClassDeg2 {
        zip_with(self, rhs, i64::checked_sub)
    }
}

impl Neg for &ClassDeg2 {
    type Output = ClassDeg2;
    fn neg(self) -> ClassDeg2 {
        self * -1
    }
}

impl Mul<i64> for &ClassDeg2 {
    type Output = ClassDeg2;
    fn mul(self, k: i64) -> ClassDeg2 {
        ClassDeg2(
            self.0
                .iter()
                .map(|&v| v.checked_mul(k).expect("overflow in degree-2 class arithmetic"))
                .collect(),
        )
    }
}

impl fmt::Display for ClassDeg2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_linear(f, self.0.iter().enumerate().map(|(j, &v)| (format!("x{}", j + 1), v)))
    }
}

fn write_linear(
    f: &mut fmt::Formatter<'_>,
    terms: impl Iterator<Item = (String, i64)>,
) -> fmt::Result {
    let mut first = true;
    for (name, v) in terms.filter(|(_, v)| *v != 0) {
        let sign = if v < 0 { "-" } else { "+" };
        if first {
            if v < 0 {
                write!(f, "-")?;
            }
        } else {
            write!(f, " {sign} ")?;
        }
        let abs = v.unsigned_abs();
        if abs == 1 && !name.is_empty() {
            write!(f, "{name}")?;
        } else {
            write!(f, "{abs}{name}")?;
        }
        first = false;
    }
    if first {
        write!(f, "0")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Monomials and ring elements

/// A square-free monomial `x_S`, stored as the bit set `S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(u32);

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    pub fn generator(j: usize) -> Self {
        Monomial(1 << j)
    }

    /// From 0-based generator indices; repeated indices are rejected.
    pub fn from_indices(indices: &[usize]) -> Option<Self> {
        let mut bits = 0u32;
        for &j in indices {
            if j >= MAX_HEIGHT || bits & (1 << j) != 0 {
                return None;
            }
            bits |= 1 << j;
        }
        Some(Monomial(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn contains(self, j: usize) -> bool {
        self.0 & (1 << j) != 0
    }

    #[inline]
    fn with(self, j: usize) -> Self {
        Monomial(self.0 | (1 << j))
    }

    /// Cohomological degree `2|S|`.
    pub fn degree(self) -> u32 {
        2 * self.0.count_ones()
    }

    /// 0-based indices in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..MAX_HEIGHT).filter(move |&j| self.contains(j))
    }

    /// One past the largest generator index used.
    pub fn span(self) -> usize {
        (u32::BITS - self.0.leading_zeros()) as usize
    }
}

/// An element of `H*(B_n)` in canonical square-free normal form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RingElement {
    terms: BTreeMap<Monomial, i64>,
}

impl RingElement {
    pub fn zero() -> Self {
        RingElement::default()
    }

    pub fn one() -> Self {
        RingElement::constant(1)
    }

    pub fn constant(c: i64) -> Self {
        RingElement::from_terms([(Monomial::ONE, c)])
    }

    /// Builds an element from already square-free terms, summing duplicates and dropping zeros.
    ///
    /// # Panics
    /// On coefficient overflow.
    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, i64)>) -> Self {
        let mut out = BTreeMap::new();
        for (m, c) in terms {
            add_term(&mut out, m, c).expect("overflow building ring element");
        }
        RingElement { terms: out }
    }

    pub fn terms(&self) -> impl Iterator<Item = (Monomial, i64)> + '_ {
        self.terms.iter().map(|(&m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: Monomial) -> i64 {
        self.terms.get(&m).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(d)` when all monomials have degree `d`; the zero element is homogeneous of every
    /// degree and reports `None`.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degs = self.terms.keys().map(|m| m.degree());
        let d = degs.next()?;
        degs.all(|e| e == d).then_some(d)
    }

    /// One past the largest generator index appearing.
    pub fn span(&self) -> usize {
        self.terms.keys().map(|m| m.span()).max().unwrap_or(0)
    }

    fn check_height(&self, tower: &BottTower) -> Result<()> {
        if self.span() > tower.height() {
            return Err(RingError::HeightMismatch { expected: tower.height(), found: self.span() });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &RingElement) -> Result<RingElement> {
        let mut out = self.terms.clone();
        for (&m, &c) in &other.terms {
            add_term(&mut out, m, c)?;
        }
        Ok(RingElement { terms: out })
    }

    pub fn checked_scale(&self, k: i64) -> Result<RingElement> {
        if k == 0 {
            return Ok(RingElement::zero());
        }
        let terms = self
            .terms
            .iter()
            .map(|(&m, &c)| Ok((m, ck(c.checked_mul(k))?)))
            .collect::<Result<_>>()?;
        Ok(RingElement { terms })
    }

    pub fn checked_sub(&self, other: &RingElement) -> Result<RingElement> {
        self.checked_add(&other.checked_scale(-1)?)
    }

    /// The degree-2 part as a class of height `n`.
    pub fn degree2_part(&self, n: usize) -> ClassDeg2 {
        let mut c = vec![0; n];
        for (m, v) in self.terms() {
            if m.degree() == 2 {
                c[m.indices().next().unwrap()] = v;
            }
        }
        ClassDeg2(c)
    }
}

fn add_term(out: &mut BTreeMap<Monomial, i64>, m: Monomial, c: i64) -> Result<()> {
    if c == 0 {
        return Ok(());
    }
    use std::collections::btree_map::Entry;
    match out.entry(m) {
        Entry::Vacant(e) => {
            e.insert(c);
        }
        Entry::Occupied(mut e) => {
            let v = ck(e.get().checked_add(c))?;
            if v == 0 {
                e.remove();
            } else {
                *e.get_mut() = v;
            }
        }
    }
    Ok(())
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_linear(
            f,
            self.terms().map(|(m, c)| {
                let name: Vec<String> = m.indices().map(|j| format!("x{}", j + 1)).collect();
                (name.join(""), c)
            }),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct ElementRepr(Vec<(Vec<usize>, i64)>);

impl Serialize for RingElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ElementRepr(
            self.terms()
                .map(|(m, c)| (m.indices().map(|j| j + 1).collect(), c))
                .collect(),
        )
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RingElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let ElementRepr(raw) = ElementRepr::deserialize(d)?;
        let mut terms = BTreeMap::new();
        for (indices, c) in raw {
            if indices.windows(2).any(|w| w[0] >= w[1]) || indices.first() == Some(&0) {
                return Err(D::Error::custom(format!(
                    "monomial {indices:?} must be a strictly increasing list of 1-based indices"
                )));
            }
            let zero_based: Vec<usize> = indices.iter().map(|j| j - 1).collect();
            let m = Monomial::from_indices(&zero_based)
                .ok_or_else(|| D::Error::custom(format!("monomial {indices:?} out of range")))?;
            if terms.contains_key(&m) {
                return Err(D::Error::custom(format!("duplicate monomial {indices:?}")));
            }
            if c != 0 {
                terms.insert(m, c);
            }
        }
        Ok(RingElement { terms })
    }
}

// ---------------------------------------------------------------------------
// Formal polynomials (input to `normalize`)

/// A formal integer polynomial in `x_1, ..., x_n`, not yet reduced.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Polynomial {
    terms: Vec<(Vec<u32>, i64)>,
}

impl Polynomial {
    pub fn new() -> Self {
        Polynomial::default()
    }

    /// Adds `coeff * prod_j x_{j+1}^{exponents[j]}`.
    pub fn push(&mut self, exponents: Vec<u32>, coeff: i64) {
        self.terms.push((exponents, coeff));
    }

    pub fn term(exponents: Vec<u32>, coeff: i64) -> Self {
        Polynomial { terms: vec![(exponents, coeff)] }
    }

    pub fn terms(&self) -> &[(Vec<u32>, i64)] {
        &self.terms
    }

    /// The formal (unreduced) product.
    pub fn product(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let len = e1.len().max(e2.len());
                let exps = (0..len)
                    .map(|j| e1.get(j).copied().unwrap_or(0) + e2.get(j).copied().unwrap_or(0))
                    .collect();
                out.push(exps, c1.checked_mul(*c2).expect("overflow in formal product"));
            }
        }
        out
    }

    /// A degree-2 class as a formal linear form.
    pub fn linear(c: &ClassDeg2) -> Polynomial {
        let n = c.height();
        let mut out = Polynomial::new();
        for (j, &v) in c.coords().iter().enumerate() {
            if v != 0 {
                let mut e = vec![0; n];
                e[j] = 1;
                out.push(e, v);
            }
        }
        out
    }
}

impl From<&RingElement> for Polynomial {
    fn from(e: &RingElement) -> Self {
        let n = e.span();
        let mut out = Polynomial::new();
        for (m, c) in e.terms() {
            let mut exps = vec![0; n];
            for j in m.indices() {
                exps[j] = 1;
            }
            out.push(exps, c);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Ring operations

/// Accumulates `c * x_m * x_j` in normal form.
///
/// If `j` is not in `m` this is just `x_{m + j}`. Otherwise `x_m x_j = alpha_j x_m`, which is
/// expanded over the generators of `alpha_j`, all of smaller index, so the recursion ends.
fn accumulate_times_generator(
    tower: &BottTower,
    out: &mut BTreeMap<Monomial, i64>,
    m: Monomial,
    j: usize,
    c: i64,
) -> Result<()> {
    if !m.contains(j) {
        return add_term(out, m.with(j), c);
    }
    for (l, &a) in tower.rows[j].iter().enumerate() {
        if a != 0 {
            accumulate_times_generator(tower, out, m, l, ck(c.checked_mul(a))?)?;
        }
    }
    Ok(())
}

fn times_generator(tower: &BottTower, e: &RingElement, j: usize) -> Result<RingElement> {
    let mut out = BTreeMap::new();
    for (m, c) in e.terms() {
        accumulate_times_generator(tower, &mut out, m, j, c)?;
    }
    Ok(RingElement { terms: out })
}

fn times_class(tower: &BottTower, e: &RingElement, z: &ClassDeg2) -> Result<RingElement> {
    let mut out = BTreeMap::new();
    for (j, &zj) in z.coords().iter().enumerate() {
        if zj == 0 {
            continue;
        }
        for (m, c) in e.terms() {
            accumulate_times_generator(tower, &mut out, m, j, ck(c.checked_mul(zj))?)?;
        }
    }
    Ok(RingElement { terms: out })
}

/// Reduces a formal polynomial to its canonical normal form.
pub fn normalize(tower: &BottTower, expr: &Polynomial) -> Result<RingElement> {
    let mut acc = BTreeMap::new();
    for (exps, coeff) in &expr.terms {
        if *coeff == 0 {
            continue;
        }
        if let Some(j) = exps.iter().rposition(|&e| e > 0) {
            if j >= tower.height() {
                return Err(RingError::HeightMismatch { expected: tower.height(), found: j + 1 });
            }
        }
        let mut e = RingElement::constant(*coeff);
        // highest generator first; the order does not affect the result
        for (j, &k) in exps.iter().enumerate().rev() {
            for _ in 0..k {
                e = times_generator(tower, &e, j)?;
                if e.is_zero() {
                    break;
                }
            }
        }
        for (m, c) in e.terms() {
            add_term(&mut acc, m, c)?;
        }
    }
    let out = RingElement { terms: acc };
    #[cfg(debug_assertions)]
    if !expr.terms.iter().all(|(e, _)| e.iter().all(|&k| k <= 1)) {
        debug_assert_eq!(normalize(tower, &Polynomial::from(&out)).as_ref(), Ok(&out));
    }
    Ok(out)
}

pub fn mul(tower: &BottTower, e1: &RingElement, e2: &RingElement) -> Result<RingElement> {
    e1.check_height(tower)?;
    e2.check_height(tower)?;
    let mut acc = BTreeMap::new();
    for (m, c) in e1.terms() {
        let mut partial = e2.checked_scale(c)?;
        for j in m.indices() {
            partial = times_generator(tower, &partial, j)?;
        }
        for (m2, c2) in partial.terms() {
            add_term(&mut acc, m2, c2)?;
        }
    }
    Ok(RingElement { terms: acc })
}

/// Index of the degree-4 monomial `x_i x_k` (`i < k`) in the dense layout used by
/// [`product_coefficients`].
#[inline]
pub fn pair_index(i: usize, k: usize) -> usize {
    debug_assert!(i < k);
    k * (k - 1) / 2 + i
}

/// Normal form of the product of two degree-2 classes, written densely over the monomials
/// `x_i x_k` (`i < k`), see [`pair_index`].
///
/// Since `x_k^2 = sum_{i<k} a[k][i] x_i x_k`, the coefficient of `x_i x_k` is
/// `p_i q_k + p_k q_i + a[k][i] p_k q_k`.
pub fn product_coefficients(
    tower: &BottTower,
    p: &ClassDeg2,
    q: &ClassDeg2,
    out: &mut Vec<i64>,
) -> Result<()> {
    let n = tower.height();
    if p.height() != n || q.height() != n {
        return Err(RingError::HeightMismatch {
            expected: n,
            found: if p.height() != n { p.height() } else { q.height() },
        });
    }
    out.clear();
    out.resize(n * n.saturating_sub(1) / 2, 0);
    let (p, q) = (p.coords(), q.coords());
    for k in 1..n {
        let diag = ck(p[k].checked_mul(q[k]))?;
        for i in 0..k {
            let mut v = ck(p[i].checked_mul(q[k]))?;
            v = ck(v.checked_add(ck(p[k].checked_mul(q[i]))?))?;
            let a = tower.rows[k][i];
            if a != 0 && diag != 0 {
                v = ck(v.checked_add(ck(a.checked_mul(diag))?))?;
            }
            out[pair_index(i, k)] = v;
        }
    }
    Ok(())
}

/// `p * q == 0` in `H^4`.
pub fn product_vanishes(tower: &BottTower, p: &ClassDeg2, q: &ClassDeg2) -> Result<bool> {
    let mut buf = Vec::new();
    product_coefficients(tower, p, q, &mut buf)?;
    Ok(buf.iter().all(|&v| v == 0))
}

/// The product of two degree-2 classes as a ring element.
pub fn class_product(tower: &BottTower, p: &ClassDeg2, q: &ClassDeg2) -> Result<RingElement> {
    let mut buf = Vec::new();
    product_coefficients(tower, p, q, &mut buf)?;
    let mut terms = BTreeMap::new();
    for k in 1..tower.height() {
        for i in 0..k {
            let v = buf[pair_index(i, k)];
            if v != 0 {
                terms.insert(Monomial((1 << i) | (1 << k)), v);
            }
        }
    }
    Ok(RingElement { terms })
}

/// The square of a degree-2 class.
pub fn square(tower: &BottTower, p: &ClassDeg2) -> Result<RingElement> {
    class_product(tower, p, p)
}

// ---------------------------------------------------------------------------
// Graded maps

/// A degree-preserving substitution `x_j -> images[j]` into `H^2` of a target tower.
///
/// As a matrix the images are the columns.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GradedMap {
    images: Vec<ClassDeg2>,
}

impl GradedMap {
    pub fn new(images: Vec<ClassDeg2>) -> Result<Self> {
        if let Some(first) = images.first() {
            let h = first.height();
            if let Some(bad) = images.iter().find(|c| c.height() != h) {
                return Err(RingError::HeightMismatch { expected: h, found: bad.height() });
            }
        }
        Ok(GradedMap { images })
    }

    pub fn identity(n: usize) -> Self {
        GradedMap { images: (0..n).map(|j| ClassDeg2::basis(n, j)).collect() }
    }

    /// From a row-major matrix whose columns are the images.
    pub fn from_matrix(rows: &[Vec<i64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(RingError::InvalidElement("ragged matrix".into()));
        }
        Ok(GradedMap {
            images: (0..n_cols)
                .map(|j| ClassDeg2((0..n_rows).map(|i| rows[i][j]).collect()))
                .collect(),
        })
    }

    pub fn images(&self) -> &[ClassDeg2] {
        &self.images
    }

    pub fn image(&self, j: usize) -> &ClassDeg2 {
        &self.images[j]
    }

    pub fn source_height(&self) -> usize {
        self.images.len()
    }

    pub fn target_height(&self) -> usize {
        self.images.first().map_or(0, ClassDeg2::height)
    }

    /// Row-major matrix, `m[i][j]` = coefficient of `x_i` in the image of `x_j`.
    pub fn matrix(&self) -> Vec<Vec<i64>> {
        let rows = self.target_height();
        (0..rows)
            .map(|i| self.images.iter().map(|c| c.0[i]).collect())
            .collect()
    }

    pub fn determinant(&self) -> Result<i64> {
        if self.source_height() != self.target_height() {
            return Err(RingError::HeightMismatch {
                expected: self.source_height(),
                found: self.target_height(),
            });
        }
        ck(lattice::determinant(&self.matrix()))
    }

    pub fn is_unimodular(&self) -> Result<bool> {
        Ok(self.determinant()?.abs() == 1)
    }

    /// Image of an arbitrary degree-2 class.
    pub fn apply_class(&self, c: &ClassDeg2) -> Result<ClassDeg2> {
        if c.height() != self.source_height() {
            return Err(RingError::HeightMismatch { expected: self.source_height(), found: c.height() });
        }
        let mut out = vec![0i64; self.target_height()];
        for (img, &k) in self.images.iter().zip(c.coords()) {
            if k == 0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(img.coords()) {
                *o = ck(o.checked_add(ck(v.checked_mul(k))?))?;
            }
        }
        Ok(ClassDeg2(out))
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &GradedMap) -> Result<GradedMap> {
        let images = inner
            .images
            .iter()
            .map(|c| self.apply_class(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(GradedMap { images })
    }

    /// Inverse of a unimodular map.
    pub fn inverse(&self) -> Option<GradedMap> {
        if self.source_height() != self.target_height() {
            return None;
        }
        let inv = lattice::unimodular_inverse(&self.matrix())?;
        GradedMap::from_matrix(&inv).ok()
    }

    /// Upper triangular in the standard bases: the image of `x_j` only involves `x_1..x_j`.
    pub fn is_upper_triangular(&self) -> bool {
        self.images
            .iter()
            .enumerate()
            .all(|(j, c)| c.0.iter().skip(j + 1).all(|&v| v == 0))
    }

    /// Whether `x_1, ..., x_k` are sent to themselves.
    pub fn fixes_prefix(&self, k: usize) -> bool {
        self.images
            .iter()
            .take(k)
            .enumerate()
            .all(|(j, c)| *c == ClassDeg2::basis(c.height(), j))
    }

    pub fn max_abs_entry(&self) -> i64 {
        self.images.iter().map(ClassDeg2::max_abs).max().unwrap_or(0)
    }
}

impl fmt::Display for GradedMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, img) in self.images.iter().enumerate() {
            if j > 0 {
                write!(f, ", ")?;
            }
            write!(f, "x{} -> {}", j + 1, img)?;
        }
        Ok(())
    }
}

fn check_map_shape(src: &BottTower, dst: &BottTower, m: &GradedMap) -> Result<()> {
    if m.source_height() != src.height() {
        return Err(RingError::HeightMismatch { expected: src.height(), found: m.source_height() });
    }
    if m.source_height() > 0 && m.target_height() != dst.height() {
        return Err(RingError::HeightMismatch { expected: dst.height(), found: m.target_height() });
    }
    Ok(())
}

/// Substitutes `x_j -> m(x_j)` in `e` and normalizes in the target ring.
///
/// This is a ring map only when [`is_ring_iso`] (or at least the relation check) holds.
pub fn apply_graded_map(
    src: &BottTower,
    dst: &BottTower,
    m: &GradedMap,
    e: &RingElement,
) -> Result<RingElement> {
    check_map_shape(src, dst, m)?;
    e.check_height(src)?;
    let mut acc = RingElement::zero();
    for (mono, c) in e.terms() {
        let mut partial = RingElement::constant(c);
        for j in mono.indices() {
            partial = times_class(dst, &partial, m.image(j))?;
            if partial.is_zero() {
                break;
            }
        }
        acc = acc.checked_add(&partial)?;
    }
    Ok(acc)
}

/// Whether `m` sends every defining relation `x_j (x_j - alpha_j)` of `src` to zero in `dst`.
pub fn preserves_relations(src: &BottTower, dst: &BottTower, m: &GradedMap) -> Result<bool> {
    check_map_shape(src, dst, m)?;
    let mut buf = Vec::new();
    for j in 0..src.height() {
        let z = m.image(j);
        let alpha_image = m.apply_class(&src.alpha(j))?;
        let w = z - &alpha_image;
        product_coefficients(dst, z, &w, &mut buf)?;
        if buf.iter().any(|&v| v != 0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether `m` is a graded ring isomorphism `H*(src) -> H*(dst)`.
///
/// Both rings are generated in degree 2 with the presentations above, so this holds exactly
/// when the degree-2 matrix is unimodular and every relation maps to zero.
pub fn is_ring_iso(src: &BottTower, dst: &BottTower, m: &GradedMap) -> Result<bool> {
    if src.height() != dst.height() {
        return Err(RingError::HeightMismatch { expected: src.height(), found: dst.height() });
    }
    check_map_shape(src, dst, m)?;
    if !m.is_unimodular()? {
        return Ok(false);
    }
    preserves_relations(src, dst, m)
}
