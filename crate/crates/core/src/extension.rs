//! Extending fiber automorphisms of a `Sigma_a`-bundle `B_{n+2} -> B_n` to automorphisms of
//! `H*(B_{n+2})` as an `H*(B_n)`-algebra.
//!
//! Write `X1 = x_{n+1}`, `X2 = x_{n+2}` and `c = c1(xi_{n+1})`, so that `X1^2 = c X1` and
//! `X2^2 = (a X1 + y) X2`. An extension of the fiber matrix `p` has the form
//!
//! ```text
//! X1 -> p11 X1 + p21 X2 + u1,    X2 -> p12 X1 + p22 X2 + u2,    u1, u2 in H^2(B_n),
//! ```
//!
//! and is an automorphism exactly when both relations are preserved. Expanding the relations
//! in the free `H*(B_n)`-basis `1, X1, X2, X1 X2` gives linear conditions on `u1, u2`, and two
//! quadratic conditions in `H^4(B_n)`. [`extension_condition`] evaluates the closed-form
//! solution per table row. [`enumerate_algebra_automorphisms`] is an independent brute-force
//! search used to cross-check it.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fiber::{classify_automorphism, hirzebruch_table, FiberAutomorphism, TableRow};
use crate::ring::{
    halve, is_ring_iso, product_vanishes, BottTower, ClassDeg2, GradedMap,
    RingError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtensionError {
    #[error("{matrix} is not an automorphism of H*(Sigma_{a})")]
    NotAnAutomorphism { a: i64, matrix: FiberAutomorphism },
    #[error(transparent)]
    Ring(#[from] RingError),
}

type Result<T> = std::result::Result<T, ExtensionError>;

/// A `Sigma_a`-bundle over `B_n`: the tower `B_n`, `c1(xi_{n+1})`, and `c1(xi_{n+2}) = a x_{n+1} + y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "BundleRepr")]
pub struct HirzebruchBundleData {
    pub base: BottTower,
    #[serde(rename = "c1")]
    pub c1_xi_np1: ClassDeg2,
    pub a: i64,
    pub y: ClassDeg2,
}

#[derive(Deserialize)]
struct BundleRepr {
    base: BottTower,
    #[serde(alias = "c1_xi_np1")]
    c1: ClassDeg2,
    a: i64,
    y: ClassDeg2,
}

impl TryFrom<BundleRepr> for HirzebruchBundleData {
    type Error = RingError;

    fn try_from(r: BundleRepr) -> std::result::Result<Self, RingError> {
        HirzebruchBundleData::new(r.base, r.c1, r.a, r.y)
    }
}

impl HirzebruchBundleData {
    pub fn new(base: BottTower, c1_xi_np1: ClassDeg2, a: i64, y: ClassDeg2) -> std::result::Result<Self, RingError> {
        let n = base.height();
        for c in [&c1_xi_np1, &y] {
            if c.height() != n {
                return Err(RingError::HeightMismatch { expected: n, found: c.height() });
            }
        }
        if n + 2 > crate::ring::MAX_HEIGHT {
            return Err(RingError::InvalidTower("base too tall".into()));
        }
        Ok(HirzebruchBundleData { base, c1_xi_np1, a, y })
    }

    /// `Sigma_a` itself, as a bundle over the point.
    pub fn hirzebruch(a: i64) -> Self {
        HirzebruchBundleData {
            base: BottTower::point(),
            c1_xi_np1: ClassDeg2::zero(0),
            a,
            y: ClassDeg2::zero(0),
        }
    }

    pub fn n(&self) -> usize {
        self.base.height()
    }

    /// `c1(xi_{n+1})`.
    pub fn c1(&self) -> &ClassDeg2 {
        &self.c1_xi_np1
    }

    /// The height-`(n+1)` tower `B_{n+1} = P(C + xi_{n+1})`.
    pub fn stage_tower(&self) -> BottTower {
        self.base.extend(&self.c1_xi_np1).expect("heights checked on construction")
    }

    /// `c1(xi_{n+2}) = a x_{n+1} + y` as a class of `B_{n+1}`.
    pub fn xi_np2(&self) -> ClassDeg2 {
        let n = self.n();
        &self.y.embed(n + 1) + &(&ClassDeg2::basis(n + 1, n) * self.a)
    }

    /// The height-`(n+2)` tower.
    pub fn total_tower(&self) -> BottTower {
        self.stage_tower()
            .extend(&self.xi_np2())
            .expect("heights checked on construction")
    }

    /// Splits a tower of height at least 2 into its top two stages over the rest.
    pub fn from_tower(t: &BottTower) -> Option<Self> {
        let h = t.height();
        if h < 2 {
            return None;
        }
        let n = h - 2;
        let rows = t.rows();
        Some(HirzebruchBundleData {
            base: t.truncate(n),
            c1_xi_np1: ClassDeg2::new(rows[n].clone()),
            a: rows[n + 1][n],
            y: ClassDeg2::new(rows[n + 1][..n].to_vec()),
        })
    }
}

impl fmt::Display for HirzebruchBundleData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sigma_{}-bundle over {}: c1 = {}, y = {}", self.a, self.base, self.c1_xi_np1, self.y)
    }
}

/// An `H*(B_n)`-algebra automorphism of `H*(B_{n+2})` in fiber-matrix form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtensionResult {
    pub fiber_matrix: FiberAutomorphism,
    pub u1: ClassDeg2,
    pub u2: ClassDeg2,
}

impl ExtensionResult {
    /// The graded map on the height-`(n+2)` tower fixing `x_1, ..., x_n`.
    pub fn to_graded_map(&self) -> GradedMap {
        fiber_form_to_map(&self.fiber_matrix, &self.u1, &self.u2)
    }

    /// Reads off the fiber form of a map on a height-`(n+2)` tower that fixes `x_1, ..., x_n`.
    pub fn from_graded_map(m: &GradedMap) -> Option<Self> {
        let (p, u1, u2) = map_to_fiber_form(m)?;
        Some(ExtensionResult { fiber_matrix: p, u1, u2 })
    }
}

impl fmt::Display for ExtensionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} with u1 = {}, u2 = {}", self.fiber_matrix, self.u1, self.u2)
    }
}

/// Builds `x_{n+1} -> p11 x_{n+1} + p21 x_{n+2} + u1`, `x_{n+2} -> p12 x_{n+1} + p22 x_{n+2} + u2`.
pub fn fiber_form_to_map(p: &FiberAutomorphism, u1: &ClassDeg2, u2: &ClassDeg2) -> GradedMap {
    let n = u1.height();
    let mut images: Vec<ClassDeg2> = (0..n).map(|j| ClassDeg2::basis(n + 2, j)).collect();
    for (col, u) in [(0, u1), (1, u2)] {
        let mut c = u.embed(n + 2).coords().to_vec();
        c[n] = p.matrix()[0][col];
        c[n + 1] = p.matrix()[1][col];
        images.push(ClassDeg2::new(c));
    }
    GradedMap::new(images).expect("uniform heights")
}

/// Inverse of [`fiber_form_to_map`]; `None` unless the map fixes the base generators.
pub fn map_to_fiber_form(m: &GradedMap) -> Option<(FiberAutomorphism, ClassDeg2, ClassDeg2)> {
    let h = m.source_height();
    if h < 2 || m.target_height() != h || !m.fixes_prefix(h - 2) {
        return None;
    }
    let n = h - 2;
    let (z1, z2) = (m.image(n).coords(), m.image(n + 1).coords());
    let p = FiberAutomorphism::new([[z1[n], z2[n]], [z1[n + 1], z2[n + 1]]]);
    Some((p, ClassDeg2::new(z1[..n].to_vec()), ClassDeg2::new(z2[..n].to_vec())))
}

/// A side condition that can fail in the extension table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `y = -(a/2) c1(xi_{n+1})`
    YHalfRelation,
    /// `c1(xi_{n+1})` even
    C1Even,
    /// `c1(xi_{n+1}) ± y` even
    SumEven,
    /// `c1(xi_{n+1})^2 = y^2`
    SquaresEqual,
    /// `(2 ± a)/4 c1(xi_{n+1})` integral
    QuarterIntegral,
    /// `(4 - a^2) c1(xi_{n+1})^2 = 0`
    EvenSquareVanishes,
    /// `(1 - a^2) c1(xi_{n+1})^2 = 0`
    OddSquareVanishes,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::YHalfRelation => "y = -(a/2)c1(xi_{n+1})",
            Condition::C1Even => "c1(xi_{n+1}) even",
            Condition::SumEven => "c1(xi_{n+1}) +- y even",
            Condition::SquaresEqual => "c1(xi_{n+1})^2 = y^2",
            Condition::QuarterIntegral => "(2 +- a)/4 c1(xi_{n+1}) integral",
            Condition::EvenSquareVanishes => "(4 - a^2)c1(xi_{n+1})^2 = 0",
            Condition::OddSquareVanishes => "(1 - a^2)c1(xi_{n+1})^2 = 0",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ExtensionOutcome {
    Extends(ExtensionResult),
    DoesNotExtend { failed: Vec<Condition> },
}

impl ExtensionOutcome {
    pub fn extension(&self) -> Option<&ExtensionResult> {
        match self {
            ExtensionOutcome::Extends(r) => Some(r),
            ExtensionOutcome::DoesNotExtend { .. } => None,
        }
    }
}

impl fmt::Display for ExtensionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtensionOutcome::Extends(r) => write!(f, "Extends: u1 = {}, u2 = {}", r.u1, r.u2),
            ExtensionOutcome::DoesNotExtend { failed } => {
                write!(f, "DoesNotExtend: requires ")?;
                for (i, c) in failed.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; requires ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

/// `2y = -a c`, the integral form of `y = -(a/2) c`.
pub fn y_half_relation(d: &HirzebruchBundleData) -> bool {
    &d.y * 2 == &d.c1_xi_np1 * (-d.a)
}

fn square_multiple_vanishes(base: &BottTower, k: i64, c: &ClassDeg2) -> Result<bool> {
    if k == 0 {
        return Ok(true);
    }
    let kc = ClassDeg2::new(
        c.coords()
            .iter()
            .map(|&v| v.checked_mul(k).ok_or(RingError::Overflow))
            .collect::<std::result::Result<_, _>>()?,
    );
    Ok(product_vanishes(base, &kc, c)?)
}

/// Decides whether the fiber automorphism `p` of `H*(Sigma_a)` extends, and if so returns the
/// unique extension.
///
/// # Panics
/// If a returned extension fails the relation check, which would be a bug in the table.
pub fn extension_condition(d: &HirzebruchBundleData, p: &FiberAutomorphism) -> Result<ExtensionOutcome> {
    let a = d.a;
    let row = classify_automorphism(a, p)
        .ok_or(ExtensionError::NotAnAutomorphism { a, matrix: *p })?;
    let n = d.n();
    let c = &d.c1_xi_np1;
    let y = &d.y;
    let zero = ClassDeg2::zero(n);
    let mut failed = Vec::new();

    let (u1, u2) = match row {
        TableRow::Identity => (zero.clone(), zero),
        TableRow::ReflectSecond => (zero, y.clone()),
        TableRow::NegIdentity | TableRow::ReflectFirst => {
            if a == 0 {
                match row {
                    TableRow::NegIdentity => (c.clone(), y.clone()),
                    _ => (c.clone(), zero),
                }
            } else {
                if a % 2 != 0 && !c.is_even() {
                    failed.push(Condition::C1Even);
                }
                if !y_half_relation(d) {
                    failed.push(Condition::YHalfRelation);
                }
                match row {
                    TableRow::NegIdentity => (c.clone(), zero),
                    // (-1 -a; 0 1) = -I * (1 a; 0 -1)
                    _ => (c.clone(), c.scaled(a, 2).unwrap_or(zero)),
                }
            }
        }
        TableRow::Exchange { sign, delta } => {
            let (e, dl) = (i64::from(sign), i64::from(delta));
            if a == 0 {
                // p = (0 t; s 0)
                let (s, t) = (p.p21(), p.p12());
                if !(c + y).is_even() || !(c - y).is_even() {
                    failed.push(Condition::SumEven);
                }
                if !product_vanishes(&d.base, &(c - y), &(c + y))? {
                    failed.push(Condition::SquaresEqual);
                }
                let u1 = halve(&(c - &(y * s)));
                let u2 = halve(&(y - &(c * t)));
                (u1.unwrap_or_else(|| zero.clone()), u2.unwrap_or(zero))
            } else if a % 2 == 0 {
                let h = a / 2;
                let q1 = c.scaled(2 - e * a, 4);
                if q1.is_none() || c.scaled(2 + e * a, 4).is_none() {
                    failed.push(Condition::QuarterIntegral);
                }
                if !y_half_relation(d) {
                    failed.push(Condition::YHalfRelation);
                }
                if !square_multiple_vanishes(&d.base, 4 - a * a, c)? {
                    failed.push(Condition::EvenSquareVanishes);
                }
                let u2 = c.scaled(-e * (dl + h * h), 2);
                (q1.unwrap_or_else(|| zero.clone()), u2.unwrap_or(zero))
            } else {
                if !c.is_even() {
                    failed.push(Condition::C1Even);
                }
                if !y_half_relation(d) {
                    failed.push(Condition::YHalfRelation);
                }
                if !square_multiple_vanishes(&d.base, 1 - a * a, c)? {
                    failed.push(Condition::OddSquareVanishes);
                }
                let u1 = c.scaled(1 - e * a, 2);
                let u2 = c.scaled(-e * (dl + a * a), 4);
                (u1.unwrap_or_else(|| zero.clone()), u2.unwrap_or(zero))
            }
        }
    };

    if !failed.is_empty() {
        return Ok(ExtensionOutcome::DoesNotExtend { failed });
    }
    let r = ExtensionResult { fiber_matrix: *p, u1, u2 };
    let t = d.total_tower();
    assert!(
        is_ring_iso(&t, &t, &r.to_graded_map())?,
        "table extension {r} of {d} fails the relation check"
    );
    Ok(ExtensionOutcome::Extends(r))
}

/// All extensions predicted by the table, in table order.
pub fn predicted_automorphism_set(d: &HirzebruchBundleData) -> Result<Vec<ExtensionResult>> {
    let mut out = Vec::new();
    for (_, p) in hirzebruch_table(d.a) {
        if let ExtensionOutcome::Extends(r) = extension_condition(d, &p)? {
            out.push(r);
        }
    }
    Ok(out)
}

/// Calls `f` on every integer vector of length `len` with entries in `[-bound, bound]`,
/// in lexicographic order.
pub(crate) fn for_each_in_box(len: usize, bound: i64, mut f: impl FnMut(&[i64]) -> Result<()>) -> Result<()> {
    let mut v = vec![-bound; len];
    loop {
        f(&v)?;
        let mut i = len;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if v[i] < bound {
                v[i] += 1;
                break;
            }
            v[i] = -bound;
        }
    }
}

/// Brute-force search for the `H*(B_n)`-algebra automorphisms of `H*(B_{n+2})` whose images
/// of `x_{n+1}`, `x_{n+2}` have all coordinates in `[-bound, bound]`. The result is sorted.
pub fn enumerate_algebra_automorphisms(d: &HirzebruchBundleData, bound: i64) -> Result<Vec<GradedMap>> {
    enumerate_algebra_isomorphisms(d, d, bound)
}

/// Brute-force search for the `H*(B_n)`-algebra isomorphisms `H*(T(d1)) -> H*(T(d2))` with
/// images of `x_{n+1}`, `x_{n+2}` in `[-bound, bound]`.
///
/// Candidates for the image of `x_{n+1}` are filtered by its relation, then candidates for
/// `x_{n+2}` by the determinant and the second relation, and survivors by [`is_ring_iso`].
/// The result is sorted.
pub fn enumerate_algebra_isomorphisms(
    d1: &HirzebruchBundleData,
    d2: &HirzebruchBundleData,
    bound: i64,
) -> Result<Vec<GradedMap>> {
    if d1.base != d2.base {
        return Ok(Vec::new());
    }
    let first = first_image_candidates(d1.c1(), &d2.total_tower(), bound)?;
    complete_isomorphisms(d1, d2, &first, bound)
}

/// Classes `z` of height `n + 2` in the box with `z (z - c) = 0` in `H*(target)`.
pub fn first_image_candidates(c: &ClassDeg2, target: &BottTower, bound: i64) -> Result<Vec<ClassDeg2>> {
    let h = target.height();
    let c = c.embed(h);
    let mut first = Vec::new();
    for_each_in_box(h, bound, |z| {
        let z1 = ClassDeg2::new(z.to_vec());
        if product_vanishes(target, &z1, &(&z1 - &c))? {
            first.push(z1);
        }
        Ok(())
    })?;
    Ok(first)
}

/// Extends candidate images of `x_{n+1}` (from [`first_image_candidates`]) to isomorphisms.
pub fn complete_isomorphisms(
    d1: &HirzebruchBundleData,
    d2: &HirzebruchBundleData,
    first: &[ClassDeg2],
    bound: i64,
) -> Result<Vec<GradedMap>> {
    let n = d1.n();
    let (src, dst) = (d1.total_tower(), d2.total_tower());
    let y = d1.y.embed(n + 2);
    let mut found = BTreeSet::new();
    for z1 in first {
        if z1.coords()[..n].iter().any(|v| v.abs() > bound) {
            continue;
        }
        let (p11, p21) = (z1.coords()[n], z1.coords()[n + 1]);
        // image of a x_{n+1} + y
        let shifted = &(z1 * d1.a) + &y;
        for p12 in -bound..=bound {
            for p22 in -bound..=bound {
                if (p11 * p22 - p12 * p21).abs() != 1 {
                    continue;
                }
                for_each_in_box(n, bound, |u2| {
                    let mut v = u2.to_vec();
                    v.extend([p12, p22]);
                    let z2 = ClassDeg2::new(v);
                    let w = &z2 - &shifted;
                    if product_vanishes(&dst, &z2, &w)? {
                        let mut images: Vec<ClassDeg2> =
                            (0..n).map(|j| ClassDeg2::basis(n + 2, j)).collect();
                        images.push(z1.clone());
                        images.push(z2);
                        let m = GradedMap::new(images)?;
                        if is_ring_iso(&src, &dst, &m)? {
                            found.insert(m);
                        }
                    }
                    Ok(())
                })?;
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// Table-versus-oracle comparison for one bundle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub data: HirzebruchBundleData,
    pub predicted: Vec<ExtensionResult>,
    pub enumerated: Vec<ExtensionResult>,
    pub agree: bool,
}

/// The oracle box: covers `a^2 + 6` and every coordinate of the predicted extensions.
pub fn oracle_box(d: &HirzebruchBundleData, predicted: &[ExtensionResult]) -> i64 {
    predicted
        .iter()
        .map(|r| r.fiber_matrix.max_abs_entry().max(r.u1.max_abs()).max(r.u2.max_abs()))
        .fold(d.a * d.a + 6, i64::max)
}

pub fn compare_with_oracle(d: &HirzebruchBundleData, bound: Option<i64>) -> Result<ComparisonReport> {
    let mut predicted = predicted_automorphism_set(d)?;
    let bound = bound.unwrap_or_else(|| oracle_box(d, &predicted));
    let mut enumerated: Vec<ExtensionResult> = enumerate_algebra_automorphisms(d, bound)?
        .iter()
        .map(|m| ExtensionResult::from_graded_map(m).expect("oracle maps fix the base"))
        .collect();
    predicted.sort();
    enumerated.sort();
    let agree = predicted == enumerated;
    Ok(ComparisonReport { data: d.clone(), predicted, enumerated, agree })
}
