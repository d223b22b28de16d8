//! The fiber `Sigma_a`: automorphisms of `H*(Sigma_a) = Z[x1, x2] / (x1^2, x2 (x2 - a x1))`,
//! its diffeomorphism type, and its primitive square-zero classes.

use std::collections::{hash_map::Entry, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ring::{is_ring_iso, BottTower, GradedMap};

/// A 2x2 integer matrix over the fiber basis `(x1, x2)`, stored row-major.
///
/// Columns are images: `x1 -> m[0][0] x1 + m[1][0] x2` and `x2 -> m[0][1] x1 + m[1][1] x2`.
/// In the notation `p_ij`, `p_ij = m[i-1][j-1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiberAutomorphism {
    m: [[i64; 2]; 2],
}

impl FiberAutomorphism {
    pub const IDENTITY: FiberAutomorphism = FiberAutomorphism { m: [[1, 0], [0, 1]] };

    pub const fn new(m: [[i64; 2]; 2]) -> Self {
        FiberAutomorphism { m }
    }

    /// From four integers in row-major order.
    pub const fn from_row_major(v: [i64; 4]) -> Self {
        FiberAutomorphism { m: [[v[0], v[1]], [v[2], v[3]]] }
    }

    pub fn matrix(&self) -> [[i64; 2]; 2] {
        self.m
    }

    pub fn p11(&self) -> i64 {
        self.m[0][0]
    }
    pub fn p12(&self) -> i64 {
        self.m[0][1]
    }
    pub fn p21(&self) -> i64 {
        self.m[1][0]
    }
    pub fn p22(&self) -> i64 {
        self.m[1][1]
    }

    pub fn determinant(&self) -> i64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn is_upper_triangular(&self) -> bool {
        self.m[1][0] == 0
    }

    /// Matrix product `self * inner` (apply `inner` first).
    pub fn compose(&self, inner: &FiberAutomorphism) -> FiberAutomorphism {
        let (a, b) = (&self.m, &inner.m);
        let mut m = [[0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        FiberAutomorphism { m }
    }

    /// Inverse of a matrix with determinant `±1`.
    pub fn inverse(&self) -> Option<FiberAutomorphism> {
        let d = self.determinant();
        if d.abs() != 1 {
            return None;
        }
        let m = &self.m;
        Some(FiberAutomorphism { m: [[d * m[1][1], -d * m[0][1]], [-d * m[1][0], d * m[0][0]]] })
    }

    pub fn negated(&self) -> FiberAutomorphism {
        let m = &self.m;
        FiberAutomorphism { m: [[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]] }
    }

    /// Image of the class `v[0] x1 + v[1] x2`.
    pub fn apply(&self, v: [i64; 2]) -> [i64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn to_graded_map(&self) -> GradedMap {
        GradedMap::from_matrix(&[self.m[0].to_vec(), self.m[1].to_vec()])
            .expect("2x2 matrix is rectangular")
    }

    /// Whether the matrix is a graded ring automorphism of `H*(Sigma_a)`.
    pub fn is_automorphism_of(&self, a: i64) -> bool {
        let t = hirzebruch_tower(a);
        is_ring_iso(&t, &t, &self.to_graded_map()).unwrap_or(false)
    }

    pub fn max_abs_entry(&self) -> i64 {
        self.m.iter().flatten().map(|v| v.abs()).max().unwrap_or(0)
    }
}

impl fmt::Display for FiberAutomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}; {} {})", self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1])
    }
}

/// `Sigma_a` as the height-2 tower.
pub fn hirzebruch_tower(a: i64) -> BottTower {
    BottTower::hirzebruch(a)
}

/// Rows of the automorphism table of `H*(Sigma_a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TableRow {
    Identity,
    NegIdentity,
    /// `(1 a; 0 -1)`
    ReflectSecond,
    /// `(-1 -a; 0 1)`
    ReflectFirst,
    /// `sign * (a/2, a^2/4 + delta; -1, -a/2)` for even `a`,
    /// `sign * (a, (a^2 + delta)/2; -2, -a)` for odd `a`. The determinant is `delta`.
    Exchange { sign: i8, delta: i8 },
}

impl TableRow {
    pub fn is_upper_triangular(&self) -> bool {
        !matches!(self, TableRow::Exchange { .. })
    }

    pub fn matrix(&self, a: i64) -> FiberAutomorphism {
        match *self {
            TableRow::Identity => FiberAutomorphism::IDENTITY,
            TableRow::NegIdentity => FiberAutomorphism::new([[-1, 0], [0, -1]]),
            TableRow::ReflectSecond => FiberAutomorphism::new([[1, a], [0, -1]]),
            TableRow::ReflectFirst => FiberAutomorphism::new([[-1, -a], [0, 1]]),
            TableRow::Exchange { sign, delta } => {
                let (e, d) = (i64::from(sign), i64::from(delta));
                let base = if a % 2 == 0 {
                    let h = a / 2;
                    FiberAutomorphism::new([[h, h * h + d], [-1, -h]])
                } else {
                    FiberAutomorphism::new([[a, (a * a + d) / 2], [-2, -a]])
                };
                if e < 0 {
                    base.negated()
                } else {
                    base
                }
            }
        }
    }
}

impl fmt::Display for TableRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableRow::Identity => write!(f, "identity"),
            TableRow::NegIdentity => write!(f, "minus identity"),
            TableRow::ReflectSecond => write!(f, "upper triangular, x2 -> a x1 - x2"),
            TableRow::ReflectFirst => write!(f, "upper triangular, x1 -> -x1"),
            TableRow::Exchange { sign, delta } => write!(
                f,
                "exchange, sign {}, determinant {}",
                if *sign > 0 { "+" } else { "-" },
                delta
            ),
        }
    }
}

pub const TABLE_ROWS: [TableRow; 8] = [
    TableRow::Identity,
    TableRow::NegIdentity,
    TableRow::ReflectSecond,
    TableRow::ReflectFirst,
    TableRow::Exchange { sign: 1, delta: -1 },
    TableRow::Exchange { sign: -1, delta: -1 },
    TableRow::Exchange { sign: 1, delta: 1 },
    TableRow::Exchange { sign: -1, delta: 1 },
];

/// The table of all 8 automorphisms of `H*(Sigma_a)` with their row labels.
///
/// # Panics
/// If `a^2` overflows.
pub fn hirzebruch_table(a: i64) -> Vec<(TableRow, FiberAutomorphism)> {
    assert!(a.checked_mul(a).is_some(), "a = {a} is too large");
    TABLE_ROWS.iter().map(|r| (*r, r.matrix(a))).collect()
}

/// The 8 automorphisms of `H*(Sigma_a)`: four upper triangular ones, and four exchanging
/// the square-zero lines.
pub fn hirzebruch_automorphisms(a: i64) -> Vec<FiberAutomorphism> {
    hirzebruch_table(a).into_iter().map(|(_, m)| m).collect()
}

/// The table row of `p`, if it is an automorphism of `H*(Sigma_a)`.
pub fn classify_automorphism(a: i64, p: &FiberAutomorphism) -> Option<TableRow> {
    hirzebruch_table(a).into_iter().find(|(_, m)| m == p).map(|(r, _)| r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiffeoType {
    /// Diffeomorphic to `Sigma_0 = CP^1 x CP^1`.
    EvenType,
    /// Diffeomorphic to `Sigma_1`.
    OddType,
}

impl fmt::Display for DiffeoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffeoType::EvenType => write!(f, "even (Sigma_0)"),
            DiffeoType::OddType => write!(f, "odd (Sigma_1)"),
        }
    }
}

pub fn diffeo_type(a: i64) -> DiffeoType {
    if a % 2 == 0 {
        DiffeoType::EvenType
    } else {
        DiffeoType::OddType
    }
}

/// The primitive classes `z = c[0] x1 + c[1] x2` with `z^2 = 0`, as `[z, -z, w, -w]` with
/// `z = x1` and `w = x2 - (a/2) x1` (even `a`) or `w = 2 x2 - a x1` (odd `a`).
pub fn primitive_square_zero(a: i64) -> Vec<[i64; 2]> {
    let w = if a % 2 == 0 { [-a / 2, 1] } else { [-a, 2] };
    vec![[1, 0], [-1, 0], w, [-w[0], -w[1]]]
}

/// The cohomology maps of the three explicit diffeomorphisms of `Sigma_a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FiberGenerator {
    F,
    G1,
    G2,
}

impl fmt::Display for FiberGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiberGenerator::F => write!(f, "f*"),
            FiberGenerator::G1 => write!(f, "g1*"),
            FiberGenerator::G2 => write!(f, "g2*"),
        }
    }
}

/// `f* : x1 -> x1 - 2a x2, x2 -> -x2`, defined for `a = ±1`.
pub fn induced_f(a: i64) -> Option<FiberAutomorphism> {
    (a.abs() == 1).then(|| FiberAutomorphism::new([[1, 0], [-2 * a, -1]]))
}

/// `g1* = (1 a; 0 -1)`.
pub fn induced_g1(a: i64) -> FiberAutomorphism {
    FiberAutomorphism::new([[1, a], [0, -1]])
}

/// `g2* = (-1 -a; 0 1)`.
pub fn induced_g2(a: i64) -> FiberAutomorphism {
    FiberAutomorphism::new([[-1, -a], [0, 1]])
}

fn generator_matrix(a: i64, g: FiberGenerator) -> Option<FiberAutomorphism> {
    match g {
        FiberGenerator::F => induced_f(a),
        FiberGenerator::G1 => Some(induced_g1(a)),
        FiberGenerator::G2 => Some(induced_g2(a)),
    }
}

/// Evaluates a word `[w1, ..., wk]` as the matrix product `w1 * ... * wk`.
pub fn evaluate_word(a: i64, word: &[FiberGenerator]) -> Option<FiberAutomorphism> {
    word.iter().try_fold(FiberAutomorphism::IDENTITY, |acc, &g| {
        Some(acc.compose(&generator_matrix(a, g)?))
    })
}

/// A shortest word in `f*`, `g1*`, `g2*` evaluating to `target` (see [`evaluate_word`]).
///
/// For `a = ±1` these three generate all 8 automorphisms. For other `a` only `g1*`, `g2*`
/// are available and the search covers the upper triangular part.
pub fn generator_word(a: i64, target: &FiberAutomorphism) -> Option<Vec<FiberGenerator>> {
    let gens: Vec<(FiberGenerator, FiberAutomorphism)> =
        [FiberGenerator::F, FiberGenerator::G1, FiberGenerator::G2]
            .into_iter()
            .filter_map(|g| Some((g, generator_matrix(a, g)?)))
            .collect();
    let mut parent: HashMap<FiberAutomorphism, Option<(FiberAutomorphism, FiberGenerator)>> =
        HashMap::from([(FiberAutomorphism::IDENTITY, None)]);
    let mut queue = VecDeque::from([FiberAutomorphism::IDENTITY]);
    while let Some(cur) = queue.pop_front() {
        if cur == *target {
            let mut word = Vec::new();
            let mut at = cur;
            while let Some(Some((prev, g))) = parent.get(&at) {
                word.push(*g);
                at = *prev;
            }
            word.reverse();
            return Some(word);
        }
        for (g, m) in &gens {
            let next = cur.compose(m);
            // every generator lies in the order-8 table group, so the search terminates
            if let Entry::Vacant(e) = parent.entry(next) {
                e.insert(Some((cur, *g)));
                queue.push_back(next);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::ClassDeg2;
    use std::collections::BTreeSet;

    #[test]
    fn table_entries_are_automorphisms() {
        for a in -7..=7 {
            let autos = hirzebruch_automorphisms(a);
            assert_eq!(autos.len(), 8);
            assert_eq!(autos.iter().collect::<BTreeSet<_>>().len(), 8, "a = {a}");
            for p in &autos {
                assert!(p.is_automorphism_of(a), "a = {a}, p = {p}");
            }
        }
    }

    #[test]
    fn table_is_a_group() {
        for a in -5..=5 {
            let set: BTreeSet<_> = hirzebruch_automorphisms(a).into_iter().collect();
            for p in &set {
                assert!(set.contains(&p.inverse().unwrap()));
                for q in &set {
                    assert!(set.contains(&p.compose(q)), "a = {a}: {p} * {q}");
                }
            }
        }
    }

    #[test]
    fn a_zero_gives_signed_permutations() {
        let got: BTreeSet<_> = hirzebruch_automorphisms(0).into_iter().collect();
        let mut want = BTreeSet::new();
        for s in [-1, 1] {
            for t in [-1, 1] {
                want.insert(FiberAutomorphism::new([[s, 0], [0, t]]));
                want.insert(FiberAutomorphism::new([[0, s], [t, 0]]));
            }
        }
        assert_eq!(got, want);
    }

    #[test]
    fn table_examples() {
        assert!(hirzebruch_automorphisms(1).contains(&FiberAutomorphism::new([[1, 0], [-2, -1]])));
        assert!(hirzebruch_automorphisms(2).contains(&FiberAutomorphism::new([[1, 0], [-1, -1]])));
    }

    #[test]
    fn reflect_first_sign() {
        // (-1 a; 0 1) fails the relation check for a != 0; (-1 -a; 0 1) passes
        for a in [-3i64, -1, 1, 2, 5] {
            assert!(!FiberAutomorphism::new([[-1, a], [0, 1]]).is_automorphism_of(a));
            assert!(FiberAutomorphism::new([[-1, -a], [0, 1]]).is_automorphism_of(a));
        }
    }

    #[test]
    fn parity() {
        assert_eq!(diffeo_type(0), DiffeoType::EvenType);
        assert_eq!(diffeo_type(-3), DiffeoType::OddType);
        assert_eq!(diffeo_type(4), DiffeoType::EvenType);
    }

    #[test]
    fn square_zero_examples() {
        let set = |a| primitive_square_zero(a).into_iter().collect::<BTreeSet<_>>();
        assert_eq!(set(0), BTreeSet::from([[1, 0], [-1, 0], [0, 1], [0, -1]]));
        assert_eq!(set(1), BTreeSet::from([[1, 0], [-1, 0], [-1, 2], [1, -2]]));
        assert_eq!(set(2), BTreeSet::from([[1, 0], [-1, 0], [-1, 1], [1, -1]]));
    }

    #[test]
    fn square_zero_brute_force() {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        for a in -6i64..=6 {
            let t = hirzebruch_tower(a);
            let mut found = BTreeSet::new();
            for al in -10i64..=10 {
                for be in -10i64..=10 {
                    if gcd(al, be) != 1 {
                        continue;
                    }
                    let z = ClassDeg2::new(vec![al, be]);
                    if crate::ring::square(&t, &z).unwrap().is_zero() {
                        found.insert([al, be]);
                    }
                }
            }
            let want: BTreeSet<_> = primitive_square_zero(a)
                .into_iter()
                .filter(|v| v[0].abs() <= 10 && v[1].abs() <= 10)
                .collect();
            assert_eq!(found, want, "a = {a}");
        }
    }

    #[test]
    fn induced_generators() {
        for a in [-1, 1] {
            let f = induced_f(a).unwrap();
            assert!(f.is_automorphism_of(a));
            assert!(induced_g1(a).is_automorphism_of(a));
            assert!(induced_g2(a).is_automorphism_of(a));
            for p in hirzebruch_automorphisms(a) {
                let w = generator_word(a, &p).expect("every automorphism is a word");
                assert_eq!(evaluate_word(a, &w), Some(p));
            }
        }
        assert_eq!(induced_f(2), None);
        assert_eq!(generator_word(1, &FiberAutomorphism::IDENTITY), Some(vec![]));
    }

    #[test]
    fn classify_rows() {
        for a in -4..=4 {
            for (row, m) in hirzebruch_table(a) {
                assert_eq!(classify_automorphism(a, &m), Some(row));
                assert_eq!(row.is_upper_triangular(), m.is_upper_triangular());
                assert_eq!(m.determinant(), match row {
                    TableRow::Identity | TableRow::NegIdentity => 1,
                    TableRow::ReflectSecond | TableRow::ReflectFirst => -1,
                    TableRow::Exchange { delta, .. } => i64::from(delta),
                });
            }
        }
        assert_eq!(classify_automorphism(1, &FiberAutomorphism::new([[2, 1], [1, 1]])), None);
    }

    #[test]
    fn json_is_row_major() {
        let p = FiberAutomorphism::new([[1, 3], [0, -1]]);
        assert_eq!(serde_json::to_string(&p).unwrap(), "[[1,3],[0,-1]]");
    }
}
