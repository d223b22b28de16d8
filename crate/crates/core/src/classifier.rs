//! Certificates that an algebra isomorphism between two Hirzebruch surface bundles over `B_n`
//! is induced by a bundle isomorphism.
//!
//! A certificate for `iso : H*(T(source)) -> H*(T(target))` is either a leaf (an upper
//! triangular realization, or an equivariant fiber map for `a = ±1`) or a reduction
//!
//! ```text
//! iso = post ∘ inner.iso ∘ pre^-1
//! ```
//!
//! where `pre` and `post` are cohomology maps of bundle isomorphisms built from the moves in
//! `steps`, and `inner` certifies a simpler problem. Every map in a certificate is checked
//! exactly by [`IsoCertificate::verify`].

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extension::{
    extension_condition, fiber_form_to_map, map_to_fiber_form, y_half_relation, ExtensionError,
    ExtensionOutcome, ExtensionResult, HirzebruchBundleData,
};
use crate::fiber::{classify_automorphism, evaluate_word, generator_word, FiberAutomorphism, FiberGenerator};
use crate::ring::{halve, is_ring_iso, product_vanishes, BottTower, ClassDeg2, GradedMap, RingError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error(transparent)]
    Ring(#[from] RingError),
}

impl From<ExtensionError> for ClassifyError {
    fn from(e: ExtensionError) -> Self {
        match e {
            ExtensionError::Ring(r) => ClassifyError::Ring(r),
            other => ClassifyError::Precondition(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, ClassifyError>;

fn internal<T>(msg: impl Into<String>) -> Result<T> {
    Err(ClassifyError::InternalInconsistency(msg.into()))
}

/// One move of a certificate. Classes live in the cohomology of `base`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "move")]
pub enum Step {
    /// `P(L1 + L2) = P(L1 ⊗ L + L2 ⊗ L)` with `c1(L) = twist`; `summands` are `c1(L1), c1(L2)`.
    TensorTwist { base: BottTower, summands: [ClassDeg2; 2], twist: ClassDeg2 },
    /// `P(L1 + L2) = P(M1 + M2)` because the two sums have the same total Chern class.
    DecomposableSwap { base: BottTower, summands: [ClassDeg2; 2], matched: [ClassDeg2; 2] },
    /// An upper triangular isomorphism `H*(source) -> H*(target)` of tower cohomology.
    UpperTriangularRealization { source: BottTower, target: BottTower, map: GradedMap },
    /// `(l1, l2) -> (l2, l1)` between the fiber products `P(C + γ^first) x P(C + γ^second)`
    /// and `P(C + γ^second) x P(C + γ^first)` over `base`.
    FiberProductSwap { base: BottTower, first: ClassDeg2, second: ClassDeg2 },
    /// `c1` even with `c1^2 = 0` trivializes `P(C + γ^c1)`, and `y = -(a/2) c1` makes the
    /// bundle the product `B_n x Sigma_a`.
    TrivializationViaSquareZero { base: BottTower, c1: ClassDeg2, a: i64, y: ClassDeg2 },
    /// An automorphism of `H*(Sigma_{±1})` induced by an `S^1`-equivariant diffeomorphism,
    /// extended over a bundle whose structure group reduces to `S^1`.
    S1EquivariantFiberMap {
        a: i64,
        c1: ClassDeg2,
        y: ClassDeg2,
        matrix: FiberAutomorphism,
        word: Vec<FiberGenerator>,
    },
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::TensorTwist { .. } => "TensorTwist",
            Step::DecomposableSwap { .. } => "DecomposableSwap",
            Step::UpperTriangularRealization { .. } => "UpperTriangularRealization",
            Step::FiberProductSwap { .. } => "FiberProductSwap",
            Step::TrivializationViaSquareZero { .. } => "TrivializationViaSquareZero",
            Step::S1EquivariantFiberMap { .. } => "S1EquivariantFiberMap",
        }
    }

    /// The fact each move relies on.
    pub fn citation(&self) -> &'static str {
        match self {
            Step::TensorTwist { .. } => {
                "projectivizations of V and L ⊗ V are isomorphic bundles for any line bundle L"
            }
            Step::DecomposableSwap { .. } => {
                "sums of line bundles over a Bott manifold are determined by their total Chern class"
            }
            Step::UpperTriangularRealization { .. } => {
                "an upper triangular cohomology isomorphism of Bott towers is induced by a tower isomorphism"
            }
            Step::FiberProductSwap { .. } => "the two factors of a fiber product of CP^1-bundles can be exchanged",
            Step::TrivializationViaSquareZero { .. } => {
                "P(C + L) is trivial when c1(L) is even with square zero"
            }
            Step::S1EquivariantFiberMap { .. } => {
                "automorphisms of H*(Sigma_{±1}) are induced by S^1-equivariant diffeomorphisms, \
                 which extend over bundles with structure group S^1"
            }
        }
    }

    /// Re-checks the side conditions of the move.
    pub fn verify(&self) -> std::result::Result<(), String> {
        let same = |b: &BottTower, cs: &[&ClassDeg2]| cs.iter().all(|c| c.height() == b.height());
        match self {
            Step::TensorTwist { base, summands, twist } => {
                if !same(base, &[&summands[0], &summands[1], twist]) {
                    return Err("class heights do not match the base".into());
                }
            }
            Step::DecomposableSwap { base, summands, matched } => {
                if !same(base, &[&summands[0], &summands[1], &matched[0], &matched[1]]) {
                    return Err("class heights do not match the base".into());
                }
                if &summands[0] + &summands[1] != &matched[0] + &matched[1] {
                    return Err("first Chern classes differ".into());
                }
                let lhs = crate::ring::class_product(base, &summands[0], &summands[1])
                    .map_err(|e| e.to_string())?;
                let rhs = crate::ring::class_product(base, &matched[0], &matched[1])
                    .map_err(|e| e.to_string())?;
                if lhs != rhs {
                    return Err("second Chern classes differ".into());
                }
            }
            Step::UpperTriangularRealization { source, target, map } => {
                if !map.is_upper_triangular() {
                    return Err("map is not upper triangular".into());
                }
                if !is_ring_iso(source, target, map).map_err(|e| e.to_string())? {
                    return Err("map is not a ring isomorphism".into());
                }
            }
            Step::FiberProductSwap { base, first, second } => {
                if !same(base, &[first, second]) {
                    return Err("class heights do not match the base".into());
                }
                let (s, t) = swap_towers(base, first, second);
                if !is_ring_iso(&s, &t, &swap_map(base.height())).map_err(|e| e.to_string())? {
                    return Err("swap is not a ring isomorphism".into());
                }
            }
            Step::TrivializationViaSquareZero { base, c1, a, y } => {
                if !same(base, &[c1, y]) {
                    return Err("class heights do not match the base".into());
                }
                if !c1.is_even() {
                    return Err("c1 is not even".into());
                }
                if !product_vanishes(base, c1, c1).map_err(|e| e.to_string())? {
                    return Err("c1^2 is not zero".into());
                }
                if y * 2 != c1 * -*a {
                    return Err("y != -(a/2) c1".into());
                }
            }
            Step::S1EquivariantFiberMap { a, c1, y, matrix, word } => {
                if a.abs() != 1 {
                    return Err("a is not ±1".into());
                }
                if classify_automorphism(*a, matrix).is_none() {
                    return Err("matrix is not an automorphism of H*(Sigma_a)".into());
                }
                if y * 2 != c1 * -*a {
                    return Err("y != -(a/2) c1".into());
                }
                if evaluate_word(*a, word) != Some(*matrix) {
                    return Err("generator word does not evaluate to the matrix".into());
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::TensorTwist { summands, twist, .. } => write!(
                f,
                "TensorTwist: P(γ^({}) + γ^({})) ≅ P(γ^({}) + γ^({}))",
                summands[0],
                summands[1],
                &summands[0] + twist,
                &summands[1] + twist
            ),
            Step::DecomposableSwap { summands, matched, .. } => write!(
                f,
                "DecomposableSwap: P(γ^({}) + γ^({})) ≅ P(γ^({}) + γ^({}))",
                summands[0], summands[1], matched[0], matched[1]
            ),
            Step::UpperTriangularRealization { map, .. } => {
                write!(f, "UpperTriangularRealization: {map}")
            }
            Step::FiberProductSwap { first, second, .. } => write!(
                f,
                "FiberProductSwap: P(C + γ^({first})) x P(C + γ^({second})) ≅ P(C + γ^({second})) x P(C + γ^({first}))"
            ),
            Step::TrivializationViaSquareZero { c1, a, .. } => write!(
                f,
                "TrivializationViaSquareZero: c1 = {c1} is even with square zero, bundle ≅ B_n x Sigma_{a}"
            ),
            Step::S1EquivariantFiberMap { a, matrix, word, .. } => {
                write!(f, "S1EquivariantFiberMap: {matrix} on Sigma_{a}")?;
                if !word.is_empty() {
                    let w: Vec<String> = word.iter().map(ToString::to_string).collect();
                    write!(f, " = {}", w.join(" "))?;
                }
                Ok(())
            }
        }
    }
}

fn swap_towers(base: &BottTower, first: &ClassDeg2, second: &ClassDeg2) -> (BottTower, BottTower) {
    let mk = |c: &ClassDeg2, y: &ClassDeg2| {
        HirzebruchBundleData::new(base.clone(), c.clone(), 0, y.clone())
            .expect("heights checked")
            .total_tower()
    };
    (mk(first, second), mk(second, first))
}

/// `x_{n+1} <-> x_{n+2}` on a height-`(n+2)` tower.
fn swap_map(n: usize) -> GradedMap {
    fiber_form_to_map(&FiberAutomorphism::new([[0, 1], [1, 0]]), &ClassDeg2::zero(n), &ClassDeg2::zero(n))
}

/// `x_{n+2} -> x_{n+2} + s` for a class `s` of height `n + 1`.
fn stage_shift(n: usize, s: &ClassDeg2) -> GradedMap {
    let p = FiberAutomorphism::new([[1, s.coords()[n]], [0, 1]]);
    fiber_form_to_map(&p, &ClassDeg2::zero(n), &s.truncate(n))
}

/// `x_{n+1} -> x_{n+1} + s` for a class `s` of height `n`.
fn first_shift(s: &ClassDeg2) -> GradedMap {
    fiber_form_to_map(&FiberAutomorphism::IDENTITY, s, &ClassDeg2::zero(s.height()))
}

/// A certificate that `P(C + γ^alpha) ≅ P(C + γ^beta)` over `tower`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjIsoCertificate {
    pub tower: BottTower,
    pub alpha: ClassDeg2,
    pub beta: ClassDeg2,
    /// `2c = epsilon * beta - alpha` and `c (c + alpha) = 0`.
    pub epsilon: i8,
    pub c: ClassDeg2,
    /// The induced map `H*(P(C + γ^beta)) -> H*(P(C + γ^alpha))` sends the new generator `x`
    /// to `x + shift`.
    pub shift: ClassDeg2,
    pub steps: Vec<Step>,
}

impl ProjIsoCertificate {
    /// The induced map on the height-`(k+1)` towers.
    pub fn map(&self) -> GradedMap {
        let k = self.tower.height();
        let mut images: Vec<ClassDeg2> = (0..k).map(|j| ClassDeg2::basis(k + 1, j)).collect();
        images.push(&ClassDeg2::basis(k + 1, k) + &self.shift.embed(k + 1));
        GradedMap::new(images).expect("uniform heights")
    }

    pub fn verify(&self) -> std::result::Result<(), String> {
        let e = i64::from(self.epsilon);
        if e.abs() != 1 {
            return Err("epsilon must be ±1".into());
        }
        if &self.c * 2 != &(&self.beta * e) - &self.alpha {
            return Err("2c != epsilon beta - alpha".into());
        }
        if !product_vanishes(&self.tower, &self.c, &(&self.c + &self.alpha)).map_err(|e| e.to_string())? {
            return Err("c (c + alpha) != 0".into());
        }
        for s in &self.steps {
            s.verify()?;
        }
        let src = self.tower.extend(&self.beta).map_err(|e| e.to_string())?;
        let dst = self.tower.extend(&self.alpha).map_err(|e| e.to_string())?;
        if !is_ring_iso(&src, &dst, &self.map()).map_err(|e| e.to_string())? {
            return Err("induced map is not a ring isomorphism".into());
        }
        Ok(())
    }
}

/// Decides the criterion for `P(C + γ^alpha) ≅ P(C + γ^beta)` over `tower`: some sign
/// `epsilon` and class `c` with `2c = epsilon beta - alpha` and `c (c + alpha) = 0`. Then
/// `γ^c + γ^(c + alpha)` has the total Chern class of `C + γ^(epsilon beta)`.
///
/// The criterion is sufficient, not necessary. `None` means it fails for both signs.
pub fn proj_iso_over(
    tower: &BottTower,
    alpha: &ClassDeg2,
    beta: &ClassDeg2,
) -> std::result::Result<Option<ProjIsoCertificate>, RingError> {
    let k = tower.height();
    for c in [alpha, beta] {
        if c.height() != k {
            return Err(RingError::HeightMismatch { expected: k, found: c.height() });
        }
    }
    let zero = ClassDeg2::zero(k);
    for epsilon in [1i8, -1] {
        let e = i64::from(epsilon);
        let Some(c) = halve(&(&(beta * e) - alpha)) else {
            continue;
        };
        let c_alpha = &c + alpha;
        if !product_vanishes(tower, &c, &c_alpha)? {
            continue;
        }
        let mut steps = vec![
            Step::TensorTwist {
                base: tower.clone(),
                summands: [zero.clone(), alpha.clone()],
                twist: c.clone(),
            },
            Step::DecomposableSwap {
                base: tower.clone(),
                summands: [c.clone(), c_alpha],
                matched: [zero.clone(), beta * e],
            },
        ];
        let shift = if epsilon > 0 {
            c.clone()
        } else {
            steps.push(Step::TensorTwist {
                base: tower.clone(),
                summands: [zero.clone(), -beta],
                twist: beta.clone(),
            });
            &c + beta
        };
        return Ok(Some(ProjIsoCertificate {
            tower: tower.clone(),
            alpha: alpha.clone(),
            beta: beta.clone(),
            epsilon,
            c,
            shift,
            steps,
        }));
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conclusion {
    IsomorphicOverBase,
    NotDecidedIsomorphic,
}

impl fmt::Display for Conclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conclusion::IsomorphicOverBase => write!(f, "isomorphic over the base"),
            Conclusion::NotDecidedIsomorphic => write!(f, "not decided"),
        }
    }
}

/// `iso = post ∘ inner.iso ∘ pre^-1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    /// `H*(T(inner.source)) -> H*(T(source))`
    pub pre: GradedMap,
    /// `H*(T(inner.target)) -> H*(T(target))`
    pub post: GradedMap,
    pub inner: IsoCertificate,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid certificate: {0}")]
pub struct CertificateError(pub String);

/// A certificate that `iso : H*(T(source)) -> H*(T(target))` is induced by a bundle
/// isomorphism over the common base.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsoCertificate {
    pub source: HirzebruchBundleData,
    pub target: HirzebruchBundleData,
    pub iso: GradedMap,
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<Box<Reduction>>,
    pub conclusion: Conclusion,
}

impl IsoCertificate {
    /// A certificate recording that no decision was made.
    pub fn undecided(source: HirzebruchBundleData, target: HirzebruchBundleData) -> Self {
        let n = source.n();
        IsoCertificate {
            source,
            target,
            iso: GradedMap::identity(n + 2),
            steps: Vec::new(),
            reduction: None,
            conclusion: Conclusion::NotDecidedIsomorphic,
        }
    }

    fn leaf(source: &HirzebruchBundleData, target: &HirzebruchBundleData, iso: &GradedMap, step: Step) -> Self {
        IsoCertificate {
            source: source.clone(),
            target: target.clone(),
            iso: iso.clone(),
            steps: vec![step],
            reduction: None,
            conclusion: Conclusion::IsomorphicOverBase,
        }
    }

    fn upper_triangular(source: &HirzebruchBundleData, target: &HirzebruchBundleData, iso: &GradedMap) -> Self {
        let step = Step::UpperTriangularRealization {
            source: source.total_tower(),
            target: target.total_tower(),
            map: iso.clone(),
        };
        Self::leaf(source, target, iso, step)
    }

    fn reduced(
        source: &HirzebruchBundleData,
        target: &HirzebruchBundleData,
        iso: &GradedMap,
        steps: Vec<Step>,
        pre: GradedMap,
        post: GradedMap,
        inner: IsoCertificate,
    ) -> Self {
        IsoCertificate {
            source: source.clone(),
            target: target.clone(),
            iso: iso.clone(),
            steps,
            reduction: Some(Box::new(Reduction { pre, post, inner })),
            conclusion: Conclusion::IsomorphicOverBase,
        }
    }

    /// All steps, outermost first.
    pub fn all_steps(&self) -> Vec<&Step> {
        let mut out: Vec<&Step> = self.steps.iter().collect();
        if let Some(r) = &self.reduction {
            out.extend(r.inner.all_steps());
        }
        out
    }

    pub fn depth(&self) -> usize {
        1 + self.reduction.as_ref().map_or(0, |r| r.inner.depth())
    }

    /// Re-checks every step and every map in the certificate exactly.
    pub fn verify(&self) -> std::result::Result<(), CertificateError> {
        let err = |m: String| Err(CertificateError(m));
        if self.conclusion == Conclusion::NotDecidedIsomorphic {
            return if self.steps.is_empty() && self.reduction.is_none() {
                Ok(())
            } else {
                err("an undecided certificate carries no steps".into())
            };
        }
        let ring = |e: RingError| CertificateError(e.to_string());
        if self.source.base != self.target.base {
            return err("source and target have different bases".into());
        }
        let n = self.source.n();
        let (src, dst) = (self.source.total_tower(), self.target.total_tower());
        if !self.iso.fixes_prefix(n) || !is_ring_iso(&src, &dst, &self.iso).map_err(ring)? {
            return err(format!("{} is not an algebra isomorphism over the base", self.iso));
        }
        for s in &self.steps {
            s.verify().map_err(|m| CertificateError(format!("{}: {m}", s.name())))?;
        }
        match &self.reduction {
            None => {
                let ok = self.steps.iter().any(|s| match s {
                    Step::UpperTriangularRealization { source, target, map } => {
                        *source == src && *target == dst && *map == self.iso
                    }
                    Step::S1EquivariantFiberMap { a, c1, y, matrix, .. } => {
                        self.source == self.target
                            && *a == self.source.a
                            && c1 == self.source.c1()
                            && *y == self.source.y
                            && map_to_fiber_form(&self.iso).is_some_and(|(p, _, _)| p == *matrix)
                    }
                    _ => false,
                });
                if !ok {
                    return err("leaf has no move realizing the isomorphism".into());
                }
            }
            Some(r) => {
                let inner = &r.inner;
                self.check_realizable(&r.pre, &inner.source.total_tower(), &src)?;
                self.check_realizable(&r.post, &inner.target.total_tower(), &dst)?;
                let pre_inv = r.pre.inverse().ok_or_else(|| CertificateError("pre is not invertible".into()))?;
                let composed = r.post.compose(&inner.iso).and_then(|m| m.compose(&pre_inv)).map_err(ring)?;
                if composed != self.iso {
                    return err("post ∘ inner ∘ pre^-1 differs from the isomorphism".into());
                }
                inner.verify()?;
            }
        }
        Ok(())
    }

    /// Bundle maps in a reduction: upper triangular isomorphisms fixing the base, or the swap
    /// of a fiber product listed in `steps`.
    fn check_realizable(&self, m: &GradedMap, from: &BottTower, to: &BottTower) -> std::result::Result<(), CertificateError> {
        let n = self.source.n();
        let ring = |e: RingError| CertificateError(e.to_string());
        if !m.fixes_prefix(n) || !is_ring_iso(from, to, m).map_err(ring)? {
            return Err(CertificateError(format!("{m} is not an algebra isomorphism over the base")));
        }
        if m.is_upper_triangular() {
            return Ok(());
        }
        let swap = swap_map(n);
        let justified = self.steps.iter().any(|s| match s {
            Step::FiberProductSwap { base, first, second } => {
                let (s1, s2) = swap_towers(base, first, second);
                *m == swap && ((*from == s1 && *to == s2) || (*from == s2 && *to == s1))
            }
            _ => false,
        });
        if justified {
            Ok(())
        } else {
            Err(CertificateError(format!("{m} is neither upper triangular nor a listed swap")))
        }
    }

    /// A readable rendering with the fact behind each move.
    pub fn explain(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conclusion: {}", self.conclusion);
        self.explain_into(&mut out, 0);
        out
    }

    fn explain_into(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        let _ = writeln!(out, "{pad}{} -> {}", self.source, self.target);
        let _ = writeln!(out, "{pad}  iso: {}", self.iso);
        for s in &self.steps {
            let _ = writeln!(out, "{pad}  - {s}");
            let _ = writeln!(out, "{pad}    because {}", s.citation());
        }
        if let Some(r) = &self.reduction {
            let _ = writeln!(out, "{pad}  reduces with pre = [{}], post = [{}] to:", r.pre, r.post);
            r.inner.explain_into(out, depth + 1);
        }
    }
}

fn compose(a: &GradedMap, b: &GradedMap) -> Result<GradedMap> {
    Ok(a.compose(b)?)
}

fn invert(m: &GradedMap) -> Result<GradedMap> {
    match m.inverse() {
        Some(i) => Ok(i),
        None => internal(format!("{m} is not invertible")),
    }
}

/// `a^-1 ∘ m ∘ b`
fn conjugate(a: &GradedMap, m: &GradedMap, b: &GradedMap) -> Result<GradedMap> {
    compose(&invert(a)?, &compose(m, b)?)
}

fn require_proj(tower: &BottTower, alpha: &ClassDeg2, beta: &ClassDeg2, what: &str) -> Result<ProjIsoCertificate> {
    match proj_iso_over(tower, alpha, beta)? {
        Some(p) => Ok(p),
        None => internal(format!("{what}: P(C + γ^({alpha})) ≇ P(C + γ^({beta})) by the twist criterion")),
    }
}

fn check_algebra_iso(d1: &HirzebruchBundleData, d2: &HirzebruchBundleData, m: &GradedMap) -> Result<()> {
    if d1.base != d2.base {
        return Err(ClassifyError::Precondition("bundles have different bases".into()));
    }
    let n = d1.n();
    if m.source_height() != n + 2 || m.target_height() != n + 2 {
        return Err(ClassifyError::Precondition(format!("map must act on towers of height {}", n + 2)));
    }
    if !m.fixes_prefix(n) {
        return Err(ClassifyError::Precondition("map does not fix H^2(B_n)".into()));
    }
    if !is_ring_iso(&d1.total_tower(), &d2.total_tower(), m)? {
        return Err(ClassifyError::Precondition(format!("{m} is not a ring isomorphism")));
    }
    Ok(())
}

fn with_data(base: &BottTower, c: &ClassDeg2, a: i64, y: &ClassDeg2) -> HirzebruchBundleData {
    HirzebruchBundleData::new(base.clone(), c.clone(), a, y.clone()).expect("heights agree")
}

/// `m = W ∘ rho` with `W` the swap `T(d) -> T(d')`, `d = (c, 0, y)`, `d' = (y, 0, c)`.
fn swap_certificate(d: &HirzebruchBundleData, swapped: &HirzebruchBundleData, m: &GradedMap) -> Result<IsoCertificate> {
    let w = swap_map(d.n());
    let rho = compose(&invert(&w)?, m)?;
    if !rho.is_upper_triangular() {
        return internal(format!("{rho} is not upper triangular after the swap"));
    }
    let step = Step::FiberProductSwap { base: d.base.clone(), first: d.c1().clone(), second: d.y.clone() };
    let inner = IsoCertificate::upper_triangular(d, d, &rho);
    Ok(IsoCertificate::reduced(d, swapped, m, vec![step], GradedMap::identity(d.n() + 2), w, inner))
}

/// For even `a != 0` with `2y = -a c`: `d0 = (c, 0, y)` and `G : H*(T(d0)) -> H*(T(d))`.
fn untwist_even(d: &HirzebruchBundleData) -> Result<(HirzebruchBundleData, GradedMap, Vec<Step>)> {
    let n = d.n();
    if d.a == 0 {
        return Ok((d.clone(), GradedMap::identity(n + 2), Vec::new()));
    }
    if !y_half_relation(d) {
        return internal(format!("{d}: y != -(a/2) c1 for even a"));
    }
    let p = require_proj(&d.stage_tower(), &d.xi_np2(), &d.y.embed(n + 1), "even untwist")?;
    let d0 = with_data(&d.base, d.c1(), 0, &d.y);
    Ok((d0, stage_shift(n, &p.shift), p.steps))
}

/// For odd `a` with `c` even, `c^2 = 0`, `2y = -a c`: `triv = (0, a, 0)` and
/// `G : H*(T(triv)) -> H*(T(d))`.
fn trivialize(d: &HirzebruchBundleData) -> Result<(HirzebruchBundleData, GradedMap, Vec<Step>)> {
    let n = d.n();
    let c = d.c1();
    if !c.is_even() || !product_vanishes(&d.base, c, c)? || !y_half_relation(d) {
        return internal(format!("{d}: cannot trivialize (needs c1 even, c1^2 = 0, y = -(a/2) c1)"));
    }
    let p = require_proj(&d.base, c, &ClassDeg2::zero(n), "trivialization")?;
    let triv = with_data(&d.base, &ClassDeg2::zero(n), d.a, &ClassDeg2::zero(n));
    let mut steps = vec![Step::TrivializationViaSquareZero {
        base: d.base.clone(),
        c1: c.clone(),
        a: d.a,
        y: d.y.clone(),
    }];
    steps.extend(p.steps);
    Ok((triv, first_shift(&p.shift), steps))
}

/// For product bundles `(0, a, 0)` and `(0, b, 0)` with `a ≡ b mod 2`:
/// `H : H*(T(target)) -> H*(T(source))`.
fn product_fiber_change(
    source: &HirzebruchBundleData,
    target: &HirzebruchBundleData,
) -> Result<(GradedMap, Vec<Step>)> {
    let n = source.n();
    let x = ClassDeg2::basis(n + 1, n);
    let p = require_proj(&source.stage_tower(), &(&x * source.a), &(&x * target.a), "fiber change")?;
    Ok((stage_shift(n, &p.shift), p.steps))
}

/// Certifies that the `H*(B_n)`-algebra automorphism `ext` of `H*(B_{n+2})` is induced by a
/// bundle automorphism over `B_n`.
pub fn realize_automorphism(d: &HirzebruchBundleData, ext: &ExtensionResult) -> Result<IsoCertificate> {
    realize(d, &ext.to_graded_map())
}

/// Like [`realize_automorphism`], for an automorphism given as a graded map.
pub fn realize(d: &HirzebruchBundleData, m: &GradedMap) -> Result<IsoCertificate> {
    check_algebra_iso(d, d, m)?;
    let n = d.n();
    let (p, _, _) = map_to_fiber_form(m).expect("checked above");
    if p.is_upper_triangular() {
        return Ok(IsoCertificate::upper_triangular(d, d, m));
    }
    let a = d.a;
    let c = d.c1();
    if a == 0 {
        // B_{n+2} is the fiber product of P(C + γ^c) and P(C + γ^y); make both factors equal
        let pi = require_proj(&d.base, &d.y, c, "fiber product factor")?;
        let k = stage_shift(n, &pi.shift.embed(n + 1));
        let dpp = with_data(&d.base, c, 0, c);
        let conj = conjugate(&k, m, &k)?;
        let inner = swap_certificate(&dpp, &dpp, &conj)?;
        Ok(IsoCertificate::reduced(d, d, m, pi.steps, k.clone(), k, inner))
    } else if a % 2 == 0 {
        let (d0, g, steps) = untwist_even(d)?;
        let inner = realize(&d0, &conjugate(&g, m, &g)?)?;
        Ok(IsoCertificate::reduced(d, d, m, steps, g.clone(), g, inner))
    } else if a.abs() != 1 {
        let (triv, g1, mut steps) = trivialize(d)?;
        let sigma1 = with_data(&d.base, &ClassDeg2::zero(n), 1, &ClassDeg2::zero(n));
        let (h, fiber_steps) = product_fiber_change(&triv, &sigma1)?;
        steps.extend(fiber_steps);
        let g = compose(&g1, &h)?;
        let inner = realize(&sigma1, &conjugate(&g, m, &g)?)?;
        Ok(IsoCertificate::reduced(d, d, m, steps, g.clone(), g, inner))
    } else {
        if !y_half_relation(d) {
            return internal(format!("{d}: y != -(a/2) c1 for a = ±1"));
        }
        match extension_condition(d, &p)? {
            ExtensionOutcome::Extends(r) if r.to_graded_map() == *m => {}
            other => return internal(format!("{m} is not the unique extension of {p}: {other}")),
        }
        let word = generator_word(a, &p)
            .ok_or_else(|| ClassifyError::InternalInconsistency(format!("{p} is not a word in f*, g1*, g2*")))?;
        let step = Step::S1EquivariantFiberMap { a, c1: c.clone(), y: d.y.clone(), matrix: p, word };
        Ok(IsoCertificate::leaf(d, d, m, step))
    }
}

/// Certifies that the `H*(B_n)`-algebra isomorphism `iso : H*(T(d1)) -> H*(T(d2))` is induced
/// by a bundle isomorphism over `B_n`.
pub fn bundles_isomorphic(
    d1: &HirzebruchBundleData,
    d2: &HirzebruchBundleData,
    iso: &GradedMap,
) -> Result<IsoCertificate> {
    classify_pair(d1, d2, iso, 0)
}

const MAX_PULLBACK_DEPTH: usize = 2;

fn classify_pair(
    d1: &HirzebruchBundleData,
    d2: &HirzebruchBundleData,
    psi: &GradedMap,
    depth: usize,
) -> Result<IsoCertificate> {
    check_algebra_iso(d1, d2, psi)?;
    let n = d1.n();
    let (p, v1, v2) = map_to_fiber_form(psi).expect("checked above");
    if p.is_upper_triangular() {
        return Ok(IsoCertificate::upper_triangular(d1, d2, psi));
    }
    let (a, b) = (d1.a, d2.a);
    if (a - b) % 2 != 0 {
        return internal(format!("algebra isomorphism between Sigma_{a} and Sigma_{b} bundles"));
    }
    let (c, y) = (d1.c1(), &d1.y);
    let (c2, y2) = (d2.c1(), &d2.y);

    if a == 0 && b == 0 {
        // psi(x1) = s1 x2', psi(x2) = s2 x1'
        if p.p11() != 0 || p.p22() != 0 || p.p21().abs() != 1 || p.p12().abs() != 1 {
            return Err(ClassifyError::Precondition(format!("{p} does not match square-zero classes")));
        }
        let (s1, s2) = (p.p21(), p.p12());
        if &v1 * 2 != c - &(y2 * s1) || &v2 * 2 != y - &(c2 * s2) {
            return internal("v1, v2 differ from the values forced by the relations");
        }
        if !product_vanishes(&d1.base, &(c - y2), &(c + y2))? || !product_vanishes(&d1.base, &(c2 - y), &(c2 + y))? {
            return internal("c1^2 = y'^2 or c1'^2 = y^2 fails");
        }
        let pa = require_proj(&d1.base, c, y2, "first factor")?;
        let pb = require_proj(&d1.base, y, c2, "second factor")?;
        let swapped = with_data(&d1.base, y, 0, c);
        // U : H*(T(d2)) -> H*(T(swapped))
        let u = fiber_form_to_map(&FiberAutomorphism::IDENTITY, &pb.shift, &pa.shift);
        let inner = swap_certificate(d1, &swapped, &compose(&u, psi)?)?;
        let mut steps = pa.steps;
        steps.extend(pb.steps);
        return Ok(IsoCertificate::reduced(d1, d2, psi, steps, GradedMap::identity(n + 2), invert(&u)?, inner));
    }

    if a % 2 == 0 {
        let (d1z, g1, mut steps) = untwist_even(d1)?;
        let (d2z, g2, steps2) = untwist_even(d2)?;
        steps.extend(steps2);
        let inner = classify_pair(&d1z, &d2z, &conjugate(&g2, psi, &g1)?, depth)?;
        return Ok(IsoCertificate::reduced(d1, d2, psi, steps, g1, g2, inner));
    }

    // both odd: psi(x1) = s1 (2 x2' - b x1'), psi(2 x2 - a x1) = s2 x1'
    if !y_half_relation(d1) || !y_half_relation(d2) {
        return internal("y = -(a/2) c1 fails on an odd side");
    }
    let col1 = [p.p11(), p.p21()];
    let s1 = [1i64, -1]
        .into_iter()
        .find(|s| col1 == [-s * b, 2 * s])
        .ok_or_else(|| ClassifyError::Precondition(format!("{p}: image of x1 is not ±(2x2' - a'x1')")))?;
    let w = [2 * p.p12() - a * p.p11(), 2 * p.p22() - a * p.p21()];
    let s2 = [1i64, -1]
        .into_iter()
        .find(|s| w == [*s, 0])
        .ok_or_else(|| ClassifyError::Precondition(format!("{p}: image of 2x2 - a x1 is not ±x1'")))?;
    if &v1 * 2 != &(c2 * (s1 * b)) + c {
        return internal("v1 != (s1 a' c1' + c1)/2");
    }
    if !product_vanishes(&d1.base, &(&(c2 * b) - c), &(&(c2 * b) + c))? {
        return internal("a'^2 c1'^2 != c1^2");
    }
    if &v2 * 4 != c2 * (s1 * a * b - s2) {
        return internal("v2 != ((s1 a a' - s2)/4) c1'");
    }
    let k = a * a * b * b - 1;
    if !product_vanishes(&d1.base, &(c2 * k), c2)? {
        return internal("(a^2 a'^2 - 1) c1'^2 != 0");
    }

    if k != 0 {
        let (t1, g1, mut steps) = trivialize(d1)?;
        let (t2, g2, steps2) = trivialize(d2)?;
        steps.extend(steps2);
        let psi_t = conjugate(&g2, psi, &g1)?;
        // H : H*(T(t2)) -> H*(T(t1)); the residual H ∘ psi_t is an automorphism of T(t1)
        let (h, fiber_steps) = product_fiber_change(&t1, &t2)?;
        let rho = compose(&h, &psi_t)?;
        let residual = realize(&t1, &rho)?;
        let inner = IsoCertificate::reduced(&t1, &t2, &psi_t, fiber_steps, GradedMap::identity(n + 2), invert(&h)?, residual);
        return Ok(IsoCertificate::reduced(d1, d2, psi, steps, g1, g2, inner));
    }

    if c == c2 {
        // same stage; match c1(xi_{n+2}) and c1(xi'_{n+2}) directly
        let sp = require_proj(&d1.stage_tower(), &d1.xi_np2(), &d2.xi_np2(), "top stage")?;
        let f = stage_shift(n, &sp.shift);
        let rho = compose(&f, psi)?;
        let residual = realize(d1, &rho)?;
        return Ok(IsoCertificate::reduced(d1, d2, psi, sp.steps, GradedMap::identity(n + 2), invert(&f)?, residual));
    }

    if depth >= MAX_PULLBACK_DEPTH {
        return internal("pull-back recursion exceeded its bound");
    }
    // pull xi'_{n+2} back along P(C + γ^c) ≅ P(C + γ^c')
    let ph = require_proj(&d1.base, c, c2, "middle stage")?;
    let y3 = &(&ph.shift * b) + y2;
    let d3 = with_data(&d1.base, c, b, &y3);
    // Gd : H*(T(d2)) -> H*(T(d3))
    let gd = first_shift(&ph.shift);
    let inner = classify_pair(d1, &d3, &compose(&gd, psi)?, depth + 1)?;
    Ok(IsoCertificate::reduced(d1, d2, psi, ph.steps, GradedMap::identity(n + 2), invert(&gd)?, inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::predicted_automorphism_set;

    fn over_cp1(c: i64, a: i64, y: i64) -> HirzebruchBundleData {
        HirzebruchBundleData::new(BottTower::trivial(1), ClassDeg2::new(vec![c]), a, ClassDeg2::new(vec![y])).unwrap()
    }

    fn cv(v: &[i64]) -> ClassDeg2 {
        ClassDeg2::new(v.to_vec())
    }

    #[test]
    fn proj_examples() {
        let cp1 = BottTower::trivial(1);
        for k in -3..=3 {
            let p = proj_iso_over(&cp1, &cv(&[2 * k]), &cv(&[0])).unwrap().unwrap();
            assert_eq!(p.c, cv(&[-k]));
            p.verify().unwrap();
        }
        let p = proj_iso_over(&cp1, &cv(&[1]), &cv(&[3])).unwrap().unwrap();
        assert_eq!((p.epsilon, p.c.clone()), (1, cv(&[1])));
        p.verify().unwrap();
        let p = proj_iso_over(&cp1, &cv(&[5]), &cv(&[5])).unwrap().unwrap();
        assert_eq!((p.epsilon, p.c.clone()), (1, cv(&[0])));
        assert!(proj_iso_over(&cp1, &cv(&[1]), &cv(&[0])).unwrap().is_none());
    }

    #[test]
    fn proj_sign_of_beta_is_irrelevant() {
        // c(c + alpha) = (beta^2 - alpha^2)/4 for both signs, so epsilon = +1 always suffices
        let t = BottTower::from_rows(vec![vec![], vec![1]]).unwrap();
        for a1 in -3..=3 {
            for a2 in -3..=3 {
                for b1 in -3..=3 {
                    for b2 in -3..=3 {
                        let (al, be) = (cv(&[a1, a2]), cv(&[b1, b2]));
                        let p = proj_iso_over(&t, &al, &be).unwrap();
                        let q = proj_iso_over(&t, &al, &-&be).unwrap();
                        assert_eq!(p.is_some(), q.is_some());
                        if let Some(p) = p {
                            assert_eq!(p.epsilon, 1);
                            p.verify().unwrap();
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn identity_is_upper_triangular() {
        let d = over_cp1(1, 2, -1);
        let cert = bundles_isomorphic(&d, &d, &GradedMap::identity(3)).unwrap();
        assert_eq!(cert.conclusion, Conclusion::IsomorphicOverBase);
        assert!(matches!(cert.steps[..], [Step::UpperTriangularRealization { .. }]));
        cert.verify().unwrap();
    }

    #[test]
    fn realize_every_predicted_automorphism() {
        let mut datas = vec![HirzebruchBundleData::hirzebruch(0)];
        for a in -4..=4 {
            datas.push(HirzebruchBundleData::hirzebruch(a));
            for c in -2..=2 {
                for y in -2..=2 {
                    datas.push(over_cp1(c, a, y));
                }
            }
        }
        let mut kinds = std::collections::BTreeSet::new();
        for d in &datas {
            for ext in predicted_automorphism_set(d).unwrap() {
                let cert = realize_automorphism(d, &ext).unwrap();
                cert.verify().unwrap_or_else(|e| panic!("{d}: {ext}: {e}"));
                kinds.extend(cert.all_steps().iter().map(|s| s.name()));
            }
        }
        for k in ["UpperTriangularRealization", "FiberProductSwap", "TrivializationViaSquareZero", "S1EquivariantFiberMap", "TensorTwist", "DecomposableSwap"] {
            assert!(kinds.contains(k), "{k} never used");
        }
    }

    #[test]
    fn a_zero_swap() {
        let d = over_cp1(1, 0, 1);
        let psi = fiber_form_to_map(&FiberAutomorphism::new([[0, 1], [1, 0]]), &cv(&[0]), &cv(&[0]));
        let cert = bundles_isomorphic(&d, &d, &psi).unwrap();
        cert.verify().unwrap();
        assert!(cert.all_steps().iter().any(|s| matches!(s, Step::FiberProductSwap { .. })));
    }

    #[test]
    fn tampered_certificates_fail() {
        let d = over_cp1(2, 1, -1);
        let ext = ExtensionResult {
            fiber_matrix: FiberAutomorphism::new([[1, 0], [-2, -1]]),
            u1: cv(&[0]),
            u2: cv(&[0]),
        };
        let cert = realize_automorphism(&d, &ext).unwrap();
        cert.verify().unwrap();
        let mut bad = cert.clone();
        bad.iso = GradedMap::identity(3);
        assert!(bad.verify().is_err());

        let d = over_cp1(1, 0, 1);
        let psi = fiber_form_to_map(&FiberAutomorphism::new([[0, -1], [-1, 0]]), &cv(&[1]), &cv(&[1]));
        let cert = bundles_isomorphic(&d, &d, &psi).unwrap();
        cert.verify().unwrap();
        let mut bad = cert.clone();
        bad.reduction.as_mut().unwrap().pre = stage_shift(1, &cv(&[2, 0]));
        assert!(bad.verify().is_err());
    }

    #[test]
    fn rejects_non_isomorphisms() {
        let (d1, d2) = (HirzebruchBundleData::hirzebruch(0), HirzebruchBundleData::hirzebruch(1));
        assert!(matches!(
            bundles_isomorphic(&d1, &d2, &GradedMap::identity(2)),
            Err(ClassifyError::Precondition(_))
        ));
    }

    #[test]
    fn certificate_json_roundtrip() {
        let d = over_cp1(1, 0, 1);
        let psi = fiber_form_to_map(&FiberAutomorphism::new([[0, 1], [1, 0]]), &cv(&[0]), &cv(&[0]));
        let cert = bundles_isomorphic(&d, &d, &psi).unwrap();
        let s = serde_json::to_string(&cert).unwrap();
        let back: IsoCertificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cert);
        assert!(s.contains(r#""move":"FiberProductSwap""#));
        assert!(cert.explain().contains("because"));
    }
}
