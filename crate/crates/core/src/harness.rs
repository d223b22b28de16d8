//! Bounded exhaustive sweeps over towers and bundle data.
//!
//! Every sweep is a parallel map over an ordered grid followed by an order-preserving merge,
//! so a given [`SearchConfig`] always produces the same report apart from `wall_time_ms`.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{bundles_isomorphic, realize_automorphism, Conclusion};
use crate::extension::{
    complete_isomorphisms, compare_with_oracle, first_image_candidates, oracle_box, predicted_automorphism_set,
    ExtensionError, HirzebruchBundleData,
};
use crate::ring::{is_ring_iso, product_vanishes, BottTower, ClassDeg2, GradedMap, RingError};

pub const MAX_BASE_HEIGHT: usize = 3;
pub const MAX_COEFF_BOUND: i64 = 4;
pub const MAX_MATRIX_BOUND: i64 = 64;
pub const MAX_CENSUS_HEIGHT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Extension(#[from] ExtensionError),
    #[error("thread pool: {0}")]
    Pool(String),
}

type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub base_height: usize,
    /// Box for tower entries, `a`, and the coordinates of `c1(xi_{n+1})` and `y`.
    pub coeff_bound: i64,
    /// Box for the coordinates of isomorphism images.
    pub matrix_bound: i64,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
}

impl SearchConfig {
    /// The smallest sound matrix box for the given coefficient box.
    pub fn new(base_height: usize, coeff_bound: i64) -> Self {
        SearchConfig {
            base_height,
            coeff_bound,
            matrix_bound: min_matrix_bound(coeff_bound),
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.base_height > MAX_BASE_HEIGHT {
            return bad(format!("base height {} exceeds {MAX_BASE_HEIGHT}", self.base_height));
        }
        if !(0..=MAX_COEFF_BOUND).contains(&self.coeff_bound) {
            return bad(format!("coefficient bound must lie in [0, {MAX_COEFF_BOUND}]"));
        }
        let min = min_matrix_bound(self.coeff_bound);
        if self.matrix_bound < min || self.matrix_bound > MAX_MATRIX_BOUND {
            return bad(format!(
                "matrix bound must lie in [{min}, {MAX_MATRIX_BOUND}] (at least a^2 + 6 for |a| <= {})",
                self.coeff_bound
            ));
        }
        Ok(())
    }
}

pub fn min_matrix_bound(coeff_bound: i64) -> i64 {
    coeff_bound * coeff_bound + 6
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub kind: String,
    pub source: HirzebruchBundleData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<HirzebruchBundleData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<GradedMap>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub suite: String,
    pub config: SearchConfig,
    pub instances_scanned: u64,
    pub isos_found: u64,
    pub certificates_emitted: u64,
    pub counterexamples: Vec<Counterexample>,
    /// Automorphism group order -> number of bundles.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub group_orders: BTreeMap<usize, u64>,
    pub parity_violations: u64,
    pub wall_time_ms: u64,
}

impl RigidityReport {
    fn new(suite: &str, config: SearchConfig) -> Self {
        RigidityReport {
            suite: suite.to_string(),
            config,
            instances_scanned: 0,
            isos_found: 0,
            certificates_emitted: 0,
            counterexamples: Vec::new(),
            group_orders: BTreeMap::new(),
            parity_violations: 0,
            wall_time_ms: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }

    fn absorb(&mut self, o: Outcome) {
        self.instances_scanned += o.instances;
        self.isos_found += o.isos;
        self.certificates_emitted += o.certificates;
        self.parity_violations += o.parity_violations;
        if let Some(k) = o.group_order {
            *self.group_orders.entry(k).or_default() += 1;
        }
        self.counterexamples.extend(o.counterexamples);
    }
}

#[derive(Default)]
struct Outcome {
    instances: u64,
    isos: u64,
    certificates: u64,
    parity_violations: u64,
    group_order: Option<usize>,
    counterexamples: Vec<Counterexample>,
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Calls `f` on every vector of length `len` with entries in `[-bound, bound]`, in
/// lexicographic order.
fn each_vector(len: usize, bound: i64, f: &mut impl FnMut(&[i64])) {
    let mut v = vec![-bound; len];
    loop {
        f(&v);
        let mut i = len;
        loop {
            if i == 0 {
                return;
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

/// All Bott towers of height `n` with entries in `[-bound, bound]`, lexicographic in
/// `(row 2, row 3, ...)`.
pub fn enumerate_towers(n: usize, bound: i64) -> Vec<BottTower> {
    let len = n * n.saturating_sub(1) / 2;
    let mut out = Vec::new();
    each_vector(len, bound, &mut |v| {
        let mut rows = Vec::with_capacity(n);
        let mut k = 0;
        for j in 0..n {
            rows.push(v[k..k + j].to_vec());
            k += j;
        }
        out.push(BottTower::from_rows(rows).expect("entries are small"));
    });
    out
}

/// All bundle data over towers of height `n`, ordered by `(base, c1, a, y)`.
pub fn enumerate_bundle_data(n: usize, bound: i64) -> Vec<HirzebruchBundleData> {
    let mut out = Vec::new();
    for base in enumerate_towers(n, bound) {
        each_vector(n, bound, &mut |c| {
            for a in -bound..=bound {
                each_vector(n, bound, &mut |y| {
                    let d = HirzebruchBundleData::new(base.clone(), ClassDeg2::new(c.to_vec()), a, ClassDeg2::new(y.to_vec()))
                        .expect("heights agree");
                    out.push(d);
                });
            }
        });
    }
    out
}

/// All `H*(B_n)`-algebra isomorphisms `H*(T(d1)) -> H*(T(d2))` with image coordinates in
/// the matrix box, sorted.
pub fn search_algebra_isos(
    d1: &HirzebruchBundleData,
    d2: &HirzebruchBundleData,
    cfg: &SearchConfig,
) -> Result<Vec<GradedMap>> {
    Ok(crate::extension::enumerate_algebra_isomorphisms(d1, d2, cfg.matrix_bound)?)
}

/// Checks the closed-form automorphism sets against the brute-force oracle on every bundle
/// in the box, and certifies every predicted automorphism.
pub fn verify_automorphism_groups(cfg: &SearchConfig) -> Result<RigidityReport> {
    cfg.validate()?;
    let start = Instant::now();
    let data = enumerate_bundle_data(cfg.base_height, cfg.coeff_bound);
    let outcomes = in_pool(cfg.jobs, || data.par_iter().map(|d| check_automorphisms(d, cfg.matrix_bound)).collect::<Vec<_>>())?;
    let mut report = RigidityReport::new("automorphisms", *cfg);
    for o in outcomes {
        report.absorb(o);
    }
    report.wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

fn counterexample(kind: &str, d: &HirzebruchBundleData, detail: String) -> Counterexample {
    Counterexample { kind: kind.into(), source: d.clone(), target: None, map: None, detail }
}

fn check_automorphisms(d: &HirzebruchBundleData, matrix_bound: i64) -> Outcome {
    let mut o = Outcome { instances: 1, ..Default::default() };
    let predicted = match predicted_automorphism_set(d) {
        Ok(p) => p,
        Err(e) => {
            o.counterexamples.push(counterexample("error", d, e.to_string()));
            return o;
        }
    };
    let bound = matrix_bound.max(oracle_box(d, &predicted));
    match compare_with_oracle(d, Some(bound)) {
        Ok(r) => {
            o.isos = r.enumerated.len() as u64;
            o.group_order = Some(r.predicted.len());
            if !r.agree {
                o.counterexamples.push(counterexample(
                    "oracle_disagreement",
                    d,
                    format!("predicted {} automorphisms, enumerated {}", r.predicted.len(), r.enumerated.len()),
                ));
            }
            if 8 % r.predicted.len() != 0 {
                o.counterexamples.push(counterexample("group_order", d, format!("order {} does not divide 8", r.predicted.len())));
            }
        }
        Err(e) => o.counterexamples.push(counterexample("error", d, e.to_string())),
    }
    for ext in &predicted {
        match realize_automorphism(d, ext) {
            Ok(cert) => match cert.verify() {
                Ok(()) => o.certificates += 1,
                Err(e) => o.counterexamples.push(counterexample("unsound_certificate", d, format!("{ext}: {e}"))),
            },
            Err(e) => o.counterexamples.push(counterexample("not_realized", d, format!("{ext}: {e}"))),
        }
    }
    o
}

/// For every ordered pair of bundles in the box and every algebra isomorphism between them
/// in the matrix box, builds and verifies a bundle isomorphism certificate.
pub fn verify_main_theorem(cfg: &SearchConfig) -> Result<RigidityReport> {
    cfg.validate()?;
    let start = Instant::now();
    let data = enumerate_bundle_data(cfg.base_height, cfg.coeff_bound);
    let outcomes = in_pool(cfg.jobs, || {
        data.par_iter()
            .map(|d2| check_target(d2, &data, cfg.matrix_bound))
            .collect::<Vec<_>>()
    })?;
    let mut report = RigidityReport::new("main_theorem", *cfg);
    for o in outcomes {
        report.absorb(o);
    }
    report.wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

/// All pairs `(d1, d2)` with `d2` fixed. The first-image filter depends only on
/// `c1(xi_{n+1})` of the source, so it is shared between sources.
fn check_target(d2: &HirzebruchBundleData, sources: &[HirzebruchBundleData], bound: i64) -> Outcome {
    let mut o = Outcome::default();
    let t2 = d2.total_tower();
    let mut firsts: BTreeMap<ClassDeg2, Vec<ClassDeg2>> = BTreeMap::new();
    for d1 in sources.iter().filter(|d| d.base == d2.base) {
        o.instances += 1;
        let first = match firsts.get(d1.c1()) {
            Some(f) => f,
            None => match first_image_candidates(d1.c1(), &t2, bound) {
                Ok(f) => firsts.entry(d1.c1().clone()).or_insert(f),
                Err(e) => {
                    o.counterexamples.push(counterexample("error", d1, e.to_string()));
                    continue;
                }
            },
        };
        let isos = match complete_isomorphisms(d1, d2, first, bound) {
            Ok(v) => v,
            Err(e) => {
                o.counterexamples.push(counterexample("error", d1, e.to_string()));
                continue;
            }
        };
        if isos.is_empty() {
            continue;
        }
        o.isos += isos.len() as u64;
        let pair = |kind: &str, m: &GradedMap, detail: String| Counterexample {
            kind: kind.into(),
            source: d1.clone(),
            target: Some(d2.clone()),
            map: Some(m.clone()),
            detail,
        };
        if (d1.a - d2.a) % 2 != 0 {
            o.parity_violations += 1;
            o.counterexamples.push(pair("parity", &isos[0], "algebra isomorphism between fibers of different parity".into()));
        }
        for m in &isos {
            match bundles_isomorphic(d1, d2, m) {
                Ok(cert) if cert.conclusion == Conclusion::IsomorphicOverBase => match cert.verify() {
                    Ok(()) => o.certificates += 1,
                    Err(e) => o.counterexamples.push(pair("unsound_certificate", m, e.to_string())),
                },
                Ok(_) => o.counterexamples.push(pair("not_certified", m, "no decision".into())),
                Err(e) => o.counterexamples.push(pair("classifier_error", m, e.to_string())),
            }
        }
    }
    o
}

/// Some graded ring isomorphism `H*(src) -> H*(dst)` with matrix entries in
/// `[-bound, bound]`, found by depth-first search over generator images.
///
/// The image `z_j` of `x_j` must be primitive and satisfy `z_j (z_j - φ(α_j)) = 0`, where
/// `φ(α_j)` is already fixed by the earlier images.
pub fn find_tower_iso(src: &BottTower, dst: &BottTower, bound: i64) -> Result<Option<GradedMap>> {
    let h = src.height();
    if dst.height() != h {
        return Ok(None);
    }
    let mut box_vectors = Vec::new();
    each_vector(h, bound, &mut |v| {
        if gcd_all(v) == 1 {
            box_vectors.push(ClassDeg2::new(v.to_vec()));
        }
    });
    let mut images: Vec<ClassDeg2> = Vec::with_capacity(h);
    extend_iso(src, dst, &box_vectors, &mut images)
}

fn gcd_all(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| {
        let (mut a, mut b) = (g.abs(), x.abs());
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    })
}

fn extend_iso(
    src: &BottTower,
    dst: &BottTower,
    candidates: &[ClassDeg2],
    images: &mut Vec<ClassDeg2>,
) -> Result<Option<GradedMap>> {
    let h = src.height();
    let j = images.len();
    if j == h {
        let m = GradedMap::new(images.clone())?;
        return Ok(if is_ring_iso(src, dst, &m)? { Some(m) } else { None });
    }
    let mut alpha = ClassDeg2::zero(h);
    for (l, z) in images.iter().enumerate() {
        alpha = &alpha + &(z * src.coeff(j, l));
    }
    for z in candidates {
        if !product_vanishes(dst, z, &(z - &alpha))? {
            continue;
        }
        images.push(z.clone());
        let found = extend_iso(src, dst, candidates, images)?;
        images.pop();
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusReport {
    pub height: usize,
    pub coeff_bound: i64,
    pub matrix_bound: i64,
    pub towers: u64,
    /// Towers grouped by graded ring isomorphism found in the matrix box, in order of first
    /// appearance.
    pub classes: Vec<Vec<BottTower>>,
    pub wall_time_ms: u64,
}

/// Groups the towers of the given height by cohomology ring isomorphism within the box.
pub fn census(height: usize, coeff_bound: i64, matrix_bound: i64, jobs: usize) -> Result<CensusReport> {
    if height > MAX_CENSUS_HEIGHT {
        return Err(HarnessError::InvalidConfig(format!("census height exceeds {MAX_CENSUS_HEIGHT}")));
    }
    if !(0..=MAX_COEFF_BOUND).contains(&coeff_bound) || !(0..=MAX_MATRIX_BOUND).contains(&matrix_bound) {
        return Err(HarnessError::InvalidConfig("bounds out of range".into()));
    }
    let start = Instant::now();
    let towers = enumerate_towers(height, coeff_bound);
    let classes = in_pool(jobs, || -> Result<Vec<Vec<BottTower>>> {
        let mut classes: Vec<Vec<BottTower>> = Vec::new();
        for t in &towers {
            let hits: Vec<bool> = classes
                .par_iter()
                .map(|c| find_tower_iso(t, &c[0], matrix_bound).map(|m| m.is_some()))
                .collect::<Result<_>>()?;
            match hits.iter().position(|&h| h) {
                Some(i) => classes[i].push(t.clone()),
                None => classes.push(vec![t.clone()]),
            }
        }
        Ok(classes)
    })??;
    Ok(CensusReport {
        height,
        coeff_bound,
        matrix_bound,
        towers: towers.len() as u64,
        classes,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tower_counts() {
        assert_eq!(enumerate_towers(0, 3).len(), 1);
        assert_eq!(enumerate_towers(1, 3).len(), 1);
        assert_eq!(enumerate_towers(2, 1).len(), 3);
        assert_eq!(enumerate_towers(3, 1).len(), 27);
        let t = enumerate_towers(2, 1);
        assert_eq!(t[0], BottTower::hirzebruch(-1));
        assert_eq!(t[2], BottTower::hirzebruch(1));
    }

    #[test]
    fn bundle_counts() {
        assert_eq!(enumerate_bundle_data(0, 3).len(), 7);
        assert_eq!(enumerate_bundle_data(1, 3).len(), 343);
        assert_eq!(enumerate_bundle_data(2, 1).len(), 3 * 9 * 3 * 9);
    }

    #[test]
    fn search_examples() {
        let cfg = SearchConfig::new(1, 2);
        let d = HirzebruchBundleData::hirzebruch(2);
        assert!(search_algebra_isos(&d, &d, &cfg).unwrap().contains(&GradedMap::identity(2)));
        let (s0, s1) = (HirzebruchBundleData::hirzebruch(0), HirzebruchBundleData::hirzebruch(1));
        assert!(search_algebra_isos(&s0, &s1, &cfg).unwrap().is_empty());

        // a = 0, c1 = 0 over CP^1: x3 -> -x3 + y on one bundle, x3 -> -x3 from y to -y
        let cp1 = BottTower::trivial(1);
        let mk = |y: i64| HirzebruchBundleData::new(cp1.clone(), ClassDeg2::zero(1), 0, ClassDeg2::new(vec![y])).unwrap();
        let (d1, d2) = (mk(2), mk(-2));
        let flip_y = GradedMap::from_matrix(&[vec![1, 0, 2], vec![0, 1, 0], vec![0, 0, -1]]).unwrap();
        assert!(search_algebra_isos(&d1, &d1, &cfg).unwrap().contains(&flip_y));
        let flip = GradedMap::from_matrix(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, -1]]).unwrap();
        assert!(search_algebra_isos(&d1, &d2, &cfg).unwrap().contains(&flip));
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::new(1, 2).validate().is_ok());
        let mut c = SearchConfig::new(1, 2);
        c.matrix_bound = 9;
        assert!(c.validate().is_err());
        assert!(SearchConfig::new(4, 1).validate().is_err());
        assert!(SearchConfig::new(1, 5).validate().is_err());
    }

    #[test]
    fn small_sweeps_pass_and_are_deterministic() {
        let cfg = SearchConfig::new(0, 2);
        let r = verify_automorphism_groups(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.counterexamples);
        assert_eq!(r.instances_scanned, 5);
        let mut a = verify_main_theorem(&cfg).unwrap();
        let mut b = verify_main_theorem(&SearchConfig { jobs: 1, ..cfg }).unwrap();
        assert!(a.passed(), "{:?}", a.counterexamples);
        assert_eq!(a.instances_scanned, 25);
        a.wall_time_ms = 0;
        b.wall_time_ms = 0;
        b.config.jobs = 0;
        assert_eq!(a, b);
    }

    #[test]
    fn zero_box() {
        let r = verify_automorphism_groups(&SearchConfig::new(1, 0)).unwrap();
        assert!(r.passed());
        assert_eq!(r.group_orders, BTreeMap::from([(8, 1)]));
    }

    #[test]
    fn census_height_two() {
        // Sigma_{-1}, Sigma_0, Sigma_1: two classes by parity
        let r = census(2, 1, 4, 1).unwrap();
        assert_eq!(r.towers, 3);
        assert_eq!(r.classes.len(), 2);
        assert_eq!(r.classes[0].len(), 2);
    }
}
