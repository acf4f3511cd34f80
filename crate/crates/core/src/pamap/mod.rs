//! Piecewise-affine hyperbolic maps with an invariant linear splitting.

mod builtin;
mod io;

pub use builtin::{builtin, builtin_names, Params};
pub use io::{from_json, load, to_json, MapFile};

use crate::error::{Error, Result};
use crate::exactgeom::{
    int, line_components, LineProbe, Point, Polytope, RatMatrix, Rational, Surd,
};
use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::BTreeMap;

/// Invariant splitting `E^u ⊕ E^s`, each given by a basis of vectors with
/// entries in a real quadratic field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HyperbolicSplitting {
    eu: Vec<Vec<Surd>>,
    es: Vec<Vec<Surd>>,
}

impl HyperbolicSplitting {
    pub fn new(eu: Vec<Vec<Surd>>, es: Vec<Vec<Surd>>) -> Result<Self> {
        let d = eu.len() + es.len();
        for v in eu.iter().chain(&es) {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        let all: Vec<Vec<Surd>> = eu.iter().chain(&es).cloned().collect();
        if crate::exactgeom::surd_rank(&all) != d {
            return Err(Error::InvalidMap("splitting frame is not invertible".into()));
        }
        Ok(Self { eu, es })
    }

    /// Coordinate splitting: the first `d_u` axes unstable, the rest stable.
    pub fn axes(d_u: usize, d_s: usize) -> Self {
        let d = d_u + d_s;
        let e = |i: usize| -> Vec<Surd> {
            (0..d)
                .map(|j| if i == j { Surd::one() } else { Surd::zero() })
                .collect()
        };
        Self {
            eu: (0..d_u).map(e).collect(),
            es: (d_u..d).map(e).collect(),
        }
    }

    pub fn eu(&self) -> &[Vec<Surd>] {
        &self.eu
    }

    pub fn es(&self) -> &[Vec<Surd>] {
        &self.es
    }

    pub fn d_u(&self) -> usize {
        self.eu.len()
    }

    pub fn d_s(&self) -> usize {
        self.es.len()
    }

    pub fn dim(&self) -> usize {
        self.eu.len() + self.es.len()
    }

    /// The frame `M` with columns `(E^u, E^s)`.
    pub fn frame(&self) -> DMatrix<f64> {
        let d = self.dim();
        let cols: Vec<&Vec<Surd>> = self.eu.iter().chain(&self.es).collect();
        DMatrix::from_fn(d, d, |i, j| cols[j][i].to_f64())
    }

    /// Is `A·span(basis) ⊆ span(basis)`, exactly?
    fn preserves(a: &RatMatrix, basis: &[Vec<Surd>]) -> bool {
        if basis.is_empty() {
            return true;
        }
        basis.iter().all(|v| {
            let img: Vec<Surd> = (0..a.dim())
                .map(|i| crate::exactgeom::rational_dot_surd(a.row(i), v))
                .collect();
            let mut rows = basis.to_vec();
            rows.push(img);
            crate::exactgeom::surd_rank(&rows) == basis.len()
        })
    }

    pub fn is_invariant_under(&self, a: &RatMatrix) -> bool {
        Self::preserves(a, &self.eu) && Self::preserves(a, &self.es)
    }

    /// `(λ_s, λ_u)`: the norm of `A` on `E^s` and the conorm of `A` on `E^u`,
    /// in the Euclidean metric. A missing subspace contributes `λ_s = 0` or
    /// `λ_u = +∞`.
    pub fn rates(&self, a: &RatMatrix) -> (f64, f64) {
        let af = a.to_f64();
        let sv = |basis: &[Vec<Surd>]| -> Option<Vec<f64>> {
            if basis.is_empty() {
                return None;
            }
            let d = self.dim();
            let b = DMatrix::from_fn(d, basis.len(), |i, j| basis[j][i].to_f64());
            let q = b.qr().q();
            let m = &af * q;
            Some(m.singular_values().iter().copied().collect())
        };
        let ls = sv(&self.es).map_or(0.0, |s| s.into_iter().fold(0.0, f64::max));
        let lu = sv(&self.eu).map_or(f64::INFINITY, |s| s.into_iter().fold(f64::INFINITY, f64::min));
        (ls, lu)
    }
}

#[derive(Clone, Debug)]
pub struct AffineBranch {
    a: RatMatrix,
    a_inv: Option<RatMatrix>,
    b: Vec<Rational>,
    domain: Polytope,
    g: Rational,
}

impl AffineBranch {
    /// `x ↦ A x + b` on `domain`, with constant weight `g`. A singular `A` is
    /// accepted here and rejected by [`PiecewiseAffineMap::validate`].
    pub fn new(a: RatMatrix, b: Vec<Rational>, domain: Polytope, g: Rational) -> Result<Self> {
        let d = a.dim();
        if b.len() != d || domain.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: if b.len() != d { b.len() } else { domain.dim() },
            });
        }
        let a_inv = a.inverse().ok();
        Ok(Self {
            a,
            a_inv,
            b,
            domain,
            g,
        })
    }

    pub fn matrix(&self) -> &RatMatrix {
        &self.a
    }

    pub fn inverse(&self) -> Result<&RatMatrix> {
        self.a_inv.as_ref().ok_or(Error::SingularMatrix)
    }

    pub fn translation(&self) -> &[Rational] {
        &self.b
    }

    pub fn domain(&self) -> &Polytope {
        &self.domain
    }

    pub fn weight(&self) -> &Rational {
        &self.g
    }

    pub fn det(&self) -> Rational {
        self.a.det()
    }

    pub fn apply(&self, x: &[Rational]) -> Point {
        self.a
            .mul_vec(x)
            .into_iter()
            .zip(&self.b)
            .map(|(y, c)| y + c)
            .collect()
    }

    /// `T(P)` for `P ⊆ domain`.
    pub fn image_of(&self, p: &Polytope) -> Result<Polytope> {
        Ok(p.affine_image_with_inverse(&self.a, self.inverse()?, &self.b))
    }

    pub fn image(&self) -> Result<Polytope> {
        self.image_of(&self.domain)
    }

    /// `T⁻¹(P)`, not intersected with the domain.
    pub fn preimage_of(&self, p: &Polytope) -> Result<Polytope> {
        let a_inv = self.inverse()?;
        let shift: Vec<Rational> = a_inv.mul_vec(&self.b).into_iter().map(|x| -x).collect();
        Ok(p.affine_image_with_inverse(a_inv, &self.a, &shift))
    }

    fn with_domain_and_shift(&self, domain: Polytope, shift: &[Rational]) -> Self {
        Self {
            a: self.a.clone(),
            a_inv: self.a_inv.clone(),
            b: self.b.iter().zip(shift).map(|(x, s)| x + s).collect(),
            domain,
            g: self.g.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PiecewiseAffineMap {
    name: String,
    fundamental_box: Polytope,
    branches: Vec<AffineBranch>,
    splitting: HyperbolicSplitting,
    alpha: f64,
    torus: bool,
    partition: Vec<Polytope>,
    metadata: BTreeMap<String, String>,
}

impl PiecewiseAffineMap {
    /// `partition` is the geometric partition the map was defined on; when
    /// `None` it is the list of branch domains. Torus maps split by
    /// [`split_mod1`] keep their pre-split partition here.
    pub fn new(
        name: impl Into<String>,
        fundamental_box: Polytope,
        branches: Vec<AffineBranch>,
        splitting: HyperbolicSplitting,
        torus: bool,
        partition: Option<Vec<Polytope>>,
    ) -> Result<Self> {
        let d = fundamental_box.dim();
        if splitting.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: splitting.dim(),
            });
        }
        if branches.is_empty() {
            return Err(Error::InvalidMap("map has no branches".into()));
        }
        for br in &branches {
            if br.a.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: br.a.dim(),
                });
            }
        }
        let partition =
            partition.unwrap_or_else(|| branches.iter().map(|b| b.domain.clone()).collect());
        Ok(Self {
            name: name.into(),
            fundamental_box,
            branches,
            splitting,
            alpha: 1.0,
            torus,
            partition,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, key: &str, value: &str) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.fundamental_box.dim()
    }

    pub fn fundamental_box(&self) -> &Polytope {
        &self.fundamental_box
    }

    pub fn branches(&self) -> &[AffineBranch] {
        &self.branches
    }

    pub fn splitting(&self) -> &HyperbolicSplitting {
        &self.splitting
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_torus(&self) -> bool {
        self.torus
    }

    pub fn partition(&self) -> &[Polytope] {
        &self.partition
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// `K`: total number of facets of the defining partition.
    pub fn partition_facets(&self) -> usize {
        self.partition.iter().map(Polytope::facet_count).sum()
    }

    /// Side lengths of the fundamental box (the torus periods).
    pub fn periods(&self) -> Vec<Rational> {
        box_bounds(&self.fundamental_box)
            .map(|(lo, hi)| lo.iter().zip(&hi).map(|(l, h)| h - l).collect())
            .unwrap_or_default()
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// Exact `(lo, hi)` corners of an axis-aligned box.
pub fn box_bounds(p: &Polytope) -> Option<(Point, Point)> {
    let vs = p.vertices();
    if vs.is_empty() {
        return None;
    }
    let d = p.dim();
    let lo = (0..d)
        .map(|i| vs.iter().map(|v| v[i].clone()).min().unwrap())
        .collect();
    let hi = (0..d)
        .map(|i| vs.iter().map(|v| v[i].clone()).max().unwrap())
        .collect();
    Some((lo, hi))
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchReport {
    pub index: usize,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub det: String,
    pub invertible: bool,
    pub splitting_invariant: bool,
    pub contracting: bool,
    pub expanding: bool,
    pub image_in_box: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub map: String,
    pub passed: bool,
    pub branches: Vec<BranchReport>,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn check(name: &str, failing: &[String]) -> Check {
    Check {
        name: name.to_string(),
        passed: failing.is_empty(),
        detail: if failing.is_empty() {
            "ok".to_string()
        } else {
            failing.join("; ")
        },
    }
}

fn validate(map: &PiecewiseAffineMap) -> ValidationReport {
    let sp = &map.splitting;
    let bx = &map.fundamental_box;
    let mut branches = Vec::new();
    let (mut singular, mut variant, mut weak_s, mut weak_u, mut outside, mut off_box) =
        (vec![], vec![], vec![], vec![], vec![], vec![]);
    for (i, br) in map.branches.iter().enumerate() {
        let invertible = br.a_inv.is_some();
        let invariant = sp.is_invariant_under(&br.a);
        let (ls, lu) = if invertible { sp.rates(&br.a) } else { (f64::NAN, f64::NAN) };
        let contracting = sp.d_s() == 0 || ls < 1.0;
        let expanding = sp.d_u() == 0 || lu > 1.0;
        let image_in_box = br
            .image()
            .map(|img| img.vertices().iter().all(|v| bx.contains(v)))
            .unwrap_or(false);
        if !invertible {
            singular.push(format!("branch {i}: singular matrix"));
        }
        if invertible && !invariant {
            variant.push(format!("branch {i}: splitting not invariant"));
        }
        if invertible && !contracting {
            weak_s.push(format!("branch {i}: lambda_s = {ls} is not < 1"));
        }
        if invertible && !expanding {
            weak_u.push(format!("branch {i}: lambda_u = {lu} is not > 1"));
        }
        if invertible && !image_in_box {
            outside.push(format!("branch {i}: image leaves the box"));
        }
        if !br.domain.vertices().iter().all(|v| bx.contains(v)) {
            off_box.push(format!("branch {i}: domain leaves the box"));
        }
        branches.push(BranchReport {
            index: i,
            lambda_s: ls,
            lambda_u: lu,
            det: crate::exactgeom::format_rational(&br.det()),
            invertible,
            splitting_invariant: invariant,
            contracting,
            expanding,
            image_in_box,
        });
    }
    let mut overlaps = vec![];
    for i in 0..map.branches.len() {
        for j in i + 1..map.branches.len() {
            let (p, q) = (&map.branches[i].domain, &map.branches[j].domain);
            if !p.bbox_overlaps(q, 0.0) {
                continue;
            }
            let v = p.intersect(q).map(|x| x.volume()).unwrap_or_else(|_| int(0));
            if v.is_positive() {
                overlaps.push(format!("branches {i} and {j} overlap"));
            }
        }
    }
    let covered: Rational = map.branches.iter().map(|b| b.domain.volume()).sum();
    let total = bx.volume();
    let cover = if overlaps.is_empty() && off_box.is_empty() && covered != total {
        vec![format!(
            "domains cover volume {} of {}",
            crate::exactgeom::format_rational(&covered),
            crate::exactgeom::format_rational(&total)
        )]
    } else {
        vec![]
    };
    off_box.extend(cover);
    let checks = vec![
        check("invertibility", &singular),
        check("splitting_invariance", &variant),
        check("contraction", &weak_s),
        check("expansion", &weak_u),
        check("images_in_box", &outside),
        check("disjointness", &overlaps),
        check("cover", &off_box),
    ];
    ValidationReport {
        map: map.name.clone(),
        passed: checks.iter().all(|c| c.passed),
        branches,
        checks,
    }
}

/// Splits a branch so that every piece, after an integer-period translation,
/// maps into the box. Volumes of the pieces sum to the original domain's.
pub fn split_mod1(branch: &AffineBranch, fundamental_box: &Polytope) -> Result<Vec<AffineBranch>> {
    let (lo, hi) = box_bounds(fundamental_box)
        .ok_or_else(|| Error::InvalidMap("empty fundamental box".into()))?;
    let d = lo.len();
    let period: Vec<Rational> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
    let img = branch.image()?;
    if img.is_empty() {
        return Ok(vec![]);
    }
    let (ilo, ihi) = box_bounds(&img).expect("non-empty image");
    // integer translate range per axis
    let ranges: Vec<(i64, i64)> = (0..d)
        .map(|i| {
            let a = ((&ilo[i] - &lo[i]) / &period[i]).floor();
            let b = ((&ihi[i] - &lo[i]) / &period[i]).ceil();
            (
                num_traits::ToPrimitive::to_i64(&a.to_integer()).unwrap_or(0),
                num_traits::ToPrimitive::to_i64(&b.to_integer()).unwrap_or(0),
            )
        })
        .collect();
    let mut shifts: Vec<Vec<i64>> = vec![vec![]];
    for &(a, b) in &ranges {
        shifts = shifts
            .into_iter()
            .flat_map(|s| {
                (a..b.max(a + 1)).map(move |m| {
                    let mut t = s.clone();
                    t.push(m);
                    t
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for m in shifts {
        let offset: Vec<Rational> = (0..d).map(|i| &period[i] * int(m[i])).collect();
        let cell = fundamental_box.translate(&offset);
        let piece = img.intersect(&cell)?;
        if !piece.has_interior() {
            continue;
        }
        let dom = branch.preimage_of(&piece)?;
        let neg: Vec<Rational> = offset.iter().map(|x| -x).collect();
        out.push(branch.with_domain_and_shift(dom, &neg));
    }
    Ok(out)
}

/// Depth-`n` cell `O_𝐢` and its image `T_𝐢(O_𝐢)` for a code `𝐢`, by forward
/// clipping.
pub fn code_cell(map: &PiecewiseAffineMap, code: &[usize]) -> Result<(Polytope, Polytope)> {
    let Some(&first) = code.first() else {
        return Err(Error::InvalidParameter("empty code".into()));
    };
    let br = map
        .branches
        .get(first)
        .ok_or_else(|| Error::InvalidParameter(format!("branch {first} out of range")))?;
    let mut cell = br.domain.clone();
    let mut image = br.image()?;
    let (mut a, mut b) = (br.a.clone(), br.b.clone());
    for &j in &code[1..] {
        let bj = map
            .branches
            .get(j)
            .ok_or_else(|| Error::InvalidParameter(format!("branch {j} out of range")))?;
        let part = image.intersect(&bj.domain)?;
        if !part.has_interior() {
            return Err(Error::EmptyCell(code.to_vec()));
        }
        let composed_inv = a.inverse()?;
        let shift: Vec<Rational> = composed_inv.mul_vec(&b).into_iter().map(|x| -x).collect();
        cell = part.affine_image_with_inverse(&composed_inv, &a, &shift);
        image = bj.image_of(&part)?;
        a = bj.a.mul(&a);
        b = bj.apply(&b);
    }
    if !cell.has_interior() {
        return Err(Error::EmptyCell(code.to_vec()));
    }
    Ok((cell, image))
}

/// Rates of the composed branch `T_𝐢`.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeRates {
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub det: Rational,
    pub g: Rational,
}

/// Rates of `A_{i_{n-1}}⋯A_{i_0}` without checking that the cell is
/// non-empty.
pub fn composed_rates(map: &PiecewiseAffineMap, code: &[usize]) -> CodeRates {
    let d = map.dim();
    let mut a = RatMatrix::identity(d);
    let mut g = Rational::one();
    let mut det = Rational::one();
    for &i in code {
        let br = &map.branches[i];
        a = br.a.mul(&a);
        g *= &br.g;
        det *= br.det();
    }
    let (lambda_s, lambda_u) = map.splitting.rates(&a);
    CodeRates {
        lambda_s,
        lambda_u,
        det,
        g,
    }
}

/// `(λ_{s,n}, λ_{u,n}, det DT^n, g^{(n)})` on the cell of `code`; errors when
/// the cell is empty.
pub fn stable_rates(map: &PiecewiseAffineMap, code: &[usize]) -> Result<CodeRates> {
    code_cell(map, code)?;
    Ok(composed_rates(map, code))
}

#[derive(Clone, Debug, Serialize)]
pub struct TransversalityReport {
    /// `None` means no finite bound was certified.
    pub l: Option<usize>,
    pub max_crossings: usize,
    pub lines: usize,
    pub degenerate_lines: usize,
}

/// Van der Corput radical inverse of `i` in base `b`, as an exact rational.
fn radical_inverse(mut i: u64, b: u64) -> Rational {
    let mut num = Rational::zero();
    let mut scale = Rational::new(1.into(), b.into());
    while i > 0 {
        num += &scale * int((i % b) as i64);
        i /= b;
        scale /= int(b as i64);
    }
    num
}

/// Samples stable-direction lines through deterministic low-discrepancy base
/// points and counts how often each crosses the partition boundary.
/// Lines lying in a boundary facet are flagged and skipped.
///
/// Samples are nested: `samples = m` uses the first `m` base points of the
/// `samples = m + 1` run.
pub fn transversality_l(map: &PiecewiseAffineMap, samples: usize) -> Result<TransversalityReport> {
    let d = map.dim();
    let pieces = map.partition();
    let (lo, hi) = box_bounds(&map.fundamental_box)
        .ok_or_else(|| Error::InvalidMap("empty fundamental box".into()))?;
    let primes = [2u64, 3, 5];
    let mut max_crossings = 0;
    let mut degenerate_lines = 0;
    let mut lines = 0;
    let directions: Vec<Vec<Surd>> = map.splitting.es().to_vec();
    for k in 1..=samples as u64 {
        let base: Vec<Rational> = (0..d)
            .map(|i| &lo[i] + (&hi[i] - &lo[i]) * radical_inverse(k, primes[i]))
            .collect();
        for dir in &directions {
            let probe = LineProbe::new(base.clone(), dir.clone())?;
            let r = line_components(pieces, &probe)?;
            lines += 1;
            if r.degenerate {
                degenerate_lines += 1;
                continue;
            }
            max_crossings = max_crossings.max(r.boundary_crossings);
        }
    }
    let l = if pieces.len() > 1 { max_crossings.max(1) } else { 0 };
    Ok(TransversalityReport {
        l: Some(l),
        max_crossings,
        lines,
        degenerate_lines,
    })
}

/// Branch whose closed domain contains `x`, lowest index first.
pub fn branch_at(map: &PiecewiseAffineMap, x: &[Rational]) -> Option<usize> {
    map.branches.iter().position(|b| b.domain.contains(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::rat;

    fn p(name: &str, kv: &[(&str, &str)]) -> PiecewiseAffineMap {
        let params: Params = kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        builtin(name, &params).unwrap()
    }

    #[test]
    fn baker_validates() {
        let r = p("baker", &[]).validate();
        assert!(r.passed, "{:?}", r.failures());
        for b in &r.branches {
            assert!((b.lambda_s - 0.5).abs() < 1e-12);
            assert!((b.lambda_u - 2.0).abs() < 1e-12);
            assert_eq!(b.det, "1/1");
        }
    }

    #[test]
    fn dissipative_baker_validates() {
        let r = p("dissipative_baker", &[]).validate();
        assert!(r.passed, "{:?}", r.failures());
        for b in &r.branches {
            assert!((b.lambda_s - 1.0 / 3.0).abs() < 1e-12);
            assert!((b.lambda_u - 2.0).abs() < 1e-12);
            assert_eq!(b.det, "2/3");
        }
    }

    #[test]
    fn identity_branch_is_not_hyperbolic() {
        let bx = Polytope::unit_box(2).unwrap();
        let br = AffineBranch::new(RatMatrix::identity(2), vec![int(0), int(0)], bx.clone(), int(1)).unwrap();
        let map = PiecewiseAffineMap::new("id", bx, vec![br], HyperbolicSplitting::axes(1, 1), false, None).unwrap();
        let r = map.validate();
        assert!(!r.passed);
        assert!((r.branches[0].lambda_s - 1.0).abs() < 1e-12);
        assert!(r.failures().iter().any(|c| c.name == "contraction"));
    }

    #[test]
    fn all_builtins_validate() {
        for name in builtin_names() {
            let r = p(name, &[]).validate();
            assert!(r.passed, "{name}: {:?}", r.failures());
        }
        let r = p("sloppy_baker", &[("a", "1/3"), ("b", "1/7")]).validate();
        assert!(r.passed, "{:?}", r.failures());
    }

    #[test]
    fn split_of_baker_branch() {
        let bx = Polytope::unit_box(2).unwrap();
        let br = AffineBranch::new(RatMatrix::diag(&[int(2), rat(1, 2)]), vec![int(0), int(0)], bx.clone(), int(1)).unwrap();
        let parts = split_mod1(&br, &bx).unwrap();
        assert_eq!(parts.len(), 2);
        let vol: Rational = parts.iter().map(|b| b.domain().volume()).sum();
        assert_eq!(vol, int(1));
        for part in &parts {
            assert!(part.image().unwrap().vertices().iter().all(|v| bx.contains(v)));
        }
        let id = AffineBranch::new(RatMatrix::identity(2), vec![int(0), int(0)], bx.clone(), int(1)).unwrap();
        let same = split_mod1(&id, &bx).unwrap();
        assert_eq!(same.len(), 1);
        assert_eq!(same[0].domain(), &bx);
        assert_eq!(same[0].translation(), id.translation());
    }

    #[test]
    fn split_of_sloppy_left_branch_counts_translates() {
        let bx = Polytope::unit_box(2).unwrap();
        let dom = Polytope::from_box(&[int(0), int(0)], &[rat(1, 2), int(1)]).unwrap();
        let br = AffineBranch::new(
            RatMatrix::diag(&[int(2), rat(1, 2)]),
            vec![rat(1, 3), rat(1, 7)],
            dom.clone(),
            int(1),
        )
        .unwrap();
        // image [1/3, 4/3] x [1/7, 9/14] meets the translates (0,0) and (1,0)
        let img = br.image().unwrap();
        let met = [0i64, 1, -1]
            .iter()
            .flat_map(|&i| [0i64, 1, -1].map(move |j| (i, j)))
            .filter(|&(i, j)| {
                img.intersect(&bx.translate(&[int(i), int(j)])).unwrap().has_interior()
            })
            .count();
        let parts = split_mod1(&br, &bx).unwrap();
        assert_eq!(parts.len(), met);
        assert_eq!(met, 2);
        let vol: Rational = parts.iter().map(|b| b.domain().volume()).sum();
        assert_eq!(vol, dom.volume());
    }

    #[test]
    fn transversality() {
        let baker = p("baker", &[]);
        let r = transversality_l(&baker, 64).unwrap();
        assert_eq!(r.l, Some(1));
        assert!(r.degenerate_lines > 0);
        let cat = p("cat_squares", &[]);
        let r = transversality_l(&cat, 64).unwrap();
        assert!(r.l.unwrap() >= 1 && r.l.unwrap() <= cat.partition_facets());
        let bx = Polytope::unit_box(2).unwrap();
        let br = AffineBranch::new(RatMatrix::diag(&[int(2), rat(1, 2)]), vec![int(0), int(0)], bx.clone(), int(1)).unwrap();
        let single = PiecewiseAffineMap::new("one", bx, vec![br], HyperbolicSplitting::axes(1, 1), true, None).unwrap();
        assert_eq!(transversality_l(&single, 16).unwrap().l, Some(0));
    }

    #[test]
    fn composed_rates_are_products() {
        let baker = p("baker", &[]);
        let r = stable_rates(&baker, &[0, 1]).unwrap();
        assert!((r.lambda_s - 0.25).abs() < 1e-12);
        assert!((r.lambda_u - 4.0).abs() < 1e-12);
        assert_eq!(r.det, int(1));
        let diss = p("dissipative_baker", &[]);
        for code in [[0, 0, 0], [0, 1, 1], [1, 0, 1]] {
            let r = stable_rates(&diss, &code).unwrap();
            assert!((r.lambda_s - 1.0 / 27.0).abs() < 1e-12);
            assert_eq!(r.det, rat(8, 27));
        }
        let one = stable_rates(&baker, &[1]).unwrap();
        let v = &baker.validate().branches[1];
        assert!((one.lambda_s - v.lambda_s).abs() < 1e-15);
        assert!((one.lambda_u - v.lambda_u).abs() < 1e-15);
    }

    #[test]
    fn empty_code_cell_is_an_error() {
        // the dissipative baker's images avoid y in (1/3, 2/3), so no
        // second-step cell exists that starts and lands at those heights;
        // every code still has positive volume, so use an out-of-range code
        let diss = p("dissipative_baker", &[]);
        assert!(stable_rates(&diss, &[0, 2]).is_err());
        let cp = p("contracting_pair", &[]);
        // [-1,0] lands in [-1/2,0]; it never reaches [2,3]
        assert!(matches!(stable_rates(&cp, &[0, 3]), Err(Error::EmptyCell(_))));
    }

    #[test]
    fn cat_splitting_is_invariant_and_irrational() {
        let cat = p("cat_squares", &[]);
        let a = cat.branches()[0].matrix();
        assert!(cat.splitting().is_invariant_under(a));
        let (ls, lu) = cat.splitting().rates(a);
        let golden = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((lu - golden).abs() < 1e-12);
        assert!((ls - 1.0 / golden).abs() < 1e-12);
        assert_eq!(cat.partition_facets(), 16);
    }
}
