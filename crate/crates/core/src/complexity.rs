//! Code-cell refinement `O_𝐢`, the complexities at the beginning and at the
//! end, and the covering multiplicity.

use crate::error::{Error, Result};
use crate::exactgeom::{int, to_f64, Point, Polytope, RatMatrix, Rational};
use crate::pamap::{box_bounds, CodeRates, HyperbolicSplitting, PiecewiseAffineMap};
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;

pub const DEFAULT_CELL_BUDGET: usize = 1_000_000;

/// A depth-`n` cell together with the composed branch `T_𝐢 = A x + b` on it.
#[derive(Clone, Debug)]
pub struct CodeCell {
    pub code: Vec<usize>,
    pub cell: Polytope,
    pub image: Polytope,
    pub matrix: RatMatrix,
    pub inverse: RatMatrix,
    pub translation: Vec<Rational>,
    pub g: Rational,
    pub det: Rational,
}

impl CodeCell {
    pub fn rates(&self, splitting: &HyperbolicSplitting) -> CodeRates {
        let (lambda_s, lambda_u) = splitting.rates(&self.matrix);
        CodeRates {
            lambda_s,
            lambda_u,
            det: self.det.clone(),
            g: self.g.clone(),
        }
    }
}

fn first_level(map: &PiecewiseAffineMap) -> Result<Vec<CodeCell>> {
    let mut out = Vec::new();
    for (i, br) in map.branches().iter().enumerate() {
        if !br.domain().has_interior() {
            continue;
        }
        out.push(CodeCell {
            code: vec![i],
            cell: br.domain().clone(),
            image: br.image()?,
            matrix: br.matrix().clone(),
            inverse: br.inverse()?.clone(),
            translation: br.translation().to_vec(),
            g: br.weight().clone(),
            det: br.det(),
        });
    }
    Ok(out)
}

fn children(map: &PiecewiseAffineMap, c: &CodeCell) -> Result<Vec<CodeCell>> {
    let mut out = Vec::new();
    for (j, br) in map.branches().iter().enumerate() {
        if !c.image.bbox_overlaps(br.domain(), 0.0) {
            continue;
        }
        let part = c.image.intersect(br.domain())?;
        if !part.has_interior() {
            continue;
        }
        let shift: Vec<Rational> = c.inverse.mul_vec(&c.translation).into_iter().map(|x| -x).collect();
        let cell = part.affine_image_with_inverse(&c.inverse, &c.matrix, &shift);
        let image = br.image_of(&part)?;
        let mut code = c.code.clone();
        code.push(j);
        out.push(CodeCell {
            code,
            cell,
            image,
            matrix: br.matrix().mul(&c.matrix),
            inverse: c.inverse.mul(br.inverse()?),
            translation: br.apply(&c.translation),
            g: &c.g * br.weight(),
            det: &c.det * br.det(),
        });
    }
    Ok(out)
}

/// One refinement step: depth `n` cells to depth `n + 1` cells.
pub fn refine_step(map: &PiecewiseAffineMap, cells: &[CodeCell]) -> Result<Vec<CodeCell>> {
    let nested: Vec<Vec<CodeCell>> = cells
        .par_iter()
        .map(|c| children(map, c))
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// All depth-`n` cells with non-empty interior, in lexicographic code order.
pub fn refine(map: &PiecewiseAffineMap, n: usize) -> Result<Vec<CodeCell>> {
    refine_with_budget(map, n, DEFAULT_CELL_BUDGET)
}

pub fn refine_with_budget(map: &PiecewiseAffineMap, n: usize, budget: usize) -> Result<Vec<CodeCell>> {
    if n == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    let mut cells = first_level(map)?;
    for depth in 2..=n {
        cells = refine_step(map, &cells)?;
        if cells.len() > budget {
            return Err(Error::Budget(format!(
                "{} cells at depth {depth} exceed the budget of {budget}",
                cells.len()
            )));
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptyRefinement);
    }
    Ok(cells)
}

/// A maximal closure count with a point attaining it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Count {
    pub value: usize,
    /// `false` when only a lower bound was certified (dimension 3).
    pub exact: bool,
    pub witness: Vec<f64>,
}

/// Uniform bucket grid over the first one or two axes.
struct Index {
    lo: Vec<f64>,
    width: Vec<f64>,
    g: usize,
    axes: usize,
    buckets: Vec<Vec<usize>>,
}

impl Index {
    fn new(sets: &[Polytope], lo: &[f64], hi: &[f64]) -> Self {
        let axes = lo.len().min(2);
        let g = ((sets.len() as f64).sqrt().ceil() as usize).clamp(1, 128);
        let width: Vec<f64> = (0..axes).map(|i| ((hi[i] - lo[i]) / g as f64).max(1e-300)).collect();
        let mut idx = Self {
            lo: lo.to_vec(),
            width,
            g,
            axes,
            buckets: vec![Vec::new(); g.pow(axes as u32)],
        };
        for (k, s) in sets.iter().enumerate() {
            let (slo, shi) = s.bbox();
            let r: Vec<(usize, usize)> = (0..axes).map(|i| (idx.cell(i, slo[i]), idx.cell(i, shi[i]))).collect();
            if axes == 1 {
                for a in r[0].0..=r[0].1 {
                    idx.buckets[a].push(k);
                }
            } else {
                for a in r[0].0..=r[0].1 {
                    for b in r[1].0..=r[1].1 {
                        idx.buckets[a * g + b].push(k);
                    }
                }
            }
        }
        idx
    }

    fn cell(&self, axis: usize, x: f64) -> usize {
        let c = ((x - self.lo[axis]) / self.width[axis]).floor();
        (c.max(0.0) as usize).min(self.g - 1)
    }

    /// Candidate set indices whose buckets meet a small neighbourhood of `x`.
    fn near(&self, x: &[f64]) -> Vec<usize> {
        let eps = 1e-9;
        let r: Vec<(usize, usize)> = (0..self.axes)
            .map(|i| (self.cell(i, x[i] - eps), self.cell(i, x[i] + eps)))
            .collect();
        let mut out = Vec::new();
        if self.axes == 1 {
            for a in r[0].0..=r[0].1 {
                out.extend(&self.buckets[a]);
            }
        } else {
            for a in r[0].0..=r[0].1 {
                for b in r[1].0..=r[1].1 {
                    out.extend(&self.buckets[a * self.g + b]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn segment_crossing(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> Option<Point> {
    let r: Vec<Rational> = vec![&p2[0] - &p1[0], &p2[1] - &p1[1]];
    let s: Vec<Rational> = vec![&q2[0] - &q1[0], &q2[1] - &q1[1]];
    let denom = &r[0] * &s[1] - &r[1] * &s[0];
    if denom.is_zero() {
        return None;
    }
    let qp = [&q1[0] - &p1[0], &q1[1] - &p1[1]];
    let t = (&qp[0] * &s[1] - &qp[1] * &s[0]) / &denom;
    let u = (&qp[0] * &r[1] - &qp[1] * &r[0]) / &denom;
    let (zero, one) = (Rational::zero(), Rational::one());
    if t < zero || t > one || u < zero || u > one {
        return None;
    }
    Some(vec![&p1[0] + &r[0] * &t, &p1[1] + &r[1] * &t])
}

fn seg_bbox_overlap(a: &(Point, Point), b: &(Point, Point)) -> bool {
    (0..2).all(|i| {
        let (alo, ahi) = if a.0[i] <= a.1[i] { (&a.0[i], &a.1[i]) } else { (&a.1[i], &a.0[i]) };
        let (blo, bhi) = if b.0[i] <= b.1[i] { (&b.0[i], &b.1[i]) } else { (&b.1[i], &b.0[i]) };
        alo <= bhi && blo <= ahi
    })
}

/// Floating-point copy of a polytope for fast, conservative prefilters.
struct Shape {
    hs: Vec<(Vec<f64>, f64)>,
}

const TOL: f64 = 1e-9;

impl Shape {
    fn new(p: &Polytope) -> Self {
        Self {
            hs: p
                .halfspaces()
                .iter()
                .map(|h| (h.normal().iter().map(to_f64).collect(), to_f64(h.offset())))
                .collect(),
        }
    }

    /// `Some(answer)` when floating point decides closed membership safely.
    fn contains(&self, x: &[f64]) -> Option<bool> {
        let mut sure = true;
        for (n, c) in &self.hs {
            let s: f64 = n.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - c;
            let scale = 1.0 + c.abs() + n.iter().map(|a| a.abs()).sum::<f64>();
            if s > TOL * scale {
                return Some(false);
            }
            if s > -TOL * scale {
                sure = false;
            }
        }
        sure.then_some(true)
    }
}

/// Points where the maximum closure count of a family of 2D polygons is
/// attained: polygon vertices and pairwise edge crossings. For
/// interior-disjoint families edges never cross transversally, so
/// `crossings = false` skips the pairwise pass.
fn candidates_2d(sets: &[Polytope], crossings: bool) -> Vec<Point> {
    let mut seen: HashSet<Point> = HashSet::new();
    let mut out = Vec::new();
    for s in sets {
        for v in s.vertices() {
            if seen.insert(v.clone()) {
                out.push(v.clone());
            }
        }
    }
    if !crossings {
        return out;
    }
    // sweep over x to find polygon pairs with overlapping boxes
    let mut order: Vec<usize> = (0..sets.len()).filter(|&i| !sets[i].is_empty()).collect();
    order.sort_by(|&a, &b| sets[a].bbox().0[0].total_cmp(&sets[b].bbox().0[0]));
    let edges: Vec<Vec<(Point, Point)>> = sets.iter().map(Polytope::edges).collect();
    let pairs: Vec<(usize, usize)> = (0..order.len())
        .flat_map(|a| {
            let i = order[a];
            let hi = sets[i].bbox().1[0];
            order[a + 1..]
                .iter()
                .take_while(move |&&j| sets[j].bbox().0[0] <= hi + 1e-12)
                .filter(move |&&j| sets[i].bbox_overlaps(&sets[j], 1e-12))
                .map(move |&j| (i, j))
        })
        .collect();
    let found: Vec<Vec<Point>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut found = Vec::new();
            for e in &edges[i] {
                for f in &edges[j] {
                    if seg_bbox_overlap(e, f) {
                        if let Some(p) = segment_crossing(&e.0, &e.1, &f.0, &f.1) {
                            found.push(p);
                        }
                    }
                }
            }
            found
        })
        .collect();
    for p in found.into_iter().flatten() {
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    out
}

fn shifts(d: usize) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|s| {
                [-1i64, 0, 1].into_iter().map(move |m| {
                    let mut t = s.clone();
                    t.push(m);
                    t
                })
            })
            .collect();
    }
    out
}

/// Maximum over points of the number of sets whose closures contain the
/// point. With `torus` the box faces are identified: a point counts for a set
/// when some integer-period translate of it lies in the set. Pass
/// `disjoint = true` only for families with pairwise disjoint interiors.
pub fn closure_count(sets: &[Polytope], fundamental_box: &Polytope, torus: bool, disjoint: bool) -> Count {
    let live: Vec<&Polytope> = sets.iter().filter(|s| !s.is_empty()).collect();
    if live.is_empty() {
        return Count {
            value: 0,
            exact: true,
            witness: vec![],
        };
    }
    let d = fundamental_box.dim();
    let (blo, bhi) = box_bounds(fundamental_box).expect("non-empty box");
    // extended family: translates near the box, tagged with their origin
    let mut family: Vec<Polytope> = Vec::new();
    let mut origin: Vec<usize> = Vec::new();
    let shift_list = if torus { shifts(d) } else { vec![vec![0; d]] };
    for (k, s) in live.iter().enumerate() {
        for m in &shift_list {
            let t = if m.iter().all(|&x| x == 0) {
                (*s).clone()
            } else {
                let v: Vec<Rational> = (0..d).map(|i| (&bhi[i] - &blo[i]) * int(m[i])).collect();
                s.translate(&v)
            };
            if t.bbox_overlaps(fundamental_box, 1e-12) {
                family.push(t);
                origin.push(k);
            }
        }
    }
    let (flo, fhi) = family.iter().fold(
        (vec![f64::INFINITY; d], vec![f64::NEG_INFINITY; d]),
        |(mut lo, mut hi), s| {
            let (a, b) = s.bbox();
            for i in 0..d {
                lo[i] = lo[i].min(a[i]);
                hi[i] = hi[i].max(b[i]);
            }
            (lo, hi)
        },
    );
    let candidates: Vec<Point> = match d {
        // translates of an interior-disjoint family on the torus stay
        // interior-disjoint
        2 => candidates_2d(&family, !disjoint),
        _ => {
            let mut seen = HashSet::new();
            family
                .iter()
                .flat_map(|s| s.vertices().iter().cloned().chain(s.centroid()))
                .filter(|p| seen.insert(p.clone()))
                .collect()
        }
    };
    let shapes: Vec<Shape> = family.iter().map(Shape::new).collect();
    let index = Index::new(&family, &flo, &fhi);
    let in_box = |p: &Point| (0..d).all(|i| blo[i] <= p[i] && p[i] <= bhi[i]);
    let best = candidates
        .par_iter()
        .filter(|p| !torus || in_box(p))
        .map(|p| {
            let pf: Vec<f64> = p.iter().map(to_f64).collect();
            let mut owners: Vec<usize> = index
                .near(&pf)
                .into_iter()
                .filter(|&k| shapes[k].contains(&pf).unwrap_or_else(|| family[k].contains(p)))
                .map(|k| origin[k])
                .collect();
            owners.sort_unstable();
            owners.dedup();
            (owners.len(), pf)
        })
        .reduce(
            || (0, Vec::new()),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && a.1.is_empty()) { b } else { a },
        );
    Count {
        value: best.0,
        // in 3D only polytope vertices and centroids are tested
        exact: d <= 2,
        witness: best.1,
    }
}

/// `D_n^b`: closures of the cells. Cells of one depth have disjoint
/// interiors.
pub fn complexity_begin(map: &PiecewiseAffineMap, cells: &[CodeCell]) -> Count {
    let sets: Vec<Polytope> = cells.iter().map(|c| c.cell.clone()).collect();
    closure_count(&sets, map.fundamental_box(), map.is_torus(), true)
}

/// `D_n^e`: closures of the images `T^n(O_𝐢)`.
pub fn complexity_end(map: &PiecewiseAffineMap, cells: &[CodeCell]) -> Count {
    let sets: Vec<Polytope> = cells.iter().map(|c| c.image.clone()).collect();
    let disjoint = interior_multiplicity(&sets) <= 1;
    closure_count(&sets, map.fundamental_box(), map.is_torus(), disjoint)
}

/// Exact test for overlapping interiors of two full-dimensional polytopes.
/// In 2D a separating line can be taken through an edge (separating axis
/// test), with floating point deciding the clear cases.
fn interiors_overlap(p: &Polytope, q: &Polytope) -> bool {
    if !p.bbox_overlaps(q, 0.0) || !p.has_interior() || !q.has_interior() {
        return false;
    }
    if p.dim() != 2 {
        return p.intersect(q).is_ok_and(|x| x.has_interior());
    }
    let separates = |a: &Polytope, b: &Polytope| -> bool {
        let bf: Vec<Vec<f64>> = b.vertices().iter().map(|v| v.iter().map(to_f64).collect()).collect();
        a.halfspaces().iter().any(|h| {
            let n: Vec<f64> = h.normal().iter().map(to_f64).collect();
            let c = to_f64(h.offset());
            let scale = 1.0 + c.abs() + n.iter().map(|x| x.abs()).sum::<f64>();
            for (v, vf) in b.vertices().iter().zip(&bf) {
                let s = n[0] * vf[0] + n[1] * vf[1] - c;
                if s < -TOL * scale {
                    return false;
                }
                if s < TOL * scale
                    && h.slack(v).is_negative() {
                        return false;
                    }
            }
            true
        })
    };
    !(separates(p, q) || separates(q, p))
}

/// Maximum number of sets whose interiors share a point, by a clique search
/// on the interior-overlap graph with exact intersection checks.
pub fn interior_multiplicity(sets: &[Polytope]) -> usize {
    let n = sets.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| sets[i].has_interior()).collect();
    if order.is_empty() {
        return 0;
    }
    order.sort_by(|&a, &b| sets[a].bbox().0[0].total_cmp(&sets[b].bbox().0[0]));
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    let pairs: Vec<(usize, usize)> = (0..order.len())
        .flat_map(|a| {
            let i = order[a];
            let hi = sets[i].bbox().1[0];
            order[a + 1..]
                .iter()
                .take_while(move |&&j| sets[j].bbox().0[0] <= hi)
                .map(move |&j| (i.min(j), i.max(j)))
        })
        .collect();
    let hits: Vec<(usize, usize)> = pairs
        .into_par_iter()
        .filter(|&(i, j)| interiors_overlap(&sets[i], &sets[j]))
        .collect();
    for (i, j) in hits {
        neighbours[i].push(j);
    }
    for nb in &mut neighbours {
        nb.sort_unstable();
    }
    fn grow(sets: &[Polytope], nb: &[Vec<usize>], current: &Polytope, allowed: &[usize], depth: usize) -> usize {
        let mut best = depth;
        for (k, &j) in allowed.iter().enumerate() {
            let Ok(next) = current.intersect(&sets[j]) else { continue };
            if !next.has_interior() {
                continue;
            }
            let rest: Vec<usize> = allowed[k + 1..]
                .iter()
                .copied()
                .filter(|x| nb[j].binary_search(x).is_ok())
                .collect();
            best = best.max(grow(sets, nb, &next, &rest, depth + 1));
        }
        best
    }
    order
        .into_par_iter()
        .map(|i| grow(sets, &neighbours, &sets[i], &neighbours[i], 1))
        .max()
        .unwrap_or(0)
}

/// `J(n)`: maximal number of image interiors containing a point.
pub fn covering_multiplicity(cells: &[CodeCell]) -> usize {
    let sets: Vec<Polytope> = cells.iter().map(|c| c.image.clone()).collect();
    interior_multiplicity(&sets)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    pub d_b: usize,
    pub d_e: usize,
    pub j: usize,
    pub root_b: f64,
    pub root_e: f64,
    pub bound_2nkd: f64,
    pub exact: bool,
    pub cells: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Growth {
    pub rows: Vec<GrowthRow>,
    /// Facet count `K` of the defining partition.
    pub k: usize,
    /// The cell budget stopped the table early.
    pub truncated: bool,
}

impl Growth {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,D_b,D_e,J,root_b,root_e,bound_2nKd\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{:.12},{:.12},{}\n",
                r.n, r.d_b, r.d_e, r.j, r.root_b, r.root_e, r.bound_2nkd
            ));
        }
        s
    }
}

/// Rows for `n = 1..=n_max` with the comparison column `2(nK)^d`.
pub fn growth(map: &PiecewiseAffineMap, n_max: usize, budget: usize) -> Result<Growth> {
    let k = map.partition_facets();
    let d = map.dim() as i32;
    let mut rows = Vec::new();
    let mut cells = first_level(map)?;
    let mut truncated = false;
    for n in 1..=n_max {
        if n > 1 {
            let next = refine_step(map, &cells)?;
            if next.len() > budget {
                truncated = true;
                break;
            }
            cells = next;
        }
        if cells.is_empty() {
            return Err(Error::EmptyRefinement);
        }
        let b = complexity_begin(map, &cells);
        let e = complexity_end(map, &cells);
        let j = covering_multiplicity(&cells);
        rows.push(GrowthRow {
            n,
            d_b: b.value,
            d_e: e.value,
            j,
            root_b: (b.value as f64).powf(1.0 / n as f64),
            root_e: (e.value as f64).powf(1.0 / n as f64),
            bound_2nkd: 2.0 * ((n * k) as f64).powi(d),
            exact: b.exact && e.exact,
            cells: cells.len(),
        });
    }
    Ok(Growth { rows, k, truncated })
}

/// Largest number of closures hit by one of `samples` uniform random points;
/// a lower bound for the closure count.
pub fn monte_carlo_count(sets: &[Polytope], fundamental_box: &Polytope, samples: usize, seed: u64) -> usize {
    use rand::{Rng, SeedableRng};
    let (lo, hi) = box_bounds(fundamental_box).expect("non-empty box");
    let lo: Vec<f64> = lo.iter().map(to_f64).collect();
    let hi: Vec<f64> = hi.iter().map(to_f64).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let scale = 1u64 << 30;
    let mut best = 0;
    for _ in 0..samples {
        let p: Point = (0..lo.len())
            .map(|i| {
                let u = rng.gen_range(0..=scale);
                let x = lo[i] + (hi[i] - lo[i]) * u as f64 / scale as f64;
                Rational::from_float(x).unwrap_or_else(Rational::zero)
            })
            .collect();
        best = best.max(sets.iter().filter(|s| s.contains(&p)).count());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::rat;
    use crate::pamap::{builtin, AffineBranch, Params};

    fn map(name: &str) -> PiecewiseAffineMap {
        builtin(name, &Params::new()).unwrap()
    }

    fn single() -> PiecewiseAffineMap {
        let bx = Polytope::unit_box(2).unwrap();
        let br = AffineBranch::new(RatMatrix::diag(&[int(2), rat(1, 2)]), vec![int(0), int(0)], bx.clone(), int(1)).unwrap();
        let br = crate::pamap::split_mod1(&br, &bx).unwrap();
        PiecewiseAffineMap::new("one", bx, br, HyperbolicSplitting::axes(1, 1), true, None).unwrap()
    }

    #[test]
    fn baker_strips() {
        let m = map("baker");
        let cells = refine(&m, 2).unwrap();
        assert_eq!(cells.len(), 4);
        for c in &cells {
            assert_eq!(c.cell.volume(), rat(1, 4));
            let (lo, hi) = c.cell.bbox();
            assert_eq!((hi[0] - lo[0], hi[1] - lo[1]), (0.25, 1.0));
        }
    }

    #[test]
    fn baker_complexities() {
        let m = map("baker");
        for n in [1, 3, 4] {
            let cells = refine(&m, n).unwrap();
            assert_eq!(complexity_begin(&m, &cells).value, 2, "n={n}");
            assert_eq!(complexity_end(&m, &cells).value, 2, "n={n}");
            assert_eq!(covering_multiplicity(&cells), 1);
        }
    }

    #[test]
    fn single_branch_counts() {
        // the doubling-in-x torus map has one branch, split into two pieces
        // whose closures meet along x = 1/2; on the torus the seam joins them
        // again, so use the plain box partition for the trivial cases
        let bx = Polytope::unit_box(2).unwrap();
        assert_eq!(closure_count(std::slice::from_ref(&bx), &bx, false, true).value, 1);
        assert_eq!(closure_count(std::slice::from_ref(&bx), &bx, true, true).value, 1);
        assert_eq!(interior_multiplicity(std::slice::from_ref(&bx)), 1);
        let m = single();
        let cells = refine(&m, 1).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(covering_multiplicity(&cells), 2);
    }

    #[test]
    fn overlapping_images() {
        let bx = Polytope::unit_box(2).unwrap();
        let half = Polytope::from_box(&[int(0), int(0)], &[rat(1, 2), int(1)]).unwrap();
        assert_eq!(interior_multiplicity(&[bx.clone(), bx.clone()]), 2);
        assert_eq!(interior_multiplicity(&[bx.clone(), half.clone(), half]), 3);
    }

    #[test]
    fn contracting_pair_images_are_disjoint() {
        let m = map("contracting_pair");
        let cells = refine(&m, 1).unwrap();
        assert_eq!(covering_multiplicity(&cells), 1);
        assert_eq!(complexity_begin(&m, &cells).value, 2);
    }

    #[test]
    fn cat_squares_first_level() {
        let m = map("cat_squares");
        let cells = refine(&m, 1).unwrap();
        let squares: HashSet<usize> = cells.iter().map(|c| c.code[0]).collect();
        assert_eq!(squares.len(), m.branches().len());
        assert_eq!(m.partition().len(), 4);
        let vol: Rational = cells.iter().map(|c| c.cell.volume()).sum();
        assert_eq!(vol, int(1));
    }

    #[test]
    fn growth_table_for_baker() {
        let g = growth(&map("baker"), 4, DEFAULT_CELL_BUDGET).unwrap();
        assert_eq!(g.rows.len(), 4);
        assert!(g.rows.iter().all(|r| r.d_b == 2 && r.d_e == 2 && r.j == 1));
        assert!(g.to_csv().starts_with("n,D_b,D_e,J,root_b,root_e,bound_2nKd\n1,2,2,1,"));
    }

    #[test]
    fn budget_truncates() {
        let g = growth(&map("baker"), 6, 10).unwrap();
        assert!(g.truncated);
        assert_eq!(g.rows.len(), 3);
        assert!(matches!(refine_with_budget(&map("baker"), 6, 10), Err(Error::Budget(_))));
    }

    #[test]
    fn monte_carlo_never_exceeds_exact() {
        let m = map("baker");
        let cells = refine(&m, 3).unwrap();
        let sets: Vec<Polytope> = cells.iter().map(|c| c.cell.clone()).collect();
        let mc = monte_carlo_count(&sets, m.fundamental_box(), 2000, 1);
        assert!(mc <= complexity_begin(&m, &cells).value);
    }
}
