use super::{common_denominator, dot, to_f64, RatMatrix, Rational};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::HashSet;

pub type Point = Vec<Rational>;

/// Closed halfspace `⟨normal, x⟩ ≤ offset`, scaled so that `normal` is a
/// primitive integer vector. Two halfspaces describing the same set compare
/// equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Halfspace {
    normal: Vec<Rational>,
    offset: Rational,
}

impl Halfspace {
    pub fn new(normal: Vec<Rational>, offset: Rational) -> Self {
        if normal.iter().all(|x| x.is_zero()) {
            return Self { normal, offset };
        }
        let den = common_denominator(&normal);
        let nums: Vec<BigInt> = normal
            .iter()
            .map(|x| x.numer() * (&den / x.denom()))
            .collect();
        let g = nums.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
        let scale = Rational::new(den, g);
        Self {
            normal: normal.into_iter().map(|x| x * &scale).collect(),
            offset: offset * scale,
        }
    }

    /// `x_axis ≤ value`
    pub fn upper(dim: usize, axis: usize, value: Rational) -> Self {
        let mut n = vec![Rational::zero(); dim];
        n[axis] = Rational::one();
        Self::new(n, value)
    }

    /// `x_axis ≥ value`
    pub fn lower(dim: usize, axis: usize, value: Rational) -> Self {
        let mut n = vec![Rational::zero(); dim];
        n[axis] = -Rational::one();
        Self::new(n, -value)
    }

    pub fn normal(&self) -> &[Rational] {
        &self.normal
    }

    pub fn offset(&self) -> &Rational {
        &self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// `⟨normal, x⟩ − offset`; non-positive inside.
    pub fn slack(&self, x: &[Rational]) -> Rational {
        dot(&self.normal, x) - &self.offset
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        !self.slack(x).is_positive()
    }

    /// The closed complement `⟨normal, x⟩ ≥ offset`.
    pub fn flipped(&self) -> Self {
        Self {
            normal: self.normal.iter().map(|x| -x).collect(),
            offset: -self.offset.clone(),
        }
    }

    /// Image under `x ↦ A x + b`, given `A⁻¹`.
    fn mapped(&self, a_inv: &RatMatrix, b: &[Rational]) -> Self {
        let n = a_inv.transpose().mul_vec(&self.normal);
        let c = &self.offset + dot(&n, b);
        Self::new(n, c)
    }

    fn is_trivial(&self) -> bool {
        self.normal.iter().all(|x| x.is_zero())
    }
}

/// Bounded convex polytope in dimension 1, 2 or 3.
///
/// Full-dimensional polytopes carry a canonical H-representation (exactly one
/// halfspace per facet, redundant ones removed) together with their vertices;
/// in 2D the vertices run counter-clockwise and `halfspaces[i]` supports the
/// edge from vertex `i` to vertex `i + 1`. Lower-dimensional and empty sets
/// keep every accumulated constraint.
#[derive(Clone, Debug)]
pub struct Polytope {
    dim: usize,
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Point>,
    full: bool,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

fn sub(a: &[Rational], b: &[Rational]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn cross2(o: &[Rational], a: &[Rational], b: &[Rational]) -> Rational {
    (&a[0] - &o[0]) * (&b[1] - &o[1]) - (&a[1] - &o[1]) * (&b[0] - &o[0])
}

fn det3(a: &[Rational], b: &[Rational], c: &[Rational]) -> Rational {
    &a[0] * (&b[1] * &c[2] - &b[2] * &c[1]) - &a[1] * (&b[0] * &c[2] - &b[2] * &c[0])
        + &a[2] * (&b[0] * &c[1] - &b[1] * &c[0])
}

fn centroid(points: &[Point]) -> Point {
    let d = points[0].len();
    let k = Rational::from_integer(points.len().into());
    (0..d)
        .map(|i| points.iter().fold(Rational::zero(), |acc, p| acc + &p[i]) / &k)
        .collect()
}

/// Solves the square system given by the boundaries of `hs`; `None` if singular.
fn boundary_point(hs: &[&Halfspace]) -> Option<Point> {
    let rows = hs.iter().map(|h| h.normal.clone()).collect();
    let m = RatMatrix::from_rows(rows).ok()?;
    let inv = m.inverse().ok()?;
    let rhs: Vec<Rational> = hs.iter().map(|h| h.offset.clone()).collect();
    Some(inv.mul_vec(&rhs))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Orders points of a convex planar set counter-clockwise around an interior
/// reference, using only exact predicates.
fn sort_ccw(points: &mut [Point], center: &[Rational]) {
    let half = |p: &Point| -> u8 {
        let dx = &p[0] - &center[0];
        let dy = &p[1] - &center[1];
        if dy.is_positive() || (dy.is_zero() && dx.is_positive()) {
            0
        } else {
            1
        }
    };
    points.sort_by(|a, b| {
        let (ha, hb) = (half(a), half(b));
        if ha != hb {
            return ha.cmp(&hb);
        }
        let c = cross2(center, a, b);
        if c.is_positive() {
            Ordering::Less
        } else if c.is_negative() {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    });
}

impl Polytope {
    fn assemble(dim: usize, mut halfspaces: Vec<Halfspace>, mut vertices: Vec<Point>, full: bool) -> Self {
        if full && dim == 2 {
            // start the cycle at the lexicographically smallest vertex so that
            // equal polygons carry identical representations
            let k = (0..vertices.len()).min_by(|&i, &j| vertices[i].cmp(&vertices[j])).unwrap_or(0);
            vertices.rotate_left(k);
            halfspaces.rotate_left(k);
        }
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for v in &vertices {
            for i in 0..dim {
                let x = to_f64(&v[i]);
                lo[i] = lo[i].min(x);
                hi[i] = hi[i].max(x);
            }
        }
        Self {
            dim,
            halfspaces,
            vertices,
            full,
            lo,
            hi,
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self::assemble(dim, Vec::new(), Vec::new(), false)
    }

    /// The axis-aligned box `[lo, hi]`.
    pub fn from_box(lo: &[Rational], hi: &[Rational]) -> Result<Self> {
        let dim = lo.len();
        check_dim(dim)?;
        if hi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: hi.len(),
            });
        }
        let mut hs = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            hs.push(Halfspace::lower(dim, i, lo[i].clone()));
            hs.push(Halfspace::upper(dim, i, hi[i].clone()));
        }
        Ok(Self::from_constraints(dim, hs))
    }

    pub fn unit_box(dim: usize) -> Result<Self> {
        Self::from_box(&vec![Rational::zero(); dim], &vec![Rational::one(); dim])
    }

    /// `bounds ∩ ⋂ hs`.
    pub fn from_halfspaces_within(bounds: &Polytope, hs: &[Halfspace]) -> Result<Self> {
        bounds.clip_all(hs)
    }

    /// Builds a polytope from constraints whose intersection is known to be
    /// bounded, by exact vertex enumeration.
    fn from_constraints(dim: usize, hs: Vec<Halfspace>) -> Self {
        let hs: Vec<Halfspace> = hs.into_iter().filter(|h| !h.is_trivial() || h.offset.is_negative()).collect();
        if hs.iter().any(|h| h.is_trivial()) {
            return Self::assemble(dim, hs, Vec::new(), false);
        }
        let mut seen = HashSet::new();
        let mut verts = Vec::new();
        for combo in combinations(hs.len(), dim) {
            let sel: Vec<&Halfspace> = combo.iter().map(|&i| &hs[i]).collect();
            if let Some(p) = boundary_point(&sel) {
                if hs.iter().all(|h| h.contains(&p)) && seen.insert(p.clone()) {
                    verts.push(p);
                }
            }
        }
        Self::canonical_from(dim, hs, verts)
    }

    /// Given all constraints and the exact vertex set, decides full
    /// dimensionality and reduces to a canonical H-representation.
    fn canonical_from(dim: usize, hs: Vec<Halfspace>, mut verts: Vec<Point>) -> Self {
        match dim {
            1 => {
                if verts.len() < 2 {
                    return Self::assemble(dim, hs, verts, false);
                }
                verts.sort();
                let lo = verts[0].clone();
                let hi = verts[verts.len() - 1].clone();
                let canon = vec![
                    Halfspace::lower(1, 0, lo[0].clone()),
                    Halfspace::upper(1, 0, hi[0].clone()),
                ];
                Self::assemble(1, canon, vec![lo, hi], true)
            }
            2 => {
                if verts.len() < 3 {
                    return Self::assemble(dim, hs, verts, false);
                }
                let c = centroid(&verts);
                sort_ccw(&mut verts, &c);
                let verts = remove_collinear(verts);
                if verts.len() < 3 {
                    return Self::assemble(dim, hs, verts, false);
                }
                let m = verts.len();
                let mut labels = Vec::with_capacity(m);
                for i in 0..m {
                    let (a, b) = (&verts[i], &verts[(i + 1) % m]);
                    let h = hs
                        .iter()
                        .find(|h| h.slack(a).is_zero() && h.slack(b).is_zero())
                        .expect("edge of an H-polytope lies on a constraint")
                        .clone();
                    labels.push(h);
                }
                Self::assemble(2, labels, verts, true)
            }
            _ => {
                verts.sort();
                if !affinely_spanning_3d(&verts) {
                    return Self::assemble(dim, hs, verts, false);
                }
                let mut canon: Vec<Halfspace> = Vec::new();
                for h in &hs {
                    let on: Vec<&Point> = verts.iter().filter(|v| h.slack(v).is_zero()).collect();
                    if on.len() >= 3 && spans_plane(&on) && !canon.contains(h) {
                        canon.push(h.clone());
                    }
                }
                canon.sort();
                Self::assemble(3, canon, verts, true)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// No points at all.
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Positive volume.
    pub fn has_interior(&self) -> bool {
        self.full
    }

    /// Number of facets of a full-dimensional polytope.
    pub fn facet_count(&self) -> usize {
        if self.full {
            self.halfspaces.len()
        } else {
            0
        }
    }

    /// Floating-point bounding box `(lo, hi)`.
    pub fn bbox(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn bbox_overlaps(&self, other: &Polytope, pad: f64) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        (0..self.dim).all(|i| self.lo[i] <= other.hi[i] + pad && other.lo[i] <= self.hi[i] + pad)
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        !self.is_empty() && self.halfspaces.iter().all(|h| h.contains(x))
    }

    /// Strict interior membership; false for lower-dimensional sets.
    pub fn interior_contains(&self, x: &[Rational]) -> bool {
        self.full && self.halfspaces.iter().all(|h| h.slack(x).is_negative())
    }

    /// Vertex average; an interior point when the polytope has interior.
    pub fn centroid(&self) -> Option<Point> {
        (!self.vertices.is_empty()).then(|| centroid(&self.vertices))
    }

    /// `P ∩ h`, exactly.
    pub fn clip(&self, h: &Halfspace) -> Result<Polytope> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: h.dim(),
            });
        }
        if self.is_empty() {
            let mut hs = self.halfspaces.clone();
            hs.push(h.clone());
            return Ok(Self::assemble(self.dim, hs, Vec::new(), false));
        }
        if self.vertices.iter().all(|v| h.contains(v)) {
            return Ok(self.clone());
        }
        Ok(match self.dim {
            1 => self.clip_1d(h),
            2 => self.clip_2d(h),
            _ => {
                let mut hs = self.halfspaces.clone();
                hs.push(h.clone());
                Self::from_constraints(3, hs)
            }
        })
    }

    pub fn clip_all(&self, hs: &[Halfspace]) -> Result<Polytope> {
        let mut p = self.clone();
        for h in hs {
            if p.is_empty() {
                break;
            }
            p = p.clip(h)?;
        }
        Ok(p)
    }

    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if other.is_empty() {
            return Ok(Self::empty(self.dim));
        }
        self.clip_all(&other.halfspaces)
    }

    fn clip_1d(&self, h: &Halfspace) -> Polytope {
        let n = &h.normal[0];
        let bound = &h.offset / n;
        let (mut lo, mut hi) = (self.vertices[0][0].clone(), self.vertices[self.vertices.len() - 1][0].clone());
        if n.is_positive() {
            hi = hi.min(bound);
        } else {
            lo = lo.max(bound);
        }
        let mut hs = self.halfspaces.clone();
        hs.push(h.clone());
        match lo.cmp(&hi) {
            Ordering::Greater => Self::assemble(1, hs, Vec::new(), false),
            Ordering::Equal => Self::assemble(1, hs, vec![vec![lo]], false),
            Ordering::Less => Self::canonical_from(1, hs, vec![vec![lo], vec![hi]]),
        }
    }

    /// Sutherland-Hodgman on the vertex cycle, tracking which constraint
    /// supports each output edge.
    fn clip_2d(&self, h: &Halfspace) -> Polytope {
        let m = self.vertices.len();
        let slack: Vec<Rational> = self.vertices.iter().map(|v| h.slack(v)).collect();
        let mut out: Vec<(Point, Option<Halfspace>)> = Vec::new();
        for i in 0..m {
            let j = (i + 1) % m;
            let (a, b) = (&self.vertices[i], &self.vertices[j]);
            let (sa, sb) = (&slack[i], &slack[j]);
            let edge_label = if self.full {
                Some(self.halfspaces[i].clone())
            } else {
                None
            };
            if !sa.is_positive() {
                // a vertex on the cut line followed by an outside one starts
                // an edge along the cut
                let label = if sa.is_zero() && sb.is_positive() {
                    Some(h.clone())
                } else {
                    edge_label.clone()
                };
                out.push((a.clone(), label));
            }
            let crossing = (sa.is_negative() && sb.is_positive()) || (sa.is_positive() && sb.is_negative());
            if crossing {
                let t = sa / (sa - sb);
                let p: Point = a.iter().zip(b).map(|(x, y)| x + (y - x) * &t).collect();
                let label = if sa.is_positive() { edge_label } else { Some(h.clone()) };
                out.push((p, label));
            }
        }
        // drop repeated points
        let mut dedup: Vec<(Point, Option<Halfspace>)> = Vec::with_capacity(out.len());
        for (p, l) in out {
            if dedup.last().is_none_or(|(q, _)| *q != p) {
                dedup.push((p, l));
            }
        }
        while dedup.len() > 1 && dedup[0].0 == dedup[dedup.len() - 1].0 {
            dedup.pop();
        }
        let mut hs_all = self.halfspaces.clone();
        hs_all.push(h.clone());
        if dedup.len() < 3 || !self.full {
            let pts: Vec<Point> = dedup.into_iter().map(|(p, _)| p).collect();
            return if pts.len() >= 3 {
                Self::canonical_from(2, hs_all, pts)
            } else {
                Self::assemble(2, hs_all, pts, false)
            };
        }
        // merge collinear runs; the previous vertex's label already lies on
        // the merged line
        let mut cyc = dedup;
        loop {
            let k = cyc.len();
            if k < 3 {
                break;
            }
            let idx = (0..k).find(|&i| {
                let prev = &cyc[(i + k - 1) % k].0;
                let next = &cyc[(i + 1) % k].0;
                cross2(prev, &cyc[i].0, next).is_zero()
            });
            match idx {
                Some(i) => {
                    cyc.remove(i);
                }
                None => break,
            }
        }
        if cyc.len() < 3 {
            let pts: Vec<Point> = cyc.into_iter().map(|(p, _)| p).collect();
            return Self::assemble(2, hs_all, pts, false);
        }
        let (verts, labels): (Vec<Point>, Vec<Option<Halfspace>>) = cyc.into_iter().unzip();
        let labels: Vec<Halfspace> = labels
            .into_iter()
            .map(|l| l.expect("full polygon edges carry labels"))
            .collect();
        Self::assemble(2, labels, verts, true)
    }

    /// Exact Lebesgue `d`-volume; zero for empty or lower-dimensional sets.
    pub fn volume(&self) -> Rational {
        if !self.full {
            return Rational::zero();
        }
        match self.dim {
            1 => &self.vertices[1][0] - &self.vertices[0][0],
            2 => {
                let m = self.vertices.len();
                let o = &self.vertices[0];
                let mut twice = Rational::zero();
                for i in 1..m - 1 {
                    twice += cross2(o, &self.vertices[i], &self.vertices[i + 1]);
                }
                twice / Rational::from_integer(2.into())
            }
            _ => self.volume_3d(),
        }
    }

    fn volume_3d(&self) -> Rational {
        let c = centroid(&self.vertices);
        let mut six = Rational::zero();
        for h in &self.halfspaces {
            let mut face: Vec<Point> = self
                .vertices
                .iter()
                .filter(|v| h.slack(v).is_zero())
                .cloned()
                .collect();
            // project on the two coordinates that keep the facet non-degenerate
            let drop = (0..3)
                .max_by(|&i, &j| h.normal[i].abs().cmp(&h.normal[j].abs()))
                .unwrap();
            let keep: Vec<usize> = (0..3).filter(|&i| i != drop).collect();
            let proj = |p: &Point| vec![p[keep[0]].clone(), p[keep[1]].clone()];
            let fc = centroid(&face);
            let pc = proj(&fc);
            face.sort_by(|a, b| {
                let (pa, pb) = (proj(a), proj(b));
                let ha = half_of(&pa, &pc);
                let hb = half_of(&pb, &pc);
                if ha != hb {
                    return ha.cmp(&hb);
                }
                let cr = cross2(&pc, &pa, &pb);
                if cr.is_positive() {
                    Ordering::Less
                } else if cr.is_negative() {
                    Ordering::Greater
                } else {
                    Ordering::Equal
                }
            });
            for i in 1..face.len() - 1 {
                let a = sub(&face[0], &c);
                let b = sub(&face[i], &c);
                let cc = sub(&face[i + 1], &c);
                six += det3(&a, &b, &cc).abs();
            }
        }
        six / Rational::from_integer(6.into())
    }

    /// Exact image `{A x + b : x ∈ P}` for invertible `A`.
    pub fn affine_image(&self, a: &RatMatrix, b: &[Rational]) -> Result<Polytope> {
        if a.dim() != self.dim || b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: a.dim(),
            });
        }
        let a_inv = a.inverse()?;
        Ok(self.affine_image_with_inverse(a, &a_inv, b))
    }

    /// As [`Polytope::affine_image`] with a precomputed inverse.
    pub fn affine_image_with_inverse(&self, a: &RatMatrix, a_inv: &RatMatrix, b: &[Rational]) -> Polytope {
        let verts: Vec<Point> = self
            .vertices
            .iter()
            .map(|v| a.mul_vec(v).into_iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        let hs: Vec<Halfspace> = self.halfspaces.iter().map(|h| h.mapped(a_inv, b)).collect();
        if !self.full {
            return Self::assemble(self.dim, hs, verts, false);
        }
        match self.dim {
            1 => {
                let mut v = verts;
                v.sort();
                Self::canonical_from(1, hs, v)
            }
            2 => {
                if a.det().is_negative() {
                    let m = verts.len();
                    let rv: Vec<Point> = verts.into_iter().rev().collect();
                    let labels = (0..m).map(|j| hs[(2 * m - 2 - j) % m].clone()).collect();
                    Self::assemble(2, labels, rv, true)
                } else {
                    Self::assemble(2, hs, verts, true)
                }
            }
            _ => {
                let mut v = verts;
                v.sort();
                let mut hs = hs;
                hs.sort();
                Self::assemble(3, hs, v, true)
            }
        }
    }

    /// Exact preimage `{x : A x + b ∈ P}`.
    pub fn affine_preimage(&self, a: &RatMatrix, b: &[Rational]) -> Result<Polytope> {
        let a_inv = a.inverse()?;
        let shift: Vec<Rational> = a_inv.mul_vec(b).into_iter().map(|x| -x).collect();
        Ok(self.affine_image_with_inverse(&a_inv, a, &shift))
    }

    /// Translation by `v`.
    pub fn translate(&self, v: &[Rational]) -> Polytope {
        let id = RatMatrix::identity(self.dim);
        self.affine_image_with_inverse(&id, &id, v)
    }

    /// Removes redundant constraints of a full-dimensional polytope. Polytopes
    /// produced by this module are already canonical; this is for sets built
    /// from raw constraint lists.
    pub fn canonicalize(&self) -> Polytope {
        if self.is_empty() {
            return self.clone();
        }
        Self::canonical_from(self.dim, self.halfspaces.clone(), self.vertices.clone())
    }

    /// Canonical comparison key: sorted facets for full polytopes, sorted
    /// vertices otherwise.
    pub fn canonical_key(&self) -> (bool, Vec<Halfspace>, Vec<Point>) {
        if self.full {
            let mut hs = self.halfspaces.clone();
            hs.sort();
            (true, hs, Vec::new())
        } else {
            let mut v = self.vertices.clone();
            v.sort();
            (false, Vec::new(), v)
        }
    }

    /// Same point set.
    pub fn same_set(&self, other: &Polytope) -> bool {
        self.dim == other.dim && self.canonical_key() == other.canonical_key()
    }

    /// Edges of a 2D polygon as vertex index pairs.
    pub fn edges(&self) -> Vec<(Point, Point)> {
        let m = self.vertices.len();
        match (self.dim, m) {
            (_, 0) | (_, 1) => Vec::new(),
            (2, 2) | (1, 2) => vec![(self.vertices[0].clone(), self.vertices[1].clone())],
            (2, _) => (0..m)
                .map(|i| (self.vertices[i].clone(), self.vertices[(i + 1) % m].clone()))
                .collect(),
            _ => Vec::new(),
        }
    }
}

fn half_of(p: &[Rational], c: &[Rational]) -> u8 {
    let dx = &p[0] - &c[0];
    let dy = &p[1] - &c[1];
    if dy.is_positive() || (dy.is_zero() && dx.is_positive()) {
        0
    } else {
        1
    }
}

fn remove_collinear(mut verts: Vec<Point>) -> Vec<Point> {
    loop {
        let k = verts.len();
        if k < 3 {
            return verts;
        }
        let idx = (0..k).find(|&i| cross2(&verts[(i + k - 1) % k], &verts[i], &verts[(i + 1) % k]).is_zero());
        match idx {
            Some(i) => {
                verts.remove(i);
            }
            None => return verts,
        }
    }
}

fn affinely_spanning_3d(verts: &[Point]) -> bool {
    if verts.len() < 4 {
        return false;
    }
    let o = &verts[0];
    for i in 1..verts.len() {
        for j in i + 1..verts.len() {
            for k in j + 1..verts.len() {
                if !det3(&sub(&verts[i], o), &sub(&verts[j], o), &sub(&verts[k], o)).is_zero() {
                    return true;
                }
            }
        }
    }
    false
}

fn spans_plane(pts: &[&Point]) -> bool {
    let o = pts[0];
    for i in 1..pts.len() {
        for j in i + 1..pts.len() {
            let a = sub(pts[i], o);
            let b = sub(pts[j], o);
            let cx = &a[1] * &b[2] - &a[2] * &b[1];
            let cy = &a[2] * &b[0] - &a[0] * &b[2];
            let cz = &a[0] * &b[1] - &a[1] * &b[0];
            if !(cx.is_zero() && cy.is_zero() && cz.is_zero()) {
                return true;
            }
        }
    }
    false
}

impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.same_set(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::{int, rat};

    fn unit() -> Polytope {
        Polytope::unit_box(2).unwrap()
    }

    fn x_le(v: Rational) -> Halfspace {
        Halfspace::upper(2, 0, v)
    }

    #[test]
    fn clip_examples() {
        let half = unit().clip(&x_le(rat(1, 2))).unwrap();
        let expect = Polytope::from_box(&[int(0), int(0)], &[rat(1, 2), int(1)]).unwrap();
        assert_eq!(half, expect);
        assert_eq!(half.volume(), rat(1, 2));

        let same = unit().clip(&x_le(int(2))).unwrap();
        assert_eq!(same, unit());

        let gone = unit().clip(&x_le(int(-1))).unwrap();
        assert!(gone.is_empty());
        assert_eq!(gone.volume(), int(0));
    }

    #[test]
    fn clip_to_segment_is_not_empty() {
        let seg = unit().clip(&x_le(int(0))).unwrap();
        assert!(!seg.is_empty());
        assert!(!seg.has_interior());
        assert_eq!(seg.volume(), int(0));
        assert!(seg.contains(&[int(0), rat(1, 2)]));
        assert!(!seg.contains(&[rat(1, 10), rat(1, 2)]));
    }

    #[test]
    fn volumes() {
        assert_eq!(unit().volume(), int(1));
        let tri = unit()
            .clip(&Halfspace::new(vec![int(1), int(1)], int(1)))
            .unwrap();
        assert_eq!(tri.volume(), rat(1, 2));
        assert_eq!(tri.vertices().len(), 3);
        assert_eq!(tri.facet_count(), 3);
        assert_eq!(Polytope::empty(2).volume(), int(0));
        let cube = Polytope::unit_box(3).unwrap();
        assert_eq!(cube.volume(), int(1));
        let corner = cube
            .clip(&Halfspace::new(vec![int(1), int(1), int(1)], int(1)))
            .unwrap();
        assert_eq!(corner.volume(), rat(1, 6));
        let seg = Polytope::from_box(&[rat(-1, 2)], &[int(3)]).unwrap();
        assert_eq!(seg.volume(), rat(7, 2));
    }

    #[test]
    fn affine_images() {
        let id = RatMatrix::identity(2);
        let zero = vec![int(0), int(0)];
        assert_eq!(unit().affine_image(&id, &zero).unwrap(), unit());

        let d = RatMatrix::diag(&[int(2), rat(1, 2)]);
        let img = unit().affine_image(&d, &zero).unwrap();
        let expect = Polytope::from_box(&[int(0), int(0)], &[int(2), rat(1, 2)]).unwrap();
        assert_eq!(img, expect);

        let left = Polytope::from_box(&[int(0), int(0)], &[rat(1, 2), int(1)]).unwrap();
        let baker = left.affine_image(&d, &zero).unwrap();
        let expect = Polytope::from_box(&[int(0), int(0)], &[int(1), rat(1, 2)]).unwrap();
        assert_eq!(baker, expect);

        let singular = RatMatrix::from_rows(vec![vec![int(1), int(1)], vec![int(1), int(1)]]).unwrap();
        assert!(matches!(unit().affine_image(&singular, &zero), Err(Error::SingularMatrix)));
    }

    #[test]
    fn reflection_keeps_labels_consistent() {
        let tri = unit()
            .clip(&Halfspace::new(vec![int(1), int(2)], int(2)))
            .unwrap();
        let flip = RatMatrix::from_rows(vec![vec![int(0), int(1)], vec![int(1), int(0)]]).unwrap();
        let img = tri.affine_image(&flip, &[int(1), int(0)]).unwrap();
        // every labelled edge must lie on its halfspace boundary
        let m = img.vertices().len();
        for i in 0..m {
            let h = &img.halfspaces()[i];
            assert!(h.slack(&img.vertices()[i]).is_zero());
            assert!(h.slack(&img.vertices()[(i + 1) % m]).is_zero());
        }
        assert_eq!(img.volume(), tri.volume());
    }

    #[test]
    fn dimension_mismatch() {
        let h = Halfspace::upper(3, 0, int(1));
        assert!(matches!(unit().clip(&h), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(Polytope::unit_box(4), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn canonicalize_drops_redundant() {
        let mut hs = unit().halfspaces().to_vec();
        hs.push(x_le(int(5)));
        hs.push(Halfspace::new(vec![int(1), int(1)], int(3)));
        let p = Polytope::from_constraints(2, hs);
        assert_eq!(p.facet_count(), 4);
        assert_eq!(p, unit());
    }
}
