//! Ulam discretization of the transfer operator `L_{1/|det DT|}` on a grid
//! of congruent boxes, with exact rational transition volumes and floating
//! point eigensolvers.
//!
//! Spectral quantities of the Ulam matrix are proxies; nothing here claims
//! that they converge to the spectrum of the operator.

use crate::error::{Error, Result};
use crate::exactgeom::{format_rational, int, to_f64, Halfspace, Polytope, Rational};
use crate::pamap::{box_bounds, PiecewiseAffineMap};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_CELL_BUDGET: usize = 1 << 20;
pub const DENSE_LIMIT: usize = 4096;

/// Row-stochastic transition matrix `P_ij = vol(B_i ∩ T⁻¹B_j) / vol(B_i)`.
///
/// Cells are indexed `i_0 + N·i_1 + N²·i_2 + …` with `i_k` counted along
/// axis `k`.
#[derive(Clone, Debug)]
pub struct UlamMatrix {
    n: usize,
    dim: usize,
    lo: Vec<Rational>,
    width: Vec<Rational>,
    /// Sorted by `(i, j)`, no zero weights.
    entries: Vec<(usize, usize, Rational)>,
    weights: Vec<f64>,
    /// Rows whose exact sum is not 1.
    pub deficient_rows: Vec<(usize, String)>,
}

fn unflatten(n: usize, dim: usize, mut i: usize) -> Vec<usize> {
    (0..dim)
        .map(|_| {
            let r = i % n;
            i /= n;
            r
        })
        .collect()
}

impl UlamMatrix {
    pub fn build(map: &PiecewiseAffineMap, n: usize) -> Result<Self> {
        Self::build_with_budget(map, n, DEFAULT_CELL_BUDGET)
    }

    pub fn build_with_budget(map: &PiecewiseAffineMap, n: usize, budget: usize) -> Result<Self> {
        let dim = map.dim();
        if n == 0 {
            return Err(Error::InvalidParameter("grid size must be positive".into()));
        }
        let cells = (0..dim)
            .try_fold(1usize, |acc, _| acc.checked_mul(n))
            .filter(|&c| c <= budget)
            .ok_or_else(|| Error::Budget(format!("{n}^{dim} cells exceed {budget}")))?;
        let (lo, hi) = box_bounds(map.fundamental_box())
            .ok_or_else(|| Error::InvalidMap("empty box".into()))?;
        let width: Vec<Rational> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / int(n as i64)).collect();
        let mut grid = Self {
            n,
            dim,
            lo,
            width,
            entries: Vec::new(),
            weights: Vec::new(),
            deficient_rows: Vec::new(),
        };
        let rows: Vec<Result<Vec<(usize, Rational)>>> = (0..cells).into_par_iter().map(|i| grid.row(map, i)).collect();
        for (i, row) in rows.into_iter().enumerate() {
            let row = row?;
            let mut sum = Rational::zero();
            for (j, w) in row {
                sum += &w;
                grid.entries.push((i, j, w));
            }
            if sum != int(1) {
                grid.deficient_rows.push((i, format_rational(&sum)));
            }
        }
        grid.weights = grid.entries.iter().map(|e| to_f64(&e.2)).collect();
        Ok(grid)
    }

    fn cell(&self, idx: &[usize]) -> Result<Polytope> {
        let lo: Vec<Rational> = (0..self.dim).map(|k| &self.lo[k] + &self.width[k] * int(idx[k] as i64)).collect();
        let hi: Vec<Rational> = (0..self.dim).map(|k| &lo[k] + &self.width[k]).collect();
        Polytope::from_box(&lo, &hi)
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &v| acc * self.n + v)
    }

    /// Cell index ranges meeting the float bounding box of `p`, padded by one.
    fn candidate_ranges(&self, p: &Polytope) -> Vec<(usize, usize)> {
        let (blo, bhi) = p.bbox();
        (0..self.dim)
            .map(|k| {
                let lo = to_f64(&self.lo[k]);
                let w = to_f64(&self.width[k]);
                let a = ((blo[k] - lo) / w).floor() as i64 - 1;
                let b = ((bhi[k] - lo) / w).floor() as i64 + 1;
                let clamp = |v: i64| v.clamp(0, self.n as i64 - 1) as usize;
                (clamp(a), clamp(b))
            })
            .collect()
    }

    fn row(&self, map: &PiecewiseAffineMap, i: usize) -> Result<Vec<(usize, Rational)>> {
        let idx = unflatten(self.n, self.dim, i);
        let cell = self.cell(&idx)?;
        let cell_vol = cell.volume();
        let mut out: Vec<(usize, Rational)> = Vec::new();
        for br in map.branches() {
            let det = br.det().abs();
            if det.is_zero() || !cell.bbox_overlaps(br.domain(), 1e-9) {
                continue;
            }
            let piece = cell.intersect(br.domain())?;
            if !piece.has_interior() {
                continue;
            }
            let img = br.image_of(&piece)?;
            let ranges = self.candidate_ranges(&img);
            let mut j_idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                let mut hs = Vec::with_capacity(2 * self.dim);
                for k in 0..self.dim {
                    let a = &self.lo[k] + &self.width[k] * int(j_idx[k] as i64);
                    hs.push(Halfspace::lower(self.dim, k, a.clone()));
                    hs.push(Halfspace::upper(self.dim, k, a + &self.width[k]));
                }
                let part = img.clip_all(&hs)?;
                if part.has_interior() {
                    let w = part.volume() / (&det * &cell_vol);
                    out.push((self.flat(&j_idx), w));
                }
                for k in 0..self.dim {
                    if j_idx[k] < ranges[k].1 {
                        j_idx[k] += 1;
                        continue 'outer;
                    }
                    j_idx[k] = ranges[k].0;
                }
                break;
            }
        }
        out.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, Rational)> = Vec::with_capacity(out.len());
        for (j, w) in out {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += w,
                _ => merged.push((j, w)),
            }
        }
        Ok(merged)
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn entries(&self) -> &[(usize, usize, Rational)] {
        &self.entries
    }

    pub fn is_row_stochastic(&self) -> bool {
        self.deficient_rows.is_empty()
    }

    /// Lower corner of cell `i` as floats.
    pub fn cell_corner(&self, i: usize) -> Vec<f64> {
        let idx = unflatten(self.n, self.dim, i);
        (0..self.dim)
            .map(|k| to_f64(&(&self.lo[k] + &self.width[k] * int(idx[k] as i64))))
            .collect()
    }

    pub fn cell_volume(&self) -> Rational {
        self.width.iter().product()
    }

    /// `v ↦ vP` in floating point.
    pub fn left_apply(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (e, w) in self.entries.iter().zip(&self.weights) {
            out[e.1] += v[e.0] * w;
        }
    }

    /// `vP` in exact arithmetic.
    pub fn left_apply_exact(&self, v: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.size()];
        for (i, j, w) in &self.entries {
            out[*j] += &v[*i] * w;
        }
        out
    }

    /// `max_j |(vP − v)_j|`, exactly.
    pub fn exact_fixed_point_residual(&self, v: &[Rational]) -> Rational {
        self.left_apply_exact(v)
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn column_sums(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.size()];
        for (_, j, w) in &self.entries {
            out[*j] += w;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for (e, w) in self.entries.iter().zip(&self.weights) {
            m[(e.0, e.1)] += w;
        }
        m
    }

    /// Coordinate list: a `rows cols nnz` line, then one `i j p/q` line per
    /// entry.
    pub fn to_coordinate_list(&self) -> String {
        let n = self.size();
        let mut s = format!("{n} {n} {}\n", self.entries.len());
        for (i, j, w) in &self.entries {
            s.push_str(&format!("{i} {j} {}\n", format_rational(w)));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenPair {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    /// `‖vP − λv‖ / ‖v‖`.
    pub residual: f64,
    pub converged: bool,
    #[serde(skip)]
    pub vector: Vec<Complex64>,
}

impl EigenPair {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub pairs: Vec<EigenPair>,
    pub iterations: usize,
    pub converged: bool,
}

impl Spectrum {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,re,im,modulus,residual,converged\n");
        for (i, p) in self.pairs.iter().enumerate() {
            s.push_str(&format!(
                "{},{:.15},{:.15},{:.15},{:.3e},{}\n",
                i + 1,
                p.re,
                p.im,
                p.modulus,
                p.residual,
                p.converged
            ));
        }
        s
    }
}

fn by_modulus(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.im.total_cmp(&a.im))
        .then(b.re.total_cmp(&a.re))
}

/// Orthonormal basis of the columns of `m` (thin QR).
fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Left eigenpairs of the `k` largest moduli by block subspace iteration
/// with Rayleigh–Ritz extraction.
pub fn leading_spectrum(p: &UlamMatrix, k: usize, tol: f64, max_iter: usize) -> Result<Spectrum> {
    let n = p.size();
    if k == 0 || k > 10 {
        return Err(Error::InvalidParameter("k must lie in 1..=10".into()));
    }
    let k = k.min(n);
    let b = (k + 4).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = DMatrix::from_fn(n, b, |_, j| if j == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
    q = orthonormalize(q);
    let mut w = DMatrix::zeros(n, b);
    let mut col_out = vec![0.0; n];
    let mut last = None;
    for it in 1..=max_iter.max(1) {
        for j in 0..b {
            p.left_apply(q.column(j).as_slice(), &mut col_out);
            w.column_mut(j).copy_from_slice(&col_out);
        }
        let h = q.transpose() * &w;
        let pairs = ritz_pairs(&q, &w, &h, k, tol);
        let done = pairs.iter().all(|e| e.converged);
        last = Some((pairs, it));
        if done {
            break;
        }
        q = orthonormalize(w.clone());
    }
    let (pairs, iterations) = last.expect("at least one iteration");
    let converged = pairs.iter().all(|e| e.converged);
    Ok(Spectrum {
        pairs,
        iterations,
        converged,
    })
}

fn ritz_pairs(q: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>, k: usize, tol: f64) -> Vec<EigenPair> {
    let mut evals: Vec<Complex64> = h.complex_eigenvalues().iter().copied().collect();
    evals.sort_by(by_modulus);
    let b = h.nrows();
    let hc: DMatrix<Complex64> = h.map(|x| Complex64::new(x, 0.0));
    let qc: DMatrix<Complex64> = q.map(|x| Complex64::new(x, 0.0));
    let wc: DMatrix<Complex64> = w.map(|x| Complex64::new(x, 0.0));
    let mut out = Vec::with_capacity(k);
    let mut i = 0;
    while i < evals.len() && out.len() < k {
        // cluster of numerically equal eigenvalues
        let lam = evals[i];
        let scale = 1.0 + lam.norm();
        let m = evals[i..].iter().take_while(|e| (*e - lam).norm() <= 1e-9 * scale).count();
        let shifted = &hc - DMatrix::<Complex64>::identity(b, b) * lam;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.expect("requested");
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
        for &row in order.iter().take(m) {
            if out.len() == k {
                break;
            }
            let y: DVector<Complex64> = vt.row(row).transpose().map(|c| c.conj());
            let v = &qc * &y;
            let r = &wc * &y - &v * lam;
            let residual = r.norm() / v.norm();
            let mut vector: Vec<Complex64> = v.iter().copied().collect();
            normalize_phase(&mut vector);
            out.push(EigenPair {
                re: lam.re,
                im: lam.im,
                modulus: lam.norm(),
                residual,
                converged: residual <= tol,
                vector,
            });
        }
        i += m;
    }
    out
}

/// Fixes the arbitrary complex phase so that the largest entry is real
/// positive.
fn normalize_phase(v: &mut [Complex64]) {
    let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
        return;
    };
    if big.norm() == 0.0 {
        return;
    }
    let phase = big.conj() / big.norm();
    v.iter_mut().for_each(|x| *x *= phase);
}

/// All eigenvalues of the dense matrix, sorted by decreasing modulus.
pub fn dense_spectrum(p: &UlamMatrix) -> Result<Vec<Complex64>> {
    if p.size() > DENSE_LIMIT {
        return Err(Error::Budget(format!(
            "dense solve limited to {DENSE_LIMIT} cells, got {}",
            p.size()
        )));
    }
    let mut evals: Vec<Complex64> = p.to_dense().complex_eigenvalues().iter().copied().collect();
    evals.sort_by(by_modulus);
    Ok(evals)
}

#[derive(Clone, Debug, Serialize)]
pub struct Density {
    /// Density with respect to Lebesgue measure, per cell.
    pub values: Vec<f64>,
    /// Cell masses, summing to 1.
    pub masses: Vec<f64>,
    /// `‖vP − v‖₁` of the returned masses.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Eigenvalues on the unit circle, counted with multiplicity, if a
    /// spectrum was supplied.
    pub peripheral_count: Option<usize>,
    /// Most negative mass before clipping.
    pub min_mass: f64,
    pub negative_flag: bool,
}

impl Density {
    pub fn to_csv(&self, p: &UlamMatrix) -> String {
        let axes: Vec<String> = (0..p.dim()).map(|k| format!("x{k}")).collect();
        let mut s = format!("cell,{},density\n", axes.join(","));
        for (i, v) in self.values.iter().enumerate() {
            let c: Vec<String> = p.cell_corner(i).iter().map(|x| format!("{x:.12}")).collect();
            s.push_str(&format!("{i},{},{:.12e}\n", c.join(","), v));
        }
        s
    }
}

/// Pushes the normalized Lebesgue measure forward until it stops changing;
/// if it does not settle (peripheral eigenvalues other than 1), returns the
/// Cesàro average of the iterates instead.
pub fn physical_density(p: &UlamMatrix, spectrum: Option<&Spectrum>, tol: f64, max_iter: usize) -> Result<Density> {
    let n = p.size();
    let mut v = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut avg = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter.max(1) {
        p.left_apply(&v, &mut next);
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        avg.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
        std::mem::swap(&mut v, &mut next);
        iterations = it;
        if residual <= tol {
            converged = true;
            break;
        }
    }
    let masses_raw = if converged {
        v
    } else {
        avg.iter().map(|a| a / iterations as f64).collect()
    };
    if !converged {
        let mut tmp = vec![0.0; n];
        p.left_apply(&masses_raw, &mut tmp);
        residual = tmp.iter().zip(&masses_raw).map(|(a, b)| (a - b).abs()).sum();
    }
    let min_mass = masses_raw.iter().copied().fold(f64::INFINITY, f64::min);
    let negative_flag = min_mass < -tol.max(1e-12);
    let total: f64 = masses_raw.iter().map(|m| m.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("density has no positive mass".into()));
    }
    let masses: Vec<f64> = masses_raw.iter().map(|m| m.max(0.0) / total).collect();
    let vol = to_f64(&p.cell_volume());
    let values = masses.iter().map(|m| m / vol).collect();
    let peripheral_count = spectrum.map(|s| s.pairs.iter().filter(|e| (e.modulus - 1.0).abs() <= 1e-8).count());
    Ok(Density {
        values,
        masses,
        residual,
        iterations,
        converged,
        peripheral_count,
        min_mass,
        negative_flag,
    })
}

/// `|λ_2|` of the Ulam matrix, labelled as a proxy for the mixing rate, next
/// to an optional essential-spectral-radius bound.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub label: &'static str,
    pub lambda1: f64,
    pub lambda2_abs: Option<f64>,
    pub bound: Option<f64>,
}

pub fn gap(spectrum: &Spectrum, bound: Option<f64>) -> Result<GapReport> {
    let first = spectrum
        .pairs
        .first()
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
    Ok(GapReport {
        label: "proxy",
        lambda1: first.modulus,
        lambda2_abs: spectrum.pairs.get(1).map(|e| e.modulus),
        bound,
    })
}

/// Uniform measure as exact cell masses.
pub fn uniform_masses(p: &UlamMatrix) -> Vec<Rational> {
    let n = p.size();
    vec![Rational::new(1.into(), (n as i64).into()); n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::{rat, RatMatrix};
    use crate::pamap::{builtin, AffineBranch, HyperbolicSplitting, Params};

    fn map(name: &str) -> PiecewiseAffineMap {
        builtin(name, &Params::new()).unwrap()
    }

    #[test]
    fn baker_dyadic_rows() {
        let p = UlamMatrix::build(&map("baker"), 4).unwrap();
        assert!(p.is_row_stochastic());
        let mut counts = [0; 16];
        for (i, _, w) in p.entries() {
            counts[*i] += 1;
            assert_eq!(*w, rat(1, 2));
        }
        assert!(counts.iter().all(|&c| c == 2));
        assert!(p.exact_fixed_point_residual(&uniform_masses(&p)).is_zero());
    }

    #[test]
    fn identity_map() {
        let bx = Polytope::unit_box(2).unwrap();
        let br = AffineBranch::new(RatMatrix::identity(2), vec![int(0), int(0)], bx.clone(), int(1)).unwrap();
        let m = PiecewiseAffineMap::new("id", bx, vec![br], HyperbolicSplitting::axes(1, 1), false, None).unwrap();
        let p = UlamMatrix::build(&m, 3).unwrap();
        assert_eq!(p.entries().len(), 9);
        assert!(p.entries().iter().all(|(i, j, w)| i == j && *w == int(1)));
        let s = leading_spectrum(&p, 3, 1e-10, 50).unwrap();
        assert!(s.pairs.iter().all(|e| (e.re - 1.0).abs() < 1e-12 && e.converged));
        let g = gap(&s, None).unwrap();
        assert!((g.lambda2_abs.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dissipative_is_not_conservative() {
        let p = UlamMatrix::build(&map("dissipative_baker"), 6).unwrap();
        assert!(p.is_row_stochastic());
        assert!(p.entries().iter().all(|e| e.2.is_positive() && e.2 <= int(1)));
        assert!(p.column_sums().iter().any(|c| *c != int(1)));
        assert!(!p.exact_fixed_point_residual(&uniform_masses(&p)).is_zero());
    }

    #[test]
    fn sloppy_uniform_fixed_point() {
        let p = UlamMatrix::build(&map("sloppy_baker"), 6).unwrap();
        assert!(p.is_row_stochastic());
        assert!(p.exact_fixed_point_residual(&uniform_masses(&p)).is_zero());
    }

    #[test]
    fn iterative_matches_dense() {
        let p = UlamMatrix::build(&map("dissipative_baker"), 8).unwrap();
        let s = leading_spectrum(&p, 3, 1e-10, 2000).unwrap();
        let d = dense_spectrum(&p).unwrap();
        assert!(s.converged);
        for i in 0..3 {
            assert!((s.pairs[i].modulus - d[i].norm()).abs() < 1e-8, "{i}");
        }
        assert!((d[1].norm() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn baker_rest_of_spectrum_is_nilpotent() {
        // everything but λ = 1 sits in a defective zero eigenvalue, so both
        // solvers only resolve it to rounding noise
        let p = UlamMatrix::build(&map("baker"), 8).unwrap();
        let s = leading_spectrum(&p, 2, 1e-10, 2000).unwrap();
        let d = dense_spectrum(&p).unwrap();
        assert!((s.pairs[0].re - 1.0).abs() < 1e-10 && s.pairs[0].residual <= 1e-10);
        assert!(s.pairs[1].modulus < 1e-2 && d[1].norm() < 1e-2);
    }

    #[test]
    fn densities() {
        let p = UlamMatrix::build(&map("baker"), 8).unwrap();
        let d = physical_density(&p, None, 1e-12, 100).unwrap();
        assert!(d.converged && d.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let p = UlamMatrix::build(&map("dissipative_baker"), 8).unwrap();
        let d = physical_density(&p, None, 1e-12, 10_000).unwrap();
        assert!((d.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(!d.negative_flag && d.residual <= 1e-10);
        assert!(d.values.iter().cloned().fold(0.0, f64::max) > 1.5);
    }

    #[test]
    fn contracting_pair_has_two_peripheral_values() {
        let p = UlamMatrix::build(&map("contracting_pair"), 8).unwrap();
        assert!(p.is_row_stochastic());
        let d = dense_spectrum(&p).unwrap();
        assert!((d[1].norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coordinate_list_format() {
        let p = UlamMatrix::build(&map("baker"), 2).unwrap();
        let text = p.to_coordinate_list();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("4 4 8"));
        assert!(lines.all(|l| l.ends_with(" 1/2")));
    }
}
