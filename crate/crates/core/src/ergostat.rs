//! Orbit statistics: Birkhoff averages over seeded ensembles, lagged
//! correlations with a batch-means noise floor, and decay-rate fits.
//!
//! Orbits live on the lattice `(1/q)Zᵈ` with `q = 2⁶¹ − 45`, a prime with
//! primitive root 2, and are advanced with exact integer arithmetic followed
//! by rounding to the nearest lattice point. Plain `f64` orbits of the
//! doubling map lose one bit per step and reach 0 after about 53 steps; on
//! this lattice `x ↦ 2x mod 1` is a permutation of period `q − 1`.

use crate::error::{Error, Result};
use crate::exactgeom::{common_denominator, Rational};
use crate::pamap::{box_bounds, PiecewiseAffineMap};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

pub const LATTICE_Q: i128 = 2_305_843_009_213_693_907;

/// Coefficient numerators and denominators must stay below this so that
/// every product with a lattice coordinate fits in `i128`.
const COEFF_LIMIT: i128 = 1 << 40;

fn round_div(num: i128, den: i128) -> i128 {
    // nearest integer, ties towards +∞
    (2 * num + den).div_euclid(2 * den)
}

fn big_to_i128(x: &BigInt) -> Result<i128> {
    x.to_i128()
        .ok_or_else(|| Error::InvalidMap("coefficient too large for lattice orbits".into()))
}

/// `round(r·q)`.
fn lattice_coord(r: &Rational) -> Result<i128> {
    let num = r.numer() * BigInt::from(LATTICE_Q);
    let den = r.denom();
    let (fl, rem) = num.div_mod_floor(den);
    let twice: BigInt = rem * 2;
    let v = if &twice >= den { fl + 1 } else { fl };
    big_to_i128(&v)
}

/// Integer row `(P, s)` with `r_j = P_j / s`.
fn scaled_row(row: &[Rational]) -> Result<(Vec<i128>, i128)> {
    let s = common_denominator(row);
    let p: Vec<i128> = row
        .iter()
        .map(|r| big_to_i128(&(r.numer() * (&s / r.denom()))))
        .collect::<Result<_>>()?;
    let s = big_to_i128(&s)?;
    if s >= COEFF_LIMIT || p.iter().any(|v| v.abs() >= COEFF_LIMIT) {
        return Err(Error::InvalidMap("coefficient too large for lattice orbits".into()));
    }
    Ok((p, s))
}

#[derive(Clone, Debug)]
struct LatticeBranch {
    /// Row `i` of `x ↦ Ax + b` is `(Σ_j a[i][j] m_j + c[i]·q) / s[i]`.
    a: Vec<Vec<i128>>,
    c: Vec<i128>,
    s: Vec<i128>,
    /// `Σ_k n_k m_k ≤ o·q`.
    halfspaces: Vec<(Vec<i128>, i128)>,
}

/// A map prepared for lattice iteration.
#[derive(Clone, Debug)]
pub struct LatticeMap {
    dim: usize,
    lo: Vec<i128>,
    hi: Vec<i128>,
    torus: bool,
    branches: Vec<LatticeBranch>,
}

impl LatticeMap {
    pub fn new(map: &PiecewiseAffineMap) -> Result<Self> {
        let (lo, hi) = box_bounds(map.fundamental_box()).ok_or_else(|| Error::InvalidMap("empty box".into()))?;
        let lo = lo.iter().map(lattice_coord).collect::<Result<Vec<_>>>()?;
        let hi = hi.iter().map(lattice_coord).collect::<Result<Vec<_>>>()?;
        let mut branches = Vec::new();
        for br in map.branches() {
            let d = map.dim();
            let (mut a, mut c, mut s) = (Vec::new(), Vec::new(), Vec::new());
            for i in 0..d {
                let mut row: Vec<Rational> = br.matrix().row(i).to_vec();
                row.push(br.translation()[i].clone());
                let (mut p, den) = scaled_row(&row)?;
                c.push(p.pop().expect("translation entry"));
                a.push(p);
                s.push(den);
            }
            let mut halfspaces = Vec::new();
            for h in br.domain().halfspaces() {
                let mut row: Vec<Rational> = h.normal().to_vec();
                row.push(h.offset().clone());
                let (mut p, _) = scaled_row(&row)?;
                let o = p.pop().expect("offset entry");
                halfspaces.push((p, o));
            }
            branches.push(LatticeBranch { a, c, s, halfspaces });
        }
        Ok(Self {
            dim: map.dim(),
            lo,
            hi,
            torus: map.is_torus(),
            branches,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_lattice(&self, x: &[Rational]) -> Result<Vec<i128>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        x.iter().map(lattice_coord).collect()
    }

    pub fn to_f64(m: &[i128]) -> Vec<f64> {
        m.iter().map(|&v| v as f64 / LATTICE_Q as f64).collect()
    }

    fn in_box(&self, m: &[i128]) -> bool {
        (0..self.dim).all(|k| self.lo[k] <= m[k] && m[k] <= self.hi[k])
    }

    fn contains(br: &LatticeBranch, m: &[i128]) -> bool {
        br.halfspaces.iter().all(|(n, o)| {
            let lhs: i128 = n.iter().zip(m).map(|(a, b)| a * b).sum();
            lhs <= o * LATTICE_Q
        })
    }

    /// Uniform lattice point in the box.
    pub fn random_point(&self, rng: &mut impl Rng) -> Vec<i128> {
        (0..self.dim)
            .map(|k| {
                let w = (self.hi[k] - self.lo[k]) as u64;
                self.lo[k] + rng.gen_range(0..w) as i128
            })
            .collect()
    }

    /// One step in place. Returns the branch used and whether another branch
    /// also contained the point (a boundary tie, resolved to the lowest
    /// index).
    pub fn step(&self, m: &mut [i128], step: usize) -> Result<(usize, bool)> {
        let mut chosen = None;
        let mut tie = false;
        for (i, br) in self.branches.iter().enumerate() {
            if Self::contains(br, m) {
                if chosen.is_none() {
                    chosen = Some(i);
                } else {
                    tie = true;
                    break;
                }
            }
        }
        let i = chosen.ok_or(Error::NoBranch { step })?;
        let br = &self.branches[i];
        let old: Vec<i128> = m.to_vec();
        for r in 0..self.dim {
            let num: i128 = br.a[r].iter().zip(&old).map(|(a, b)| a * b).sum::<i128>() + br.c[r] * LATTICE_Q;
            m[r] = round_div(num, br.s[r]);
        }
        if self.torus {
            for k in 0..self.dim {
                let w = self.hi[k] - self.lo[k];
                m[k] = self.lo[k] + (m[k] - self.lo[k]).rem_euclid(w);
            }
        } else if !self.in_box(m) {
            return Err(Error::EscapedBox { step });
        }
        Ok((i, tie))
    }
}

/// Trajectory `x_0, …, x_n` as floats, with the number of boundary ties.
pub fn orbit(map: &PiecewiseAffineMap, x0: &[Rational], n: usize) -> Result<(Vec<Vec<f64>>, usize)> {
    let lm = LatticeMap::new(map)?;
    let mut m = lm.to_lattice(x0)?;
    if !lm.in_box(&m) {
        return Err(Error::EscapedBox { step: 0 });
    }
    let mut out = vec![LatticeMap::to_f64(&m)];
    let mut ties = 0;
    for s in 1..=n {
        let (_, tie) = lm.step(&mut m, s)?;
        ties += tie as usize;
        out.push(LatticeMap::to_f64(&m));
    }
    Ok((out, ties))
}

/// Built-in Hölder observables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Observable {
    One,
    Coordinate(usize),
    /// `cos(2π⟨k,x⟩)`.
    Cos(Vec<i64>),
    /// `sin(2π⟨k,x⟩)`.
    Sin(Vec<i64>),
}

impl Observable {
    /// Accepts `one`, `x`, `y`, `z`, `cos2pix`, `sin2piy`, … and
    /// `cos2pi(k1,k2)`.
    pub fn parse(s: &str, dim: usize) -> Result<Self> {
        let s = s.trim();
        let axis = |c: &str| match c {
            "x" => Some(0),
            "y" => Some(1),
            "z" => Some(2),
            _ => None,
        };
        let bad = || Error::InvalidParameter(format!("unknown observable `{s}` for dimension {dim}"));
        let unit = |k: usize| -> Vec<i64> { (0..dim).map(|j| (j == k) as i64).collect() };
        let obs = if s == "1" || s == "one" {
            Observable::One
        } else if let Some(k) = axis(s) {
            Observable::Coordinate(k)
        } else if let Some(rest) = s.strip_prefix("cos2pi").or_else(|| s.strip_prefix("sin2pi")) {
            let k = if let Some(a) = axis(rest) {
                if a >= dim {
                    return Err(bad());
                }
                unit(a)
            } else {
                let inner = rest
                    .strip_prefix('(')
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(bad)?;
                let k: Vec<i64> = inner
                    .split(',')
                    .map(|v| v.trim().parse::<i64>().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                if k.len() != dim {
                    return Err(bad());
                }
                k
            };
            if s.starts_with("cos") {
                Observable::Cos(k)
            } else {
                Observable::Sin(k)
            }
        } else {
            return Err(bad());
        };
        if let Observable::Coordinate(k) = obs {
            if k >= dim {
                return Err(bad());
            }
        }
        Ok(obs)
    }

    pub fn eval(&self, m: &[i128]) -> f64 {
        match self {
            Observable::One => 1.0,
            Observable::Coordinate(k) => m[*k] as f64 / LATTICE_Q as f64,
            Observable::Cos(k) | Observable::Sin(k) => {
                // reduce the phase exactly before going to floats
                let phase = k
                    .iter()
                    .zip(m)
                    .map(|(&a, &b)| (a as i128 * b.rem_euclid(LATTICE_Q)).rem_euclid(LATTICE_Q))
                    .fold(0i128, |acc, v| (acc + v) % LATTICE_Q);
                let theta = 2.0 * PI * (phase as f64 / LATTICE_Q as f64);
                if matches!(self, Observable::Cos(_)) {
                    theta.cos()
                } else {
                    theta.sin()
                }
            }
        }
    }

    /// Lebesgue average over the unit box, when known in closed form.
    pub fn unit_box_integral(&self) -> Option<f64> {
        match self {
            Observable::One => Some(1.0),
            Observable::Coordinate(_) => Some(0.5),
            Observable::Cos(k) => Some(if k.iter().all(|&v| v == 0) { 1.0 } else { 0.0 }),
            Observable::Sin(_) => Some(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ensemble {
    pub seed: u64,
    pub starts: usize,
    pub length: usize,
    pub burn_in: usize,
}

impl Ensemble {
    fn start(&self, lm: &LatticeMap, s: usize) -> Vec<i128> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(s as u64);
        lm.random_point(&mut rng)
    }

    fn check(&self) -> Result<()> {
        if self.starts == 0 || self.length == 0 {
            return Err(Error::InvalidParameter("need at least one start and one iterate".into()));
        }
        Ok(())
    }
}

/// Advances through the burn-in and records `length` observable values.
fn sample_orbit(lm: &LatticeMap, m: &mut [i128], burn_in: usize, length: usize, fs: &[&Observable]) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut ties = 0;
    for s in 1..=burn_in {
        ties += lm.step(m, s)?.1 as usize;
    }
    let mut out: Vec<Vec<f64>> = fs.iter().map(|_| Vec::with_capacity(length)).collect();
    for s in 0..length {
        for (o, f) in out.iter_mut().zip(fs) {
            o.push(f.eval(m));
        }
        if s + 1 < length {
            ties += lm.step(m, burn_in + s + 1)?.1 as usize;
        }
    }
    Ok((out, ties))
}

pub const BATCHES: usize = 20;

/// Standard error of the mean by batch means.
fn batch_se(xs: &[f64], batches: usize) -> f64 {
    let b = batches.min(xs.len()).max(1);
    let size = xs.len() / b;
    if size == 0 || b < 2 {
        return 0.0;
    }
    let means: Vec<f64> = (0..b).map(|i| xs[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let mu = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub centers: Vec<f64>,
    pub sizes: Vec<usize>,
    pub gaps: Vec<f64>,
}

/// Optimal 1D k-means by dynamic programming; returns within-cluster sums of
/// squares and cluster boundaries of the sorted data.
fn kmeans_1d(sorted: &[f64], k: usize) -> (f64, Vec<usize>) {
    let n = sorted.len();
    let mut pre = vec![0.0; n + 1];
    let mut pre2 = vec![0.0; n + 1];
    for (i, &x) in sorted.iter().enumerate() {
        pre[i + 1] = pre[i] + x;
        pre2[i + 1] = pre2[i] + x * x;
    }
    let cost = |i: usize, j: usize| -> f64 {
        let c = (j - i) as f64;
        let s = pre[j] - pre[i];
        (pre2[j] - pre2[i] - s * s / c).max(0.0)
    };
    let mut dp = vec![vec![f64::INFINITY; n + 1]; k + 1];
    let mut arg = vec![vec![0usize; n + 1]; k + 1];
    dp[0][0] = 0.0;
    for c in 1..=k {
        for j in c..=n {
            for i in (c - 1)..j {
                let v = dp[c - 1][i] + cost(i, j);
                if v < dp[c][j] {
                    dp[c][j] = v;
                    arg[c][j] = i;
                }
            }
        }
    }
    let mut cuts = vec![n];
    let mut j = n;
    for c in (1..=k).rev() {
        j = arg[c][j];
        cuts.push(j);
    }
    cuts.reverse();
    (dp[k][n], cuts)
}

/// k-means clusters with `k ≤ k_max` chosen by the gap statistic against a
/// uniform reference on the data range.
pub fn cluster(values: &[f64], k_max: usize, seed: u64) -> ClusterSummary {
    let mut xs: Vec<f64> = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let summary = |k: usize, gaps: Vec<f64>| {
        let (_, cuts) = kmeans_1d(&xs, k);
        let mut centers = Vec::new();
        let mut sizes = Vec::new();
        for w in cuts.windows(2) {
            let part = &xs[w[0]..w[1]];
            centers.push(part.iter().sum::<f64>() / part.len() as f64);
            sizes.push(part.len());
        }
        ClusterSummary { k, centers, sizes, gaps }
    };
    if n == 0 {
        return ClusterSummary {
            k: 0,
            centers: vec![],
            sizes: vec![],
            gaps: vec![],
        };
    }
    let (lo, hi) = (xs[0], xs[n - 1]);
    let k_max = k_max.min(n).max(1);
    if hi - lo <= f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) || k_max == 1 {
        return summary(1, vec![]);
    }
    const REFS: usize = 20;
    let floor = 1e-300;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs: Vec<Vec<f64>> = (0..REFS)
        .map(|_| {
            let mut r: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
            r.sort_by(f64::total_cmp);
            r
        })
        .collect();
    let mut gaps = Vec::new();
    let mut sds = Vec::new();
    for k in 1..=k_max {
        let w = kmeans_1d(&xs, k).0.max(floor).ln();
        let lw: Vec<f64> = refs.iter().map(|r| kmeans_1d(r, k).0.max(floor).ln()).collect();
        let mean = lw.iter().sum::<f64>() / REFS as f64;
        let sd = (lw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / REFS as f64).sqrt();
        gaps.push(mean - w);
        sds.push(sd * (1.0 + 1.0 / REFS as f64).sqrt());
    }
    let k = (1..k_max)
        .find(|&k| gaps[k - 1] >= gaps[k] - sds[k])
        .unwrap_or(k_max);
    summary(k, gaps)
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffReport {
    pub map: String,
    pub observable: Observable,
    pub ensemble: Ensemble,
    /// Per-start averages over `length` iterates after the burn-in.
    pub averages: Vec<f64>,
    /// Per-start batch-means standard errors.
    pub standard_errors: Vec<f64>,
    pub integral: Option<f64>,
    /// `3·SE` with the standard errors pooled over starts.
    pub clt_band: f64,
    pub max_deviation: Option<f64>,
    pub all_within_band: Option<bool>,
    pub clusters: ClusterSummary,
    pub boundary_ties: usize,
}

impl BirkhoffReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("start,average,standard_error\n");
        for (i, (a, e)) in self.averages.iter().zip(&self.standard_errors).enumerate() {
            s.push_str(&format!("{i},{a:.15e},{e:.6e}\n"));
        }
        s
    }
}

fn unit_box(map: &PiecewiseAffineMap) -> bool {
    box_bounds(map.fundamental_box()).is_some_and(|(lo, hi)| {
        lo.iter().all(Zero::is_zero) && hi.iter().all(|v| *v == Rational::from_integer(1.into()))
    })
}

pub fn birkhoff(map: &PiecewiseAffineMap, f: &Observable, ens: &Ensemble) -> Result<BirkhoffReport> {
    ens.check()?;
    let lm = LatticeMap::new(map)?;
    let per_start: Vec<Result<(f64, f64, usize)>> = (0..ens.starts)
        .into_par_iter()
        .map(|s| {
            let mut m = ens.start(&lm, s);
            let (vals, ties) = sample_orbit(&lm, &mut m, ens.burn_in, ens.length, &[f])?;
            let v = &vals[0];
            Ok((v.iter().sum::<f64>() / v.len() as f64, batch_se(v, BATCHES), ties))
        })
        .collect();
    let mut averages = Vec::with_capacity(ens.starts);
    let mut standard_errors = Vec::with_capacity(ens.starts);
    let mut boundary_ties = 0;
    for r in per_start {
        let (a, e, t) = r?;
        averages.push(a);
        standard_errors.push(e);
        boundary_ties += t;
    }
    let pooled = (standard_errors.iter().map(|e| e * e).sum::<f64>() / ens.starts as f64).sqrt();
    let clt_band = 3.0 * pooled;
    let integral = if unit_box(map) { f.unit_box_integral() } else { None };
    let max_deviation = integral.map(|i| averages.iter().map(|a| (a - i).abs()).fold(0.0, f64::max));
    let all_within_band = max_deviation.map(|d| d <= clt_band);
    let clusters = cluster(&averages, 4, ens.seed ^ 0x9e37_79b9_7f4a_7c15);
    Ok(BirkhoffReport {
        map: map.name().to_string(),
        observable: f.clone(),
        ensemble: ens.clone(),
        averages,
        standard_errors,
        integral,
        clt_band,
        max_deviation,
        all_within_band,
        clusters,
        boundary_ties,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "UPPERCASE")]
pub enum DecayFit {
    Determined {
        rate: f64,
        ci_low: f64,
        ci_high: f64,
        /// Lags `0..window` were fitted.
        window: usize,
    },
    Undetermined {
        above_floor: usize,
    },
}

/// Least squares on `log|C_n|` over the leading lags that stay above the
/// noise floor; at least 4 such lags are needed.
pub fn fit_decay(values: &[f64], floor: &[f64]) -> DecayFit {
    let window = values
        .iter()
        .zip(floor)
        .take_while(|(v, f)| v.abs() > **f && v.abs() > 0.0)
        .count();
    if window < 4 {
        return DecayFit::Undetermined { above_floor: window };
    }
    let pts: Vec<(f64, f64)> = values[..window].iter().enumerate().map(|(i, v)| (i as f64, v.abs().ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let icept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - icept - slope * p.0).powi(2)).sum();
    let se = (rss / (k - 2.0) / sxx).sqrt();
    DecayFit::Determined {
        rate: slope.exp(),
        ci_low: (slope - 2.0 * se).exp(),
        ci_high: (slope + 2.0 * se).exp(),
        window,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationSeries {
    pub map: String,
    pub f: Observable,
    pub g: Observable,
    pub ensemble: Ensemble,
    pub values: Vec<f64>,
    /// `3·SE` of each `C_n` by batch means.
    pub noise_floor: Vec<f64>,
    /// First lag `n ≥ 1` with `|C_n|` at or below the floor.
    pub below_floor_at: Option<usize>,
    pub fit: DecayFit,
    pub boundary_ties: usize,
}

impl CorrelationSeries {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lag,C_n,noise_floor\n");
        for (i, (c, f)) in self.values.iter().zip(&self.noise_floor).enumerate() {
            s.push_str(&format!("{i},{c:.15e},{f:.6e}\n"));
        }
        s
    }
}

fn lagged_cov(fv: &[f64], gv: &[f64], lag: usize, len: usize) -> f64 {
    let f = &fv[..len];
    let g = &gv[lag..lag + len];
    let mf = f.iter().sum::<f64>() / len as f64;
    let mg = g.iter().sum::<f64>() / len as f64;
    f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / len as f64 - mf * mg
}

/// `C_n = ⟨f(x_i) g(x_{i+n})⟩ − ⟨f⟩⟨g⟩` per start, averaged over starts.
pub fn correlation(map: &PiecewiseAffineMap, f: &Observable, g: &Observable, ens: &Ensemble, n_max: usize) -> Result<CorrelationSeries> {
    ens.check()?;
    if ens.length < 2 * BATCHES {
        return Err(Error::InvalidParameter(format!("orbit length must be at least {}", 2 * BATCHES)));
    }
    let lm = LatticeMap::new(map)?;
    let len = ens.length;
    let per_start: Vec<Result<(Vec<f64>, Vec<Vec<f64>>, usize)>> = (0..ens.starts)
        .into_par_iter()
        .map(|s| {
            let mut m = ens.start(&lm, s);
            let (vals, ties) = sample_orbit(&lm, &mut m, ens.burn_in, len + n_max, &[f, g])?;
            let (fv, gv) = (&vals[0], &vals[1]);
            let full: Vec<f64> = (0..=n_max).map(|n| lagged_cov(fv, gv, n, len)).collect();
            let size = len / BATCHES;
            let batches: Vec<Vec<f64>> = (0..BATCHES)
                .map(|b| {
                    let off = b * size;
                    (0..=n_max)
                        .map(|n| lagged_cov(&fv[off..], &gv[off..], n, size))
                        .collect()
                })
                .collect();
            Ok((full, batches, ties))
        })
        .collect();
    let mut values = vec![0.0; n_max + 1];
    let mut all_batches: Vec<Vec<f64>> = Vec::new();
    let mut boundary_ties = 0;
    for r in per_start {
        let (full, batches, t) = r?;
        values.iter_mut().zip(&full).for_each(|(a, b)| *a += b / ens.starts as f64);
        all_batches.extend(batches);
        boundary_ties += t;
    }
    let nb = all_batches.len() as f64;
    // the mean over starts of full-length estimates has about the same
    // variance as the mean over all batch estimates
    let noise_floor: Vec<f64> = (0..=n_max)
        .map(|n| {
            let mu = all_batches.iter().map(|b| b[n]).sum::<f64>() / nb;
            let var = all_batches.iter().map(|b| (b[n] - mu).powi(2)).sum::<f64>() / (nb - 1.0).max(1.0);
            3.0 * (var / nb).sqrt()
        })
        .collect();
    let below_floor_at = (1..=n_max).find(|&n| values[n].abs() <= noise_floor[n]);
    let fit = fit_decay(&values, &noise_floor);
    Ok(CorrelationSeries {
        map: map.name().to_string(),
        f: f.clone(),
        g: g.clone(),
        ensemble: ens.clone(),
        values,
        noise_floor,
        below_floor_at,
        fit,
        boundary_ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::{int, rat};
    use crate::pamap::{builtin, Params};

    fn map(name: &str) -> PiecewiseAffineMap {
        builtin(name, &Params::new()).unwrap()
    }

    fn modpow(mut b: i128, mut e: i128, m: i128) -> i128 {
        let mut r = 1i128;
        b %= m;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b, m);
            }
            b = mulmod(b, b, m);
            e >>= 1;
        }
        r
    }

    fn mulmod(a: i128, b: i128, m: i128) -> i128 {
        // a, b < 2^61: split b to keep products below 2^127
        let (hi, lo) = (b >> 30, b & ((1 << 30) - 1));
        ((a * hi % m) * (1 << 30) % m + a * lo % m) % m
    }

    #[test]
    fn two_is_a_primitive_root() {
        let factors: [i128; 5] = [2, 11, 83, 215_833, 5_850_744_257];
        assert_eq!(factors.iter().product::<i128>(), LATTICE_Q - 1);
        for f in factors {
            // each factor is prime
            assert!((2..).take_while(|d: &i128| d * d <= f).all(|d| f % d != 0));
            assert_ne!(modpow(2, (LATTICE_Q - 1) / f, LATTICE_Q), 1);
        }
        assert_eq!(modpow(2, LATTICE_Q - 1, LATTICE_Q), 1);
    }

    #[test]
    fn baker_orbit_by_substitution() {
        let (traj, ties) = orbit(&map("baker"), &[rat(1, 3), rat(1, 3)], 3).unwrap();
        let expect = [[1.0 / 3.0, 1.0 / 3.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 3.0, 7.0 / 12.0], [2.0 / 3.0, 7.0 / 24.0]];
        for (p, e) in traj.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15, "{p:?}");
        }
        assert_eq!(ties, 0);
        let (fixed, _) = orbit(&map("baker"), &[int(0), int(0)], 5).unwrap();
        assert!(fixed.iter().all(|p| p[0] == 0.0 && p[1] == 0.0));
    }

    #[test]
    fn contracting_pair_from_one() {
        let (traj, ties) = orbit(&map("contracting_pair"), &[int(1)], 10).unwrap();
        for (n, p) in traj.iter().enumerate() {
            assert!((p[0] - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
        assert_eq!(ties, 1);
    }

    #[test]
    fn observables() {
        assert_eq!(Observable::parse("cos2pix", 2).unwrap(), Observable::Cos(vec![1, 0]));
        assert_eq!(Observable::parse("sin2pi(2,-1)", 2).unwrap(), Observable::Sin(vec![2, -1]));
        assert!(Observable::parse("cos2piz", 2).is_err());
        assert!(Observable::parse("tan", 1).is_err());
        let lm = LatticeMap::new(&map("baker")).unwrap();
        let m = lm.to_lattice(&[rat(1, 4), int(0)]).unwrap();
        assert!(Observable::Cos(vec![1, 0]).eval(&m).abs() < 1e-15);
        assert!((Observable::Sin(vec![1, 0]).eval(&m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn birkhoff_of_one_is_one() {
        let ens = Ensemble { seed: 3, starts: 8, length: 1000, burn_in: 10 };
        let r = birkhoff(&map("dissipative_baker"), &Observable::One, &ens).unwrap();
        assert!(r.averages.iter().all(|&a| a == 1.0));
        assert_eq!(r.clusters.k, 1);
        let again = birkhoff(&map("dissipative_baker"), &Observable::One, &ens).unwrap();
        assert_eq!(r.averages, again.averages);
    }

    #[test]
    fn constant_has_zero_correlation() {
        let ens = Ensemble { seed: 1, starts: 4, length: 2000, burn_in: 0 };
        let c = correlation(&map("baker"), &Observable::One, &Observable::Cos(vec![1, 0]), &ens, 5).unwrap();
        assert!(c.values.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn variance_at_lag_zero() {
        let ens = Ensemble { seed: 5, starts: 1, length: 4000, burn_in: 0 };
        let f = Observable::Cos(vec![0, 1]);
        let c = correlation(&map("dissipative_baker"), &f, &f, &ens, 3).unwrap();
        let lm = LatticeMap::new(&map("dissipative_baker")).unwrap();
        let mut m = ens.start(&lm, 0);
        let (vals, _) = sample_orbit(&lm, &mut m, 0, 4000, &[&f]).unwrap();
        let mu = vals[0].iter().sum::<f64>() / 4000.0;
        let var = vals[0].iter().map(|v| v * v).sum::<f64>() / 4000.0 - mu * mu;
        assert!((c.values[0] - var).abs() < 1e-12);
    }

    #[test]
    fn synthetic_geometric_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let values: Vec<f64> = (0..30).map(|n| 0.9 * 0.5f64.powi(n) + 1e-6 * rng.gen_range(-1.0..1.0)).collect();
        let floor = vec![3e-6; 30];
        match fit_decay(&values, &floor) {
            DecayFit::Determined { rate, .. } => assert!((rate - 0.5).abs() < 0.02, "{rate}"),
            other => panic!("{other:?}"),
        }
        let noise: Vec<f64> = (0..30).map(|_| 1e-6 * rng.gen_range(-1.0..1.0)).collect();
        assert!(matches!(fit_decay(&noise, &floor), DecayFit::Undetermined { .. }));
    }

    #[test]
    fn clusters_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let one: Vec<f64> = (0..100).map(|_| rng.gen_range(-0.01..0.01)).collect();
        assert_eq!(cluster(&one, 4, 1).k, 1);
        let two: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 } + rng.gen_range(-0.01..0.01)).collect();
        let c = cluster(&two, 4, 1);
        assert_eq!(c.k, 2);
        assert_eq!(c.sizes, vec![50, 50]);
    }
}
