//! Discrete anisotropic Sobolev norms on periodic grids of the unit box.
//!
//! Frequencies are integers without the 2π factor, and `L_p` is the mean
//! `(N⁻ᵈ Σ |v|^p)^{1/p}` over grid nodes, so all statements made here are
//! about trends in the resolution, not about absolute constants.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::Serialize;

pub const DEFAULT_POINT_BUDGET: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    dims: Vec<usize>,
    /// Row-major, last axis fastest.
    values: Vec<Complex64>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.iter().any(|&n| n == 0 || n % 2 != 0) {
        return Err(Error::InvalidParameter(format!("grid sizes must be even and positive, got {dims:?}")));
    }
    let total = dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    match total {
        Some(t) if t <= DEFAULT_POINT_BUDGET => Ok(t),
        _ => Err(Error::Budget(format!("grid {dims:?} exceeds {DEFAULT_POINT_BUDGET} points"))),
    }
}

/// Multi-index of the flat position `i`.
fn unflatten(dims: &[usize], mut i: usize, out: &mut [usize]) {
    for (k, &n) in dims.iter().enumerate().rev() {
        out[k] = i % n;
        i /= n;
    }
}

/// Signed frequency of FFT index `i` on an axis of length `n`.
fn signed(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl GridField {
    pub fn new(dims: Vec<usize>, values: Vec<Complex64>) -> Result<Self> {
        let total = check_dims(&dims)?;
        if values.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("non-finite field value".into()));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let total = check_dims(&dims)?;
        Ok(Self {
            dims,
            values: vec![Complex64::new(0.0, 0.0); total],
        })
    }

    pub fn constant(dims: Vec<usize>, c: f64) -> Result<Self> {
        let mut u = Self::zeros(dims)?;
        u.values.fill(Complex64::new(c, 0.0));
        Ok(u)
    }

    /// Samples `f` at the nodes `x_k = i_k / N_k`.
    pub fn from_fn(dims: Vec<usize>, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let total = check_dims(&dims)?;
        let mut idx = vec![0; dims.len()];
        let mut x = vec![0.0; dims.len()];
        let mut values = Vec::with_capacity(total);
        for i in 0..total {
            unflatten(&dims, i, &mut idx);
            for k in 0..dims.len() {
                x[k] = idx[k] as f64 / dims[k] as f64;
            }
            values.push(f(&x));
        }
        Self::new(dims, values)
    }

    /// `e^{2πi⟨k,x⟩}`.
    pub fn mode(dims: Vec<usize>, k: &[i64]) -> Result<Self> {
        if k.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: k.len(),
            });
        }
        let k: Vec<f64> = k.iter().map(|&v| v as f64).collect();
        Self::from_fn(dims, |x| {
            let phase: f64 = x.iter().zip(&k).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase)
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            dims: self.dims.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::InvalidParameter("grid sizes differ".into()));
        }
        Ok(Self {
            dims: self.dims.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Discrete `L_p` mean norm of the raw values.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_mean(&self.values, p)
    }

    /// Forward spectrum `û = F u / N_total`.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        fft_nd(&self.dims, &mut buf, false);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }

    /// Inverse of [`GridField::spectrum`].
    pub fn from_spectrum(dims: Vec<usize>, mut spec: Vec<Complex64>) -> Result<Self> {
        check_dims(&dims)?;
        fft_nd(&dims, &mut spec, true);
        Self::new(dims, spec)
    }
}

fn lp_mean(values: &[Complex64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    if p == 2.0 {
        (values.iter().map(|v| v.norm_sqr()).sum::<f64>() / n).sqrt()
    } else {
        (values.iter().map(|v| v.norm().powf(p)).sum::<f64>() / n).powf(1.0 / p)
    }
}

/// Unnormalized transform along every axis.
fn fft_nd(dims: &[usize], buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let total = buf.len();
    let mut stride = total;
    for &n in dims {
        stride /= n;
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        if stride == 1 {
            fft.process(buf);
            continue;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let block = n * stride;
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = buf[start + off + j * stride];
                }
                fft.process(&mut line);
                for (j, l) in line.iter().enumerate() {
                    buf[start + off + j * stride] = *l;
                }
            }
        }
    }
}

/// Columns spanning `(E^u, E^s)`, normalized to unit length; the first
/// `d_u` columns are unstable.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    m: DMatrix<f64>,
    d_u: usize,
}

impl Frame {
    pub fn axis(d_u: usize, d_s: usize) -> Self {
        Self {
            m: DMatrix::identity(d_u + d_s, d_u + d_s),
            d_u,
        }
    }

    pub fn from_columns(cols: &[Vec<f64>], d_u: usize) -> Result<Self> {
        let d = cols.len();
        if d == 0 || d_u > d || cols.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidParameter("frame must be square with d_u ≤ d".into()));
        }
        let mut m = DMatrix::zeros(d, d);
        for (j, c) in cols.iter().enumerate() {
            let len = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::InvalidParameter(format!("frame column {j} is zero")));
            }
            for i in 0..d {
                m[(i, j)] = c[i] / len;
            }
        }
        if m.determinant().abs() < 1e-12 {
            return Err(Error::SingularMatrix);
        }
        Ok(Self { m, d_u })
    }

    /// Frame adapted to the frequency action `k ↦ Aᵀk` of a hyperbolic 2×2
    /// matrix: frequencies grow along `Aᵀ`'s expanding direction, which is
    /// annihilated by `A`'s contracting eigenvector, so that eigenvector is
    /// the unstable column and `A`'s expanding eigenvector the stable one.
    /// Returns the frame and `|λ_u|`.
    pub fn eigenframe(a: &[Vec<i64>]) -> Result<(Self, f64)> {
        if a.len() != 2 || a.iter().any(|r| r.len() != 2) {
            return Err(Error::InvalidParameter("eigenframe needs a 2x2 matrix".into()));
        }
        let (p, q, r, s) = (a[0][0] as f64, a[0][1] as f64, a[1][0] as f64, a[1][1] as f64);
        let tr = p + s;
        let det = p * s - q * r;
        let disc = tr * tr - 4.0 * det;
        if disc <= 0.0 {
            return Err(Error::InvalidParameter("matrix is not hyperbolic".into()));
        }
        let root = disc.sqrt();
        let (l1, l2) = ((tr + root) / 2.0, (tr - root) / 2.0);
        let (big, small) = if l1.abs() >= l2.abs() { (l1, l2) } else { (l2, l1) };
        if (big.abs() - 1.0).abs() < 1e-12 || (small.abs() - 1.0).abs() < 1e-12 {
            return Err(Error::InvalidParameter("matrix is not hyperbolic".into()));
        }
        let eig = |l: f64| -> Vec<f64> {
            if q != 0.0 {
                vec![q, l - p]
            } else if r != 0.0 {
                vec![l - s, r]
            } else if (l - p).abs() < 1e-12 {
                vec![1.0, 0.0]
            } else {
                vec![0.0, 1.0]
            }
        };
        Ok((Self::from_columns(&[eig(small), eig(big)], 1)?, big.abs()))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn d_u(&self) -> usize {
        self.d_u
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// `(|ξ|², |η|²)` for the frequency `k`, with `(ξ, η) = Mᵀk`.
    pub fn split_norms(&self, k: &[f64]) -> (f64, f64) {
        let d = self.dim();
        let (mut xi, mut eta) = (0.0, 0.0);
        for j in 0..d {
            let c: f64 = (0..d).map(|i| self.m[(i, j)] * k[i]).sum();
            if j < self.d_u {
                xi += c * c;
            } else {
                eta += c * c;
            }
        }
        (xi, eta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Symbol {
    /// `(1+|ξ|²+|η|²)^{t/2} (1+|η|²)^{t₋/2}`.
    Standard,
    /// `(1+|ξ|²+|η|²)^{t/2} (1+|ξ|²)^{t₊/2}`.
    Unstable,
    /// `(1+|ξ|²)^{t₊/2} (1+|η|²)^{t₋/2}`.
    Both,
}

impl std::str::FromStr for Symbol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "stable" => Ok(Symbol::Standard),
            "unstable" => Ok(Symbol::Unstable),
            "both" => Ok(Symbol::Both),
            _ => Err(Error::InvalidParameter(format!("unknown symbol `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierSpec {
    pub t: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    pub symbol: Symbol,
    pub frame: Frame,
}

impl MultiplierSpec {
    pub fn new(t: f64, t_minus: f64, frame: Frame) -> Self {
        Self {
            t,
            t_minus,
            t_plus: 0.0,
            symbol: Symbol::Standard,
            frame,
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(0.0, 0.0, Frame::axis(d, 0))
    }

    pub fn with_symbol(mut self, symbol: Symbol, t_plus: f64) -> Self {
        self.symbol = symbol;
        self.t_plus = t_plus;
        self
    }

    pub fn inverse(&self) -> Self {
        Self {
            t: -self.t,
            t_minus: -self.t_minus,
            t_plus: -self.t_plus,
            ..self.clone()
        }
    }

    pub fn symbol_at(&self, k: &[f64]) -> f64 {
        let (xi, eta) = self.frame.split_norms(k);
        symbol_value(self.symbol, self.t, self.t_minus, self.t_plus, xi, eta)
    }
}

fn symbol_value(symbol: Symbol, t: f64, t_minus: f64, t_plus: f64, xi2: f64, eta2: f64) -> f64 {
    let pw = |base: f64, e: f64| if e == 0.0 { 1.0 } else { base.powf(e / 2.0) };
    match symbol {
        Symbol::Standard => pw(1.0 + xi2 + eta2, t) * pw(1.0 + eta2, t_minus),
        Symbol::Unstable => pw(1.0 + xi2 + eta2, t) * pw(1.0 + xi2, t_plus),
        Symbol::Both => pw(1.0 + xi2, t_plus) * pw(1.0 + eta2, t_minus),
    }
}

/// `a_{t,t₋}(ξ, η)` for scalar `ξ, η`.
pub fn a_symbol(t: f64, t_minus: f64, xi: f64, eta: f64) -> f64 {
    symbol_value(Symbol::Standard, t, t_minus, 0.0, xi * xi, eta * eta)
}

/// Calls `f(flat index, signed frequency)` for every grid frequency.
fn for_each_frequency(dims: &[usize], mut f: impl FnMut(usize, &[i64])) {
    let total: usize = dims.iter().product();
    let mut idx = vec![0; dims.len()];
    let mut k = vec![0i64; dims.len()];
    for i in 0..total {
        unflatten(dims, i, &mut idx);
        for a in 0..dims.len() {
            k[a] = signed(idx[a], dims[a]);
        }
        f(i, &k);
    }
}

fn multiply_spectrum(dims: &[usize], spec: &mut [Complex64], m: &MultiplierSpec) {
    let mut kf = vec![0.0; dims.len()];
    for_each_frequency(dims, |i, k| {
        for (a, &v) in k.iter().enumerate() {
            kf[a] = v as f64;
        }
        spec[i] *= m.symbol_at(&kf);
    });
}

fn check_frame(u: &GridField, m: &MultiplierSpec) -> Result<()> {
    if m.frame.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: m.frame.dim(),
        });
    }
    Ok(())
}

pub fn apply_multiplier(u: &GridField, m: &MultiplierSpec) -> Result<GridField> {
    check_frame(u, m)?;
    let mut spec = u.spectrum();
    multiply_spectrum(&u.dims, &mut spec, m);
    GridField::from_spectrum(u.dims.clone(), spec)
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p must lie in (1, ∞), got {p}")))
    }
}

/// `‖u‖_{H_p^{t,t₋}}` in the discrete realization.
pub fn norm(u: &GridField, p: f64, m: &MultiplierSpec) -> Result<f64> {
    check_p(p)?;
    Ok(apply_multiplier(u, m)?.lp_norm(p))
}

/// Sets whose indicators are probed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum IndicatorSet {
    /// Half-open `[lo, hi)` in the unit interval.
    Interval(f64, f64),
    /// Half-open axis-aligned rectangle in the unit square.
    Rectangle([f64; 2], [f64; 2]),
}

impl IndicatorSet {
    pub fn dim(&self) -> usize {
        match self {
            IndicatorSet::Interval(..) => 1,
            IndicatorSet::Rectangle(..) => 2,
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            IndicatorSet::Interval(lo, hi) => *lo <= x[0] && x[0] < *hi,
            IndicatorSet::Rectangle(lo, hi) => (0..2).all(|k| lo[k] <= x[k] && x[k] < hi[k]),
        }
    }

    pub fn field(&self, n: usize) -> Result<GridField> {
        GridField::from_fn(vec![n; self.dim()], |x| {
            Complex64::new(if self.contains(x) { 1.0 } else { 0.0 }, 0.0)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub resolution: usize,
    pub norm: f64,
}

pub fn series_csv(series: &[SeriesPoint]) -> String {
    let mut s = String::from("resolution,norm\n");
    for r in series {
        s.push_str(&format!("{},{:.12e}\n", r.resolution, r.norm));
    }
    s
}

/// Norm of the node-sampled indicator at each resolution.
pub fn probe_indicator(set: &IndicatorSet, p: f64, m: &MultiplierSpec, resolutions: &[usize]) -> Result<Vec<SeriesPoint>> {
    check_p(p)?;
    resolutions
        .iter()
        .map(|&n| {
            Ok(SeriesPoint {
                resolution: n,
                norm: norm(&set.field(n)?, p, m)?,
            })
        })
        .collect()
}

/// Unit-mass discrete delta at the origin: value `N^d` at one node.
pub fn dirac_field(d: usize, n: usize, mass: f64) -> Result<GridField> {
    let mut u = GridField::zeros(vec![n; d])?;
    u.values[0] = Complex64::new(mass * (n as f64).powi(d as i32), 0.0);
    Ok(u)
}

pub fn probe_dirac(p: f64, m: &MultiplierSpec, resolutions: &[usize]) -> Result<Vec<SeriesPoint>> {
    check_p(p)?;
    if m.t < 0.0 {
        return Err(Error::InvalidParameter("the Dirac probe needs t ≥ 0".into()));
    }
    resolutions
        .iter()
        .map(|&n| {
            Ok(SeriesPoint {
                resolution: n,
                norm: norm(&dirac_field(m.frame.dim(), n, 1.0)?, p, m)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositionReport {
    pub mu_u: f64,
    pub mu_s: f64,
    pub t: f64,
    pub t_minus: f64,
    pub c1: f64,
    /// `max(μ_u^t, μ_s^{t+t₋})`.
    pub factor: f64,
    /// Smallest sampled `C2 ≥ 0`, rounded up by a few ulps.
    pub c2: f64,
    /// `max (b − C1·factor·a − C2·a_{0,t₋})` over the samples; `≤ 0` when
    /// the inequality holds.
    pub residual: f64,
    /// `max (b − C1·factor·a)` over samples with `|(ξ,η)| ≥ 1`.
    pub far_residual: f64,
    /// Where the needed `C2` is attained.
    pub argmax: [f64; 2],
    pub samples: usize,
}

/// Samples `(ξ, η) ∈ [0, R]²` inside the disk of radius `R`, with scalar
/// `ξ, η` (the symbol only sees `|ξ|` and `|η|`).
pub fn verify_composition_inequality(
    mu_u: f64,
    mu_s: f64,
    t: f64,
    t_minus: f64,
    c1: Option<f64>,
    radius: f64,
    points: usize,
) -> Result<CompositionReport> {
    if !(mu_u > 0.0 && mu_u <= 1.0 && mu_s >= 1.0 && mu_s.is_finite()) {
        return Err(Error::InvalidParameter("need 0 < μ_u ≤ 1 ≤ μ_s".into()));
    }
    if !(t > 0.0 && t + t_minus < 0.0) {
        return Err(Error::InvalidParameter("need t > 0 and t + t₋ < 0".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) || points < 2 {
        return Err(Error::InvalidParameter("need R > 0 and at least 2 points".into()));
    }
    let c1 = c1.unwrap_or_else(|| f64::max(2f64.powf(t), 2f64.powf(-t_minus / 2.0)));
    let factor = f64::max(mu_u.powf(t), mu_s.powf(t + t_minus));
    let fine = radius.min(2.0);
    let mut axis: Vec<f64> = (0..points)
        .map(|i| radius * i as f64 / (points - 1) as f64)
        .chain((0..points).map(|i| fine * i as f64 / (points - 1) as f64))
        .collect();
    axis.sort_by(f64::total_cmp);
    axis.dedup();
    let mut samples = Vec::new();
    for &xi in &axis {
        for &eta in &axis {
            if xi * xi + eta * eta <= radius * radius {
                samples.push((xi, eta));
            }
        }
    }
    let eval = |xi: f64, eta: f64| {
        let b = a_symbol(t, t_minus, mu_u * xi, mu_s * eta);
        let a = a_symbol(t, t_minus, xi, eta);
        let a0 = a_symbol(0.0, t_minus, xi, eta);
        (b - c1 * factor * a, a0)
    };
    let mut c2 = 0.0;
    let mut argmax = [0.0, 0.0];
    let mut far_residual = f64::NEG_INFINITY;
    for &(xi, eta) in &samples {
        let (r, a0) = eval(xi, eta);
        if r / a0 > c2 {
            c2 = r / a0;
            argmax = [xi, eta];
        }
        if xi * xi + eta * eta >= 1.0 {
            far_residual = far_residual.max(r);
        }
    }
    if c2 > 0.0 {
        c2 *= 1.0 + 8.0 * f64::EPSILON;
    }
    let residual = samples
        .iter()
        .map(|&(xi, eta)| {
            let (r, a0) = eval(xi, eta);
            r - c2 * a0
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CompositionReport {
        mu_u,
        mu_s,
        t,
        t_minus,
        c1,
        factor,
        c2,
        residual,
        far_residual,
        argmax,
        samples: samples.len(),
    })
}

fn integer_det(a: &[Vec<i64>]) -> Result<i64> {
    let d = a.len();
    if d == 0 || a.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    let m = DMatrix::from_fn(d, d, |i, j| a[i][j] as f64);
    Ok(m.determinant().round() as i64)
}

/// One exact frequency remap `k ↦ Aᵀk` of a spectrum; returns the fraction
/// of `Σ|û|²` carried by modes that leave the lattice.
fn remap_spectrum(dims: &[usize], spec: &[Complex64], a: &[Vec<i64>]) -> (Vec<Complex64>, f64) {
    let d = dims.len();
    let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
    let (mut total, mut dropped) = (0.0, 0.0);
    let mut target = vec![0i64; d];
    for_each_frequency(dims, |i, k| {
        let w = spec[i].norm_sqr();
        if w == 0.0 {
            return;
        }
        total += w;
        for j in 0..d {
            target[j] = (0..d).map(|r| a[r][j] * k[r]).sum();
        }
        let mut flat = 0usize;
        for j in 0..d {
            let n = dims[j] as i64;
            if target[j] < -n / 2 || target[j] >= n / 2 {
                dropped += w;
                return;
            }
            flat = flat * dims[j] + target[j].rem_euclid(n) as usize;
        }
        out[flat] += spec[i];
    });
    let frac = if total > 0.0 { dropped / total } else { 0.0 };
    (out, frac)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferResult {
    pub field: GridField,
    /// Dropped fraction of `Σ|û|²` at each step.
    pub dropped: Vec<f64>,
}

/// `n` steps of the transfer operator of a toral automorphism, realized
/// exactly as the frequency permutation `k ↦ Aᵀk`.
pub fn transfer_apply(u: &GridField, a: &[Vec<i64>], n: usize) -> Result<TransferResult> {
    if a.len() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: a.len(),
        });
    }
    let det = integer_det(a)?;
    if det.abs() != 1 {
        return Err(Error::NotUnimodular(det));
    }
    let mut spec = u.spectrum();
    let mut dropped = Vec::with_capacity(n);
    for _ in 0..n {
        let (next, frac) = remap_spectrum(&u.dims, &spec, a);
        spec = next;
        dropped.push(frac);
    }
    Ok(TransferResult {
        field: GridField::from_spectrum(u.dims.clone(), spec)?,
        dropped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayOptions {
    pub grid: usize,
    pub p: f64,
    pub t: f64,
    pub t_minus: f64,
    /// Initial modes satisfy `0 < |k|_∞ ≤ band`.
    pub band: i64,
    pub n_max: usize,
    /// Per-step dropped-mass limit for steps inside the fit window.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            grid: 256,
            p: 2.0,
            t: 0.3,
            t_minus: -0.4,
            band: 1,
            n_max: 8,
            threshold: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub n: usize,
    pub norm: f64,
    pub dropped_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    pub fit_start: usize,
    pub fit_end: usize,
    /// `exp` of the least-squares slope of `log norm` against `n`.
    pub rate: f64,
    pub lambda_u: f64,
    /// `max(λ_u^{−t}, λ_s^{−(t+t₋)})` with `λ_s = 1/λ_u`.
    pub predicted: f64,
    pub max_dropped_in_window: f64,
}

impl DecayReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,norm,dropped_mass\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.12e},{:.6e}\n", r.n, r.norm, r.dropped_mass));
        }
        s
    }
}

/// Zero-mean random field with modes `0 < |k|_∞ ≤ band`.
pub fn band_limited_field(dims: Vec<usize>, band: i64, seed: u64) -> Result<GridField> {
    check_dims(&dims)?;
    if band < 1 || dims.iter().any(|&n| band >= n as i64 / 2) {
        return Err(Error::InvalidParameter(format!("band {band} does not fit the grid")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::new(0.0, 0.0); dims.iter().product()];
    for_each_frequency(&dims.clone(), |i, k| {
        if k.iter().all(|&v| v.abs() <= band) && k.iter().any(|&v| v != 0) {
            spec[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    });
    GridField::from_spectrum(dims, spec)
}

/// Fitted decay rate of the eigenframe norm under the frequency action of a
/// hyperbolic unimodular 2×2 matrix. The fit runs over `n ≥ 2` up to the
/// last step before the dropped mass first exceeds the threshold.
pub fn decay_rate(a: &[Vec<i64>], opts: &DecayOptions) -> Result<DecayReport> {
    check_p(opts.p)?;
    let det = integer_det(a)?;
    if det.abs() != 1 {
        return Err(Error::NotUnimodular(det));
    }
    let (frame, lambda_u) = Frame::eigenframe(a)?;
    let m = MultiplierSpec::new(opts.t, opts.t_minus, frame);
    let dims = vec![opts.grid, opts.grid];
    let u0 = band_limited_field(dims.clone(), opts.band, opts.seed)?;
    let mut spec = u0.spectrum();
    let norm_of = |spec: &[Complex64]| -> Result<f64> {
        let mut s = spec.to_vec();
        multiply_spectrum(&dims, &mut s, &m);
        Ok(GridField::from_spectrum(dims.clone(), s)?.lp_norm(opts.p))
    };
    let mut rows = vec![DecayRow {
        n: 0,
        norm: norm_of(&spec)?,
        dropped_mass: 0.0,
    }];
    for n in 1..=opts.n_max {
        let (next, frac) = remap_spectrum(&dims, &spec, a);
        spec = next;
        rows.push(DecayRow {
            n,
            norm: norm_of(&spec)?,
            dropped_mass: frac,
        });
    }
    let fit_start = 2;
    let mut fit_end = 0;
    for r in &rows[1..] {
        if r.dropped_mass > opts.threshold {
            break;
        }
        fit_end = r.n;
    }
    if fit_end < fit_start + 1 {
        return Err(Error::Numerical(format!(
            "dropped mass exceeds {} before step {}; use a finer grid or a narrower band",
            opts.threshold,
            fit_start + 1
        )));
    }
    let pts: Vec<(f64, f64)> = rows[fit_start..=fit_end]
        .iter()
        .map(|r| (r.n as f64, r.norm.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let rate = (sxy / sxx).exp();
    let predicted = f64::max(lambda_u.powf(-opts.t), lambda_u.powf(opts.t + opts.t_minus));
    let max_dropped_in_window = rows[1..=fit_end].iter().map(|r| r.dropped_mass).fold(0.0, f64::max);
    Ok(DecayReport {
        rows,
        fit_start,
        fit_end,
        rate,
        lambda_u,
        predicted,
        max_dropped_in_window,
    })
}
