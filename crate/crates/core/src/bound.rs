//! Finite-depth essential-spectral-radius bound sequences `B_n`, their
//! optimization over the admissible parameter region, and closed-form
//! presets.
//!
//! `B_n` is reported as a finite-depth bound sequence: the bound itself is the
//! limit `n → ∞`.

use crate::complexity::{self, CodeCell};
use crate::error::{Error, Result};
use crate::exactgeom::to_f64;
use crate::pamap::PiecewiseAffineMap;
use num_traits::Signed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Stable,
    Unstable,
    Both,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stable" => Ok(Variant::Stable),
            "unstable" => Ok(Variant::Unstable),
            "both" => Ok(Variant::Both),
            _ => Err(Error::InvalidParameter(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    /// The per-branch constants `g` of the map.
    Custom,
    /// `g = 1/|det DT|`.
    Transfer,
}

impl std::str::FromStr for Weight {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "custom" => Ok(Weight::Custom),
            "transfer" => Ok(Weight::Transfer),
            _ => Err(Error::InvalidParameter(format!("unknown weight `{s}`"))),
        }
    }
}

/// Unused smoothness fields are 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub variant: Variant,
    pub p: f64,
    pub t: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    pub alpha: f64,
    pub n: usize,
    pub weight: Weight,
}

impl BoundQuery {
    pub fn both(p: f64, t_plus: f64, t_minus: f64, n: usize, weight: Weight) -> Self {
        Self {
            variant: Variant::Both,
            p,
            t: 0.0,
            t_minus,
            t_plus,
            alpha: 1.0,
            n,
            weight,
        }
    }

    pub fn stable(p: f64, t: f64, t_minus: f64, n: usize, weight: Weight) -> Self {
        Self {
            variant: Variant::Stable,
            p,
            t,
            t_minus,
            t_plus: 0.0,
            alpha: 1.0,
            n,
            weight,
        }
    }

    pub fn unstable(p: f64, t_plus: f64, t: f64, n: usize, weight: Weight) -> Self {
        Self {
            variant: Variant::Unstable,
            p,
            t,
            t_minus: 0.0,
            t_plus,
            alpha: 1.0,
            n,
            weight,
        }
    }
}

/// Strict admissibility of the smoothness parameters.
pub fn admissible(q: &BoundQuery) -> bool {
    admissible_with_margin(q, 0.0)
}

/// Admissibility of the region shrunk by `m` in every strict inequality.
pub fn admissible_with_margin(q: &BoundQuery, m: f64) -> bool {
    let gt = |a: f64, b: f64| a > b + m || (m == 0.0 && a > b);
    let finite = [q.p, q.t, q.t_minus, q.t_plus, q.alpha].iter().all(|x| x.is_finite());
    if !finite || !gt(q.p, 1.0) || !(q.alpha > 0.0 && q.alpha <= 1.0) {
        return false;
    }
    let s = 1.0 / q.p;
    match q.variant {
        Variant::Stable => {
            gt(q.t_minus, s - 1.0)
                && gt(0.0, q.t_minus)
                && gt(q.t, 0.0)
                && gt(s, q.t)
                && gt(0.0, q.t + q.t_minus)
                && gt(q.alpha, q.t + q.t_minus.abs())
        }
        Variant::Unstable => {
            gt(q.t, s - 1.0)
                && gt(0.0, q.t)
                && gt(q.t_plus, 0.0)
                && gt(s, q.t_plus)
                && gt(q.t + q.t_plus, 0.0)
                && gt(q.alpha, q.t.abs() + q.t_plus)
        }
        Variant::Both => {
            gt(q.t_minus, s - 1.0)
                && gt(0.0, q.t_minus)
                && gt(q.t_plus, 0.0)
                && gt(s, q.t_plus)
                && gt(q.alpha, q.t_minus.abs() + q.t_plus)
        }
    }
}

/// Per-code data entering `B_n`, all as natural logarithms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CodeData {
    pub code: Vec<usize>,
    pub ln_lambda_s: f64,
    pub ln_lambda_u: f64,
    pub ln_det: f64,
    pub ln_g: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DepthData {
    pub n: usize,
    pub d_b: usize,
    pub d_e: usize,
    /// Codes with distinct rate data; the first code of each class is kept.
    pub codes: Vec<CodeData>,
}

/// Complexities and rates for depths `1..=n_max`, computed once and reused
/// by every query.
#[derive(Clone, Debug, Serialize)]
pub struct BoundData {
    pub map: String,
    pub d_u: usize,
    pub d_s: usize,
    pub depths: Vec<DepthData>,
}

fn depth_data(map: &PiecewiseAffineMap, n: usize, cells: &[CodeCell]) -> DepthData {
    let d_b = complexity::complexity_begin(map, cells).value;
    let d_e = complexity::complexity_end(map, cells).value;
    let mut seen: BTreeMap<(u64, u64, u64, u64), ()> = BTreeMap::new();
    let mut codes = Vec::new();
    for c in cells {
        let r = c.rates(map.splitting());
        let data = CodeData {
            code: c.code.clone(),
            ln_lambda_s: r.lambda_s.ln(),
            ln_lambda_u: r.lambda_u.ln(),
            ln_det: to_f64(&r.det.abs()).ln(),
            ln_g: to_f64(&r.g.abs()).ln(),
        };
        let key = (
            data.ln_lambda_s.to_bits(),
            data.ln_lambda_u.to_bits(),
            data.ln_det.to_bits(),
            data.ln_g.to_bits(),
        );
        if seen.insert(key, ()).is_none() {
            codes.push(data);
        }
    }
    DepthData { n, d_b, d_e, codes }
}

impl BoundData {
    pub fn compute(map: &PiecewiseAffineMap, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        let mut depths = Vec::with_capacity(n_max);
        let mut cells = complexity::refine(map, 1)?;
        for n in 1..=n_max {
            if n > 1 {
                cells = complexity::refine_step(map, &cells)?;
            }
            if cells.is_empty() {
                return Err(Error::EmptyRefinement);
            }
            depths.push(depth_data(map, n, &cells));
        }
        Ok(Self {
            map: map.name().to_string(),
            d_u: map.splitting().d_u(),
            d_s: map.splitting().d_s(),
            depths,
        })
    }

    pub fn n_max(&self) -> usize {
        self.depths.len()
    }

    /// `ln B_n`, the complexity part of it, and the index of the worst code.
    fn ln_bound(&self, depth: &DepthData, q: &BoundQuery) -> (f64, f64, usize) {
        let n = depth.n as f64;
        let s = 1.0 / q.p;
        let ln_d = (depth.d_b as f64).ln() * s / n + (depth.d_e as f64).ln() * (1.0 - s) / n;
        let (eu, es) = match q.variant {
            Variant::Stable => (q.t, q.t + q.t_minus),
            Variant::Unstable => (q.t + q.t_plus, q.t),
            Variant::Both => (q.t_plus, q.t_minus),
        };
        let (det_exp, use_g) = match q.weight {
            Weight::Custom => (s, true),
            Weight::Transfer => (s - 1.0, false),
        };
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, c) in depth.codes.iter().enumerate() {
            let mut r = f64::NEG_INFINITY;
            if self.d_u > 0 {
                r = r.max(-eu * c.ln_lambda_u);
            }
            if self.d_s > 0 {
                r = r.max(-es * c.ln_lambda_s);
            }
            let g = if use_g { c.ln_g } else { 0.0 };
            let v = g + det_exp * c.ln_det + r;
            if v > best.0 {
                best = (v, k);
            }
        }
        (ln_d + best.0 / n, ln_d, best.1)
    }

    pub fn evaluate(&self, q: &BoundQuery) -> Result<BoundResult> {
        if q.n == 0 || q.n > self.n_max() {
            return Err(Error::InvalidParameter(format!(
                "depth {} outside the precomputed range 1..={}",
                q.n,
                self.n_max()
            )));
        }
        let mut b_n = Vec::with_capacity(q.n);
        let mut complexity_factor = Vec::with_capacity(q.n);
        let mut argdata = Vec::with_capacity(q.n);
        for depth in &self.depths[..q.n] {
            let (lb, ld, k) = self.ln_bound(depth, q);
            b_n.push(lb.exp());
            complexity_factor.push(ld.exp());
            argdata.push(depth.codes[k].code.clone());
        }
        let estimate = *b_n.last().expect("n >= 1");
        let reduced = estimate / complexity_factor.last().expect("n >= 1");
        Ok(BoundResult {
            query: *q,
            b_n,
            complexity_factor,
            estimate,
            reduced,
            admissible: admissible(q),
            argdata,
        })
    }

    fn estimate_at(&self, q: &BoundQuery) -> (f64, f64) {
        let (lb, ld, _) = self.ln_bound(&self.depths[q.n - 1], q);
        (lb.exp(), (lb - ld).exp())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundResult {
    pub query: BoundQuery,
    /// Finite-depth bound sequence `B_1, …, B_n`.
    pub b_n: Vec<f64>,
    /// `(D_n^b)^{1/(pn)} (D_n^e)^{(1−1/p)/n}` per depth.
    pub complexity_factor: Vec<f64>,
    pub estimate: f64,
    /// `estimate` with the complexity factor divided out.
    pub reduced: f64,
    pub admissible: bool,
    /// Worst code per depth.
    pub argdata: Vec<Vec<usize>>,
}

impl BoundResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,B_n,argmax_code\n");
        for (i, (b, code)) in self.b_n.iter().zip(&self.argdata).enumerate() {
            let code: Vec<String> = code.iter().map(usize::to_string).collect();
            s.push_str(&format!("{},{:.12},{}\n", i + 1, b, code.join(" ")));
        }
        s
    }
}

pub fn evaluate(map: &PiecewiseAffineMap, q: &BoundQuery) -> Result<BoundResult> {
    BoundData::compute(map, q.n)?.evaluate(q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub levels: usize,
    pub points: usize,
    pub margin: f64,
    pub alpha: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            levels: 3,
            points: 32,
            margin: 1e-3,
            alpha: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizeReport {
    pub variant: Variant,
    pub weight: Weight,
    pub n: usize,
    pub p: f64,
    pub t: f64,
    pub t_minus: f64,
    pub t_plus: f64,
    pub value: f64,
    /// `value` with the complexity factor divided out.
    pub reduced: f64,
    pub margin: f64,
    pub evaluations: usize,
}

/// Maps unit-cube coordinates `(a, u, v)` to a query inside the
/// margin-shrunk box constraints of `variant`; coupled constraints are
/// checked afterwards.
fn query_at(variant: Variant, weight: Weight, n: usize, alpha: f64, m: f64, a: f64, u: f64, v: f64) -> BoundQuery {
    let s = m + (1.0 - 2.0 * m) * a;
    let p = 1.0 / s;
    let neg = |w: f64| (s - 1.0 + m) + w * (-m - (s - 1.0 + m));
    let pos = |w: f64| m + w * (s - m - m);
    let mut q = match variant {
        Variant::Stable => BoundQuery::stable(p, pos(v), neg(u), n, weight),
        Variant::Unstable => BoundQuery::unstable(p, pos(v), neg(u), n, weight),
        Variant::Both => BoundQuery::both(p, pos(v), neg(u), n, weight),
    };
    q.alpha = alpha;
    q
}

/// Deterministic nested grid search for the smallest `B_n` over the
/// admissible region shrunk by `opts.margin`.
pub fn optimize(data: &BoundData, variant: Variant, weight: Weight, n: usize, opts: &OptimizeOptions) -> Result<OptimizeReport> {
    if n == 0 || n > data.n_max() {
        return Err(Error::InvalidParameter(format!("depth {n} outside 1..={}", data.n_max())));
    }
    if opts.points < 2 || opts.levels == 0 {
        return Err(Error::InvalidParameter("need at least 2 points and 1 level".into()));
    }
    let m = opts.margin;
    let k = opts.points;
    let mut ranges = [(0.0f64, 1.0f64); 3];
    let mut best: Option<(f64, [f64; 3])> = None;
    let mut evaluations = 0;
    for _ in 0..opts.levels {
        let axis = |r: (f64, f64)| -> Vec<f64> {
            (0..k).map(|i| r.0 + (r.1 - r.0) * i as f64 / (k - 1) as f64).collect()
        };
        let (xa, xu, xv) = (axis(ranges[0]), axis(ranges[1]), axis(ranges[2]));
        let mut grid = Vec::with_capacity(k * k * k);
        for &a in &xa {
            for &u in &xu {
                for &v in &xv {
                    grid.push([a, u, v]);
                }
            }
        }
        evaluations += grid.len();
        let level_best = grid
            .par_iter()
            .enumerate()
            .filter_map(|(i, x)| {
                let q = query_at(variant, weight, n, opts.alpha, m, x[0], x[1], x[2]);
                if !admissible_with_margin(&q, m * 0.999) {
                    return None;
                }
                let (v, _) = data.estimate_at(&q);
                v.is_finite().then_some((v, i, *x))
            })
            // ties resolved by grid order so the result does not depend on
            // scheduling
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((v, _, x)) = level_best {
            if best.is_none_or(|b| v < b.0) {
                best = Some((v, x));
            }
        }
        let Some((_, x)) = best else {
            return Err(Error::NoAdmissiblePoint(format!(
                "{variant:?} with alpha = {} and margin = {m}",
                opts.alpha
            )));
        };
        for i in 0..3 {
            let w = 2.0 * (ranges[i].1 - ranges[i].0) / (k - 1) as f64;
            ranges[i] = ((x[i] - w).max(0.0), (x[i] + w).min(1.0));
        }
    }
    let (value, x) = best.expect("checked above");
    let q = query_at(variant, weight, n, opts.alpha, m, x[0], x[1], x[2]);
    let (_, reduced) = data.estimate_at(&q);
    Ok(OptimizeReport {
        variant,
        weight,
        n,
        p: q.p,
        t: q.t,
        t_minus: q.t_minus,
        t_plus: q.t_plus,
        value,
        reduced,
        margin: m,
        evaluations,
    })
}

/// Closed-form bounds of the general examples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Preset {
    /// `λ_s^{−t₋} |det|^{1/p−1}` per step; the two contracting copies have
    /// `λ_s = |det| = 1/2`, giving `2^{t₋+1−1/p}`.
    ContractingPair { lambda_s: f64, det: f64 },
    /// Piecewise expanding limit along `p = 1/(1−ε)`, `t = 1 − 2ε`:
    /// `(D^b)^{1/p} (D^e)^{1−1/p} |det|^{1/p−1} λ_u^{−t}` with per-step
    /// growth rates of the complexities.
    ExpandingLimit { lambda_u: f64, det: f64, d_b_rate: f64, d_e_rate: f64 },
    /// The two factors `γ^{1−1/p} λ_{s,N}^{−ε}` and
    /// `|det DT^N|^{1/p−1} λ_{u,N}^{1−2/p}` under the pinching condition
    /// `λ_{s,N} ≤ γ |det DT^N|`.
    Pinching { gamma: f64, lambda_s: f64, lambda_u: f64, det: f64 },
}

pub fn preset_names() -> &'static [&'static str] {
    &["contracting_pair", "expanding_limit", "pinching"]
}

/// Preset with the default data of its example: the contracting pair
/// builtin, a doubling-style expanding map (`λ_u = |det| = 2`, `D ≡ 1`), and
/// the dissipative baker at `N = 1` (`γ = λ_s/|det| = 1/2`).
pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "contracting_pair" => {
            let map = crate::pamap::builtin("contracting_pair", &Default::default())?;
            let br = &map.branches()[0];
            let (ls, _) = map.splitting().rates(br.matrix());
            Ok(Preset::ContractingPair {
                lambda_s: ls,
                det: to_f64(&br.det().abs()),
            })
        }
        "expanding_limit" => Ok(Preset::ExpandingLimit {
            lambda_u: 2.0,
            det: 2.0,
            d_b_rate: 1.0,
            d_e_rate: 1.0,
        }),
        "pinching" => {
            let map = crate::pamap::builtin("dissipative_baker", &Default::default())?;
            let br = &map.branches()[0];
            let (ls, lu) = map.splitting().rates(br.matrix());
            let det = to_f64(&br.det().abs());
            Ok(Preset::Pinching {
                gamma: ls / det,
                lambda_s: ls,
                lambda_u: lu,
                det,
            })
        }
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

impl Preset {
    /// `contracting_pair(p, t₋)`.
    pub fn contracting_pair(&self, p: f64, t_minus: f64) -> Result<f64> {
        match self {
            Preset::ContractingPair { lambda_s, det } => Ok(lambda_s.powf(-t_minus) * det.powf(1.0 / p - 1.0)),
            _ => Err(Error::InvalidParameter("not the contracting_pair preset".into())),
        }
    }

    /// `expanding_limit(ε)` together with the `(p, t)` it uses.
    pub fn expanding_limit(&self, eps: f64) -> Result<(f64, f64, f64)> {
        match self {
            Preset::ExpandingLimit { lambda_u, det, d_b_rate, d_e_rate } => {
                let p = 1.0 / (1.0 - eps);
                let t = 1.0 - 2.0 * eps;
                let s = 1.0 / p;
                let v = d_b_rate.powf(s) * d_e_rate.powf(1.0 - s) * det.powf(s - 1.0) * lambda_u.powf(-t);
                Ok((v, p, t))
            }
            _ => Err(Error::InvalidParameter("not the expanding_limit preset".into())),
        }
    }

    /// The two pinching factors at `(p, ε)`.
    pub fn pinching(&self, p: f64, eps: f64) -> Result<(f64, f64)> {
        match self {
            Preset::Pinching { gamma, lambda_s, lambda_u, det } => {
                let s = 1.0 / p;
                Ok((
                    gamma.powf(1.0 - s) * lambda_s.powf(-eps),
                    det.powf(s - 1.0) * lambda_u.powf(1.0 - 2.0 * s),
                ))
            }
            _ => Err(Error::InvalidParameter("not the pinching preset".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::{int, rat, Polytope, RatMatrix};
    use crate::pamap::{builtin, AffineBranch, HyperbolicSplitting, Params};

    fn data(name: &str, n: usize) -> BoundData {
        BoundData::compute(&builtin(name, &Params::new()).unwrap(), n).unwrap()
    }

    #[test]
    fn admissibility_examples() {
        assert!(admissible(&BoundQuery::stable(2.0, 0.3, -0.4, 1, Weight::Transfer)));
        assert!(!admissible(&BoundQuery::stable(2.0, 0.6, -0.4, 1, Weight::Transfer)));
        assert!(admissible(&BoundQuery::both(2.0, 0.45, -0.45, 1, Weight::Transfer)));
        assert!(!admissible(&BoundQuery::both(0.5, 0.45, -0.45, 1, Weight::Transfer)));
        assert!(!admissible(&BoundQuery::both(1.0, 0.45, -0.45, 1, Weight::Transfer)));
    }

    #[test]
    fn baker_substitution() {
        let d = data("baker", 8);
        let r1 = d.evaluate(&BoundQuery::both(2.0, 0.45, -0.45, 1, Weight::Transfer)).unwrap();
        assert!((r1.estimate - 2f64.powf(0.55)).abs() < 1e-12);
        let r8 = d.evaluate(&BoundQuery::both(2.0, 0.45, -0.45, 8, Weight::Transfer)).unwrap();
        assert!((r8.estimate - 2f64.powf(-0.325)).abs() < 1e-12);
        assert!(r8.admissible);
        assert_eq!(r8.b_n.len(), 8);
    }

    #[test]
    fn contracting_pair_limit() {
        let d = data("contracting_pair", 8);
        let q = BoundQuery::stable(2.0, 0.0, -0.25, 8, Weight::Transfer);
        let r = d.evaluate(&q).unwrap();
        assert!(!r.admissible);
        assert!((r.reduced - 2f64.powf(0.25)).abs() < 1e-12);
        let p = preset("contracting_pair").unwrap();
        assert!((p.contracting_pair(2.0, -0.25).unwrap() - 2f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn single_branch_closed_form() {
        let bx = Polytope::unit_box(2).unwrap();
        let br = AffineBranch::new(RatMatrix::diag(&[int(2), rat(1, 2)]), vec![int(0), int(0)], bx.clone(), int(1)).unwrap();
        let map = crate::pamap::PiecewiseAffineMap::new("one", bx, vec![br], HyperbolicSplitting::axes(1, 1), false, None).unwrap();
        let d = BoundData::compute(&map, 1).unwrap();
        let q = BoundQuery::both(2.0, 0.3, -0.2, 1, Weight::Transfer);
        let r = d.evaluate(&q).unwrap();
        assert!((r.estimate - f64::max(2f64.powf(-0.3), 2f64.powf(-0.2))).abs() < 1e-12);
        let opt = optimize(&d, Variant::Both, Weight::Transfer, 1, &OptimizeOptions::default()).unwrap();
        assert!((opt.value - 2f64.powf(-0.5)).abs() < 2e-3);
    }

    #[test]
    fn baker_optimum() {
        let d = data("baker", 8);
        let r = optimize(&d, Variant::Both, Weight::Transfer, 8, &OptimizeOptions::default()).unwrap();
        assert!(r.value <= 2f64.powf(-0.5 + 0.125) + 1e-3, "{r:?}");
        assert!((r.p - 2.0).abs() <= 0.1);
        assert!((r.t_plus - 0.5).abs() <= 0.05);
        assert!((r.t_minus + 0.5).abs() <= 0.05);
    }

    #[test]
    fn dissipative_optimum() {
        let d = data("dissipative_baker", 8);
        // both variant: kink at s = ln3/ln6; unstable variant: kink at
        // s = ln6/ln12, where the reduced value is 2^{s-1}
        let s_both = 3f64.ln() / 6f64.ln();
        let s_unst = 6f64.ln() / 12f64.ln();
        for (v, s, target) in [
            (Variant::Both, s_both, 2f64.powf(-1.0 + s_both)),
            (Variant::Unstable, s_unst, 2f64.powf(s_unst - 1.0)),
        ] {
            let r = optimize(&d, v, Weight::Transfer, 8, &OptimizeOptions::default()).unwrap();
            assert!((r.reduced - target).abs() < 0.01, "{v:?} {r:?}");
            assert!((r.p - 1.0 / s).abs() < 0.05, "{v:?} {r:?}");
        }
    }

    #[test]
    fn no_admissible_point() {
        let d = data("baker", 1);
        let opts = OptimizeOptions { alpha: 1e-4, ..Default::default() };
        assert!(matches!(
            optimize(&d, Variant::Both, Weight::Transfer, 1, &opts),
            Err(Error::NoAdmissiblePoint(_))
        ));
    }

    #[test]
    fn presets() {
        let e = preset("expanding_limit").unwrap();
        let (v, p, t) = e.expanding_limit(1e-4).unwrap();
        assert!((v - 0.5).abs() < 1e-3 && p > 1.0 && t < 1.0);
        let pin = preset("pinching").unwrap();
        let Preset::Pinching { gamma, .. } = pin else { unreachable!() };
        assert!((gamma - 0.5).abs() < 1e-12);
        let (a, b) = pin.pinching(1.1, 1e-3).unwrap();
        assert!(a < 1.0 && b < 1.0, "{a} {b}");
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }
}
