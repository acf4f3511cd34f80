//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs without the libtest harness so the report is always printed.

use anisolab::bound::{self, BoundData, OptimizeOptions, Variant, Weight};
use anisolab::complexity;
use anisolab::ergostat::{self, DecayFit, Ensemble, Observable};
use anisolab::exactgeom::{rat, Rational};
use anisolab::normlab::{self, DecayOptions, Frame, IndicatorSet, MultiplierSpec};
use anisolab::pamap::{self, Params};
use anisolab::ulam::{self, UlamMatrix};
use num_traits::{One, Zero};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn map(name: &str, params: &[(&str, &str)]) -> pamap::PiecewiseAffineMap {
    let p: Params = params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    pamap::builtin(name, &p).unwrap()
}

fn c1_baker_bound() -> Outcome {
    let data = BoundData::compute(&map("baker", &[]), 8).map_err(|e| e.to_string())?;
    let r = bound::optimize(&data, Variant::Both, Weight::Transfer, 8, &OptimizeOptions::default())
        .map_err(|e| e.to_string())?;
    // 2^{-1/2} * 2^{1/8}
    let target = 2f64.powf(-0.375) + 1e-3;
    let ok = r.value <= target
        && (r.p - 2.0).abs() <= 0.1
        && (r.t_plus - 0.5).abs() <= 0.05
        && (r.t_minus + 0.5).abs() <= 0.05;
    check(
        ok,
        format!(
            "value {:.6} <= {:.6}; p*={:.4} t+*={:.4} t-*={:.4}",
            r.value, target, r.p, r.t_plus, r.t_minus
        ),
    )
}

fn c2_dissipative_bound() -> Outcome {
    let data = BoundData::compute(&map("dissipative_baker", &[]), 8).map_err(|e| e.to_string())?;
    let r = bound::optimize(&data, Variant::Both, Weight::Transfer, 8, &OptimizeOptions::default())
        .map_err(|e| e.to_string())?;
    let target = 2f64.powf(-1.0 + 3f64.ln() / 6f64.ln());
    let p_star = 6f64.ln() / 3f64.ln();
    let ok = (r.reduced - target).abs() <= 0.01 && (r.p - p_star).abs() <= 0.05;
    check(
        ok,
        format!(
            "reduced {:.6} vs {:.6}; p*={:.4} vs {:.4} (finite-n value {:.6})",
            r.reduced, target, r.p, p_star, r.value
        ),
    )
}

fn c3_contracting_pair() -> Outcome {
    let preset = bound::preset("contracting_pair").map_err(|e| e.to_string())?;
    let mut worst = 0f64;
    let mut min_value = f64::INFINITY;
    for i in 0..10 {
        let p = 1.05 + 2.95 * i as f64 / 9.0;
        let lo = 1.0 / p - 1.0;
        for j in 0..10 {
            // strictly inside (1/p - 1, 0)
            let tm = lo * (1.0 - (j as f64 + 0.5) / 10.0);
            let v = preset.contracting_pair(p, tm).map_err(|e| e.to_string())?;
            let formula = 2f64.powf(tm + 1.0 - 1.0 / p);
            worst = worst.max((v - formula).abs());
            min_value = min_value.min(v);
        }
    }
    check(
        worst <= 1e-12 && min_value > 1.0,
        format!("max |preset - 2^(t-+1-1/p)| = {worst:.1e} over 100 points; min value {min_value:.6} > 1"),
    )
}

/// Depth-n baker cells are the dyadic strips [k/2^n, (k+1)/2^n] x [0,1] and
/// their images the horizontal strips; count how many closures share a point.
fn baker_strip_complexity(n: u32) -> usize {
    let m = 1i64 << n;
    let closures = |x: &Rational| {
        (0..m)
            .filter(|&k| rat(k, m) <= *x && *x <= rat(k + 1, m))
            .count()
    };
    (0..=m).map(|k| closures(&rat(k, m))).max().unwrap()
}

fn c4_complexity() -> Outcome {
    let baker = map("baker", &[]);
    let g = complexity::growth(&baker, 8, complexity::DEFAULT_CELL_BUDGET).map_err(|e| e.to_string())?;
    let mut ok = g.rows.len() == 8;
    for r in &g.rows {
        let oracle = baker_strip_complexity(r.n as u32);
        ok &= r.d_b == oracle && r.d_e == oracle && oracle == 2;
    }
    let mut volumes_ok = true;
    for n in 1..=8 {
        let cells = complexity::refine(&baker, n).map_err(|e| e.to_string())?;
        let total: Rational = cells.iter().map(|c| c.cell.volume()).sum();
        volumes_ok &= total.is_one();
    }
    let cat = map("cat_squares", &[]);
    let gc = complexity::growth(&cat, 5, complexity::DEFAULT_CELL_BUDGET).map_err(|e| e.to_string())?;
    let k = gc.k as f64;
    let cat_ok = gc.rows.len() == 5 && gc.rows.iter().all(|r| (r.d_b as f64) <= 2.0 * (r.n as f64 * k).powi(2));
    for n in 1..=5 {
        let cells = complexity::refine(&cat, n).map_err(|e| e.to_string())?;
        let total: Rational = cells.iter().map(|c| c.cell.volume()).sum();
        volumes_ok &= total.is_one();
    }
    let cat_db: Vec<usize> = gc.rows.iter().map(|r| r.d_b).collect();
    check(
        ok && cat_ok && volumes_ok,
        format!(
            "baker D_b=D_e=2 for n=1..8: {ok}; cat_squares D_b={cat_db:?} <= 2(nK)^2 with K={}: {cat_ok}; volumes sum to 1: {volumes_ok}",
            gc.k
        ),
    )
}

fn c5_ulam() -> Outcome {
    let baker = map("baker", &[]);
    let mut details = Vec::new();
    let mut ok = true;
    for n in [4, 8, 16] {
        let p = UlamMatrix::build(&baker, n).map_err(|e| e.to_string())?;
        let residual = p.exact_fixed_point_residual(&ulam::uniform_masses(&p));
        let s = ulam::leading_spectrum(&p, 2, 1e-12, 5000).map_err(|e| e.to_string())?;
        let l1 = &s.pairs[0];
        let err = ((l1.re - 1.0).powi(2) + l1.im.powi(2)).sqrt();
        ok &= residual.is_zero() && err <= 1e-10;
        details.push(format!("N={n}: residual {residual}, |λ1-1|={err:.1e}"));
    }
    check(ok, details.join("; "))
}

fn c6_norm_decay() -> Outcome {
    let opts = DecayOptions {
        grid: 256,
        p: 2.0,
        t: 0.3,
        t_minus: -0.4,
        n_max: 8,
        ..DecayOptions::default()
    };
    let r = normlab::decay_rate(&[vec![2, 1], vec![1, 1]], &opts).map_err(|e| e.to_string())?;
    let lambda_u = (3.0 + 5f64.sqrt()) / 2.0;
    let predicted = f64::max(lambda_u.powf(-0.3), lambda_u.powf(-0.1));
    let ok = r.rate <= predicted + 0.05 && r.max_dropped_in_window <= 1e-3 && r.fit_end > r.fit_start;
    check(
        ok,
        format!(
            "rate {:.4} <= {:.4} + 0.05 over n={}..{}; max dropped mass {:.1e}",
            r.rate, predicted, r.fit_start, r.fit_end, r.max_dropped_in_window
        ),
    )
}

fn c7_dirac() -> Outcome {
    let m = MultiplierSpec::new(0.3, -0.4, Frame::axis(1, 1));
    let s = normlab::probe_dirac(2.0, &m, &[32, 64, 128, 256, 512]).map_err(|e| e.to_string())?;
    let increasing = s.windows(2).all(|w| w[1].norm > w[0].norm);
    let ratio = s.last().unwrap().norm / s[0].norm;
    check(increasing && ratio > 10.0, format!("strictly increasing: {increasing}; final/initial {ratio:.2} > 10"))
}

fn c8_indicator() -> Outcome {
    let res = [64, 128, 256, 512, 1024, 2048, 4096];
    let set = IndicatorSet::Interval(0.0, 0.5);
    let series = |t: f64| -> Result<Vec<f64>, String> {
        let m = MultiplierSpec::new(t, 0.0, Frame::axis(1, 0));
        let s = normlab::probe_indicator(&set, 2.0, &m, &res).map_err(|e| e.to_string())?;
        Ok(s.iter().map(|r| r.norm).collect())
    };
    let low = series(0.3)?;
    let mut sorted = low.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let spread = (sorted[sorted.len() - 1] - sorted[0]) / median;
    let high = series(0.7)?;
    let growth = high[high.len() - 1] / high[0];
    check(
        spread < 0.1 && growth > 2.0,
        format!("t=0.3 spread {:.2}% of median; t=0.7 growth {growth:.3} > 2", 100.0 * spread),
    )
}

fn c9_composition() -> Outcome {
    let c1 = f64::max(2f64.powf(0.3), 2f64.powf(0.2));
    let r = normlab::verify_composition_inequality(0.5, 2.0, 0.3, -0.4, Some(c1), 100.0, 1001)
        .map_err(|e| e.to_string())?;
    check(
        r.c2.is_finite() && r.residual <= 0.0,
        format!("C1={:.6} C2={:.3e} residual {:.3e} over {} samples", r.c1, r.c2, r.residual, r.samples),
    )
}

fn c10_statistics() -> Outcome {
    let sloppy = map("sloppy_baker", &[("a", "1/3"), ("b", "1/7")]);
    let ens = Ensemble {
        seed: 7,
        starts: 100,
        length: 100_000,
        burn_in: 100,
    };
    let cos = Observable::parse("cos2pix", 2).map_err(|e| e.to_string())?;
    let b = ergostat::birkhoff(&sloppy, &cos, &ens).map_err(|e| e.to_string())?;
    let birkhoff_ok = b.integral == Some(0.0) && b.all_within_band == Some(true) && b.clusters.k == 1;

    let c = ergostat::correlation(&map("baker", &[]), &cos, &cos, &ens, 20).map_err(|e| e.to_string())?;
    let rate_ok = matches!(c.fit, DecayFit::Determined { rate, .. } if rate <= 0.5f64.sqrt() + 0.1);
    let floor_ok = c.below_floor_at.is_some_and(|n| n <= 20);
    check(
        birkhoff_ok && (rate_ok || floor_ok),
        format!(
            "sloppy baker: {} cluster(s), max |avg| {:.2e} within band {:.2e}: {:?}; baker C_n below floor at lag {:?}, fit {:?}",
            b.clusters.k, b.max_deviation.unwrap_or(f64::NAN), b.clt_band, b.all_within_band, c.below_floor_at, c.fit
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("baker bound", c1_baker_bound, Duration::from_secs(10)),
        ("dissipative baker bound", c2_dissipative_bound, Duration::from_secs(10)),
        ("contracting pair closed form", c3_contracting_pair, Duration::from_secs(10)),
        ("complexity", c4_complexity, Duration::from_secs(60)),
        ("Ulam exactness", c5_ulam, Duration::from_secs(30)),
        ("norm decay", c6_norm_decay, Duration::from_secs(60)),
        ("Dirac exclusion", c7_dirac, Duration::from_secs(60)),
        ("indicator multiplier", c8_indicator, Duration::from_secs(60)),
        ("composition inequality", c9_composition, Duration::from_secs(60)),
        ("physical measure and mixing", c10_statistics, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed <= *limit, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<30} {}  [{:.2}s / {}s]  {}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            detail
        );
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
