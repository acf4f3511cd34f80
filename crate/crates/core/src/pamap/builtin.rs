use super::{split_mod1, AffineBranch, HyperbolicSplitting, PiecewiseAffineMap};
use crate::error::{Error, Result};
use crate::exactgeom::{format_rational, int, parse_rational, rat, Polytope, RatMatrix, Rational, Surd};
use num_traits::{One, Signed};
use std::collections::BTreeMap;

pub type Params = BTreeMap<String, String>;

const NAMES: [&str; 5] = [
    "baker",
    "dissipative_baker",
    "sloppy_baker",
    "cat_squares",
    "contracting_pair",
];

pub fn builtin_names() -> &'static [&'static str] {
    &NAMES
}

fn param(params: &Params, key: &str, default: Rational) -> Result<Rational> {
    params.get(key).map_or(Ok(default), |v| parse_rational(v))
}

fn reject_unknown(params: &Params, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidParameter(format!("unknown parameter `{k}`"))),
        None => Ok(()),
    }
}

pub fn builtin(name: &str, params: &Params) -> Result<PiecewiseAffineMap> {
    match name {
        "baker" => {
            reject_unknown(params, &[])?;
            two_strip_baker("baker", rat(1, 2), int(0), int(0), false)
        }
        "dissipative_baker" => {
            reject_unknown(params, &[])?;
            two_strip_baker("dissipative_baker", rat(1, 3), int(0), int(0), false)
        }
        "sloppy_baker" => {
            reject_unknown(params, &["a", "b", "c"])?;
            let a = param(params, "a", rat(1, 3))?;
            let b = param(params, "b", rat(1, 7))?;
            let c = param(params, "c", rat(1, 2))?;
            if !(c.is_positive() && c < Rational::one()) {
                return Err(Error::InvalidParameter("c must lie in (0, 1)".into()));
            }
            two_strip_baker("sloppy_baker", c, a, b, true)
        }
        "cat_squares" => {
            reject_unknown(params, &["m", "perm"])?;
            let m: usize = params
                .get("m")
                .map_or(Ok(2), |v| v.trim().parse())
                .map_err(|_| Error::InvalidParameter("m must be a positive integer".into()))?;
            if m == 0 {
                return Err(Error::InvalidParameter("m must be a positive integer".into()));
            }
            let perm = match params.get("perm") {
                Some(s) => s
                    .split([',', ' '])
                    .filter(|t| !t.is_empty())
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidParameter(format!("invalid permutation `{s}`")))?,
                None => (0..m * m).map(|k| (k + 1) % (m * m)).collect(),
            };
            cat_squares(m, &perm)
        }
        "contracting_pair" => {
            reject_unknown(params, &[])?;
            contracting_pair()
        }
        _ => Err(Error::UnknownBuiltin(name.to_string())),
    }
}

/// `(x, y) ↦ (2x + a, c·y + b)` on the left half and
/// `(2x − 1 + a, c·y + (1 − c) + b)` on the right half; taken mod 1 when
/// `torus` is set.
fn two_strip_baker(name: &str, c: Rational, a: Rational, b: Rational, torus: bool) -> Result<PiecewiseAffineMap> {
    let bx = Polytope::unit_box(2)?;
    let left = Polytope::from_box(&[int(0), int(0)], &[rat(1, 2), int(1)])?;
    let right = Polytope::from_box(&[rat(1, 2), int(0)], &[int(1), int(1)])?;
    let mat = RatMatrix::diag(&[int(2), c.clone()]);
    let g = Rational::one();
    let b0 = vec![a.clone(), b.clone()];
    let b1 = vec![a.clone() - int(1), Rational::one() - &c + &b];
    let raw = vec![
        AffineBranch::new(mat.clone(), b0, left.clone(), g.clone())?,
        AffineBranch::new(mat, b1, right.clone(), g)?,
    ];
    let branches = if torus {
        let mut out = Vec::new();
        for br in &raw {
            out.extend(split_mod1(br, &bx)?);
        }
        out
    } else {
        raw
    };
    let map = PiecewiseAffineMap::new(
        name,
        bx,
        branches,
        HyperbolicSplitting::axes(1, 1),
        torus,
        Some(vec![left, right]),
    )?;
    Ok(map
        .with_metadata("a", &format_rational(&a))
        .with_metadata("b", &format_rational(&b))
        .with_metadata("c", &format_rational(&c)))
}

/// The torus cut into `m × m` squares `S_k`; on `S_k` the map is
/// `x ↦ A x + A(c_{σ(k)} − c_k)` mod 1 with `A = [[2,1],[1,1]]` and `c_k`
/// the square centres, a bijection of the torus.
fn cat_squares(m: usize, perm: &[usize]) -> Result<PiecewiseAffineMap> {
    let n = m * m;
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&k| k >= n || std::mem::replace(&mut seen[k], true)) {
        return Err(Error::InvalidParameter(format!(
            "perm must be a permutation of 0..{n}"
        )));
    }
    let a = RatMatrix::from_rows(vec![vec![int(2), int(1)], vec![int(1), int(1)]])?;
    let bx = Polytope::unit_box(2)?;
    let side = rat(1, m as i64);
    let corner = |k: usize| -> Vec<Rational> {
        vec![&side * int((k % m) as i64), &side * int((k / m) as i64)]
    };
    let mut squares = Vec::with_capacity(n);
    let mut branches = Vec::new();
    for (k, &target) in perm.iter().enumerate() {
        let lo = corner(k);
        let hi: Vec<Rational> = lo.iter().map(|x| x + &side).collect();
        let sq = Polytope::from_box(&lo, &hi)?;
        let shift: Vec<Rational> = corner(target).iter().zip(&lo).map(|(x, y)| x - y).collect();
        let b = a.mul_vec(&shift);
        let br = AffineBranch::new(a.clone(), b, sq.clone(), Rational::one())?;
        branches.extend(split_mod1(&br, &bx)?);
        squares.push(sq);
    }
    let phi_minus = Surd::new(rat(-1, 2), rat(1, 2), 5)?;
    let splitting = HyperbolicSplitting::new(
        vec![vec![Surd::one(), phi_minus.clone()]],
        vec![vec![Surd::one(), phi_minus.conjugate()]],
    )?;
    let perm_text: Vec<String> = perm.iter().map(usize::to_string).collect();
    Ok(
        PiecewiseAffineMap::new("cat_squares", bx, branches, splitting, true, Some(squares))?
            .with_metadata("m", &m.to_string())
            .with_metadata("perm", &perm_text.join(",")),
    )
}

/// Two copies of `[−1, 1]`, laid out on one line as `[−1, 1]` and `[1, 3]`,
/// each contracted by `x ↦ x/2` towards its centre. Each copy is cut at its
/// centre, where the original map swaps the copies; the swap is a single
/// point and is kept only as metadata.
fn contracting_pair() -> Result<PiecewiseAffineMap> {
    let bx = Polytope::from_box(&[int(-1)], &[int(3)])?;
    let half = RatMatrix::diag(&[rat(1, 2)]);
    let piece = |lo: i64, hi: i64| Polytope::from_box(&[int(lo)], &[int(hi)]);
    let branches = vec![
        AffineBranch::new(half.clone(), vec![int(0)], piece(-1, 0)?, Rational::one())?,
        AffineBranch::new(half.clone(), vec![int(0)], piece(0, 1)?, Rational::one())?,
        AffineBranch::new(half.clone(), vec![int(1)], piece(1, 2)?, Rational::one())?,
        AffineBranch::new(half, vec![int(1)], piece(2, 3)?, Rational::one())?,
    ];
    Ok(PiecewiseAffineMap::new(
        "contracting_pair",
        bx,
        branches,
        HyperbolicSplitting::axes(0, 1),
        false,
        None,
    )?
    .with_metadata("copies", "[-1,1] and [1,3] (second copy shifted by 2)")
    .with_metadata("swap", "the centres 0 and 2 are exchanged"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_names_and_params() {
        assert!(matches!(builtin("nope", &Params::new()), Err(Error::UnknownBuiltin(_))));
        let mut p = Params::new();
        p.insert("z".into(), "1".into());
        assert!(builtin("baker", &p).is_err());
        let mut p = Params::new();
        p.insert("perm".into(), "0,0,1,2".into());
        assert!(builtin("cat_squares", &p).is_err());
    }

    #[test]
    fn sloppy_images_inside_box() {
        let mut p = Params::new();
        p.insert("a".into(), "1/3".into());
        p.insert("b".into(), "1/7".into());
        let map = builtin("sloppy_baker", &p).unwrap();
        assert!(map.branches().len() >= 2);
        let bx = map.fundamental_box();
        for br in map.branches() {
            let img = br.image().unwrap();
            assert!(img.vertices().iter().all(|v| bx.contains(v)));
        }
    }

    #[test]
    fn baker_shape() {
        let map = builtin("baker", &Params::new()).unwrap();
        assert_eq!(map.branches().len(), 2);
        assert_eq!(map.fundamental_box(), &Polytope::unit_box(2).unwrap());
    }

    #[test]
    fn cat_squares_is_a_bijection_in_volume() {
        let map = builtin("cat_squares", &Params::new()).unwrap();
        assert_eq!(map.partition().len(), 4);
        let vol: Rational = map
            .branches()
            .iter()
            .map(|b| b.image().unwrap().volume())
            .sum();
        assert_eq!(vol, int(1));
    }

    #[test]
    fn contracting_pair_orbit_of_one() {
        let map = builtin("contracting_pair", &Params::new()).unwrap();
        // x = 1 lies in the closed domains [0,1] and [1,2]; the lowest index
        // is the first copy, where x/2 halves every step
        let mut x = vec![int(1)];
        for n in 1..=5 {
            let i = super::super::branch_at(&map, &x).unwrap();
            x = map.branches()[i].apply(&x);
            assert_eq!(x[0], rat(1, 1 << n));
        }
    }
}
