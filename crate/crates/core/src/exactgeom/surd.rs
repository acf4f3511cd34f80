//! Elements `a + b·√r` of a real quadratic field with rational `a`, `b` and a
//! squarefree radicand `r > 1`.
//!
//! Eigenvectors of hyperbolic integer matrices such as `[[2,1],[1,1]]` live in
//! `Q(√5)`, so exact invariance checks and exact stable-line probes need this
//! field. Values with `b = 0` are plain rationals and combine with any
//! radicand; two irrational values must share their radicand.

use super::{format_rational, parse_rational, to_f64, Rational};
use crate::error::{Error, Result};
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Surd {
    a: Rational,
    b: Rational,
    radicand: u64,
}

fn squarefree_split(r: u64) -> (u64, u64) {
    // r = k^2 * s with s squarefree
    let mut k = 1u64;
    let mut s = r;
    let mut f = 2u64;
    while f * f <= s {
        while s.is_multiple_of(f * f) {
            s /= f * f;
            k *= f;
        }
        f += 1;
    }
    (k, s)
}

impl Surd {
    pub fn rational(a: Rational) -> Self {
        Self {
            a,
            b: Rational::zero(),
            radicand: 1,
        }
    }

    /// `a + b·√r`; perfect-square factors of `r` are folded into `b`.
    pub fn new(a: Rational, b: Rational, radicand: u64) -> Result<Self> {
        if radicand == 0 {
            return Ok(Self::rational(a));
        }
        let (k, s) = squarefree_split(radicand);
        let b = b * Rational::from_integer(k.into());
        if s == 1 || b.is_zero() {
            return Ok(Self::rational(a + b));
        }
        Ok(Self { a, b, radicand: s })
    }

    pub fn zero() -> Self {
        Self::rational(Rational::zero())
    }

    pub fn one() -> Self {
        Self::rational(Rational::one())
    }

    pub fn rational_part(&self) -> &Rational {
        &self.a
    }

    pub fn surd_part(&self) -> &Rational {
        &self.b
    }

    pub fn radicand(&self) -> u64 {
        self.radicand
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        self.is_rational().then_some(&self.a)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.a) + to_f64(&self.b) * (self.radicand as f64).sqrt()
    }

    /// Exact sign.
    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&Rational::zero());
        let sb = self.b.cmp(&Rational::zero());
        if sb == Ordering::Equal {
            return sa;
        }
        if sa == Ordering::Equal || sa == sb {
            return sb;
        }
        // opposite signs: compare a^2 with b^2 r (never equal for squarefree r > 1)
        let a2 = &self.a * &self.a;
        let b2r = &self.b * &self.b * Rational::from_integer(self.radicand.into());
        if a2 > b2r {
            sa
        } else {
            sb
        }
    }

    fn field_with(&self, other: &Surd) -> u64 {
        if self.b.is_zero() {
            other.radicand
        } else if other.b.is_zero() {
            self.radicand
        } else {
            assert_eq!(
                self.radicand, other.radicand,
                "arithmetic across different quadratic fields"
            );
            self.radicand
        }
    }

    fn normalized(a: Rational, b: Rational, radicand: u64) -> Self {
        if b.is_zero() {
            Self::rational(a)
        } else {
            Self { a, b, radicand }
        }
    }

    pub fn conjugate(&self) -> Self {
        Self::normalized(self.a.clone(), -self.b.clone(), self.radicand)
    }

    pub fn abs(&self) -> Self {
        if self.signum() == Ordering::Less {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Parses `"p/q"`, `"p/q*sqrt(5)"` or `"p/q+r/s*sqrt(5)"`.
    pub fn parse(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::ParseNumber(s.to_string());
        let Some(pos) = t.find("sqrt(") else {
            return Ok(Self::rational(parse_rational(&t)?));
        };
        let close = t[pos..].find(')').ok_or_else(bad)? + pos;
        let radicand: u64 = t[pos + 5..close].parse().map_err(|_| bad())?;
        if close + 1 != t.len() {
            return Err(bad());
        }
        let head = &t[..pos];
        let head = head.strip_suffix('*').unwrap_or(head);
        // split the rational part from the coefficient at the last sign that
        // is not the first character
        let split = head
            .char_indices()
            .skip(1)
            .filter(|&(_, c)| c == '+' || c == '-')
            .map(|(i, _)| i)
            .last();
        let (a, b) = match split {
            Some(i) => (parse_rational(&head[..i])?, &head[i..]),
            None => (Rational::zero(), head),
        };
        let b = match b {
            "" | "+" => Rational::one(),
            "-" => -Rational::one(),
            other => parse_rational(other.strip_prefix('+').unwrap_or(other))?,
        };
        Self::new(a, b, radicand)
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            return write!(f, "{}", format_rational(&self.a));
        }
        let sign = if self.b.is_negative() { "-" } else { "+" };
        write!(
            f,
            "{}{}{}*sqrt({})",
            format_rational(&self.a),
            sign,
            format_rational(&self.b.abs()),
            self.radicand
        )
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Surd {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }
}

impl From<Rational> for Surd {
    fn from(a: Rational) -> Self {
        Self::rational(a)
    }
}

impl<'a> Add<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn add(self, o: &Surd) -> Surd {
        let r = self.field_with(o);
        Surd::normalized(&self.a + &o.a, &self.b + &o.b, r)
    }
}

impl<'a> Sub<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn sub(self, o: &Surd) -> Surd {
        let r = self.field_with(o);
        Surd::normalized(&self.a - &o.a, &self.b - &o.b, r)
    }
}

impl<'a> Mul<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn mul(self, o: &Surd) -> Surd {
        let r = self.field_with(o);
        let rr = Rational::from_integer(r.into());
        let a = &self.a * &o.a + &self.b * &o.b * rr;
        let b = &self.a * &o.b + &self.b * &o.a;
        Surd::normalized(a, b, r)
    }
}

impl<'a> Div<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn div(self, o: &Surd) -> Surd {
        assert!(!o.is_zero(), "division by zero");
        let r = self.field_with(o);
        let rr = Rational::from_integer(r.into());
        let norm = &o.a * &o.a - &o.b * &o.b * rr;
        let num = self * &o.conjugate();
        Surd::normalized(num.a / &norm, num.b / norm, r)
    }
}

impl Mul<&Rational> for &Surd {
    type Output = Surd;
    fn mul(self, o: &Rational) -> Surd {
        Surd::normalized(&self.a * o, &self.b * o, self.radicand)
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, o: Surd) -> Surd {
        &self + &o
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, o: Surd) -> Surd {
        &self - &o
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, o: Surd) -> Surd {
        &self * &o
    }
}

impl Div for Surd {
    type Output = Surd;
    fn div(self, o: Surd) -> Surd {
        &self / &o
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd::normalized(-self.a, -self.b, self.radicand)
    }
}

/// `Σ q_i s_i` for rational `q` and surd `s`.
pub(crate) fn rational_dot(q: &[Rational], s: &[Surd]) -> Surd {
    q.iter()
        .zip(s)
        .fold(Surd::zero(), |acc, (x, y)| &acc + &(y * x))
}

/// Rank of a list of vectors over the quadratic field, by exact elimination.
pub(crate) fn rank(vectors: &[Vec<Surd>]) -> usize {
    let mut rows: Vec<Vec<Surd>> = vectors.to_vec();
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank][col].clone();
        for r in 0..rows.len() {
            if r == rank || rows[r][col].is_zero() {
                continue;
            }
            let f = &rows[r][col] / &pivot;
            for c in col..ncols {
                let v = &f * &rows[rank][c];
                rows[r][c] = &rows[r][c] - &v;
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::{int, rat};

    fn phi() -> Surd {
        Surd::new(rat(1, 2), rat(1, 2), 5).unwrap()
    }

    #[test]
    fn golden_ratio_identity() {
        // phi^2 = phi + 1
        let p = phi();
        assert_eq!(&p * &p, &p + &Surd::one());
        assert!((p.to_f64() - 1.618_033_988_749_895).abs() < 1e-15);
    }

    #[test]
    fn exact_sign_and_order() {
        let x = Surd::new(int(-2), int(1), 5).unwrap(); // sqrt5 - 2 > 0
        assert_eq!(x.signum(), Ordering::Greater);
        let y = Surd::new(int(3), int(-1), 5).unwrap(); // 3 - sqrt5 > 0
        assert_eq!(y.signum(), Ordering::Greater);
        assert!(x < y);
        let z = Surd::new(int(2), int(-1), 5).unwrap();
        assert_eq!(z.signum(), Ordering::Less);
    }

    #[test]
    fn division_roundtrip() {
        let a = Surd::new(rat(3, 7), rat(-2, 5), 5).unwrap();
        let b = phi();
        assert_eq!(&(&a / &b) * &b, a);
    }

    #[test]
    fn folds_square_factors() {
        let s = Surd::new(int(0), int(1), 20).unwrap(); // sqrt(20) = 2 sqrt5
        assert_eq!(s, Surd::new(int(0), int(2), 5).unwrap());
        let q = Surd::new(int(1), int(1), 9).unwrap();
        assert_eq!(q, Surd::rational(int(4)));
    }

    #[test]
    fn parse_and_display() {
        let s = Surd::parse("-1/2+1/2*sqrt(5)").unwrap();
        assert_eq!(s, Surd::new(rat(-1, 2), rat(1, 2), 5).unwrap());
        assert_eq!(Surd::parse(&s.to_string()).unwrap(), s);
        assert_eq!(Surd::parse("3/4").unwrap(), Surd::rational(rat(3, 4)));
        assert_eq!(
            Surd::parse("-sqrt(2)").unwrap(),
            Surd::new(int(0), int(-1), 2).unwrap()
        );
        assert!(Surd::parse("1+sqrt(5").is_err());
    }

    #[test]
    fn rank_over_field() {
        let v = vec![Surd::one(), phi()];
        let w = vec![&Surd::one() * &int(2), &phi() * &int(2)];
        assert_eq!(rank(&[v.clone(), w]), 1);
        let u = vec![Surd::one(), phi().conjugate()];
        assert_eq!(rank(&[v, u]), 2);
    }
}
