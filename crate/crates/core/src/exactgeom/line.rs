//! Exact intersection of lines with polytope families.

use super::surd::rational_dot;
use super::{common_denominator, Polytope, Rational, Surd};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use std::cmp::Ordering;

/// The line `base + s · direction`, `s ∈ ℝ`.
///
/// Rational directions are scaled to primitive integer vectors; directions
/// with a quadratic-surd component are scaled so that their first non-zero
/// entry is `1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineProbe {
    base: Vec<Rational>,
    direction: Vec<Surd>,
}

impl LineProbe {
    pub fn new(base: Vec<Rational>, direction: Vec<Surd>) -> Result<Self> {
        if base.len() != direction.len() {
            return Err(Error::DimensionMismatch {
                expected: base.len(),
                got: direction.len(),
            });
        }
        let Some(first) = direction.iter().find(|x| !x.is_zero()).cloned() else {
            return Err(Error::InvalidParameter("line direction must be non-zero".into()));
        };
        let direction = if direction.iter().all(Surd::is_rational) {
            let rats: Vec<Rational> = direction.iter().map(|x| x.rational_part().clone()).collect();
            let den = common_denominator(&rats);
            let nums: Vec<BigInt> = rats.iter().map(|x| x.numer() * (&den / x.denom())).collect();
            let g = nums.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
            nums.into_iter()
                .map(|n| Surd::rational(Rational::from_integer(n / &g)))
                .collect()
        } else {
            direction.iter().map(|x| x / &first).collect()
        };
        Ok(Self { base, direction })
    }

    pub fn rational(base: Vec<Rational>, direction: Vec<Rational>) -> Result<Self> {
        Self::new(base, direction.into_iter().map(Surd::rational).collect())
    }

    pub fn base(&self) -> &[Rational] {
        &self.base
    }

    pub fn direction(&self) -> &[Surd] {
        &self.direction
    }

    /// Closure and interior parameter intervals of the line inside `p`.
    fn slice(&self, p: &Polytope) -> Slice {
        let mut lo: Option<Surd> = None;
        let mut hi: Option<Surd> = None;
        let mut in_facet = false;
        if p.is_empty() {
            return Slice::Empty;
        }
        for h in p.halfspaces() {
            let along = rational_dot(h.normal(), &self.direction);
            let room = h.offset() - super::dot(h.normal(), &self.base);
            match along.signum() {
                Ordering::Equal => match room.cmp(&Rational::zero()) {
                    Ordering::Less => return Slice::Empty,
                    Ordering::Equal => in_facet = true,
                    Ordering::Greater => {}
                },
                Ordering::Greater => {
                    let s = &Surd::rational(room) / &along;
                    if hi.as_ref().is_none_or(|x| s < *x) {
                        hi = Some(s);
                    }
                }
                Ordering::Less => {
                    let s = &Surd::rational(room) / &along;
                    if lo.as_ref().is_none_or(|x| s > *x) {
                        lo = Some(s);
                    }
                }
            }
        }
        let (Some(lo), Some(hi)) = (lo, hi) else {
            // bounded polytopes constrain every direction; only a
            // lower-dimensional set can leave the line unbounded here
            return Slice::Empty;
        };
        match lo.cmp(&hi) {
            Ordering::Greater => Slice::Empty,
            Ordering::Equal => Slice::Touch,
            Ordering::Less if in_facet || !p.has_interior() => Slice::Boundary,
            Ordering::Less => Slice::Through(lo, hi),
        }
    }
}

enum Slice {
    Empty,
    /// Meets the closure in a single point.
    Touch,
    /// Runs inside the boundary for a positive length.
    Boundary,
    /// Crosses the interior on the open interval `(lo, hi)`.
    Through(Surd, Surd),
}

/// Result of [`line_components`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineReport {
    /// Connected components of the line inside each polytope's interior.
    pub components: Vec<usize>,
    /// Connected components of the line inside the union of interiors.
    pub union_components: usize,
    /// Points where the line passes from one interior to another through the
    /// union of boundaries, with the union covering the line on both sides.
    pub boundary_crossings: usize,
    /// The line runs inside some boundary facet for a positive length.
    pub degenerate: bool,
}

/// Intersects a line with a family of polytopes (interiors taken as the open
/// pieces of a partition).
pub fn line_components(ps: &[Polytope], probe: &LineProbe) -> Result<LineReport> {
    let dim = probe.base.len();
    let mut components = Vec::with_capacity(ps.len());
    let mut intervals: Vec<(Surd, Surd)> = Vec::new();
    let mut degenerate = false;
    for p in ps {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        match probe.slice(p) {
            Slice::Through(lo, hi) => {
                components.push(1);
                intervals.push((lo, hi));
            }
            Slice::Boundary => {
                degenerate = true;
                components.push(0);
            }
            Slice::Empty | Slice::Touch => components.push(0),
        }
    }

    // components of the union of open intervals: touching endpoints stay apart
    let mut sorted = intervals.clone();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut union_components = 0;
    let mut reach: Option<Surd> = None;
    for (lo, hi) in &sorted {
        match &reach {
            Some(r) if lo < r => {
                if hi > r {
                    reach = Some(hi.clone());
                }
            }
            _ => {
                union_components += 1;
                reach = Some(hi.clone());
            }
        }
    }

    let mut endpoints: Vec<Surd> = intervals
        .iter()
        .flat_map(|(lo, hi)| [lo.clone(), hi.clone()])
        .collect();
    endpoints.sort();
    endpoints.dedup();
    let boundary_crossings = endpoints
        .iter()
        .filter(|s| {
            let left = intervals.iter().any(|(lo, hi)| lo < *s && *s <= hi);
            let right = intervals.iter().any(|(lo, hi)| lo <= *s && *s < hi);
            left && right
        })
        .count();

    Ok(LineReport {
        components,
        union_components,
        boundary_crossings,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactgeom::{int, rat, Halfspace};

    fn baker_partition() -> Vec<Polytope> {
        let u = Polytope::unit_box(2).unwrap();
        vec![
            u.clip(&Halfspace::upper(2, 0, rat(1, 2))).unwrap(),
            u.clip(&Halfspace::lower(2, 0, rat(1, 2))).unwrap(),
        ]
    }

    #[test]
    fn vertical_line_in_left_piece() {
        let probe = LineProbe::rational(vec![rat(1, 4), int(0)], vec![int(0), int(1)]).unwrap();
        let r = line_components(&baker_partition(), &probe).unwrap();
        assert_eq!(r.components, vec![1, 0]);
        assert_eq!(r.boundary_crossings, 0);
        assert!(!r.degenerate);
    }

    #[test]
    fn line_on_the_cut_is_degenerate() {
        let probe = LineProbe::rational(vec![rat(1, 2), int(0)], vec![int(0), int(3)]).unwrap();
        let r = line_components(&baker_partition(), &probe).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.components, vec![0, 0]);
    }

    #[test]
    fn horizontal_line_crosses_once() {
        let probe = LineProbe::rational(vec![int(0), rat(1, 3)], vec![int(2), int(0)]).unwrap();
        assert_eq!(probe.direction()[0], Surd::rational(int(1)));
        let r = line_components(&baker_partition(), &probe).unwrap();
        assert_eq!(r.components, vec![1, 1]);
        assert_eq!(r.boundary_crossings, 1);
        assert_eq!(r.union_components, 2);
        assert!(!r.degenerate);
    }

    #[test]
    fn irrational_direction() {
        // slope (sqrt5 - 1)/2 through the centre of the unit square
        let dir = vec![Surd::one(), Surd::new(rat(-1, 2), rat(1, 2), 5).unwrap()];
        let probe = LineProbe::new(vec![rat(1, 2), rat(1, 2)], dir).unwrap();
        let r = line_components(&baker_partition(), &probe).unwrap();
        assert_eq!(r.components, vec![1, 1]);
        assert_eq!(r.boundary_crossings, 1);
    }

    #[test]
    fn zero_direction_rejected() {
        assert!(LineProbe::rational(vec![int(0)], vec![int(0)]).is_err());
    }
}
