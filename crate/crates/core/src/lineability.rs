//! Dense lineable subspace of `∩_{p>b} l^p` avoiding `l^b`.
//!
//! The basis is `f_j = x_j` on `n <= n_j` and `c_j·y_j` on the part of block
//! `A_j` beyond `n_j`, where `x_j` runs through the finitely supported
//! `ℚ + iℚ` sequences, `y_j` is the divergent block sequence and `c_j` is a
//! power of two pushing `c_j·y_j` into the `j`-th basic neighbourhood of 0.
//! Beyond `max(n_1, …, n_N)` a combination with `a_N != 0` equals
//! `a_N·c_N·y_N` on `A_N`, so its `b`-sum diverges there.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumeration::{enumerate_dense, RationalSeq};
use crate::error::{usage, Error, Result};
use crate::seq::{
    down, linear_combine, lp_distance, membership, up, ComplexSeq, DivergenceCertificate,
    IndexEscape, Interval, SpaceSpec, TailCertificate, Verdict,
};
use crate::witness::{positions_upto, split};

/// Default cap on the exponent `t` of `c = 2^(-t)`.
pub const MAX_SCALE_EXPONENT: u32 = 2048;

/// `V_j = { g : d_{p_k}(g, 0) < 1/j for k = 1..j }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub level: u64,
    pub exponents: Vec<f64>,
    pub radius: f64,
}

impl NeighborhoodSpec {
    pub fn new(space: &SpaceSpec, level: u64) -> Result<Self> {
        if !matches!(space, SpaceSpec::CapAbove { .. }) {
            return usage(format!("neighbourhoods are defined for intersection spaces, got {space}"));
        }
        if level == 0 {
            return usage("neighbourhood level must be >= 1");
        }
        let exponents = (1..=level).map(|k| space.exponent(k).expect("intersection")).collect();
        Ok(NeighborhoodSpec { level, exponents, radius: 1.0 / level as f64 })
    }

    /// Certified distance intervals `d_{p_k}(g, 0)`, one per exponent.
    pub fn distances(&self, g: &ComplexSeq, truncation: u64) -> Vec<Interval> {
        let zero = ComplexSeq::zero();
        self.exponents.iter().map(|&p| lp_distance(g, &zero, p, truncation)).collect()
    }

    /// Whether the certified upper bounds put `g` inside the neighbourhood.
    pub fn contains(&self, g: &ComplexSeq, truncation: u64) -> bool {
        self.distances(g, truncation).iter().all(|d| d.hi < self.radius)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    /// `c = 2^(-t)`.
    pub t: u32,
    pub c: f64,
    /// Certified bounds on `d_{p_k}(c·y, 0)`.
    pub bounds: Vec<f64>,
}

fn scaled_bound(p: f64, psum: f64, t: u32) -> f64 {
    let c = 0.5f64.powi(t as i32);
    if p >= 1.0 {
        up(c * psum.powf(1.0 / p))
    } else {
        up(c.powf(p) * psum)
    }
}

/// Largest power of two `c` with `c·y ∈ V` according to certified bounds.
pub fn scale_into(y: &ComplexSeq, v: &NeighborhoodSpec) -> Result<Scaling> {
    scale_into_capped(y, v, MAX_SCALE_EXPONENT)
}

pub fn scale_into_capped(y: &ComplexSeq, v: &NeighborhoodSpec, max_t: u32) -> Result<Scaling> {
    let mut psums = Vec::with_capacity(v.exponents.len());
    for &p in &v.exponents {
        match membership(y, &SpaceSpec::lp(p)?) {
            Verdict::CertifiedIn { upper_bound, .. } => psums.push(upper_bound),
            other => {
                return usage(format!("sequence has no certified l^{p} bound: {other:?}"));
            }
        }
    }
    let fits = |t: u32| {
        v.exponents
            .iter()
            .zip(&psums)
            .all(|(&p, &s)| scaled_bound(p, s, t) < v.radius)
    };
    // first guess from logarithms, then settle exactly
    let guess = v
        .exponents
        .iter()
        .zip(&psums)
        .map(|(&p, &s)| {
            let need = if p >= 1.0 {
                s.log2() / p - v.radius.log2()
            } else {
                (s.log2() - v.radius.log2()) / p
            };
            need.floor().max(0.0)
        })
        .fold(0.0, f64::max);
    if !(guess <= f64::from(max_t)) {
        return Err(Error::SearchFailed(format!("no c = 2^(-t) with t <= {max_t} fits")));
    }
    let mut t = guess as u32;
    while t > 0 && fits(t - 1) {
        t -= 1;
    }
    while !fits(t) {
        t += 1;
        if t > max_t {
            return Err(Error::SearchFailed(format!("no c = 2^(-t) with t <= {max_t} fits")));
        }
    }
    let c = 0.5f64.powi(t as i32);
    if c == 0.0 {
        return Err(Error::SearchFailed(format!("2^(-{t}) underflows")));
    }
    let bounds = v.exponents.iter().zip(&psums).map(|(&p, &s)| scaled_bound(p, s, t)).collect();
    Ok(Scaling { t, c, bounds })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LineableElement {
    pub j: u64,
    pub x: RationalSeq,
    pub support_bound: u64,
    pub scaling: Scaling,
    #[serde(skip)]
    f: Option<ComplexSeq>,
    #[serde(skip)]
    x_seq: Option<ComplexSeq>,
}

impl LineableElement {
    pub fn f(&self) -> &ComplexSeq {
        self.f.as_ref().expect("constructed by lineable_basis")
    }

    pub fn x_seq(&self) -> &ComplexSeq {
        self.x_seq.as_ref().expect("constructed by lineable_basis")
    }

    pub fn c(&self) -> f64 {
        self.scaling.c
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LineableBasis {
    pub b: f64,
    pub ambient: SpaceSpec,
    pub elements: Vec<LineableElement>,
}

fn build_element(b: f64, ambient: &SpaceSpec, j: u64) -> Result<LineableElement> {
    let x = enumerate_dense(j);
    let n_j = x.support_bound();
    let y = crate::witness::divergent_block_seq(b, j)?;
    let v = NeighborhoodSpec::new(ambient, j)?;
    let scaling = scale_into(&y, &v)?;
    let c = scaling.c;
    let x_seq = x.to_seq();
    let head = x_seq.clone();
    let gamma = 1.0 / b;
    let f = ComplexSeq::new(
        move |n| {
            if n <= n_j {
                head.value(n)
            } else {
                let (blk, k) = split(n);
                if blk == j {
                    Complex64::new(c * (k as f64).powf(-gamma), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        TailCertificate::LinearCombination {
            terms: vec![
                (Complex64::new(1.0, 0.0), TailCertificate::FiniteSupport { n_max: n_j }),
                (Complex64::new(c, 0.0), TailCertificate::PowerLaw { gamma, block: j }),
            ],
        },
    )?;
    Ok(LineableElement { j, x, support_bound: n_j, scaling, f: Some(f), x_seq: Some(x_seq) })
}

/// The first `count` basis elements for the couple `(∩_{p>b} l^p, l^b)`.
pub fn lineable_basis(b: f64, count: u64) -> Result<LineableBasis> {
    if !(b > 0.0 && b.is_finite()) {
        return usage(format!("b must be positive, got {b}"));
    }
    if count == 0 {
        return usage("count must be >= 1");
    }
    let ambient = SpaceSpec::cap_above(b)?;
    let elements = (1..=count)
        .into_par_iter()
        .map(|j| build_element(b, &ambient, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(LineableBasis { b, ambient, elements })
}

impl LineableBasis {
    /// `d_{p_k}(f_j - x_j, 0)` for `k = 1..j`, as certified intervals.
    pub fn neighborhood_distances(&self, j: u64, truncation: u64) -> Result<Vec<Interval>> {
        let e = self.element(j)?;
        let v = NeighborhoodSpec::new(&self.ambient, j)?;
        let zero = ComplexSeq::zero();
        Ok(v.exponents
            .iter()
            .map(|&p| {
                let diff = lp_distance(e.f(), e.x_seq(), p, truncation);
                debug_assert!(lp_distance(&zero, &zero, p, 1).hi == 0.0);
                diff
            })
            .collect())
    }

    pub fn element(&self, j: u64) -> Result<&LineableElement> {
        usize::try_from(j)
            .ok()
            .and_then(|j| j.checked_sub(1))
            .and_then(|i| self.elements.get(i))
            .ok_or_else(|| Error::Usage(format!("basis has no element {j}")))
    }

    /// `Σ a_i f_i`.
    pub fn combination(&self, coeffs: &[Complex64]) -> Result<ComplexSeq> {
        if coeffs.len() > self.elements.len() {
            return usage(format!(
                "{} coefficients for a basis of {} elements",
                coeffs.len(),
                self.elements.len()
            ));
        }
        let seqs: Vec<ComplexSeq> =
            self.elements[..coeffs.len()].iter().map(|e| e.f().clone()).collect();
        linear_combine(coeffs, &seqs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineableEscape {
    pub block: u64,
    /// `n* = max(n_1, …, n_N)`.
    pub n_star: u64,
    /// Block positions at or below `n*`.
    pub skipped: u64,
    pub threshold: f64,
    pub escape: IndexEscape,
}

/// Certified block position `K` with `Σ_{A_N ∋ n, n* < n <= n_K} |f(n)|^b > M`
/// for `f = Σ a_i f_i`, via `|a_N c_N|^b·(ln(K+1) - ln(K_0+1)) > M`.
pub fn verify_lineable_combo(
    coeffs: &[Complex64],
    basis: &LineableBasis,
    threshold: f64,
) -> Result<LineableEscape> {
    let Some(a_n) = coeffs.last() else {
        return usage("empty coefficient list");
    };
    if a_n.norm() == 0.0 {
        return usage("leading coefficient a_N must be nonzero");
    }
    let big_n = coeffs.len() as u64;
    let top = basis.element(big_n)?;
    let n_star = basis.elements[..coeffs.len()].iter().map(|e| e.support_bound).max().unwrap_or(0);
    let skipped = positions_upto(big_n, n_star);
    let cert = DivergenceCertificate::PowerSum {
        p: basis.b,
        exponent: 1.0,
        block: big_n,
        scale: down((a_n.norm() * top.c()).powf(basis.b)),
        skipped,
    };
    let escape = cert.escape_index(threshold).expect("power-sum certificates are index based");
    Ok(LineableEscape { block: big_n, n_star, skipped, threshold, escape })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::frechet_distance;
    use crate::witness::index_of;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn scale_into_example() {
        // exponents {2, 1.5}: ‖y‖_2 <= √2, ‖y‖_1.5 <= 3^(2/3); radius 1/2
        let cap = SpaceSpec::cap_above(1.0).unwrap();
        let v = NeighborhoodSpec::new(&cap, 2).unwrap();
        assert_eq!(v.exponents, vec![2.0, 1.5]);
        let y = crate::witness::divergent_block_seq(1.0, 2).unwrap();
        let s = scale_into(&y, &v).unwrap();
        // oracle: largest power of two below min(0.5/√2, 0.5/3^(2/3)) = 0.2404
        let limit = (0.5 / 2f64.sqrt()).min(0.5 / 2.080_083_823_051_904);
        let oracle = (0..64).map(|t| 0.5f64.powi(t)).find(|c| *c < limit).unwrap();
        assert_eq!(oracle, 0.125);
        assert_eq!(s.c, oracle);
    }

    #[test]
    fn scale_into_monotone_in_level_and_scaling() {
        let cap = SpaceSpec::cap_above(1.0).unwrap();
        let y = crate::witness::divergent_block_seq(1.0, 1).unwrap();
        let mut prev = f64::INFINITY;
        for j in 1..12 {
            let c_j = scale_into(&y, &NeighborhoodSpec::new(&cap, j).unwrap()).unwrap().c;
            assert!(c_j <= prev);
            prev = c_j;
        }
        let v = NeighborhoodSpec::new(&cap, 3).unwrap();
        let base = scale_into(&y, &v).unwrap().c;
        let doubled = scale_into(&y.scaled(c(2.0)), &v).unwrap().c;
        assert!(doubled <= base / 2.0);
    }

    #[test]
    fn scale_into_requires_summability() {
        let cap = SpaceSpec::cap_above(1.0).unwrap();
        let v = NeighborhoodSpec::new(&cap, 2).unwrap();
        let y = crate::witness::divergent_block_seq(2.0, 1).unwrap();
        assert!(matches!(scale_into(&y, &v), Err(Error::Usage(_))));
    }

    #[test]
    fn scale_into_reports_exhausted_cap() {
        let cap = SpaceSpec::cap_above(1.0).unwrap();
        let v = NeighborhoodSpec::new(&cap, 1000).unwrap();
        let y = crate::witness::divergent_block_seq(1.0, 1).unwrap();
        assert!(matches!(scale_into_capped(&y, &v, 3), Err(Error::SearchFailed(_))));
    }

    #[test]
    fn first_element_shape() {
        let basis = lineable_basis(1.0, 1).unwrap();
        let e = &basis.elements[0];
        assert_eq!(e.support_bound, 0);
        for k in 1..20 {
            let n = index_of(1, k).unwrap();
            assert_eq!(e.f().value(n), c(e.c() / k as f64));
        }
        assert_eq!(e.f().value(2), c(0.0));
    }

    #[test]
    fn elements_agree_with_x_up_to_support() {
        let basis = lineable_basis(1.0, 40).unwrap();
        for e in &basis.elements {
            for n in 1..=e.support_bound {
                assert_eq!(e.f().value(n), e.x_seq().value(n));
            }
        }
        // off the initial segments, distinct elements live on distinct blocks
        let (a, b) = (&basis.elements[6], &basis.elements[9]);
        let m = a.support_bound.max(b.support_bound);
        for n in m + 1..5000 {
            assert!(a.f().value(n) == c(0.0) || b.f().value(n) == c(0.0));
        }
    }

    #[test]
    fn neighborhood_certified_for_fifth_element() {
        let basis = lineable_basis(1.0, 5).unwrap();
        let d = basis.neighborhood_distances(5, 100_000).unwrap();
        assert_eq!(d.len(), 5);
        assert!(d.iter().all(|i| i.hi < 0.2), "{d:?}");
    }

    #[test]
    fn membership_split_and_q_reduction() {
        let basis = lineable_basis(1.0, 6).unwrap();
        for e in &basis.elements {
            assert!(membership(e.f(), &basis.ambient).is_in());
            assert!(membership(e.f(), &SpaceSpec::lp(1.0).unwrap()).is_out());
            assert!(membership(e.f(), &SpaceSpec::lp(1.5).unwrap()).is_in());
        }
    }

    #[test]
    fn density_surrogate() {
        let basis = lineable_basis(1.0, 10).unwrap();
        let depth = 30;
        for e in &basis.elements {
            let d = frechet_distance(e.f(), e.x_seq(), &basis.ambient, depth, 20_000).unwrap();
            let j = e.j as f64;
            assert!(d.hi < 1.0 / j + 0.5f64.powi(depth as i32), "j={} {d:?}", e.j);
        }
    }

    #[test]
    fn combo_escape_cross_checked_by_direct_summation() {
        let basis = lineable_basis(1.0, 3).unwrap();
        let coeffs = [c(1.0)];
        let r = verify_lineable_combo(&coeffs, &basis, 10.0).unwrap();
        let k = r.escape.position.unwrap();
        let c1 = basis.elements[0].c();
        assert!(c1 * (((k + 1) as f64).ln() - ((r.skipped + 1) as f64).ln()) > 10.0);
        // small threshold: the direct crossing precedes the certified one
        let f = basis.combination(&coeffs).unwrap();
        let small = verify_lineable_combo(&coeffs, &basis, 1.0).unwrap();
        let mut acc = 0.0;
        let mut crossing = None;
        for pos in small.skipped + 1.. {
            acc += f.value(index_of(1, pos).unwrap()).norm();
            if acc > 1.0 {
                crossing = Some(pos);
                break;
            }
        }
        assert!(crossing.unwrap() <= small.escape.position.unwrap());
    }

    #[test]
    fn combo_reads_last_block_only() {
        let basis = lineable_basis(1.0, 2).unwrap();
        let r = verify_lineable_combo(&[c(0.0), c(1.0)], &basis, 5.0).unwrap();
        assert_eq!(r.block, 2);
        assert!(matches!(
            verify_lineable_combo(&[c(1.0), c(0.0)], &basis, 5.0),
            Err(Error::Usage(_))
        ));
    }
}
