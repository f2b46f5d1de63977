//! Closed infinite-dimensional subspaces avoiding a smaller chain space.
//!
//! Every basis here is supported block by block: the `j`-th element lives on
//! `A_j`. A closed-span element `Σ c_j e_j` is therefore read off pointwise,
//! `c_j = f(n)/e_j(n)` for any `n ∈ A_j`, which is what [`decompose`] checks.

use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumeration::QComplex;
use crate::error::{usage, Error, Result};
use crate::seq::{
    down, linear_combine, membership, BlockConstants, ComplexSeq, DivergenceCertificate,
    IndexEscape, SpaceSpec, Verdict,
};
use crate::witness::{divergent_block_seq, index_of};

/// Relative tolerance for ratio agreement on floating inputs.
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// Largest denominator tried when recovering rational coefficients.
pub const MAX_DENOMINATOR: i64 = 1 << 20;

/// The space the basis avoids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum Target {
    /// Block indicators, bounded and not null.
    C0,
    /// Block sequences `k^(-1/b)`, outside `l^b`.
    Lp { b: f64 },
}

/// Which construction produced a basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Block-constant sequences in `l^inf`, outside `c_0`.
    BlockConstant,
    /// Divergent block sequences outside `l^b`.
    DivergentBlocks,
    /// Divergent block sequences outside `l^b ⊃ ∩_{p>a} l^p`.
    ViaIntermediate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceableBasis {
    pub ambient: SpaceSpec,
    pub target: Target,
    pub route: Route,
    pub labels: Vec<String>,
    #[serde(skip)]
    elements: Vec<ComplexSeq>,
}

/// The sequence equal to `constants[m]` on all of `A_m`.
pub fn block_constant_embed(constants: BlockConstants) -> ComplexSeq {
    ComplexSeq::block_constant(constants)
}

fn block_indicator(j: u64) -> ComplexSeq {
    block_constant_embed(BlockConstants::listed([(j, Complex64::new(1.0, 0.0))], Complex64::new(0.0, 0.0)))
}

/// `y_j = divergent_block_seq(b, j)` for `j = 1..count`.
pub fn spaceable_basis(ambient: &SpaceSpec, b: f64, count: u64) -> Result<SpaceableBasis> {
    let lb = SpaceSpec::lp(b)?;
    ambient.validate()?;
    if !ambient.strictly_contains(&lb) {
        return usage(format!("{ambient} does not strictly contain {lb}"));
    }
    build(ambient, Target::Lp { b }, Route::DivergentBlocks, count)
}

/// Block-indicator basis of a closed subspace of `l^inf` outside `c_0`.
pub fn block_indicator_basis(count: u64) -> Result<SpaceableBasis> {
    build(&SpaceSpec::LInf, Target::C0, Route::BlockConstant, count)
}

fn build(ambient: &SpaceSpec, target: Target, route: Route, count: u64) -> Result<SpaceableBasis> {
    if count == 0 {
        return usage("count must be >= 1");
    }
    let elements = (1..=count)
        .into_par_iter()
        .map(|j| match target {
            Target::C0 => Ok(block_indicator(j)),
            Target::Lp { b } => divergent_block_seq(b, j),
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = (1..=count)
        .map(|j| match target {
            Target::C0 => format!("1 on A_{j}"),
            Target::Lp { b } => format!("k^(-{}) on A_{j}", 1.0 / b),
        })
        .collect();
    Ok(SpaceableBasis { ambient: ambient.clone(), target, route, labels, elements })
}

/// Basis for the pair `(Y, X)` of chain spaces with `Y ⊋ X`.
///
/// `Y = l^inf` uses block constants; otherwise `X ⊆ l^b ⊊ Y` for a suitable
/// `b` and the divergent block sequences of `l^b` are used.
pub fn spaceability_route(ambient: &SpaceSpec, sub: &SpaceSpec, count: u64) -> Result<SpaceableBasis> {
    ambient.validate()?;
    sub.validate()?;
    if !ambient.strictly_contains(sub) {
        return usage(format!("{sub} is not a proper subspace of {ambient} in the chain"));
    }
    if *ambient == SpaceSpec::LInf {
        return block_indicator_basis(count);
    }
    let (b, route) = match (ambient, sub) {
        (_, SpaceSpec::Lp { p }) => (*p, Route::DivergentBlocks),
        (SpaceSpec::C0, SpaceSpec::CapAbove { a, .. }) => (a + 1.0, Route::ViaIntermediate),
        (SpaceSpec::CapAbove { a: top, .. }, SpaceSpec::CapAbove { a, .. })
        | (SpaceSpec::Lp { p: top }, SpaceSpec::CapAbove { a, .. }) => {
            ((a + top) / 2.0, Route::ViaIntermediate)
        }
        _ => return usage(format!("no route for ({ambient}, {sub})")),
    };
    let mut basis = spaceable_basis(ambient, b, count)?;
    basis.route = route;
    Ok(basis)
}

impl SpaceableBasis {
    pub fn elements(&self) -> &[ComplexSeq] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn target_space(&self) -> SpaceSpec {
        match self.target {
            Target::C0 => SpaceSpec::C0,
            Target::Lp { b } => SpaceSpec::Lp { p: b },
        }
    }

    /// `Σ c_j e_j`.
    pub fn combination(&self, coeffs: &[Complex64]) -> Result<ComplexSeq> {
        if coeffs.len() > self.elements.len() {
            return usage(format!(
                "{} coefficients for a basis of {} elements",
                coeffs.len(),
                self.elements.len()
            ));
        }
        linear_combine(coeffs, &self.elements[..coeffs.len()])
    }

    /// Membership verdicts `(in ambient, in target)` of every element.
    pub fn certify(&self) -> Vec<(Verdict, Verdict)> {
        let target = self.target_space();
        self.elements
            .iter()
            .map(|e| (membership(e, &self.ambient), membership(e, &target)))
            .collect()
    }

    pub fn all_certified(&self) -> bool {
        self.certify().iter().all(|(a, t)| a.is_in() && t.is_out())
    }
}

/// Per-block result of coefficient recovery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BlockRatio {
    Consistent {
        block: u64,
        c: Complex64,
        /// Small-denominator rational reproducing `c` to working precision.
        rational: Option<QComplex>,
    },
    Mismatch {
        block: u64,
        /// First block position whose ratio disagrees with the last one.
        position: u64,
        ratios: Vec<Complex64>,
    },
}

impl BlockRatio {
    pub fn coefficient(&self) -> Option<Complex64> {
        match self {
            BlockRatio::Consistent { c, .. } => Some(*c),
            BlockRatio::Mismatch { .. } => None,
        }
    }
}

/// Best rational approximation with denominator `<= max_den`, accepted only
/// if it reproduces `x` to a few ulps.
pub fn recover_rational(x: f64, max_den: i64) -> Option<Rational64> {
    if !x.is_finite() || x.abs() >= 2f64.powi(52) {
        return None;
    }
    if x == 0.0 {
        return Some(Rational64::from_integer(0));
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut rest = x.abs();
    for _ in 0..64 {
        let a = rest.floor();
        let ai = a as i64;
        let p2 = ai.checked_mul(p1)?.checked_add(p0)?;
        let q2 = ai.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let approx = p1 as f64 / q1 as f64;
        if (approx - x.abs()).abs() <= 4.0 * f64::EPSILON * x.abs() {
            let r = Rational64::new(p1, q1);
            return Some(if x < 0.0 { -r } else { r });
        }
        let frac = rest - a;
        if frac == 0.0 {
            break;
        }
        rest = 1.0 / frac;
    }
    None
}

fn recover_complex(c: Complex64) -> Option<QComplex> {
    Some(QComplex::new(recover_rational(c.re, MAX_DENOMINATOR)?, recover_rational(c.im, MAX_DENOMINATOR)?))
}

fn agree(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= RATIO_TOLERANCE * a.norm().max(b.norm())
}

/// Ratios `f(n)/e_j(n)` over the first `positions` elements of each block.
pub fn decompose(f: &ComplexSeq, basis: &SpaceableBasis, positions: u64) -> Result<Vec<BlockRatio>> {
    if positions < 2 {
        return usage("need at least 2 positions per block");
    }
    basis
        .elements
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let block = i as u64 + 1;
            let mut ratios = Vec::with_capacity(positions as usize);
            for k in 1..=positions {
                let n = index_of(block, k)?;
                let v = e.value(n);
                if v.norm() == 0.0 {
                    return Err(Error::Usage(format!("basis element {block} vanishes at {n}")));
                }
                ratios.push(f.value(n) / v);
            }
            let last = *ratios.last().expect("positions >= 2");
            Ok(match ratios.iter().position(|r| !agree(last, *r)) {
                Some(i) => BlockRatio::Mismatch { block, position: i as u64 + 1, ratios },
                None => BlockRatio::Consistent { block, c: last, rational: recover_complex(last) },
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceableEscape {
    pub block: u64,
    pub coefficient: Complex64,
    pub threshold: f64,
    pub evidence: DivergenceCertificate,
    pub escape: IndexEscape,
}

/// Certified escape of `Σ c_j e_j` from the target, read on the first block
/// with `c_j != 0`, where the combination equals `c_j e_j` exactly.
pub fn verify_spaceable_combo(
    coeffs: &[Complex64],
    basis: &SpaceableBasis,
    threshold: f64,
) -> Result<SpaceableEscape> {
    if coeffs.len() > basis.len() {
        return usage("more coefficients than basis elements");
    }
    let Some(i) = coeffs.iter().position(|c| c.norm() != 0.0) else {
        return usage("all coefficients are zero");
    };
    let block = i as u64 + 1;
    let c = coeffs[i];
    let evidence = match basis.target {
        Target::Lp { b } => DivergenceCertificate::PowerSum {
            p: b,
            exponent: 1.0,
            block,
            scale: down(c.norm().powf(b)),
            skipped: 0,
        },
        Target::C0 => DivergenceCertificate::NonVanishing {
            p: None,
            block,
            floor: down(c.norm()),
            skipped: 0,
        },
    };
    let escape = evidence.escape_index(threshold).expect("index based certificate");
    Ok(SpaceableEscape { block, coefficient: c, threshold, evidence, escape })
}
