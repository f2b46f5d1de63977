//! Canonical disjoint index blocks and the strict-inclusion witnesses of the
//! chain `l^inf ⊃ c_0 ⊃ ∩_{p>b} l^p ⊃ l^b ⊃ ∩_{p>a} l^p ⊃ l^a ⊃ ∩_{p>0} l^p`.
//!
//! Block `A_j` (j ≥ 1) is `{2^(j-1)·(2k-1) : k ≥ 1}`: the indices whose 2-adic
//! valuation is `j - 1`. The blocks are pairwise disjoint, each is infinite,
//! and together they cover every positive integer.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::seq::{membership, ComplexSeq, SpaceSpec, Verdict};

/// Index of the `k`-th element of block `j`, i.e. `2^(j-1)·(2k-1)`.
pub fn index_of(j: u64, k: u64) -> Result<u64> {
    if j == 0 || k == 0 {
        return usage(format!("block and position must be >= 1 (got j={j}, k={k})"));
    }
    checked_index(j, k)
        .ok_or_else(|| Error::Usage(format!("index of (j={j}, k={k}) overflows u64")))
}

/// `(block, position)` of an index; exact inverse of [`index_of`].
pub fn block_of(n: u64) -> Result<(u64, u64)> {
    if n == 0 {
        return usage("indices start at 1");
    }
    Ok(split(n))
}

pub(crate) fn split(n: u64) -> (u64, u64) {
    debug_assert!(n >= 1);
    let tz = n.trailing_zeros();
    (u64::from(tz) + 1, (n >> tz).div_ceil(2))
}

pub(crate) fn checked_index(j: u64, k: u64) -> Option<u64> {
    let shift = u32::try_from(j - 1).ok().filter(|s| *s < 64)?;
    let odd = k.checked_mul(2)?.checked_sub(1)?;
    let n = odd.checked_mul(1u64 << shift)?;
    // the shift must not drop bits
    (n >> shift == odd).then_some(n)
}

/// Number of positions of block `j` whose index is `<= t`. Block 0 stands for
/// all of `ℕ`, so the count is `t` itself.
pub(crate) fn positions_upto(j: u64, t: u64) -> u64 {
    if j == 0 {
        return t;
    }
    if j > 64 {
        return 0;
    }
    let step = 1u64 << (j - 1);
    (t / step).div_ceil(2)
}

/// `y_j`: equals `k^(-1/b)` at the `k`-th element of `A_j` and vanishes off `A_j`.
///
/// Its `b`-sum is the harmonic series (divergent) while for `p > b` the
/// `p`-sum is at most `1 + b/(p - b)`.
pub fn divergent_block_seq(b: f64, j: u64) -> Result<ComplexSeq> {
    if !(b > 0.0 && b.is_finite()) {
        return usage(format!("exponent b must be positive, got {b}"));
    }
    if j == 0 {
        return usage("block ids start at 1");
    }
    ComplexSeq::power_law(1.0 / b, j)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub ambient: SpaceSpec,
    pub subspace: SpaceSpec,
    /// Human readable description of the witness sequence.
    pub sequence: String,
    /// Power-law exponent of the witness, `None` for the constant sequence.
    pub gamma: Option<f64>,
    pub verdict_in: Verdict,
    pub verdict_out: Verdict,
    #[serde(skip)]
    pub witness: Option<ComplexSeq>,
}

/// Produce and certify a sequence in `ambient` but not in `sub`.
///
/// Exponents follow the reciprocal reading of the classical witnesses:
/// `γ = 1/(a+1)` below `c_0`, `γ = 1/b` below `∩_{p>b} l^p` and
/// `γ = 2/(a+b)` below `l^b`. Each verdict is re-derived with [`membership`];
/// a witness that fails to certify is reported as an error, never returned.
pub fn chain_witness(ambient: &SpaceSpec, sub: &SpaceSpec) -> Result<WitnessRecord> {
    ambient.validate()?;
    sub.validate()?;
    if !ambient.strictly_contains(sub) {
        return usage(format!("{sub} is not a proper subspace of {ambient} in the chain"));
    }
    let sub_param = match sub {
        SpaceSpec::LInf => unreachable!("nothing in the chain strictly contains l^inf"),
        SpaceSpec::C0 => None,
        SpaceSpec::Lp { p } => Some(*p),
        SpaceSpec::CapAbove { a, .. } => Some(*a),
    };
    let (seq, gamma, label) = match (ambient, sub_param) {
        (SpaceSpec::LInf, _) => (ComplexSeq::ones(), None, "(1, 1, 1, ...)".to_string()),
        (SpaceSpec::C0, Some(a)) => {
            let g = 1.0 / (a + 1.0);
            (ComplexSeq::power_law(g, 0)?, Some(g), format!("n^(-{g})"))
        }
        (SpaceSpec::CapAbove { a: b, .. }, Some(_)) => {
            let g = 1.0 / b;
            (ComplexSeq::power_law(g, 0)?, Some(g), format!("n^(-{g})"))
        }
        (SpaceSpec::Lp { p: b }, Some(a)) => {
            let g = 2.0 / (a + b);
            (ComplexSeq::power_law(g, 0)?, Some(g), format!("n^(-{g})"))
        }
        _ => return usage(format!("no witness rule for ({ambient}, {sub})")),
    };
    let verdict_in = membership(&seq, ambient);
    let verdict_out = membership(&seq, sub);
    if !verdict_in.is_in() || !verdict_out.is_out() {
        return Err(Error::Undetermined(format!(
            "witness {label} failed to certify ({ambient}, {sub})"
        )));
    }
    Ok(WitnessRecord {
        ambient: ambient.clone(),
        subspace: sub.clone(),
        sequence: label,
        gamma,
        verdict_in,
        verdict_out,
        witness: Some(seq),
    })
}

/// The six adjacent pairs of the chain for `0 < a < b`.
pub fn chain_pairs(a: f64, b: f64) -> Result<Vec<(SpaceSpec, SpaceSpec)>> {
    if !(0.0 < a && a < b) {
        return usage(format!("need 0 < a < b, got a={a}, b={b}"));
    }
    let cap_b = SpaceSpec::cap_above(b)?;
    let cap_a = SpaceSpec::cap_above(a)?;
    let cap_0 = SpaceSpec::cap_above(0.0)?;
    let lb = SpaceSpec::lp(b)?;
    let la = SpaceSpec::lp(a)?;
    Ok(vec![
        (SpaceSpec::LInf, SpaceSpec::C0),
        (SpaceSpec::C0, cap_b.clone()),
        (cap_b, lb.clone()),
        (lb, cap_a.clone()),
        (cap_a, la.clone()),
        (la, cap_0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coding_examples() {
        assert_eq!(index_of(1, 1).unwrap(), 1);
        assert_eq!(index_of(2, 3).unwrap(), 10);
        assert_eq!(block_of(4).unwrap(), (3, 1));
        assert_eq!(block_of(3).unwrap(), (1, 2));
    }

    #[test]
    fn coding_rejects_zero() {
        assert!(matches!(index_of(0, 1), Err(Error::Usage(_))));
        assert!(matches!(index_of(1, 0), Err(Error::Usage(_))));
        assert!(matches!(block_of(0), Err(Error::Usage(_))));
    }

    #[test]
    fn coding_overflow_is_reported() {
        assert!(index_of(65, 1).is_err());
        assert!(index_of(64, 2).is_err());
        assert_eq!(index_of(64, 1).unwrap(), 1 << 63);
    }

    #[test]
    fn coding_round_trip_first_million() {
        for n in 1..=1_000_000u64 {
            let (j, k) = block_of(n).unwrap();
            assert_eq!(index_of(j, k).unwrap(), n);
        }
    }

    #[test]
    fn positions_count_matches_enumeration() {
        for j in 0..6u64 {
            for t in 0..200u64 {
                let brute = (1..=t)
                    .filter(|&n| j == 0 || split(n).0 == j)
                    .count() as u64;
                assert_eq!(positions_upto(j, t), brute, "j={j} t={t}");
            }
        }
    }

    #[test]
    fn block_sequences_have_disjoint_support() {
        let y1 = divergent_block_seq(1.0, 1).unwrap();
        let y2 = divergent_block_seq(1.0, 2).unwrap();
        let y5 = divergent_block_seq(0.5, 5).unwrap();
        for n in 1..=10_000u64 {
            let nz = [&y1, &y2, &y5].iter().filter(|y| y.value(n).norm() != 0.0).count();
            assert!(nz <= 1, "overlap at {n}");
        }
    }

    #[test]
    fn block_sequence_values() {
        let y = divergent_block_seq(1.0, 1).unwrap();
        assert_eq!(y.value(3).re, 0.5);
        assert_eq!(y.value(2).re, 0.0);
        // H_100 by direct summation, certified lower bound ln(101)
        let h100: f64 = (1..=100u64).map(|k| y.value(index_of(1, k).unwrap()).re).sum();
        assert!((h100 - 5.187_377_517_639_621).abs() < 1e-12);
        assert!(101f64.ln() < h100);
        let v = membership(&y, &SpaceSpec::lp(2.0).unwrap());
        match v {
            Verdict::CertifiedIn { upper_bound, .. } => {
                assert!((upper_bound - 2.0).abs() < 1e-9)
            }
            other => panic!("expected in, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_chain_pairs() {
        let l1 = SpaceSpec::lp(1.0).unwrap();
        let l2 = SpaceSpec::lp(2.0).unwrap();
        assert!(chain_witness(&l1, &l2).is_err());
        assert!(chain_witness(&l1, &l1).is_err());
        assert!(chain_witness(&SpaceSpec::C0, &SpaceSpec::LInf).is_err());
    }

    #[test]
    fn literal_printed_exponents_do_not_all_separate() {
        // x = a/2 read literally as n^(-a/2) is not in l^a for a = 1.
        let a = 1.0;
        let literal = ComplexSeq::power_law(a / 2.0, 0).unwrap();
        assert!(membership(&literal, &SpaceSpec::lp(a).unwrap()).is_out());
        // the reciprocal reading γ = 2/a is.
        let reciprocal = ComplexSeq::power_law(2.0 / a, 0).unwrap();
        assert!(membership(&reciprocal, &SpaceSpec::lp(a).unwrap()).is_in());
    }
}
