//! Deterministic bijection between the positive integers and finitely
//! supported sequences with entries in `ℚ + iℚ`.
//!
//! * `ℚ ↔ ℕ₀`: `0 ↦ 0`, `+q_m ↦ 2m-1`, `-q_m ↦ 2m`, where `q_m` is the
//!   `m`-th positive rational in Calkin–Wilf order.
//! * `ℚ + iℚ ↔ ℕ₀`: Cantor pairing of the real and imaginary codes.
//! * A sequence of length `L` whose last entry is nonzero is coded as
//!   `1 + π(L-1, π(e_1, π(e_2, …, e_L - 1)))`; the empty (zero) sequence is 0.
//! * Index `j >= 1` corresponds to code `j - 1`, so `j = 1` is the zero sequence.

use num_complex::Complex64;
use num_integer::Roots;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

/// Version tag of the coding above, recorded in reports.
pub const SCHEME_VERSION: &str = "calkin-wilf/cantor v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QComplex {
    pub re: Rational64,
    pub im: Rational64,
}

impl QComplex {
    pub fn new(re: Rational64, im: Rational64) -> Self {
        QComplex { re, im }
    }

    pub fn real(re: Rational64) -> Self {
        QComplex { re, im: Rational64::from_integer(0) }
    }

    pub fn zero() -> Self {
        QComplex::real(Rational64::from_integer(0))
    }

    pub fn is_zero(&self) -> bool {
        *self.re.numer() == 0 && *self.im.numer() == 0
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(ratio_f64(&self.re), ratio_f64(&self.im))
    }

    pub fn mul(&self, other: &QComplex) -> QComplex {
        QComplex {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    pub fn add(&self, other: &QComplex) -> QComplex {
        QComplex { re: self.re + other.re, im: self.im + other.im }
    }
}

pub(crate) fn ratio_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// A finitely supported `ℚ + iℚ` sequence without trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalSeq(Vec<QComplex>);

impl RationalSeq {
    pub fn new(mut entries: Vec<QComplex>) -> Self {
        while entries.last().is_some_and(QComplex::is_zero) {
            entries.pop();
        }
        RationalSeq(entries)
    }

    pub fn entries(&self) -> &[QComplex] {
        &self.0
    }

    /// Largest index carrying a nonzero entry (0 for the zero sequence).
    pub fn support_bound(&self) -> u64 {
        self.0.len() as u64
    }

    pub fn to_seq(&self) -> crate::seq::ComplexSeq {
        crate::seq::ComplexSeq::finite(self.0.iter().map(QComplex::to_c64).collect())
    }
}

fn pair(x: u128, y: u128) -> Option<u128> {
    let s = x.checked_add(y)?;
    let t = s.checked_mul(s.checked_add(1)?)? / 2;
    t.checked_add(y)
}

fn unpair(z: u128) -> (u128, u128) {
    let mut w = ((8 * z + 1).sqrt() - 1) / 2;
    // integer sqrt is exact, but guard the triangular bracket anyway
    while w * (w + 1) / 2 > z {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= z {
        w += 1;
    }
    let y = z - w * (w + 1) / 2;
    (w - y, y)
}

fn calkin_wilf(m: u128) -> (i128, i128) {
    debug_assert!(m >= 1);
    let (mut a, mut b) = (1i128, 1i128);
    let bits = 127 - m.leading_zeros();
    for i in (0..bits).rev() {
        if (m >> i) & 1 == 0 {
            b += a;
        } else {
            a += b;
        }
    }
    (a, b)
}

fn calkin_wilf_index(mut a: u128, mut b: u128) -> Option<u128> {
    // collect the path from the root as run lengths, then replay it
    let mut runs: Vec<(u8, u128)> = Vec::new();
    while !(a == 1 && b == 1) {
        if a < b {
            let q = if b.is_multiple_of(a) { b / a - 1 } else { b / a };
            runs.push((0, q));
            b -= q * a;
        } else {
            let q = if a.is_multiple_of(b) { a / b - 1 } else { a / b };
            runs.push((1, q));
            a -= q * b;
        }
    }
    let mut m: u128 = 1;
    for (bit, len) in runs.into_iter().rev() {
        for _ in 0..len {
            if m.leading_zeros() == 0 {
                return None;
            }
            m = (m << 1) | u128::from(bit);
        }
    }
    Some(m)
}

fn rational_of_code(z: u128) -> Rational64 {
    if z == 0 {
        return Rational64::from_integer(0);
    }
    let m = z.div_ceil(2);
    let (a, b) = calkin_wilf(m);
    let sign = if z % 2 == 1 { 1 } else { -1 };
    Rational64::new(
        i64::try_from(sign * a).expect("codes below 2^64 stay in range"),
        i64::try_from(b).expect("codes below 2^64 stay in range"),
    )
}

fn code_of_rational(r: &Rational64) -> Option<u128> {
    let (n, d) = (*r.numer() as i128, *r.denom() as i128);
    if n == 0 {
        return Some(0);
    }
    let m = calkin_wilf_index(n.unsigned_abs(), d.unsigned_abs())?;
    if n > 0 {
        m.checked_mul(2)?.checked_sub(1)
    } else {
        m.checked_mul(2)
    }
}

fn complex_of_code(z: u128) -> QComplex {
    let (x, y) = unpair(z);
    QComplex::new(rational_of_code(x), rational_of_code(y))
}

fn code_of_complex(c: &QComplex) -> Option<u128> {
    pair(code_of_rational(&c.re)?, code_of_rational(&c.im)?)
}

/// The `j`-th finitely supported `ℚ + iℚ` sequence (`j >= 1`).
pub fn enumerate_dense(j: u64) -> RationalSeq {
    assert!(j >= 1, "enumeration starts at 1");
    let code = u128::from(j - 1);
    if code == 0 {
        return RationalSeq(Vec::new());
    }
    let (len_minus_one, mut rest) = unpair(code - 1);
    let len = usize::try_from(len_minus_one + 1).expect("length fits");
    let mut entries = Vec::with_capacity(len);
    for _ in 1..len {
        let (e, r) = unpair(rest);
        entries.push(complex_of_code(e));
        rest = r;
    }
    entries.push(complex_of_code(rest + 1));
    RationalSeq(entries)
}

/// Inverse of [`enumerate_dense`]; `None` if the index exceeds `u64`.
pub fn index_of_seq(seq: &RationalSeq) -> Option<u64> {
    let entries = seq.entries();
    let Some((last, init)) = entries.split_last() else {
        return Some(1);
    };
    let mut t = code_of_complex(last)?.checked_sub(1)?;
    for e in init.iter().rev() {
        t = pair(code_of_complex(e)?, t)?;
    }
    let code = pair(entries.len() as u128 - 1, t)?.checked_add(1)?;
    u64::try_from(code).ok()?.checked_add(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn first_element_is_zero() {
        assert!(enumerate_dense(1).entries().is_empty());
    }

    #[test]
    fn unit_vector_index_by_hand() {
        // 1 ↦ rational code 1; (1, 0) ↦ π(1, 0) = 1; last entry shifted to 0;
        // π(L-1 = 0, 0) = 0; code 1; index 2.
        let e1 = RationalSeq::new(vec![QComplex::real(q(1, 1))]);
        assert_eq!(index_of_seq(&e1), Some(2));
        assert_eq!(enumerate_dense(2), e1);
    }

    #[test]
    fn calkin_wilf_prefix() {
        let got: Vec<(i128, i128)> = (1..=8).map(calkin_wilf).collect();
        assert_eq!(got, vec![(1, 1), (1, 2), (2, 1), (1, 3), (3, 2), (2, 3), (3, 1), (1, 4)]);
        for m in 1..5000u128 {
            let (a, b) = calkin_wilf(m);
            assert_eq!(calkin_wilf_index(a as u128, b as u128), Some(m));
        }
    }

    #[test]
    fn round_trip_first_ten_thousand() {
        for j in 1..=10_000u64 {
            let s = enumerate_dense(j);
            assert_eq!(index_of_seq(&s), Some(j), "{s:?}");
        }
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        let s = RationalSeq::new(vec![QComplex::real(q(1, 2)), QComplex::zero()]);
        assert_eq!(s.support_bound(), 1);
    }

    proptest! {
        #[test]
        fn sequences_round_trip(entries in prop::collection::vec((-20i64..20, 1i64..20, -20i64..20, 1i64..20), 0..4)) {
            let seq = RationalSeq::new(
                entries.into_iter().map(|(a, b, c, d)| QComplex::new(q(a, b), q(c, d))).collect(),
            );
            if let Some(j) = index_of_seq(&seq) {
                prop_assert_eq!(enumerate_dense(j), seq);
            }
        }
    }
}
