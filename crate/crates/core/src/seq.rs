//! Sequences `ℕ → ℂ` with analytic tail certificates, the metrics of the
//! `l^p` chain and certified membership verdicts.
//!
//! Indices are 1-based. A certificate describes the sequence beyond a finite
//! horizon exactly (power laws, block constants, finite combinations of
//! those); everything up to the horizon is read off the value map.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::witness::{checked_index, positions_upto, split};

pub type C64 = Complex64;

/// Relative slack applied outward to every floating-point bound.
pub const SLACK: f64 = 1e-12;

/// Default truncation for interval computations and undetermined verdicts.
pub const DEFAULT_TRUNCATION: u64 = 100_000;

pub(crate) fn up(x: f64) -> f64 {
    if x >= 0.0 {
        x * (1.0 + SLACK)
    } else {
        x * (1.0 - SLACK)
    }
}

pub(crate) fn down(x: f64) -> f64 {
    if x >= 0.0 {
        x * (1.0 - SLACK)
    } else {
        x * (1.0 + SLACK)
    }
}

/// Neumaier compensated summation.
#[derive(Default, Clone, Copy)]
pub(crate) struct Sum {
    sum: f64,
    comp: f64,
}

impl Sum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Strictly decreasing offsets `p_m - a ↓ 0` for an intersection space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentSchedule {
    /// `p_m = a + scale/m`.
    Harmonic { scale: f64 },
    /// `p_m = a + first·ratio^(m-1)`.
    Geometric { first: f64, ratio: f64 },
}

impl Default for ExponentSchedule {
    fn default() -> Self {
        ExponentSchedule::Harmonic { scale: 1.0 }
    }
}

impl ExponentSchedule {
    pub fn offset(&self, m: u64) -> f64 {
        debug_assert!(m >= 1);
        match *self {
            ExponentSchedule::Harmonic { scale } => scale / m as f64,
            ExponentSchedule::Geometric { first, ratio } => {
                first * ratio.powi(i32::try_from(m - 1).unwrap_or(i32::MAX))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ExponentSchedule::Harmonic { scale } if scale > 0.0 && scale.is_finite() => Ok(()),
            ExponentSchedule::Geometric { first, ratio }
                if first > 0.0 && first.is_finite() && ratio > 0.0 && ratio < 1.0 =>
            {
                Ok(())
            }
            _ => usage(format!("invalid exponent schedule {self:?}")),
        }
    }
}

/// One member of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum SpaceSpec {
    LInf,
    C0,
    Lp { p: f64 },
    /// `∩_{p>a} l^p`, metrized through the exponents `p_m ↓ a`.
    CapAbove { a: f64, schedule: ExponentSchedule },
}

impl SpaceSpec {
    pub fn lp(p: f64) -> Result<Self> {
        let s = SpaceSpec::Lp { p };
        s.validate()?;
        Ok(s)
    }

    pub fn cap_above(a: f64) -> Result<Self> {
        Self::cap_above_with(a, ExponentSchedule::default())
    }

    pub fn cap_above_with(a: f64, schedule: ExponentSchedule) -> Result<Self> {
        let s = SpaceSpec::CapAbove { a, schedule };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceSpec::LInf | SpaceSpec::C0 => Ok(()),
            SpaceSpec::Lp { p } if *p > 0.0 && p.is_finite() => Ok(()),
            SpaceSpec::Lp { p } => usage(format!("l^p needs p > 0, got {p}")),
            SpaceSpec::CapAbove { a, schedule } => {
                if !(*a >= 0.0 && a.is_finite()) {
                    return usage(format!("intersection needs a >= 0, got {a}"));
                }
                schedule.validate()
            }
        }
    }

    /// `p_m` of an intersection space; `None` for the other members.
    pub fn exponent(&self, m: u64) -> Option<f64> {
        match self {
            SpaceSpec::CapAbove { a, schedule } => Some(a + schedule.offset(m)),
            _ => None,
        }
    }

    fn chain_key(&self) -> (f64, u8) {
        match self {
            SpaceSpec::LInf => (f64::INFINITY, 2),
            SpaceSpec::C0 => (f64::INFINITY, 1),
            SpaceSpec::CapAbove { a, .. } => (*a, 1),
            SpaceSpec::Lp { p } => (*p, 0),
        }
    }

    /// Strict inclusion `other ⊊ self` within the chain.
    pub fn strictly_contains(&self, other: &SpaceSpec) -> bool {
        let (x, tx) = self.chain_key();
        let (y, ty) = other.chain_key();
        x > y || (x == y && tx > ty)
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::LInf => write!(f, "l^inf"),
            SpaceSpec::C0 => write!(f, "c_0"),
            SpaceSpec::Lp { p } => write!(f, "l^{p}"),
            SpaceSpec::CapAbove { a, .. } => write!(f, "cap_{{p>{a}}} l^p"),
        }
    }
}

type BlockRule = Arc<dyn Fn(u64) -> C64 + Send + Sync>;

/// Constants attached to the canonical blocks `A_1, A_2, …`.
#[derive(Clone)]
pub enum BlockConstants {
    /// Explicit values for some blocks, `rest` on all others.
    Listed { values: BTreeMap<u64, C64>, rest: C64 },
    /// A rule `j ↦ c_j` with a declared bound on `sup_j |c_j|`.
    Rule { rule: BlockRule, sup: f64 },
}

impl BlockConstants {
    pub fn constant(c: C64) -> Self {
        BlockConstants::Listed { values: BTreeMap::new(), rest: c }
    }

    pub fn listed(values: impl IntoIterator<Item = (u64, C64)>, rest: C64) -> Self {
        BlockConstants::Listed { values: values.into_iter().collect(), rest }
    }

    pub fn rule(rule: impl Fn(u64) -> C64 + Send + Sync + 'static, sup: f64) -> Self {
        BlockConstants::Rule { rule: Arc::new(rule), sup }
    }

    pub fn get(&self, j: u64) -> C64 {
        match self {
            BlockConstants::Listed { values, rest } => values.get(&j).copied().unwrap_or(*rest),
            BlockConstants::Rule { rule, .. } => rule(j),
        }
    }

    pub fn sup_bound(&self) -> f64 {
        match self {
            BlockConstants::Listed { values, rest } => {
                values.values().map(|c| c.norm()).fold(rest.norm(), f64::max)
            }
            BlockConstants::Rule { sup, .. } => *sup,
        }
    }

    /// Some block carrying a nonzero constant, if one can be exhibited.
    pub fn nonzero_block(&self) -> Option<u64> {
        match self {
            BlockConstants::Listed { values, rest } => {
                if let Some((j, _)) = values.iter().find(|(j, c)| **j >= 1 && c.norm() != 0.0) {
                    return Some(*j);
                }
                if rest.norm() != 0.0 {
                    return (1..).find(|j| !values.contains_key(j));
                }
                None
            }
            BlockConstants::Rule { rule, .. } => (1..=64).find(|&j| rule(j).norm() != 0.0),
        }
    }

    fn is_identically_zero(&self) -> bool {
        match self {
            BlockConstants::Listed { values, rest } => {
                rest.norm() == 0.0 && values.values().all(|c| c.norm() == 0.0)
            }
            BlockConstants::Rule { .. } => false,
        }
    }
}

impl fmt::Debug for BlockConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockConstants::Listed { values, rest } => f
                .debug_struct("Listed")
                .field("values", values)
                .field("rest", rest)
                .finish(),
            BlockConstants::Rule { sup, .. } => {
                f.debug_struct("Rule").field("sup", sup).finish_non_exhaustive()
            }
        }
    }
}

impl PartialEq for BlockConstants {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                BlockConstants::Listed { values: a, rest: ra },
                BlockConstants::Listed { values: b, rest: rb },
            ) => a == b && ra == rb,
            (BlockConstants::Rule { rule: a, .. }, BlockConstants::Rule { rule: b, .. }) => {
                Arc::ptr_eq(a, b)
            }
            _ => false,
        }
    }
}

/// Analytic description of a sequence's behaviour beyond a finite horizon.
///
/// Power laws and block constants always refer to the canonical blocks of
/// [`crate::witness`]; block id 0 means all of `ℕ`.
#[derive(Clone, Debug, PartialEq)]
pub enum TailCertificate {
    /// Zero beyond `n_max`.
    FiniteSupport { n_max: u64 },
    /// `k^(-gamma)` at the `k`-th element of the block, zero elsewhere.
    PowerLaw { gamma: f64, block: u64 },
    /// The block's constant at every element of each block.
    BlockConstant { constants: BlockConstants },
    /// Beyond the largest finite-support horizon among the terms, the
    /// sequence is the stated combination of the terms' model sequences.
    LinearCombination { terms: Vec<(C64, TailCertificate)> },
    Opaque,
}

impl TailCertificate {
    fn validate(&self) -> Result<()> {
        match self {
            TailCertificate::PowerLaw { gamma, .. } if !(*gamma > 0.0 && gamma.is_finite()) => {
                usage(format!("power-law exponent must be positive, got {gamma}"))
            }
            TailCertificate::LinearCombination { terms } => {
                for (_, t) in terms {
                    if matches!(t, TailCertificate::Opaque) {
                        return usage("linear combinations cannot reference opaque certificates");
                    }
                    t.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
enum Model {
    PowerLaw { gamma: f64, block: u64 },
    BlockConstant(BlockConstants),
}

impl Model {
    fn value(&self, n: u64) -> C64 {
        match self {
            Model::PowerLaw { gamma, block } => {
                if *block == 0 {
                    C64::new((n as f64).powf(-gamma), 0.0)
                } else {
                    let (j, k) = split(n);
                    if j == *block {
                        C64::new((k as f64).powf(-gamma), 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }
            }
            Model::BlockConstant(c) => c.get(split(n).0),
        }
    }

    /// Exact test whether the model is nonzero somewhere on block `j`.
    fn touches(&self, j: u64) -> bool {
        match self {
            Model::PowerLaw { block, .. } => *block == 0 || *block == j,
            Model::BlockConstant(c) => c.get(j).norm() != 0.0,
        }
    }

    fn sup(&self) -> f64 {
        match self {
            Model::PowerLaw { .. } => 1.0,
            Model::BlockConstant(c) => c.sup_bound(),
        }
    }

    /// Upper bound on `Σ_{n>t} |model(n)|^p`.
    fn tail(&self, p: f64, t: u64) -> Option<f64> {
        match self {
            Model::PowerLaw { gamma, block } => {
                let s = gamma * p;
                if s <= 1.0 {
                    return None;
                }
                let kt = positions_upto(*block, t);
                Some(if kt == 0 {
                    1.0 + 1.0 / (s - 1.0)
                } else {
                    (kt as f64).powf(1.0 - s) / (s - 1.0)
                })
            }
            Model::BlockConstant(c) => c.is_identically_zero().then_some(0.0),
        }
    }
}

/// A certificate flattened to `horizon` plus a combination of model sequences.
#[derive(Clone, Debug)]
struct Decomposition {
    horizon: u64,
    models: Vec<(C64, Model)>,
}

impl Decomposition {
    fn of(cert: &TailCertificate) -> Option<Self> {
        let mut d = Decomposition { horizon: 0, models: Vec::new() };
        d.absorb(C64::new(1.0, 0.0), cert)?;
        d.normalize();
        Some(d)
    }

    fn absorb(&mut self, coef: C64, cert: &TailCertificate) -> Option<()> {
        match cert {
            TailCertificate::FiniteSupport { n_max } => self.horizon = self.horizon.max(*n_max),
            TailCertificate::PowerLaw { gamma, block } => {
                self.models.push((coef, Model::PowerLaw { gamma: *gamma, block: *block }))
            }
            TailCertificate::BlockConstant { constants } => {
                self.models.push((coef, Model::BlockConstant(constants.clone())))
            }
            TailCertificate::LinearCombination { terms } => {
                for (c, t) in terms {
                    self.absorb(coef * c, t)?;
                }
            }
            TailCertificate::Opaque => return None,
        }
        Some(())
    }

    fn normalize(&mut self) {
        let mut merged: Vec<(C64, Model)> = Vec::new();
        let mut listed: Option<(BTreeMap<u64, C64>, C64)> = None;
        for (c, m) in self.models.drain(..) {
            match m {
                Model::PowerLaw { gamma, block } => {
                    let slot = merged.iter_mut().find(|(_, other)| {
                        matches!(other, Model::PowerLaw { gamma: g, block: b } if *g == gamma && *b == block)
                    });
                    match slot {
                        Some((acc, _)) => *acc += c,
                        None => merged.push((c, Model::PowerLaw { gamma, block })),
                    }
                }
                Model::BlockConstant(BlockConstants::Listed { values, rest }) => {
                    let (acc, acc_rest) =
                        listed.get_or_insert_with(|| (BTreeMap::new(), C64::new(0.0, 0.0)));
                    // explicit entries of earlier terms fall back to their rest values
                    let keys: BTreeSet<u64> =
                        acc.keys().chain(values.keys()).copied().collect();
                    let prev_rest = *acc_rest;
                    for k in keys {
                        let old = acc.get(&k).copied().unwrap_or(prev_rest);
                        let new = values.get(&k).copied().unwrap_or(rest);
                        acc.insert(k, old + c * new);
                    }
                    *acc_rest = prev_rest + c * rest;
                }
                rule @ Model::BlockConstant(BlockConstants::Rule { .. }) => merged.push((c, rule)),
            }
        }
        if let Some((values, rest)) = listed {
            merged.push((
                C64::new(1.0, 0.0),
                Model::BlockConstant(BlockConstants::Listed { values, rest }),
            ));
        }
        merged.retain(|(c, m)| {
            c.norm() != 0.0
                && !matches!(m, Model::BlockConstant(b) if b.is_identically_zero())
        });
        self.models = merged;
    }

    /// Upper bound on `Σ_{n>t} |f(n)|^p` for `t >= horizon`.
    fn model_tail(&self, p: f64, t: u64) -> Option<f64> {
        debug_assert!(t >= self.horizon);
        if p >= 1.0 {
            let mut acc = 0.0;
            for (c, m) in &self.models {
                acc += c.norm() * m.tail(p, t)?.powf(1.0 / p);
            }
            Some(acc.powf(p))
        } else {
            let mut acc = 0.0;
            for (c, m) in &self.models {
                acc += c.norm().powf(p) * m.tail(p, t)?;
            }
            Some(acc)
        }
    }

    fn isolated_on(&self, idx: usize, j: u64) -> bool {
        self.models.iter().enumerate().all(|(i, (_, m))| i == idx || !m.touches(j))
    }
}

type ValueFn = Arc<dyn Fn(u64) -> C64 + Send + Sync>;

/// A lazily evaluated sequence together with its tail certificate.
#[derive(Clone)]
pub struct ComplexSeq {
    values: ValueFn,
    certificate: TailCertificate,
}

impl fmt::Debug for ComplexSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexSeq")
            .field("certificate", &self.certificate)
            .finish_non_exhaustive()
    }
}

impl ComplexSeq {
    /// Pair a value map with a certificate. The caller vouches that the
    /// certificate describes the map.
    pub fn new(
        values: impl Fn(u64) -> C64 + Send + Sync + 'static,
        certificate: TailCertificate,
    ) -> Result<Self> {
        certificate.validate()?;
        Ok(ComplexSeq { values: Arc::new(values), certificate })
    }

    /// Finitely supported sequence with `values[n-1]` at index `n`.
    pub fn finite(values: Vec<C64>) -> Self {
        let mut values = values;
        while values.last().is_some_and(|c| c.norm() == 0.0) {
            values.pop();
        }
        let n_max = values.len() as u64;
        let values: Arc<[C64]> = values.into();
        ComplexSeq {
            values: Arc::new(move |n| {
                usize::try_from(n - 1)
                    .ok()
                    .and_then(|i| values.get(i).copied())
                    .unwrap_or(C64::new(0.0, 0.0))
            }),
            certificate: TailCertificate::FiniteSupport { n_max },
        }
    }

    pub fn zero() -> Self {
        ComplexSeq::finite(Vec::new())
    }

    /// The unit vector `e_n`.
    pub fn unit(n: u64) -> Self {
        assert!(n >= 1, "indices start at 1");
        ComplexSeq {
            values: Arc::new(move |m| if m == n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }),
            certificate: TailCertificate::FiniteSupport { n_max: n },
        }
    }

    /// `k^(-gamma)` on block `block` (0 = all of `ℕ`).
    pub fn power_law(gamma: f64, block: u64) -> Result<Self> {
        let model = Model::PowerLaw { gamma, block };
        ComplexSeq::new(move |n| model.value(n), TailCertificate::PowerLaw { gamma, block })
    }

    pub fn block_constant(constants: BlockConstants) -> Self {
        let model = Model::BlockConstant(constants.clone());
        ComplexSeq {
            values: Arc::new(move |n| model.value(n)),
            certificate: TailCertificate::BlockConstant { constants },
        }
    }

    /// The constant sequence `(1, 1, 1, …)`.
    pub fn ones() -> Self {
        ComplexSeq::block_constant(BlockConstants::constant(C64::new(1.0, 0.0)))
    }

    /// A sequence without analytic information.
    pub fn opaque(values: impl Fn(u64) -> C64 + Send + Sync + 'static) -> Self {
        ComplexSeq { values: Arc::new(values), certificate: TailCertificate::Opaque }
    }

    pub fn value(&self, n: u64) -> C64 {
        debug_assert!(n >= 1, "indices start at 1");
        (self.values)(n)
    }

    pub fn certificate(&self) -> &TailCertificate {
        &self.certificate
    }

    pub fn scaled(&self, c: C64) -> ComplexSeq {
        linear_combine(&[c], std::slice::from_ref(self)).expect("single term")
    }

    fn same_as(&self, other: &ComplexSeq) -> bool {
        Arc::ptr_eq(&self.values, &other.values) && self.certificate == other.certificate
    }

    fn decomposition(&self) -> Option<Decomposition> {
        Decomposition::of(&self.certificate)
    }

    fn psum_range(&self, p: f64, from: u64, to: u64) -> f64 {
        let mut s = Sum::default();
        for n in from..=to {
            s.add(self.value(n).norm().powf(p));
        }
        s.value()
    }

    fn max_modulus(&self, to: u64) -> f64 {
        (1..=to).map(|n| self.value(n).norm()).fold(0.0, f64::max)
    }

    /// Certified upper bound on `Σ_{n>t} |f(n)|^p`; `None` when unbounded.
    fn tail_bound(&self, dec: &Decomposition, p: f64, t: u64) -> Option<f64> {
        if t >= dec.horizon {
            dec.model_tail(p, t)
        } else {
            Some(self.psum_range(p, t + 1, dec.horizon) + dec.model_tail(p, dec.horizon)?)
        }
    }
}

/// Pointwise combination `Σ coeffs[i]·seqs[i]`.
pub fn linear_combine(coeffs: &[C64], seqs: &[ComplexSeq]) -> Result<ComplexSeq> {
    if coeffs.is_empty() || coeffs.len() != seqs.len() {
        return usage(format!(
            "need equal nonempty lists, got {} coefficients and {} sequences",
            coeffs.len(),
            seqs.len()
        ));
    }
    let live: Vec<(C64, ComplexSeq)> = coeffs
        .iter()
        .zip(seqs)
        .filter(|(c, _)| c.norm() != 0.0)
        .map(|(c, s)| (*c, s.clone()))
        .collect();
    let certificate = if live.iter().any(|(_, s)| s.certificate == TailCertificate::Opaque) {
        TailCertificate::Opaque
    } else if live
        .iter()
        .all(|(_, s)| matches!(s.certificate, TailCertificate::FiniteSupport { .. }))
    {
        let n_max = live
            .iter()
            .map(|(_, s)| match s.certificate {
                TailCertificate::FiniteSupport { n_max } => n_max,
                _ => 0,
            })
            .max()
            .unwrap_or(0);
        TailCertificate::FiniteSupport { n_max }
    } else {
        TailCertificate::LinearCombination {
            terms: live.iter().map(|(c, s)| (*c, s.certificate.clone())).collect(),
        }
    };
    let values = Arc::new(move |n: u64| live.iter().map(|(c, s)| c * s.value(n)).sum::<C64>());
    Ok(ComplexSeq { values, certificate })
}

pub(crate) mod ext_f64 {
    //! Floats that may be infinite, serialized as strings when non-finite.
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("unbounded")
        } else {
            s.serialize_str("-unbounded")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "unbounded" => Ok(f64::INFINITY),
                "-unbounded" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad float {other:?}"))),
            },
        }
    }
}

/// Closed interval `[lo, hi]`; `hi = ∞` means no tail bound was available.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    #[serde(with = "ext_f64")]
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }
}

/// Distance in `l^p`: the norm `(Σ|f-g|^p)^(1/p)` for `p >= 1`, the
/// `p`-sum `Σ|f-g|^p` for `0 < p < 1`.
pub fn lp_distance(f: &ComplexSeq, g: &ComplexSeq, p: f64, truncation: u64) -> Interval {
    assert!(p > 0.0, "p must be positive");
    assert!(truncation >= 1, "truncation must be >= 1");
    if f.same_as(g) {
        return Interval { lo: 0.0, hi: 0.0 };
    }
    let h = linear_combine(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)], &[f.clone(), g.clone()])
        .expect("two terms");
    psum_interval(&h, p, truncation)
}

fn psum_interval(h: &ComplexSeq, p: f64, truncation: u64) -> Interval {
    let partial = h.psum_range(p, 1, truncation);
    let tail = h
        .decomposition()
        .and_then(|d| h.tail_bound(&d, p, truncation))
        .unwrap_or(f64::INFINITY);
    let (lo, hi) = (partial, partial + tail);
    if p >= 1.0 {
        Interval { lo: down(lo.powf(1.0 / p)), hi: up(hi.powf(1.0 / p)) }
    } else {
        Interval { lo: down(lo), hi: up(hi) }
    }
}

/// Fréchet metric `Σ_m 2^(-m)·d_m/(1+d_m)` of an intersection space,
/// evaluated for `m <= depth` with the remaining tail `2^(-depth)` folded
/// into the upper end.
pub fn frechet_distance(
    f: &ComplexSeq,
    g: &ComplexSeq,
    space: &SpaceSpec,
    depth: u32,
    truncation: u64,
) -> Result<Interval> {
    if !matches!(space, SpaceSpec::CapAbove { .. }) {
        return usage(format!("Fréchet distance needs an intersection space, got {space}"));
    }
    space.validate()?;
    if depth == 0 {
        return usage("depth must be >= 1");
    }
    let squash = |x: f64| if x.is_finite() { x / (1.0 + x) } else { 1.0 };
    let (mut lo, mut hi) = (Sum::default(), Sum::default());
    for m in 1..=depth {
        let pm = space.exponent(u64::from(m)).expect("intersection space");
        let d = lp_distance(f, g, pm, truncation);
        let w = 0.5f64.powi(m as i32);
        lo.add(w * squash(d.lo));
        hi.add(w * squash(d.hi));
    }
    let tail = 0.5f64.powi(depth as i32);
    Ok(Interval { lo: down(lo.value()), hi: up(hi.value() + tail).min(1.0) })
}

/// Certified lower bound on a divergent quantity, convertible into an
/// explicit escape point for every threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivergenceCertificate {
    /// `|f(n_k)|^p >= scale·k^(-exponent)` at every position `k > skipped` of
    /// `block` (block 0 = all of `ℕ`), with `exponent <= 1`.
    PowerSum { p: f64, exponent: f64, block: u64, scale: f64, skipped: u64 },
    /// `|f(n_k)| >= floor` at every position `k > skipped` of `block`.
    /// `p = None` certifies that `f` does not tend to zero.
    NonVanishing { p: Option<f64>, block: u64, floor: f64, skipped: u64 },
    /// Radial blow-up of a localized integral mean of a holomorphic function.
    RadialBlowUp(crate::hardy::BlowUp),
}

/// Explicit index beyond which a certified partial sum exceeds a threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEscape {
    pub threshold: f64,
    pub block: u64,
    pub skipped: u64,
    /// Certified block position `K`, when it fits in 64 bits.
    pub position: Option<u64>,
    /// Index `n` of position `K` in `ℕ`, when it fits in 64 bits.
    pub index: Option<u64>,
    /// Every position `K` with `ln(K+1) > ln_position` is certified.
    pub ln_position: f64,
    /// Lower bound of the partial sum at `position`, when that is explicit.
    pub lower_bound: Option<f64>,
    pub derivation: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Escape {
    Index(IndexEscape),
    Radius(crate::hardy::RadiusEscape),
}

impl DivergenceCertificate {
    /// Explicit escape point for `threshold`.
    pub fn escape(&self, threshold: f64) -> Escape {
        match self {
            DivergenceCertificate::PowerSum { exponent, block, scale, skipped, .. } => {
                Escape::Index(power_sum_escape(*exponent, *scale, *block, *skipped, threshold))
            }
            DivergenceCertificate::NonVanishing { p, block, floor, skipped } => {
                Escape::Index(non_vanishing_escape(*p, *block, *floor, *skipped, threshold))
            }
            DivergenceCertificate::RadialBlowUp(b) => Escape::Radius(b.escape(threshold)),
        }
    }

    pub fn escape_index(&self, threshold: f64) -> Option<IndexEscape> {
        match self.escape(threshold) {
            Escape::Index(e) => Some(e),
            Escape::Radius(_) => None,
        }
    }
}

/// `Σ_{k=k0+1}^{k1} k^(-s) >= ∫_{k0+1}^{k1+1} x^(-s) dx` for `s <= 1`.
pub(crate) fn power_sum_lower(s: f64, k0: u64, k1: u64) -> f64 {
    if k1 <= k0 {
        return 0.0;
    }
    let (a, b) = ((k0 + 1) as f64, (k1 + 1) as f64);
    if s == 1.0 {
        b.ln() - a.ln()
    } else {
        (b.powf(1.0 - s) - a.powf(1.0 - s)) / (1.0 - s)
    }
}

// Positions below e^43 fit comfortably in u64.
const EXACT_LN_LIMIT: f64 = 43.0;

fn power_sum_escape(s: f64, scale: f64, block: u64, skipped: u64, threshold: f64) -> IndexEscape {
    let target = threshold.max(0.0) / scale;
    let a = (skipped + 1) as f64;
    let ln_position = if s == 1.0 {
        target + a.ln()
    } else {
        ((1.0 - s) * target + a.powf(1.0 - s)).ln() / (1.0 - s)
    };
    let mut position = None;
    let mut lower_bound = None;
    if ln_position < EXACT_LN_LIMIT {
        let mut k = (ln_position.exp().floor() as u64).max(skipped + 1);
        while scale * power_sum_lower(s, skipped, k) <= threshold {
            k += 1;
        }
        position = Some(k);
        lower_bound = Some(scale * power_sum_lower(s, skipped, k));
    }
    let derivation = if s == 1.0 {
        format!("{scale:e}·(ln(K+1) - ln({skipped}+1)) > {threshold:e}")
    } else {
        format!("{scale:e}·((K+1)^(1-s) - ({skipped}+1)^(1-s))/(1-s) > {threshold:e}, s = {s}")
    };
    IndexEscape {
        threshold,
        block,
        skipped,
        position,
        index: position.and_then(|k| if block == 0 { Some(k) } else { checked_index(block, k) }),
        ln_position,
        lower_bound,
        derivation,
    }
}

fn non_vanishing_escape(
    p: Option<f64>,
    block: u64,
    floor: f64,
    skipped: u64,
    threshold: f64,
) -> IndexEscape {
    let to_index = |k: u64| if block == 0 { Some(k) } else { checked_index(block, k) };
    match p {
        Some(p) => {
            let per_term = floor.powf(p);
            let extra = (threshold.max(0.0) / per_term).floor() + 1.0;
            let ln_position = (skipped as f64 + extra + 1.0).ln();
            let position = (extra < 2f64.powi(62)).then(|| skipped + extra as u64);
            IndexEscape {
                threshold,
                block,
                skipped,
                position,
                index: position.and_then(to_index),
                ln_position,
                lower_bound: position.map(|k| per_term * (k - skipped) as f64),
                derivation: format!("{per_term:e}·(K - {skipped}) > {threshold:e}"),
            }
        }
        None => {
            // threshold is read as an index: find an element of the block past it
            let t = threshold.max(1.0).ceil().min(u64::MAX as f64) as u64;
            let k = positions_upto(block, t - 1).max(skipped) + 1;
            IndexEscape {
                threshold,
                block,
                skipped,
                position: Some(k),
                index: to_index(k),
                ln_position: ((k + 1) as f64).ln(),
                lower_bound: Some(floor),
                derivation: format!("|f(n)| >= {floor:e} at every block element past {threshold}"),
            }
        }
    }
}

/// Three-valued membership answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    CertifiedIn { upper_bound: f64, bound_derivation: String },
    CertifiedOut { evidence: DivergenceCertificate },
    Undetermined { partial_sum: f64, truncation: u64 },
}

impl Verdict {
    pub fn is_in(&self) -> bool {
        matches!(self, Verdict::CertifiedIn { .. })
    }

    pub fn is_out(&self) -> bool {
        matches!(self, Verdict::CertifiedOut { .. })
    }

    pub fn is_undetermined(&self) -> bool {
        matches!(self, Verdict::Undetermined { .. })
    }

    pub fn evidence(&self) -> Option<&DivergenceCertificate> {
        match self {
            Verdict::CertifiedOut { evidence } => Some(evidence),
            _ => None,
        }
    }
}

/// The exponent whose sum governs the verdict: `p` for `l^p`, `p_1` for an
/// intersection space, none for `c_0` and `l^inf`.
fn measuring_exponent(space: &SpaceSpec) -> Option<f64> {
    match space {
        SpaceSpec::Lp { p } => Some(*p),
        SpaceSpec::CapAbove { .. } => space.exponent(1),
        _ => None,
    }
}

fn undetermined(f: &ComplexSeq, space: &SpaceSpec, truncation: u64) -> Verdict {
    let partial_sum = match measuring_exponent(space) {
        Some(p) => f.psum_range(p, 1, truncation),
        None => f.max_modulus(truncation),
    };
    Verdict::Undetermined { partial_sum, truncation }
}

/// Certified membership of `f` in `space`.
///
/// Power laws `k^(-γ)` are in `l^p` iff `γp > 1` and in `∩_{p>a} l^p` iff
/// `γa >= 1`; nonzero block constants leave `c_0`. Opaque sequences are
/// undetermined with the partial sum at [`DEFAULT_TRUNCATION`].
pub fn membership(f: &ComplexSeq, space: &SpaceSpec) -> Verdict {
    membership_with(f, space, DEFAULT_TRUNCATION)
}

/// [`membership`] with an explicit truncation for undetermined answers.
pub fn membership_with(f: &ComplexSeq, space: &SpaceSpec, truncation: u64) -> Verdict {
    if space.validate().is_err() {
        return undetermined(f, space, truncation.max(1));
    }
    let Some(dec) = f.decomposition() else {
        return undetermined(f, space, truncation.max(1));
    };
    let in_space = |m: &Model| -> bool {
        match (space, m) {
            (SpaceSpec::LInf, _) => true,
            (SpaceSpec::C0, Model::PowerLaw { .. }) => true,
            (SpaceSpec::Lp { p }, Model::PowerLaw { gamma, .. }) => gamma * p > 1.0,
            (SpaceSpec::CapAbove { a, .. }, Model::PowerLaw { gamma, .. }) => gamma * a >= 1.0,
            (_, Model::BlockConstant(c)) => c.is_identically_zero(),
        }
    };
    if dec.models.iter().all(|(_, m)| in_space(m)) {
        return certified_in(f, &dec, space);
    }
    for (idx, (c, m)) in dec.models.iter().enumerate() {
        if in_space(m) {
            continue;
        }
        if let Some(evidence) = out_certificate(&dec, idx, *c, m, space) {
            return Verdict::CertifiedOut { evidence };
        }
    }
    undetermined(f, space, truncation.max(1))
}

fn certified_in(f: &ComplexSeq, dec: &Decomposition, space: &SpaceSpec) -> Verdict {
    let h = dec.horizon;
    match measuring_exponent(space) {
        None => {
            let sup_tail: f64 = dec.models.iter().map(|(c, m)| c.norm() * m.sup()).sum();
            Verdict::CertifiedIn {
                upper_bound: up(f.max_modulus(h).max(sup_tail)),
                bound_derivation: format!(
                    "sup |f| <= max(max_(n<={h}) |f(n)|, Σ|c_i|·sup_i)"
                ),
            }
        }
        Some(p) => {
            let tail = dec.model_tail(p, h).expect("all models summable");
            let upper_bound = up(f.psum_range(p, 1, h) + tail);
            let mut bound_derivation = if dec.models.is_empty() {
                format!("finite support: exact sum of |f(n)|^{p} over n <= {h}")
            } else {
                format!(
                    "Σ_(n<={h}) |f(n)|^{p} + tail; power-law tails Σ_(k>K) k^(-s) <= K^(1-s)/(s-1), \
                     full sums <= 1 + 1/(s-1)"
                )
            };
            if let SpaceSpec::CapAbove { a, .. } = space {
                bound_derivation.push_str(&format!(
                    "; bound is for p_1 = {p}, every p_m > {a} is summable with γ·p_m > 1"
                ));
            }
            Verdict::CertifiedIn { upper_bound, bound_derivation }
        }
    }
}

fn out_certificate(
    dec: &Decomposition,
    idx: usize,
    c: C64,
    m: &Model,
    space: &SpaceSpec,
) -> Option<DivergenceCertificate> {
    match m {
        Model::PowerLaw { gamma, block } => {
            let p = match space {
                SpaceSpec::Lp { p } => *p,
                SpaceSpec::CapAbove { a, schedule } => {
                    // first exponent in the schedule with γ·p_m <= 1
                    let limit = 1.0 / gamma - a;
                    let mut hi = 1u64;
                    while schedule.offset(hi) > limit {
                        hi = hi.checked_mul(2)?;
                    }
                    let mut lo = hi / 2;
                    while lo + 1 < hi {
                        let mid = lo + (hi - lo) / 2;
                        if schedule.offset(mid) > limit {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    a + schedule.offset(hi)
                }
                _ => return None,
            };
            let s = gamma * p;
            if s > 1.0 {
                return None;
            }
            if *block != 0 {
                return dec.isolated_on(idx, *block).then(|| DivergenceCertificate::PowerSum {
                    p,
                    exponent: s,
                    block: *block,
                    scale: down(c.norm().powf(p)),
                    skipped: positions_upto(*block, dec.horizon),
                });
            }
            if dec.models.len() == 1 {
                return Some(DivergenceCertificate::PowerSum {
                    p,
                    exponent: s,
                    block: 0,
                    scale: down(c.norm().powf(p)),
                    skipped: dec.horizon,
                });
            }
            // restrict to a block nobody else touches: n <= 2^j·k there
            let j = (1..=64u64).find(|&j| dec.isolated_on(idx, j))?;
            Some(DivergenceCertificate::PowerSum {
                p,
                exponent: s,
                block: j,
                scale: down(c.norm().powf(p) * 2f64.powf(-(j as f64) * s)),
                skipped: positions_upto(j, dec.horizon),
            })
        }
        Model::BlockConstant(consts) => {
            let j = match consts {
                BlockConstants::Listed { .. } => {
                    let first = consts.nonzero_block()?;
                    std::iter::once(first)
                        .chain(1..=64)
                        .find(|&j| consts.get(j).norm() != 0.0 && dec.isolated_on(idx, j))?
                }
                BlockConstants::Rule { .. } => (1..=64u64)
                    .find(|&j| consts.get(j).norm() != 0.0 && dec.isolated_on(idx, j))?,
            };
            let floor = down((c * consts.get(j)).norm());
            let p = match space {
                SpaceSpec::C0 => None,
                SpaceSpec::Lp { p } => Some(*p),
                SpaceSpec::CapAbove { .. } => space.exponent(1),
                SpaceSpec::LInf => return None,
            };
            Some(DivergenceCertificate::NonVanishing {
                p,
                block: j,
                floor,
                skipped: positions_upto(j, dec.horizon),
            })
        }
    }
}

/// Certified index `N` at which `Σ_(n<=N) |f(n) + g(n)/k|^p > M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRecord {
    pub threshold: f64,
    pub k: u64,
    pub p: f64,
    /// Certified upper bound on the `p`-sum of `f`.
    pub f_bound: f64,
    /// Level the partial `p`-sum of `g` has to pass.
    pub g_threshold: f64,
    pub method: String,
    pub escape: IndexEscape,
}

/// Escape index for the perturbation `f + g/k` of a summable `f` by a
/// non-summable `g`.
///
/// For `p >= 1` the reverse triangle inequality asks for
/// `G_N^(1/p)/k - F^(1/p) > M^(1/p)`; for `p <= 1`, `|a+b|^p >= |b|^p - |a|^p`
/// asks for `G_N/k^p - F > M`.
pub fn escape_index(
    f: &ComplexSeq,
    g: &ComplexSeq,
    k: u64,
    threshold: f64,
    p: f64,
) -> Result<EscapeRecord> {
    if k == 0 {
        return usage("k must be a positive integer");
    }
    let space = SpaceSpec::lp(p)?;
    let f_bound = match membership(f, &space) {
        Verdict::CertifiedIn { upper_bound, .. } => upper_bound,
        other => {
            return Err(Error::Undetermined(format!(
                "f has no certified {space} bound ({other:?})"
            )))
        }
    };
    let evidence = match membership(g, &space) {
        Verdict::CertifiedOut { evidence } => evidence,
        other => {
            return Err(Error::Undetermined(format!(
                "g has no certified divergence in {space} ({other:?})"
            )))
        }
    };
    if matches!(evidence, DivergenceCertificate::NonVanishing { p: None, .. }) {
        return Err(Error::Undetermined("g carries no p-sum divergence certificate".into()));
    }
    let kf = k as f64;
    let (g_threshold, method) = if p >= 1.0 {
        (
            (kf * (threshold.max(0.0).powf(1.0 / p) + f_bound.powf(1.0 / p))).powf(p),
            "reverse triangle inequality: G_N^(1/p)/k - F^(1/p) > M^(1/p)",
        )
    } else {
        (
            kf.powf(p) * (threshold.max(0.0) + f_bound),
            "p-superadditivity: G_N/k^p - F > M",
        )
    };
    let g_threshold = up(g_threshold);
    let escape = evidence
        .escape_index(g_threshold)
        .ok_or_else(|| Error::Undetermined("divergence certificate is not index based".into()))?;
    Ok(EscapeRecord { threshold, k, p, f_bound, g_threshold, method: method.into(), escape })
}
