//! Functions on the unit disc built from singular terms `c·(z - e^{iω})^{-γ}`
//! and polynomials: evaluation, circle integrals `∫ |f(re^{iθ})|^q dθ`,
//! radial growth, membership in (localized) Hardy spaces, the dense
//! avoiding basis and the candidate `G_δ` witness.
//!
//! A singular term is evaluated as `c·e^{iφ}·(1 - e^{-iω}z)^{-γ}`. The base
//! `1 - e^{-iω}z` has positive real part on the disc, so the principal power
//! is single-valued. Near the unit circle the base is computed from
//! `ρ = 1 - r` and the angle offset `δ = θ - ω` as
//! `(ρ + 2r·sin²(δ/2)) - i·r·sin δ`, which keeps full relative accuracy
//! when both are tiny. Integrals are unnormalized (`dθ`, not `dθ/2π`).

use std::f64::consts::{LN_2, PI, TAU};

use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::enumeration::{enumerate_dense, QComplex};
use crate::error::{usage, Error, Result};
use crate::quad::{integrate, Panel, QuadratureResult, DEFAULT_MAX_PANELS};
use crate::seq::{down, up, DivergenceCertificate, Verdict};

pub type C64 = Complex64;

pub const DEFAULT_TOL: f64 = 1e-8;

/// Relative spread allowed among the last three values of a bounded trace.
pub const STABLE_SPREAD: f64 = 0.01;

/// Phase factor `e^{iφ}` attached to each singular term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// `φ = -γ(ω + π)`, so the term is a branch of `(z - e^{iω})^{-γ}`.
    #[default]
    Formal,
    /// `φ = 0`: the term is `(1 - e^{-iω}z)^{-γ}`.
    Unit,
}

impl PhaseConvention {
    fn phase(self, omega: f64, gamma: f64) -> f64 {
        match self {
            PhaseConvention::Formal => -gamma * (omega + PI),
            PhaseConvention::Unit => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularTerm {
    pub c: C64,
    /// Angle of the singular point, in `[0, 2π)` once canonical.
    pub omega: f64,
    pub gamma: f64,
}

/// `Σ c_k (z - e^{iω_k})^{-γ_k} + Σ a_j z^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyFn {
    terms: Vec<SingularTerm>,
    poly: Vec<QComplex>,
    phase: PhaseConvention,
    /// Notes raised during canonicalization (equal ω with different γ).
    flags: Vec<String>,
}

fn canonical_angle(w: f64) -> f64 {
    let x = w.rem_euclid(TAU);
    if x >= TAU {
        0.0
    } else {
        x
    }
}

/// `x` reduced to `[-π, π]`.
fn reduce(x: f64) -> f64 {
    x - TAU * (x / TAU).round()
}

/// Angular distance between two points of the circle, in `[0, π]`.
fn circle_distance(a: f64, b: f64) -> f64 {
    reduce(a - b).abs()
}

/// `|1 - re^{iδ}| >= sin|δ|` for `|δ| <= π/2` and `>= 1` beyond, for every `r <= 1`.
fn base_floor(distance: f64) -> f64 {
    if distance >= PI / 2.0 {
        1.0
    } else {
        distance.sin()
    }
}

fn trim_poly(mut poly: Vec<QComplex>) -> Vec<QComplex> {
    while poly.last().is_some_and(QComplex::is_zero) {
        poly.pop();
    }
    poly
}

impl HardyFn {
    pub fn new(terms: Vec<SingularTerm>, poly: Vec<QComplex>) -> Result<Self> {
        Self::with_convention(terms, poly, PhaseConvention::default())
    }

    pub fn with_convention(
        terms: Vec<SingularTerm>,
        poly: Vec<QComplex>,
        phase: PhaseConvention,
    ) -> Result<Self> {
        for t in &terms {
            if !(t.gamma > 0.0 && t.gamma.is_finite()) {
                return usage(format!("singular exponent must be positive, got {}", t.gamma));
            }
            if !t.omega.is_finite() || !t.c.re.is_finite() || !t.c.im.is_finite() {
                return usage("singular term has a non-finite parameter");
            }
        }
        let mut terms: Vec<SingularTerm> = terms
            .into_iter()
            .map(|t| SingularTerm { omega: canonical_angle(t.omega), ..t })
            .collect();
        terms.sort_by(|x, y| x.omega.total_cmp(&y.omega).then(x.gamma.total_cmp(&y.gamma)));
        let mut merged: Vec<SingularTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.omega == t.omega && last.gamma == t.gamma => last.c += t.c,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.c != C64::new(0.0, 0.0));
        let flags = merged
            .windows(2)
            .filter(|w| w[0].omega == w[1].omega)
            .map(|w| {
                format!(
                    "exponents {} and {} share the singular point ω = {}",
                    w[0].gamma, w[1].gamma, w[0].omega
                )
            })
            .collect();
        Ok(HardyFn { terms: merged, poly: trim_poly(poly), phase, flags })
    }

    pub fn single(c: C64, omega: f64, gamma: f64) -> Result<Self> {
        Self::new(vec![SingularTerm { c, omega, gamma }], Vec::new())
    }

    pub fn polynomial(poly: Vec<QComplex>) -> Self {
        HardyFn { terms: Vec::new(), poly: trim_poly(poly), phase: PhaseConvention::default(), flags: Vec::new() }
    }

    pub fn zero() -> Self {
        Self::polynomial(Vec::new())
    }

    pub fn terms(&self) -> &[SingularTerm] {
        &self.terms
    }

    pub fn poly(&self) -> &[QComplex] {
        &self.poly
    }

    pub fn phase(&self) -> PhaseConvention {
        self.phase
    }

    pub fn flags(&self) -> &[String] {
        &self.flags
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.poly.is_empty()
    }

    pub fn with_phase(&self, phase: PhaseConvention) -> Self {
        HardyFn { phase, ..self.clone() }
    }

    /// `Σ λ_i f_i` with rational weights; the polynomial parts stay exact.
    pub fn combine(lambdas: &[QComplex], fns: &[HardyFn]) -> Result<Self> {
        if lambdas.len() != fns.len() {
            return usage(format!("{} weights for {} functions", lambdas.len(), fns.len()));
        }
        let phase = fns.first().map(|f| f.phase).unwrap_or_default();
        if fns.iter().any(|f| f.phase != phase) {
            return usage("cannot combine functions with different phase conventions");
        }
        let mut terms = Vec::new();
        let mut poly: Vec<QComplex> = Vec::new();
        for (l, f) in lambdas.iter().zip(fns) {
            if l.is_zero() {
                continue;
            }
            let lc = l.to_c64();
            terms.extend(f.terms.iter().map(|t| SingularTerm { c: t.c * lc, ..*t }));
            if poly.len() < f.poly.len() {
                poly.resize(f.poly.len(), QComplex::zero());
            }
            for (acc, a) in poly.iter_mut().zip(&f.poly) {
                *acc = acc.add(&l.mul(a));
            }
        }
        Self::with_convention(terms, poly, phase)
    }

    /// `self - other`.
    pub fn sub(&self, other: &HardyFn) -> Result<Self> {
        let one = QComplex::real(Rational64::from_integer(1));
        let minus = QComplex::real(Rational64::from_integer(-1));
        Self::combine(&[one, minus], &[self.clone(), other.clone()])
    }

    fn coefficients(&self) -> Vec<C64> {
        self.terms
            .iter()
            .map(|t| t.c * C64::from_polar(1.0, self.phase.phase(t.omega, t.gamma)))
            .collect()
    }

    fn poly_c64(&self) -> Vec<C64> {
        self.poly.iter().map(QComplex::to_c64).collect()
    }

    /// `Σ |a_j|`, a bound for the polynomial part on the closed disc.
    fn poly_bound(&self) -> f64 {
        up(self.poly.iter().map(|a| a.to_c64().norm()).sum())
    }
}

fn horner(poly: &[C64], z: C64) -> C64 {
    poly.iter().rev().fold(C64::new(0.0, 0.0), |acc, a| acc * z + a)
}

/// `f(z)` for `|z| < 1`.
pub fn eval_hardy(f: &HardyFn, z: C64) -> Result<C64> {
    if !(z.norm() < 1.0) {
        return usage(format!("evaluation point {z} is not inside the unit disc"));
    }
    let mut s = horner(&f.poly_c64(), z);
    for (t, c) in f.terms.iter().zip(f.coefficients()) {
        let w = C64::new(1.0, 0.0) - C64::from_polar(1.0, -t.omega) * z;
        s += c * w.powf(-t.gamma);
    }
    Ok(s)
}

/// `|∂f/∂y - i·∂f/∂x|` by central differences, relative to `max(1, |∂f/∂x|)`.
pub fn cauchy_riemann_residual(f: &HardyFn, z: C64, h: f64) -> Result<f64> {
    let i = C64::new(0.0, 1.0);
    let fx = (eval_hardy(f, z + h)? - eval_hardy(f, z - h)?) / (2.0 * h);
    let fy = (eval_hardy(f, z + i * h)? - eval_hardy(f, z - i * h)?) / (2.0 * h);
    Ok((fy - i * fx).norm() / fx.norm().max(1.0))
}

/// Closed arc `[a, b]`; `b - a >= 2π` is the whole circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub a: f64,
    pub b: f64,
}

impl Arc {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return usage(format!("arc needs finite a < b, got [{a}, {b}]"));
        }
        Ok(Arc { a, b })
    }

    pub fn full() -> Self {
        Arc { a: 0.0, b: TAU }
    }

    pub fn is_full(&self) -> bool {
        self.b - self.a >= TAU
    }

    fn end(&self) -> f64 {
        if self.is_full() {
            self.a + TAU
        } else {
            self.b
        }
    }

    pub fn length(&self) -> f64 {
        self.end() - self.a
    }

    /// Points `ω + 2πm` lying in the arc.
    fn representatives(&self, omega: f64) -> Vec<f64> {
        let end = self.end();
        let lo = ((self.a - omega) / TAU).ceil() as i64;
        let hi = ((end - omega) / TAU).floor() as i64;
        (lo..=hi)
            .map(|m| omega + TAU * m as f64)
            .filter(|x| *x >= self.a && *x <= end)
            .collect()
    }

    pub fn contains(&self, omega: f64) -> bool {
        self.is_full() || !self.representatives(omega).is_empty()
    }

    /// Angular distance from `omega` to the arc.
    pub fn distance(&self, omega: f64) -> f64 {
        if self.contains(omega) {
            return 0.0;
        }
        circle_distance(omega, self.a).min(circle_distance(omega, self.b))
    }
}

/// A radius `r = 1 - ρ`, stored through `ρ` for accuracy near the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Radius {
    pub rho: f64,
}

impl Radius {
    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return usage(format!("radius must lie in [0, 1), got {r}"));
        }
        Ok(Radius { rho: 1.0 - r })
    }

    /// `r = 1 - 2^(-t)`.
    pub fn dyadic(t: u32) -> Self {
        Radius { rho: 0.5f64.powi(t as i32) }
    }

    pub fn boundary() -> Self {
        Radius { rho: 0.0 }
    }

    pub fn r(&self) -> f64 {
        1.0 - self.rho
    }
}

/// Radii `r_t = 1 - 2^(-t)` for `t = t_min..=t_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadialSchedule {
    pub t_min: u32,
    pub t_max: u32,
}

impl Default for RadialSchedule {
    fn default() -> Self {
        RadialSchedule { t_min: 1, t_max: 14 }
    }
}

impl RadialSchedule {
    pub fn new(t_min: u32, t_max: u32) -> Result<Self> {
        if t_min == 0 || t_min > t_max || t_max > 1000 {
            return usage(format!("need 1 <= t_min <= t_max <= 1000, got {t_min}..{t_max}"));
        }
        Ok(RadialSchedule { t_min, t_max })
    }

    pub fn radii(&self) -> Vec<(u32, Radius)> {
        (self.t_min..=self.t_max).map(|t| (t, Radius::dyadic(t))).collect()
    }
}

// One integration piece: θ = anchor + sign·u for u in [0, h].
struct Piece {
    anchor: f64,
    sign: f64,
    /// `anchor - ω_k` reduced, exactly 0 for terms sitting at the anchor.
    d0: Vec<f64>,
    /// `u = h·x^k`, `x ∈ [0, 1]`.
    power: Option<f64>,
    h: f64,
}

struct Integrand {
    coeffs: Vec<C64>,
    gammas: Vec<f64>,
    poly: Vec<C64>,
    rho: f64,
    r: f64,
    q: f64,
    pieces: Vec<Piece>,
}

impl Integrand {
    fn eval(&self, piece: usize, x: f64) -> f64 {
        let pc = &self.pieces[piece];
        let (u, jac) = match pc.power {
            Some(k) => (pc.h * x.powf(k), k * pc.h * x.powf(k - 1.0)),
            None => (x, 1.0),
        };
        if pc.power.is_some() && (u == 0.0 || jac == 0.0) {
            // the transformed integrand vanishes at x = 0
            return 0.0;
        }
        let mut s = C64::new(0.0, 0.0);
        for ((c, g), d0) in self.coeffs.iter().zip(&self.gammas).zip(&pc.d0) {
            let d = d0 + pc.sign * u;
            let half = (0.5 * d).sin();
            let w = C64::new(self.rho + 2.0 * self.r * half * half, -self.r * d.sin());
            s += c * w.powf(-g);
        }
        if !self.poly.is_empty() {
            let theta = pc.anchor + pc.sign * u;
            s += horner(&self.poly, C64::from_polar(self.r, theta));
        }
        s.norm().powf(self.q) * jac
    }
}

fn prepare(f: &HardyFn, radius: Radius, arc: &Arc, q: f64) -> Result<(Integrand, Vec<Panel>)> {
    let rho = radius.rho;
    let r = radius.r();
    let end = arc.end();
    // special points: the endpoints and every in-arc singular point
    let mut points: Vec<(f64, Vec<usize>)> = vec![(arc.a, Vec::new()), (end, Vec::new())];
    for (k, t) in f.terms.iter().enumerate() {
        for x in arc.representatives(t.omega) {
            match points.iter_mut().find(|(p, _)| *p == x) {
                Some((_, ks)) => ks.push(k),
                None => points.push((x, vec![k])),
            }
        }
    }
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    let d0_at = |anchor: f64, anchored: &[usize]| -> Vec<f64> {
        f.terms
            .iter()
            .enumerate()
            .map(|(k, t)| if anchored.contains(&k) { 0.0 } else { reduce(anchor - t.omega) })
            .collect()
    };
    let mut pieces = Vec::new();
    let mut panels = Vec::new();
    for w in points.windows(2) {
        let ((s0, k0), (s1, k1)) = (&w[0], &w[1]);
        let h = 0.5 * (s1 - s0);
        if h <= 0.0 {
            continue;
        }
        for (anchor, sign, anchored) in [(*s0, 1.0, k0), (*s1, -1.0, k1)] {
            let id = pieces.len();
            let alpha = anchored
                .iter()
                .map(|&k| f.terms[k].gamma * q)
                .fold(0.0, f64::max);
            let mut power = None;
            if anchored.is_empty() {
                panels.push(Panel { piece: id, a: 0.0, b: h });
            } else if rho > 0.0 {
                // geometric grading toward the near-singular anchor
                let mut edge = 0.0;
                let mut next = rho;
                while next < h {
                    panels.push(Panel { piece: id, a: edge, b: next });
                    edge = next;
                    next *= 2.0;
                }
                panels.push(Panel { piece: id, a: edge, b: h });
            } else {
                if alpha >= 1.0 {
                    return usage(format!(
                        "boundary integral diverges at θ = {anchor} (γq = {alpha} >= 1)"
                    ));
                }
                let k = (2.0 / (1.0 - alpha)).ceil().clamp(1.0, 64.0);
                power = Some(k);
                let mut edge = 0.0;
                for i in (0..8).rev() {
                    let next = 0.5f64.powi(i);
                    panels.push(Panel { piece: id, a: edge, b: next });
                    edge = next;
                }
            }
            pieces.push(Piece { anchor, sign, d0: d0_at(anchor, anchored), power, h });
        }
    }
    let integrand = Integrand {
        coeffs: f.coefficients(),
        gammas: f.terms.iter().map(|t| t.gamma).collect(),
        poly: f.poly_c64(),
        rho,
        r,
        q,
        pieces,
    };
    Ok((integrand, panels))
}

fn run(f: &HardyFn, radius: Radius, arc: &Arc, q: f64, tol: f64) -> Result<QuadratureResult> {
    if !(q > 0.0 && q.is_finite()) {
        return usage(format!("exponent q must be positive, got {q}"));
    }
    if !(tol > 0.0) {
        return usage(format!("tolerance must be positive, got {tol}"));
    }
    let (integrand, panels) = prepare(f, radius, arc, q)?;
    Ok(integrate(&panels, |piece, x| integrand.eval(piece, x), tol, DEFAULT_MAX_PANELS))
}

/// `∫_arc |f(re^{iθ})|^q dθ` for `0 <= r < 1`.
pub fn circle_integral(
    f: &HardyFn,
    radius: Radius,
    arc: &Arc,
    q: f64,
    tol: f64,
) -> Result<QuadratureResult> {
    if !(radius.rho > 0.0 && radius.rho <= 1.0) {
        return usage(format!("radius 1 - {} is not inside the disc", radius.rho));
    }
    run(f, radius, arc, q, tol)
}

/// `∫_arc |f(e^{iθ})|^q dθ`, defined when every in-arc term has `γq < 1`.
pub fn boundary_integral(f: &HardyFn, arc: &Arc, q: f64, tol: f64) -> Result<QuadratureResult> {
    run(f, Radius::boundary(), arc, q, tol)
}

/// `∫_0^{2π} |1 - e^{is}|^{-α} ds = 2π·Γ(1-α)/Γ(1-α/2)²` for `0 <= α < 1`.
///
/// By monotonicity of integral means this is also the supremum over `r < 1`
/// of `∫ |1 - re^{is}|^{-α} ds`.
pub fn boundary_mean(alpha: f64) -> f64 {
    if alpha == 0.0 {
        return TAU;
    }
    TAU * gamma(1.0 - alpha) / gamma(1.0 - alpha / 2.0).powi(2)
}

/// Certified blow-up of `∫_arc |f(re^{iθ})|^q dθ` as `r → 1`.
///
/// On a window of width `eta` beside the governing singular point,
/// `|f| >= (|c|/2)·|1 - re^{iδ}|^{-γ}`, so for `ρ = 1 - r <= eta` the integral
/// is at least `(|c|/2)^q ∫_0^eta (ρ + s)^{-γq} ds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowUp {
    pub omega: f64,
    pub gamma: f64,
    pub q: f64,
    pub c_abs: f64,
    pub eta: f64,
    /// Side of `omega` holding the window (+1 counterclockwise).
    pub side: f64,
    /// Bound on everything but the governing term across the window.
    pub rest_bound: f64,
}

/// Radius `r = 1 - ρ` beyond which a certified lower bound exceeds a threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusEscape {
    pub threshold: f64,
    /// Every `ρ` with `ln(1/ρ) >= ln_inv_rho` is certified.
    pub ln_inv_rho: f64,
    /// `log2(1/ρ)` at the certified point.
    pub tau: f64,
    /// Least integer `t` with `r_t = 1 - 2^(-t)` certified, when it fits.
    pub t: Option<u64>,
    /// `2^(-t)`, when representable.
    pub rho: Option<f64>,
    /// Certified lower bound at `ρ = 2^(-t)`, when representable.
    pub lower_bound: Option<f64>,
    pub derivation: String,
}

impl BlowUp {
    pub fn alpha(&self) -> f64 {
        self.gamma * self.q
    }

    fn amplitude(&self) -> f64 {
        down((self.c_abs / 2.0).powf(self.q))
    }

    // power formula only when clearly supercritical
    fn power_case(&self) -> bool {
        self.alpha() >= 1.0 + 1e-6
    }

    /// Certified lower bound on the localized integral at `ρ <= eta`.
    pub fn lower_bound(&self, rho: f64) -> Option<f64> {
        if !(rho > 0.0 && rho <= self.eta) {
            return None;
        }
        let a = self.alpha();
        let integral = if self.power_case() {
            (rho.powf(1.0 - a) - (rho + self.eta).powf(1.0 - a)) / (a - 1.0)
        } else {
            (self.eta / rho).ln_1p()
        };
        Some(down(self.amplitude() * integral))
    }

    pub fn escape(&self, threshold: f64) -> RadiusEscape {
        let m = threshold.max(0.0);
        let amp = self.amplitude();
        let a = self.alpha();
        let ln_eta = self.eta.ln();
        let raw = if self.power_case() {
            ((a - 1.0) * m / amp + self.eta.powf(1.0 - a)).ln() / (a - 1.0)
        } else {
            m / amp - ln_eta
        };
        let ln_inv_rho = up(raw.max(-ln_eta)) + 1e-12;
        let mut t = (ln_inv_rho / LN_2).ceil();
        let mut rho = None;
        let mut lower_bound = None;
        if t <= 1000.0 {
            let mut ti = t as i32;
            let mut lb = self.lower_bound(0.5f64.powi(ti));
            while ti < 1060 && lb.is_none_or(|v| v <= threshold) {
                ti += 1;
                lb = self.lower_bound(0.5f64.powi(ti));
            }
            t = f64::from(ti);
            rho = Some(0.5f64.powi(ti));
            lower_bound = lb;
        }
        let derivation = if self.power_case() {
            format!(
                "({:e}/2)^{q}·(ρ^(1-α) - (ρ+{eta:e})^(1-α))/(α-1) > {threshold:e}, α = {a}",
                self.c_abs,
                q = self.q,
                eta = self.eta
            )
        } else {
            format!(
                "({:e}/2)^{q}·ln(1 + {eta:e}/ρ) > {threshold:e}",
                self.c_abs,
                q = self.q,
                eta = self.eta
            )
        };
        RadiusEscape {
            threshold,
            ln_inv_rho,
            tau: ln_inv_rho / LN_2,
            t: (t < 1.8e19).then_some(t as u64),
            rho,
            lower_bound,
            derivation,
        }
    }
}

fn blow_up(f: &HardyFn, q: f64, arc: &Arc, governing: usize) -> Option<BlowUp> {
    let g = f.terms[governing];
    let c_abs = g.c.norm();
    let (room, side) = if arc.is_full() {
        (PI, 1.0)
    } else {
        let s = arc.representatives(g.omega)[0];
        let (left, right) = (s - arc.a, arc.b - s);
        if right >= left {
            (right, 1.0)
        } else {
            (left, -1.0)
        }
    };
    let d_min = f
        .terms
        .iter()
        .filter(|t| t.omega != g.omega)
        .map(|t| circle_distance(t.omega, g.omega))
        .fold(PI, f64::min);
    let poly = f.poly_bound();
    let mut eta = room.min(0.5).min(d_min / 2.0);
    for _ in 0..1100 {
        let w = 2.0 * eta;
        let mut same = 0.0;
        let mut rest = poly;
        for (_, t) in f.terms.iter().enumerate().filter(|(i, _)| *i != governing) {
            if t.omega == g.omega {
                same += t.c.norm() * w.powf(g.gamma - t.gamma);
            } else {
                let dist = circle_distance(t.omega, g.omega) - eta;
                rest += t.c.norm() * base_floor(dist).powf(-t.gamma);
            }
        }
        let rest = up(rest);
        if up(same) <= c_abs / 4.0 && rest <= down(c_abs / 4.0 * w.powf(-g.gamma)) {
            return Some(BlowUp { omega: g.omega, gamma: g.gamma, q, c_abs, eta, side, rest_bound: rest });
        }
        eta /= 2.0;
    }
    None
}

/// Membership of `f` in the (localized) Hardy space `H^q` over `arc`.
///
/// A singular term is in iff `γq < 1`; terms outside the closed arc are
/// bounded there. The upper bound combines the exact full-circle means
/// [`boundary_mean`] of in-arc terms with sup bounds for the rest, by
/// Minkowski for `q >= 1` and by `q`-subadditivity below.
pub fn hardy_membership(f: &HardyFn, q: f64, arc: &Arc) -> Verdict {
    let inside: Vec<usize> = (0..f.terms.len()).filter(|&k| arc.contains(f.terms[k].omega)).collect();
    let governing = inside
        .iter()
        .copied()
        .filter(|&k| f.terms[k].gamma * q >= 1.0)
        .max_by(|&x, &y| {
            let (tx, ty) = (f.terms[x], f.terms[y]);
            tx.gamma.total_cmp(&ty.gamma).then(tx.c.norm().total_cmp(&ty.c.norm()))
        });
    if let Some(k) = governing {
        if let Some(b) = blow_up(f, q, arc, k) {
            return Verdict::CertifiedOut { evidence: DivergenceCertificate::RadialBlowUp(b) };
        }
        return Verdict::Undetermined { partial_sum: f64::INFINITY, truncation: 0 };
    }
    let len = arc.length();
    let mut parts = Vec::new();
    for (k, t) in f.terms.iter().enumerate() {
        if inside.contains(&k) {
            parts.push(t.c.norm().powf(q) * boundary_mean(t.gamma * q));
        } else {
            let sup = t.c.norm() * base_floor(arc.distance(t.omega)).powf(-t.gamma);
            parts.push(sup.powf(q) * len);
        }
    }
    let poly = f.poly_bound();
    if poly > 0.0 {
        parts.push(poly.powf(q) * len);
    }
    let bound = if q >= 1.0 {
        parts.iter().map(|x| x.powf(1.0 / q)).sum::<f64>().powf(q)
    } else {
        parts.iter().sum()
    };
    Verdict::CertifiedIn {
        upper_bound: up(up(bound)),
        bound_derivation: format!(
            "sup_r ∫ over the arc <= {} bound from exact boundary means 2πΓ(1-α)/Γ(1-α/2)^2 of {} in-arc term(s) and sup bounds elsewhere",
            if q >= 1.0 { "Minkowski" } else { "q-subadditive" },
            inside.len()
        ),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub t: u32,
    pub rho: f64,
    pub r: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub flagged: bool,
}

/// `E_{M,r}` membership along the schedule for one threshold `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCrossing {
    pub threshold: f64,
    /// `I(r_t) <= M` for each scheduled `t`.
    pub inside: Vec<bool>,
    pub first_exceeded: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub arc: Arc,
    pub q: f64,
    pub rows: Vec<GrowthRow>,
    pub thresholds: Vec<ThresholdCrossing>,
    /// Least-squares slope of `ln I` against `ln 1/(1-r)` over `slope_window`.
    pub slope: Option<f64>,
    pub slope_window: (u32, u32),
    pub flagged: bool,
}

/// Integral trace `I(r_t)` over a schedule, computed in parallel.
pub fn radial_trace(
    f: &HardyFn,
    arc: &Arc,
    q: f64,
    schedule: &RadialSchedule,
    tol: f64,
) -> Result<Vec<GrowthRow>> {
    schedule
        .radii()
        .into_par_iter()
        .map(|(t, radius)| {
            let res = circle_integral(f, radius, arc, q, tol)?;
            Ok(GrowthRow {
                t,
                rho: radius.rho,
                r: radius.r(),
                value: res.value,
                error_estimate: res.error_estimate,
                flagged: res.flagged(),
            })
        })
        .collect()
}

/// Least-squares slope of `ln value` against `t·ln 2` for `t` in `[t0, t1]`.
pub fn log_log_slope(rows: &[GrowthRow], t0: u32, t1: u32) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t >= t0 && r.t <= t1 && r.value > 0.0)
        .map(|r| (f64::from(r.t) * LN_2, r.value.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Last three values within `spread` of each other, relative to the largest.
pub fn stabilized(rows: &[GrowthRow], spread: f64) -> bool {
    if rows.len() < 3 {
        return false;
    }
    let tail = &rows[rows.len() - 3..];
    let hi = tail.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    hi - lo <= spread * hi.abs()
}

/// Nondecreasing up to the quadrature error estimates.
pub fn monotone(rows: &[GrowthRow]) -> bool {
    rows.windows(2).all(|w| {
        w[1].value >= w[0].value - (w[0].error_estimate + w[1].error_estimate) - 1e-12 * w[0].value.abs()
    })
}

fn crossings(rows: &[GrowthRow], thresholds: &[f64]) -> Vec<ThresholdCrossing> {
    thresholds
        .iter()
        .map(|&m| ThresholdCrossing {
            threshold: m,
            inside: rows.iter().map(|r| r.value <= m).collect(),
            first_exceeded: rows.iter().find(|r| r.value > m).map(|r| r.t),
        })
        .collect()
}

/// Growth of `∫_arc |f(r_t e^{iθ})|^q dθ` along the schedule.
///
/// The slope window defaults to the top half of the schedule.
pub fn localized_growth(
    f: &HardyFn,
    arc: &Arc,
    q: f64,
    schedule: &RadialSchedule,
    thresholds: &[f64],
    window: Option<(u32, u32)>,
    tol: f64,
) -> Result<GrowthReport> {
    let rows = radial_trace(f, arc, q, schedule, tol)?;
    let count = schedule.t_max - schedule.t_min + 1;
    let slope_window = window.unwrap_or((schedule.t_max + 1 - count.div_ceil(2), schedule.t_max));
    let slope = log_log_slope(&rows, slope_window.0, slope_window.1);
    let flagged = rows.iter().any(|r| r.flagged);
    Ok(GrowthReport {
        arc: *arc,
        q,
        thresholds: crossings(&rows, thresholds),
        rows,
        slope,
        slope_window,
        flagged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HardyDistance {
    Finite {
        value: f64,
        /// Upper end after adding the quadrature error estimate.
        upper: f64,
        quadrature: QuadratureResult,
        /// The radial trace stayed nondecreasing and below the boundary value.
        monotone: bool,
    },
    Infinite {
        evidence: DivergenceCertificate,
    },
}

impl HardyDistance {
    pub fn upper(&self) -> f64 {
        match self {
            HardyDistance::Finite { upper, .. } => *upper,
            HardyDistance::Infinite { .. } => f64::INFINITY,
        }
    }
}

/// Schedule used for the radial monotonicity check of [`hardy_distance`].
pub const DISTANCE_CHECK: RadialSchedule = RadialSchedule { t_min: 1, t_max: 8 };

/// `d_p(f, g)`: `(sup_r ∫|f-g|^p dθ)^(1/p)` for `p >= 1`, the bare
/// supremum for `p < 1`, evaluated as the boundary integral.
pub fn hardy_distance(f: &HardyFn, g: &HardyFn, p: f64, tol: f64) -> Result<HardyDistance> {
    let diff = f.sub(g)?;
    let full = Arc::full();
    if diff.is_zero() {
        return Ok(HardyDistance::Finite {
            value: 0.0,
            upper: 0.0,
            quadrature: QuadratureResult {
                value: 0.0,
                error_estimate: 0.0,
                panels: 0,
                refinement_trace: Vec::new(),
                refined_value: 0.0,
                converged: true,
            },
            monotone: true,
        });
    }
    match hardy_membership(&diff, p, &full) {
        Verdict::CertifiedOut { evidence } => return Ok(HardyDistance::Infinite { evidence }),
        Verdict::Undetermined { .. } => {
            return Err(Error::Undetermined("no certificate for the difference".into()))
        }
        Verdict::CertifiedIn { .. } => {}
    }
    let quadrature = boundary_integral(&diff, &full, p, tol)?;
    let trace = radial_trace(&diff, &full, p, &DISTANCE_CHECK, tol)?;
    let last = trace.last().expect("nonempty schedule");
    let monotone = monotone(&trace)
        && last.value <= quadrature.value + quadrature.error_estimate + last.error_estimate;
    let (value, upper) = if p >= 1.0 {
        (quadrature.value.powf(1.0 / p), up((quadrature.value + quadrature.error_estimate).powf(1.0 / p)))
    } else {
        (quadrature.value, up(quadrature.value + quadrature.error_estimate))
    };
    Ok(HardyDistance::Finite { value, upper, quadrature, monotone })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseElement {
    pub n: u64,
    pub omega: f64,
    /// `c_n = 2^(-t)`.
    pub t: u32,
    pub c: f64,
    pub poly: Vec<QComplex>,
    /// Certified upper bound on `d_p(f_n, 0)`.
    pub distance: f64,
    pub singular: HardyFn,
    pub element: HardyFn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseAvoidingBasis {
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    pub elements: Vec<DenseElement>,
}

fn dense_element(p: f64, gamma: f64, n: u64, tol: f64) -> Result<DenseElement> {
    let omega = 1.0 / n as f64;
    let unit = HardyFn::single(C64::new(1.0, 0.0), omega, gamma)?;
    let base = hardy_distance(&unit, &HardyFn::zero(), p, tol)?.upper();
    let radius = 1.0 / n as f64;
    let fits = |t: u32| {
        let c = 0.5f64.powi(t as i32);
        let d = if p >= 1.0 { c * base } else { c.powf(p) * base };
        up(d) < radius
    };
    let t = (0..=2048u32)
        .find(|&t| fits(t))
        .ok_or_else(|| Error::SearchFailed(format!("no c_{n} = 2^(-t) with t <= 2048")))?;
    let c = 0.5f64.powi(t as i32);
    let singular = HardyFn::single(C64::new(c, 0.0), omega, gamma)?;
    let distance = hardy_distance(&singular, &HardyFn::zero(), p, tol)?.upper();
    if !(distance < radius) {
        return Err(Error::SearchFailed(format!(
            "d_p(f_{n}, 0) <= {distance} does not certify < 1/{n}"
        )));
    }
    let poly = enumerate_dense(n).entries().to_vec();
    let element = HardyFn::combine(
        &[QComplex::real(Rational64::from_integer(1)); 2],
        &[HardyFn::polynomial(poly.clone()), singular.clone()],
    )?;
    Ok(DenseElement { n, omega, t, c, poly, distance, singular, element })
}

/// Elements `P_n + c_n (z - e^{i/n})^{-γ}`, `n = 1..count`, with
/// `γ = (1/p + 1/q)/2` and `d_p(c_n·(z - e^{i/n})^{-γ}, 0) < 1/n`.
pub fn dense_avoiding_basis(p: f64, q: f64, count: u64, tol: f64) -> Result<DenseAvoidingBasis> {
    if !(0.0 < p && p < q && q.is_finite()) {
        return usage(format!("need 0 < p < q < inf, got p={p}, q={q}"));
    }
    if count == 0 {
        return usage("count must be >= 1");
    }
    let gamma = (1.0 / p + 1.0 / q) / 2.0;
    let elements = (1..=count)
        .into_par_iter()
        .map(|n| dense_element(p, gamma, n, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(DenseAvoidingBasis { p, q, gamma, elements })
}

/// Arc around `1/N` excluding `1/k` for every `k != N`.
pub fn avoiding_arc(n: u64) -> Result<Arc> {
    match n {
        0 => usage("N must be >= 1"),
        1 => Arc::new(0.75, (1.0 + PI) / 2.0),
        _ => {
            let nf = n as f64;
            Arc::new((1.0 / nf + 1.0 / (nf + 1.0)) / 2.0, (1.0 / nf + 1.0 / (nf - 1.0)) / 2.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionTrace {
    pub k: u64,
    pub verdict: Verdict,
    pub rows: Vec<GrowthRow>,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseAvoidingReport {
    pub n: u64,
    pub arc: Arc,
    pub threshold: f64,
    /// Arc traces of `λ_k (P_k + f_k)` for `k < N`.
    pub contributions: Vec<ContributionTrace>,
    pub rows: Vec<GrowthRow>,
    pub first_exceeded: Option<u32>,
    /// Localized membership of the combination in `H^q` over the arc.
    pub verdict: Verdict,
    pub escape: Option<RadiusEscape>,
    /// The arc integral bounds the full-circle one from below.
    pub full_circle_exceeded: bool,
    pub flagged: bool,
}

impl DenseAvoidingReport {
    pub fn contributions_stable(&self) -> bool {
        self.contributions.iter().all(|c| c.stable)
    }
}

/// Localized `q`-growth of `L = Σ λ_k (P_k + f_k)` on the arc around `1/N`.
pub fn verify_dense_avoiding(
    lambdas: &[QComplex],
    basis: &DenseAvoidingBasis,
    schedule: &RadialSchedule,
    threshold: f64,
    tol: f64,
) -> Result<DenseAvoidingReport> {
    let n = lambdas.len();
    let Some(last) = lambdas.last() else {
        return usage("empty coefficient list");
    };
    if last.is_zero() {
        return usage("leading coefficient λ_N must be nonzero");
    }
    if n > basis.elements.len() {
        return usage(format!("{n} coefficients for a basis of {} elements", basis.elements.len()));
    }
    let arc = avoiding_arc(n as u64)?;
    let q = basis.q;
    let elements: Vec<HardyFn> = basis.elements[..n].iter().map(|e| e.element.clone()).collect();
    let contributions = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let part = HardyFn::combine(&lambdas[i..=i], &elements[i..=i])?;
            let rows = radial_trace(&part, &arc, q, schedule, tol)?;
            Ok(ContributionTrace {
                k: i as u64 + 1,
                verdict: hardy_membership(&part, q, &arc),
                stable: stabilized(&rows, STABLE_SPREAD),
                rows,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let combo = HardyFn::combine(lambdas, &elements)?;
    let rows = radial_trace(&combo, &arc, q, schedule, tol)?;
    let first_exceeded = rows.iter().find(|r| r.value > threshold).map(|r| r.t);
    let verdict = hardy_membership(&combo, q, &arc);
    let escape = match verdict.evidence() {
        Some(DivergenceCertificate::RadialBlowUp(b)) => Some(b.escape(threshold)),
        _ => None,
    };
    let flagged = rows.iter().any(|r| r.flagged)
        || contributions.iter().any(|c| c.rows.iter().any(|r| r.flagged));
    Ok(DenseAvoidingReport {
        n: n as u64,
        arc,
        threshold,
        contributions,
        rows,
        first_exceeded,
        verdict,
        escape,
        full_circle_exceeded: first_exceeded.is_some(),
        flagged,
    })
}

/// `k`-th dyadic fraction: 1/2, 1/4, 3/4, 1/8, 3/8, 5/8, 7/8, 1/16, …
pub fn dyadic_fraction(k: u64) -> (u64, u64) {
    assert!(k >= 1, "dyadic fractions are indexed from 1");
    let level = 64 - u64::from(k.leading_zeros());
    let i = k - (1 << (level - 1));
    (2 * i + 1, 1 << level)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalWitness {
    pub p: f64,
    pub gamma: f64,
    pub omegas: Vec<f64>,
    /// `ε_k = 2^(-t_k)`.
    pub eps_exponents: Vec<u32>,
    pub eps: Vec<f64>,
    pub q_schedule: Vec<f64>,
    pub f: HardyFn,
}

/// Exact `H^q` size of `ε·(z - e^{iω})^{-γ}`: the norm for `q >= 1`, the
/// bare integral below.
fn term_size(eps: f64, gamma: f64, q: f64) -> f64 {
    let mean = boundary_mean(gamma * q);
    if q >= 1.0 {
        eps * mean.powf(1.0 / q)
    } else {
        eps.powf(q) * mean
    }
}

/// `f = Σ_{k<=K} ε_k (z - e^{iω_k})^{-1/p}` with dyadic `ω_k / 2π` and the
/// largest `ε_k = 2^(-t)` keeping the `k`-th term's `H^{q_m}` size below
/// `2^(-k)` for all `m <= k`. The default schedule is `q_m = p·m/(m+1)`.
pub fn critical_witness(p: f64, count: u64, q_schedule: Option<Vec<f64>>) -> Result<CriticalWitness> {
    if !(p > 0.0 && p.is_finite()) {
        return usage(format!("p must be positive, got {p}"));
    }
    if count == 0 {
        return usage("K must be >= 1");
    }
    let gamma = 1.0 / p;
    let qs = q_schedule
        .unwrap_or_else(|| (1..=count).map(|m| p * m as f64 / (m as f64 + 1.0)).collect());
    if (qs.len() as u64) < count || qs.iter().any(|&q| !(q > 0.0 && q < p)) {
        return usage("q schedule needs K values in (0, p)");
    }
    let mut omegas = Vec::new();
    let mut eps_exponents = Vec::new();
    let mut eps = Vec::new();
    let mut terms = Vec::new();
    for k in 1..=count {
        let (num, den) = dyadic_fraction(k);
        let omega = TAU * num as f64 / den as f64;
        let budget = 0.5f64.powi(k as i32);
        let t = (0..=2048u32)
            .find(|&t| {
                let e = 0.5f64.powi(t as i32);
                qs[..k as usize].iter().all(|&q| up(term_size(e, gamma, q)) < budget)
            })
            .ok_or_else(|| Error::SearchFailed(format!("no ε_{k} = 2^(-t) with t <= 2048")))?;
        let e = 0.5f64.powi(t as i32);
        omegas.push(omega);
        eps_exponents.push(t);
        eps.push(e);
        terms.push(SingularTerm { c: C64::new(e, 0.0), omega, gamma });
    }
    let f = HardyFn::new(terms, Vec::new())?;
    Ok(CriticalWitness { p, gamma, omegas, eps_exponents, eps, q_schedule: qs, f })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedProbe {
    pub q: f64,
    pub verdict: Verdict,
    pub rows: Vec<GrowthRow>,
    pub stable: bool,
    pub boundary: QuadratureResult,
    /// `|refined - value| <= refinement_tol·max(1, |value|)`.
    pub refinement_stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcProbe {
    pub k: u64,
    pub omega: f64,
    pub arc: Arc,
    pub verdict: Verdict,
    pub rows: Vec<GrowthRow>,
    pub first_exceeded: Option<u32>,
    pub escape: Option<RadiusEscape>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalProbe {
    pub bounded: BoundedProbe,
    pub delta: f64,
    pub threshold: f64,
    pub arcs: Vec<ArcProbe>,
    pub flagged: bool,
}

impl CriticalProbe {
    pub fn clause_bounded(&self) -> bool {
        self.bounded.verdict.is_in() && self.bounded.stable && self.bounded.refinement_stable
    }

    pub fn clause_blow_up(&self) -> bool {
        self.arcs.iter().all(|a| a.verdict.is_out() && a.first_exceeded.is_some())
    }
}

/// Desk-scale probe of both clauses: a bounded full-circle `q`-trace for
/// `q < p`, and localized `δ`-integrals around each `ω_k` for `δ >= p`.
#[allow(clippy::too_many_arguments)]
pub fn critical_probe(
    w: &CriticalWitness,
    q: f64,
    delta: f64,
    schedule: &RadialSchedule,
    threshold: f64,
    refinement_tol: f64,
    tol: f64,
) -> Result<CriticalProbe> {
    if !(q > 0.0 && q < w.p) {
        return usage(format!("bounded clause needs 0 < q < p, got q={q}"));
    }
    if !(delta >= w.p && delta.is_finite()) {
        return usage(format!("blow-up clause needs δ >= p, got δ={delta}"));
    }
    let full = Arc::full();
    let rows = radial_trace(&w.f, &full, q, schedule, tol)?;
    let boundary = boundary_integral(&w.f, &full, q, tol)?;
    let bounded = BoundedProbe {
        q,
        verdict: hardy_membership(&w.f, q, &full),
        stable: stabilized(&rows, STABLE_SPREAD),
        refinement_stable: (boundary.refined_value - boundary.value).abs()
            <= refinement_tol * boundary.value.abs().max(1.0),
        rows,
        boundary,
    };
    let arcs = w
        .omegas
        .par_iter()
        .enumerate()
        .map(|(i, &omega)| {
            let gap = w
                .omegas
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &o)| circle_distance(o, omega))
                .fold(PI, f64::min);
            let half = gap / 2.0;
            let arc = Arc::new(omega - half, omega + half)?;
            let rows = radial_trace(&w.f, &arc, delta, schedule, tol)?;
            let verdict = hardy_membership(&w.f, delta, &arc);
            let escape = match verdict.evidence() {
                Some(DivergenceCertificate::RadialBlowUp(b)) => Some(b.escape(threshold)),
                _ => None,
            };
            Ok(ArcProbe {
                k: i as u64 + 1,
                omega,
                arc,
                verdict,
                first_exceeded: rows.iter().find(|r| r.value > threshold).map(|r| r.t),
                rows,
                escape,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let flagged = bounded.rows.iter().any(|r| r.flagged)
        || bounded.boundary.flagged()
        || arcs.iter().any(|a| a.rows.iter().any(|r| r.flagged));
    Ok(CriticalProbe { bounded, delta, threshold, arcs, flagged })
}
