//! Command-line experiment runner.
//!
//! Every subcommand builds an [`ExperimentReport`], writes `report.json` (and
//! `trace*.csv` when there are traces) into `--out`, and exits with 0 when
//! every entry is certified, 2 when something is undetermined or flagged,
//! and 1 on usage errors, in which case nothing is written.

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::enumeration::QComplex;
use crate::error::{usage, Error, Result};
use crate::hardy::{
    self, dense_avoiding_basis, hardy_membership, localized_growth, critical_probe,
    critical_witness, verify_dense_avoiding, Arc, HardyFn, RadialSchedule,
};
use crate::lineability::{lineable_basis, verify_lineable_combo, NeighborhoodSpec};
use crate::report::{ExperimentReport, IndexPoint, Trace};
use crate::seq::{
    frechet_distance, lp_distance, membership_with, power_sum_lower, ComplexSeq,
    DivergenceCertificate, SpaceSpec, Verdict, DEFAULT_TRUNCATION,
};
use crate::spaceability::{decompose, spaceability_route, spaceable_basis, verify_spaceable_combo, BlockRatio};
use crate::witness::{chain_pairs, chain_witness, index_of};

/// Environment variable overriding the series truncation.
pub const TRUNCATION_ENV: &str = "GENLAB_TRUNCATION";

#[derive(Parser, Debug)]
#[command(name = "genlab", version, about = "Certified experiments on l^p chains and Hardy spaces")]
struct Cli {
    /// Output directory for report.json and trace CSVs.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for coefficient sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Record the wall-clock time in the report.
    #[arg(long, global = true)]
    timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a strict inclusion between two chain spaces.
    Witness(WitnessArgs),
    /// Membership verdict of a sequence, with optional escape and distance.
    Membership(MembershipArgs),
    /// Dense lineable subspace of the intersection above b avoiding l^b.
    Lineability(LineabilityArgs),
    /// Closed subspace avoiding a smaller chain space.
    Spaceability(SpaceabilityArgs),
    /// Radial growth of a single singular term.
    HardyGrowth(HardyGrowthArgs),
    /// Dense avoiding basis in H^p and its H^q blow-up.
    HardyBasis(HardyBasisArgs),
    /// Candidate G_δ witness and probes of its two clauses.
    Thma(ThmaArgs),
}

#[derive(Args, Debug)]
struct WitnessArgs {
    /// Ambient space: linf, c0, lp:<p> or cap:<a>.
    #[arg(long, value_parser = parse_space, requires = "sub")]
    ambient: Option<SpaceSpec>,
    #[arg(long, value_parser = parse_space, requires = "ambient")]
    sub: Option<SpaceSpec>,
    /// Run all six adjacent pairs of the chain for `a,b`.
    #[arg(long, value_parser = parse_pair, conflicts_with = "ambient")]
    chain: Option<(f64, f64)>,
}

#[derive(Args, Debug)]
struct MembershipArgs {
    /// Sequence: power:<γ>[@<block>], ones, unit:<n>, finite:<x1>;<x2>;…, zero.
    #[arg(long, value_parser = parse_seq)]
    seq: SeqArg,
    #[arg(long, value_parser = parse_space)]
    space: SpaceSpec,
    /// Escape threshold for a CertifiedOut verdict.
    #[arg(long = "M")]
    threshold: Option<f64>,
    /// Second sequence for a distance interval.
    #[arg(long, value_parser = parse_seq)]
    against: Option<SeqArg>,
    /// Depth of the Fréchet series for intersection spaces.
    #[arg(long, default_value_t = 30)]
    depth: u32,
}

#[derive(Args, Debug)]
struct LineabilityArgs {
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 8)]
    count: u64,
    #[arg(long, default_value_t = 100)]
    combos: u64,
    #[arg(long = "M", default_value_t = 1000.0)]
    threshold: f64,
}

#[derive(Args, Debug)]
struct SpaceabilityArgs {
    #[arg(long, value_parser = parse_space, default_value = "c0")]
    ambient: SpaceSpec,
    /// Space to avoid; defaults to l^b.
    #[arg(long, value_parser = parse_space)]
    sub: Option<SpaceSpec>,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 8)]
    count: u64,
    #[arg(long, default_value_t = 100)]
    combos: u64,
    #[arg(long = "M", default_value_t = 100.0)]
    threshold: f64,
    /// Positions per block read by the coefficient recovery.
    #[arg(long, default_value_t = 16)]
    positions: u64,
}

#[derive(Args, Debug)]
struct HardyGrowthArgs {
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    omega: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 1)]
    t_min: u32,
    #[arg(long, default_value_t = 14)]
    t_max: u32,
    #[arg(long, default_value_t = hardy::DEFAULT_TOL)]
    tol: f64,
    /// Arc `a,b` in radians; `b - a >= 2π` is the full circle.
    #[arg(long, value_parser = parse_pair)]
    arc: Option<(f64, f64)>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 100.0, 1000.0])]
    thresholds: Vec<f64>,
    /// Slope window `t0,t1`; defaults to the top half of the schedule.
    #[arg(long, value_parser = parse_window)]
    window: Option<(u32, u32)>,
}

#[derive(Args, Debug)]
struct HardyBasisArgs {
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 8)]
    n: u64,
    /// Number of sampled coefficient vectors of length n.
    #[arg(long, default_value_t = 20)]
    lambdas: u64,
    #[arg(long = "M", default_value_t = 100.0)]
    threshold: f64,
    #[arg(long, default_value_t = 14)]
    t_max: u32,
    #[arg(long, default_value_t = hardy::DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct ThmaArgs {
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 16)]
    k: u64,
    /// Exponent of the bounded clause, below p.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Exponent of the blow-up clause, at least p.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "M", default_value_t = 100.0)]
    threshold: f64,
    #[arg(long, default_value_t = 14)]
    t_max: u32,
    #[arg(long, default_value_t = hardy::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    refinement_tol: f64,
}

/// Parse `linf`, `c0`, `lp:<p>` (or `l<p>`) and `cap:<a>`.
pub fn parse_space(s: &str) -> std::result::Result<SpaceSpec, String> {
    let s = s.trim().to_ascii_lowercase();
    let num = |x: &str| f64::from_str(x).map_err(|e| format!("bad number '{x}': {e}"));
    let spec = match s.as_str() {
        "linf" | "l_inf" | "l^inf" => Ok(SpaceSpec::LInf),
        "c0" | "c_0" => Ok(SpaceSpec::C0),
        _ => {
            if let Some(p) = s.strip_prefix("lp:") {
                SpaceSpec::lp(num(p)?)
            } else if let Some(a) = s.strip_prefix("cap:") {
                SpaceSpec::cap_above(num(a)?)
            } else if let Some(p) = s.strip_prefix('l') {
                SpaceSpec::lp(num(p)?)
            } else {
                return Err(format!("unknown space '{s}' (use linf, c0, lp:<p>, cap:<a>)"));
            }
        }
    };
    spec.map_err(|e| e.to_string())
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected 'a,b', got '{s}'"))?;
    let a = f64::from_str(a.trim()).map_err(|e| e.to_string())?;
    let b = f64::from_str(b.trim()).map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn parse_window(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected 't0,t1', got '{s}'"))?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

/// A sequence given on the command line, kept with its spelling.
#[derive(Clone, Debug)]
pub struct SeqArg {
    pub text: String,
    pub seq: ComplexSeq,
}

pub fn parse_seq(s: &str) -> std::result::Result<SeqArg, String> {
    let text = s.trim().to_string();
    let err = |e: Error| e.to_string();
    let seq = if text == "ones" {
        ComplexSeq::ones()
    } else if text == "zero" {
        ComplexSeq::zero()
    } else if let Some(rest) = text.strip_prefix("power:") {
        let (g, block) = match rest.split_once('@') {
            Some((g, b)) => (g, b.parse::<u64>().map_err(|e| e.to_string())?),
            None => (rest, 0),
        };
        let g = f64::from_str(g).map_err(|e| e.to_string())?;
        ComplexSeq::power_law(g, block).map_err(err)?
    } else if let Some(n) = text.strip_prefix("unit:") {
        let n = n.parse::<u64>().map_err(|e| e.to_string())?;
        if n == 0 {
            return Err("unit vectors are indexed from 1".into());
        }
        ComplexSeq::unit(n)
    } else if let Some(vals) = text.strip_prefix("finite:") {
        let v = vals
            .split(';')
            .map(|x| f64::from_str(x.trim()).map(|x| Complex64::new(x, 0.0)))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        ComplexSeq::finite(v)
    } else {
        return Err(format!("unknown sequence '{text}'"));
    };
    Ok(SeqArg { text, seq })
}

/// Truncation for interval computations, from [`TRUNCATION_ENV`] if set.
pub fn truncation() -> Result<u64> {
    match std::env::var(TRUNCATION_ENV) {
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(t) if t > 0 => Ok(t),
            _ => usage(format!("{TRUNCATION_ENV} must be a positive integer, got '{v}'")),
        },
        Err(_) => Ok(DEFAULT_TRUNCATION),
    }
}

/// A rational with numerator in `[-9, 9]` and denominator in `[1, 9]`.
pub fn random_rational(rng: &mut impl Rng) -> Rational64 {
    Rational64::new(rng.gen_range(-9..=9), rng.gen_range(1..=9))
}

/// `len` random `ℚ + iℚ` coefficients, the last one nonzero.
pub fn random_coefficients(rng: &mut impl Rng, len: usize) -> Vec<QComplex> {
    let mut v: Vec<QComplex> =
        (0..len).map(|_| QComplex::new(random_rational(rng), random_rational(rng))).collect();
    if let Some(last) = v.last_mut() {
        while last.is_zero() {
            *last = QComplex::new(random_rational(rng), random_rational(rng));
        }
    }
    v
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn to_c64(v: &[QComplex]) -> Vec<Complex64> {
    v.iter().map(QComplex::to_c64).collect()
}

/// Direct partial sums `Σ |f(n_k)|^p` over block positions `skipped < k <= K`
/// at `K = skipped + 2^i`, next to the certified lower bound.
pub fn index_trace(
    f: &ComplexSeq,
    p: f64,
    block: u64,
    skipped: u64,
    scale: f64,
    exponent: f64,
    k_max: u64,
) -> Vec<IndexPoint> {
    let mut points = Vec::new();
    let mut acc = 0.0;
    let mut k = skipped;
    let mut next = skipped + 1;
    while next <= k_max {
        while k < next {
            k += 1;
            let n = if block == 0 { Some(k) } else { index_of(block, k).ok() };
            let Some(n) = n else { return points };
            acc += f.value(n).norm().powf(p);
        }
        points.push(IndexPoint {
            k,
            partial_sum: acc,
            lower_bound: scale * power_sum_lower(exponent, skipped, k),
        });
        next = skipped + 2 * (next - skipped);
    }
    points
}

fn verdict_certified(v: &Verdict) -> bool {
    !v.is_undetermined()
}

fn cmd_witness(a: &WitnessArgs, rep: &mut ExperimentReport) -> Result<()> {
    let pairs = match (&a.ambient, &a.sub, a.chain) {
        (Some(y), Some(x), None) => vec![(y.clone(), x.clone())],
        (None, None, Some((lo, hi))) => chain_pairs(lo, hi)?,
        _ => return usage("give --ambient and --sub, or --chain a,b"),
    };
    rep.param("pairs", pairs.iter().map(|(y, x)| format!("({y}, {x})")).collect::<Vec<_>>());
    for (y, x) in pairs {
        match chain_witness(&y, &x) {
            Ok(w) => rep.push(format!("witness ({y}, {x})"), true, &w),
            Err(Error::Undetermined(msg)) => rep.push(format!("witness ({y}, {x})"), false, msg),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn cmd_membership(a: &MembershipArgs, rep: &mut ExperimentReport) -> Result<()> {
    let trunc = truncation()?;
    rep.param("seq", &a.seq.text);
    rep.param("space", a.space.to_string());
    rep.param("truncation", trunc);
    let verdict = membership_with(&a.seq.seq, &a.space, trunc);
    rep.push("verdict", verdict_certified(&verdict), &verdict);
    if let (Some(m), Some(ev)) = (a.threshold, verdict.evidence()) {
        rep.param("M", m);
        rep.push("escape", true, ev.escape(m));
        if let DivergenceCertificate::PowerSum { p, exponent, block, scale, skipped } = ev {
            let pts = index_trace(&a.seq.seq, *p, *block, *skipped, *scale, *exponent, skipped + (1 << 20));
            rep.traces.push(Trace::Index { label: "partial sums".into(), points: pts });
        }
    }
    if let Some(g) = &a.against {
        rep.param("against", &g.text);
        let interval = match &a.space {
            SpaceSpec::Lp { p } => lp_distance(&a.seq.seq, &g.seq, *p, trunc),
            SpaceSpec::CapAbove { .. } => frechet_distance(&a.seq.seq, &g.seq, &a.space, a.depth, trunc)?,
            other => return usage(format!("no distance implemented for {other}")),
        };
        rep.push("distance", interval.is_bounded(), interval);
    }
    Ok(())
}

fn cmd_lineability(a: &LineabilityArgs, seed: u64, rep: &mut ExperimentReport) -> Result<()> {
    let trunc = truncation()?;
    rep.param("b", a.b);
    rep.param("count", a.count);
    rep.param("combos", a.combos);
    rep.param("M", a.threshold);
    rep.param("seed", seed);
    rep.param("truncation", trunc);
    let basis = lineable_basis(a.b, a.count)?;
    for e in &basis.elements {
        let v = NeighborhoodSpec::new(&basis.ambient, e.j)?;
        let d = basis.neighborhood_distances(e.j, trunc)?;
        let ok = d.iter().all(|i| i.hi < v.radius);
        rep.push(
            format!("element {}", e.j),
            ok,
            json!({ "x": e.x, "n": e.support_bound, "c": e.c(), "t": e.scaling.t, "distances": d }),
        );
    }
    let mut rng = seeded_rng(seed);
    for i in 0..a.combos {
        let len = rng.gen_range(1..=a.count) as usize;
        let coeffs = random_coefficients(&mut rng, len);
        let cc = to_c64(&coeffs);
        let esc = verify_lineable_combo(&cc, &basis, a.threshold)?;
        if i == 0 {
            let f = basis.combination(&cc)?;
            let top = basis.element(len as u64)?;
            let s = (cc[len - 1].norm() * top.c()).powf(a.b);
            let k_max = esc.escape.position.unwrap_or(u64::MAX).min(esc.skipped + (1 << 20));
            let pts = index_trace(&f, a.b, len as u64, esc.skipped, s, 1.0, k_max);
            rep.traces.push(Trace::Index { label: "combination 1".into(), points: pts });
        }
        rep.push(format!("combination {}", i + 1), true, json!({ "coefficients": coeffs, "escape": esc }));
    }
    Ok(())
}

fn cmd_spaceability(a: &SpaceabilityArgs, seed: u64, rep: &mut ExperimentReport) -> Result<()> {
    rep.param("ambient", a.ambient.to_string());
    rep.param("count", a.count);
    rep.param("combos", a.combos);
    rep.param("M", a.threshold);
    rep.param("seed", seed);
    let basis = match &a.sub {
        Some(x) => {
            rep.param("sub", x.to_string());
            spaceability_route(&a.ambient, x, a.count)?
        }
        None => {
            rep.param("b", a.b);
            spaceable_basis(&a.ambient, a.b, a.count)?
        }
    };
    rep.push("basis", basis.all_certified(), &basis);
    let mut rng = seeded_rng(seed);
    for i in 0..a.combos {
        let len = rng.gen_range(1..=a.count) as usize;
        let coeffs = random_coefficients(&mut rng, len);
        let cc = to_c64(&coeffs);
        let f = basis.combination(&cc)?;
        let ratios = decompose(&f, &basis, a.positions)?;
        let recovered = ratios.iter().zip(coeffs.iter().chain(std::iter::repeat(&QComplex::zero()))).all(
            |(r, c)| matches!(r, BlockRatio::Consistent { rational: Some(q), .. } if q == c),
        );
        let esc = verify_spaceable_combo(&cc, &basis, a.threshold)?;
        if i == 0 {
            if let DivergenceCertificate::PowerSum { p, exponent, block, scale, skipped } = &esc.evidence {
                let k_max = esc.escape.position.unwrap_or(u64::MAX).min(1 << 20);
                let pts = index_trace(&f, *p, *block, *skipped, *scale, *exponent, k_max);
                rep.traces.push(Trace::Index { label: "combination 1".into(), points: pts });
            }
        }
        rep.push(
            format!("combination {}", i + 1),
            recovered,
            json!({ "coefficients": coeffs, "recovered": recovered, "escape": esc }),
        );
    }
    Ok(())
}

fn cmd_hardy_growth(a: &HardyGrowthArgs, rep: &mut ExperimentReport) -> Result<()> {
    let arc = match a.arc {
        Some((lo, hi)) => Arc::new(lo, hi)?,
        None => Arc::full(),
    };
    let schedule = RadialSchedule::new(a.t_min, a.t_max)?;
    rep.param("gamma", a.gamma);
    rep.param("omega", a.omega);
    rep.param("c", a.c);
    rep.param("q", a.q);
    rep.param("arc", arc);
    rep.param("schedule", schedule);
    rep.param("tol", a.tol);
    let f = HardyFn::single(Complex64::new(a.c, 0.0), a.omega, a.gamma)?;
    let growth = localized_growth(&f, &arc, a.q, &schedule, &a.thresholds, a.window, a.tol)?;
    let verdict = hardy_membership(&f, a.q, &arc);
    rep.push("verdict", verdict_certified(&verdict), &verdict);
    if let Some(DivergenceCertificate::RadialBlowUp(b)) = verdict.evidence() {
        for &m in &a.thresholds {
            rep.push(format!("escape radius M={m}"), true, b.escape(m));
        }
    }
    rep.push(
        "growth",
        !growth.flagged,
        json!({
            "slope": growth.slope,
            "slope_window": growth.slope_window,
            "thresholds": growth.thresholds,
            "rows": growth.rows,
        }),
    );
    rep.traces.push(Trace::radial("I(r)", &growth.rows));
    Ok(())
}

fn cmd_hardy_basis(a: &HardyBasisArgs, seed: u64, rep: &mut ExperimentReport) -> Result<()> {
    rep.param("p", a.p);
    rep.param("q", a.q);
    rep.param("n", a.n);
    rep.param("lambdas", a.lambdas);
    rep.param("M", a.threshold);
    rep.param("t_max", a.t_max);
    rep.param("tol", a.tol);
    rep.param("seed", seed);
    let schedule = RadialSchedule::new(1, a.t_max)?;
    let basis = dense_avoiding_basis(a.p, a.q, a.n, a.tol)?;
    rep.param("gamma", basis.gamma);
    for e in &basis.elements {
        rep.push(
            format!("element {}", e.n),
            e.distance < 1.0 / e.n as f64,
            json!({ "omega": e.omega, "c": e.c, "t": e.t, "poly": e.poly, "distance_upper": e.distance }),
        );
    }
    let mut rng = seeded_rng(seed);
    for i in 0..a.lambdas {
        let lambdas = random_coefficients(&mut rng, a.n as usize);
        let r = verify_dense_avoiding(&lambdas, &basis, &schedule, a.threshold, a.tol)?;
        let ok = r.first_exceeded.is_some() && r.contributions_stable() && !r.flagged;
        rep.traces.push(Trace::radial(format!("lambda {}", i + 1), &r.rows));
        rep.push(
            format!("lambda {}", i + 1),
            ok,
            json!({
                "lambda": lambdas,
                "arc": r.arc,
                "first_exceeded": r.first_exceeded,
                "contributions_stable": r.contributions_stable(),
                "verdict": r.verdict,
                "escape": r.escape,
                "rows": r.rows,
            }),
        );
    }
    Ok(())
}

fn cmd_thma(a: &ThmaArgs, rep: &mut ExperimentReport) -> Result<()> {
    let delta = a.delta.unwrap_or(a.p);
    rep.param("p", a.p);
    rep.param("k", a.k);
    rep.param("q", a.q);
    rep.param("delta", delta);
    rep.param("M", a.threshold);
    rep.param("t_max", a.t_max);
    rep.param("tol", a.tol);
    let schedule = RadialSchedule::new(1, a.t_max)?;
    let w = critical_witness(a.p, a.k, None)?;
    rep.push(
        "witness",
        true,
        json!({ "gamma": w.gamma, "omegas": w.omegas, "eps": w.eps, "q_schedule": w.q_schedule }),
    );
    let probe = critical_probe(&w, a.q, delta, &schedule, a.threshold, a.refinement_tol, a.tol)?;
    rep.push(
        "bounded clause",
        probe.clause_bounded(),
        json!({
            "verdict": probe.bounded.verdict,
            "stable": probe.bounded.stable,
            "boundary_value": probe.bounded.boundary.value,
            "refined_value": probe.bounded.boundary.refined_value,
            "refinement_stable": probe.bounded.refinement_stable,
        }),
    );
    rep.traces.push(Trace::radial("bounded clause", &probe.bounded.rows));
    for arc in &probe.arcs {
        rep.push(
            format!("blow-up clause k={}", arc.k),
            arc.verdict.is_out() && arc.first_exceeded.is_some(),
            json!({
                "omega": arc.omega,
                "arc": arc.arc,
                "first_exceeded": arc.first_exceeded,
                "escape": arc.escape,
                "last_value": arc.rows.last().map(|r| r.value),
            }),
        );
        rep.traces.push(Trace::radial(format!("arc {}", arc.k), &arc.rows));
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<ExperimentReport> {
    let name = match &cli.command {
        Command::Witness(_) => "witness",
        Command::Membership(_) => "membership",
        Command::Lineability(_) => "lineability",
        Command::Spaceability(_) => "spaceability",
        Command::HardyGrowth(_) => "hardy-growth",
        Command::HardyBasis(_) => "hardy-basis",
        Command::Thma(_) => "thma",
    };
    let mut rep = ExperimentReport::new(name);
    let outcome = match &cli.command {
        Command::Witness(a) => cmd_witness(a, &mut rep),
        Command::Membership(a) => cmd_membership(a, &mut rep),
        Command::Lineability(a) => cmd_lineability(a, cli.seed, &mut rep),
        Command::Spaceability(a) => cmd_spaceability(a, cli.seed, &mut rep),
        Command::HardyGrowth(a) => cmd_hardy_growth(a, &mut rep),
        Command::HardyBasis(a) => cmd_hardy_basis(a, cli.seed, &mut rep),
        Command::Thma(a) => cmd_thma(a, &mut rep),
    };
    match outcome {
        Ok(()) => Ok(rep),
        Err(Error::Usage(m)) => Err(Error::Usage(m)),
        Err(e) => {
            // failed searches and undetermined steps are reported, not hidden
            rep.push("failure", false, e.to_string());
            Ok(rep)
        }
    }
}

/// Run the command line `args` (program name first) and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let mut report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("genlab: {e}");
            return 1;
        }
    };
    if cli.timestamp {
        report.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    match report.write(&cli.out) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("genlab: cannot write report into {}: {e}", cli.out.display());
            return 1;
        }
    }
    let certified = report.all_certified();
    let flagged = report.results.iter().filter(|r| !r.certified).count();
    if certified {
        println!("all {} entries certified", report.results.len());
        0
    } else {
        println!("{flagged} of {} entries undetermined or flagged", report.results.len());
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_syntax() {
        assert_eq!(parse_space("linf").unwrap(), SpaceSpec::LInf);
        assert_eq!(parse_space("C0").unwrap(), SpaceSpec::C0);
        assert_eq!(parse_space("lp:2").unwrap(), SpaceSpec::lp(2.0).unwrap());
        assert_eq!(parse_space("l1.5").unwrap(), SpaceSpec::lp(1.5).unwrap());
        assert_eq!(parse_space("cap:1").unwrap(), SpaceSpec::cap_above(1.0).unwrap());
        assert!(parse_space("lp:-1").is_err());
        assert!(parse_space("h2").is_err());
    }

    #[test]
    fn sequence_syntax() {
        let s = parse_seq("power:1@2").unwrap();
        assert_eq!(s.seq.value(2), Complex64::new(1.0, 0.0));
        assert_eq!(s.seq.value(6), Complex64::new(0.5, 0.0));
        let f = parse_seq("finite:1;0;2").unwrap();
        assert_eq!(f.seq.value(3), Complex64::new(2.0, 0.0));
        assert!(parse_seq("unit:0").is_err());
        assert!(parse_seq("nonsense").is_err());
    }

    #[test]
    fn coefficients_are_reproducible_with_nonzero_tail() {
        let a = random_coefficients(&mut seeded_rng(7), 5);
        let b = random_coefficients(&mut seeded_rng(7), 5);
        assert_eq!(a, b);
        for seed in 0..200 {
            assert!(!random_coefficients(&mut seeded_rng(seed), 3)[2].is_zero());
        }
    }

    #[test]
    fn index_trace_agrees_with_certificate() {
        let f = ComplexSeq::power_law(1.0, 0).unwrap();
        let pts = index_trace(&f, 1.0, 0, 0, 1.0, 1.0, 1000);
        assert_eq!(pts[0].k, 1);
        assert!(pts.iter().all(|p| p.partial_sum >= p.lower_bound));
        assert_eq!(pts.last().unwrap().k, 512);
    }

    fn run_in(dir: &std::path::Path, args: &[&str]) -> i32 {
        let mut full = vec!["genlab", "--out", dir.to_str().unwrap()];
        full.extend_from_slice(args);
        run(full)
    }

    fn report(dir: &std::path::Path) -> ExperimentReport {
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
    }

    #[test]
    fn certified_commands_exit_zero() {
        let tmp = tempfile::tempdir().unwrap();
        let cases: [&[&str]; 6] = [
            &["witness", "--chain", "1,2"],
            &["witness", "--ambient", "c0", "--sub", "cap:1"],
            &["membership", "--seq", "power:1", "--space", "lp:1", "--M", "10"],
            &["lineability", "--count", "4", "--combos", "5"],
            &["spaceability", "--sub", "lp:2", "--combos", "5"],
            &["hardy-growth", "--gamma", "0.75", "--q", "2", "--t-max", "8"],
        ];
        for (i, args) in cases.iter().enumerate() {
            let dir = tmp.path().join(i.to_string());
            assert_eq!(run_in(&dir, args), 0, "{args:?}");
            let r = report(&dir);
            assert_eq!(r.command, args[0]);
            assert!(r.all_certified());
            assert_eq!(r.timestamp, None);
        }
        assert_eq!(report(&tmp.path().join("0")).results.len(), 6);
    }

    #[test]
    fn harmonic_membership_report() {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(run_in(tmp.path(), &["membership", "--seq", "power:1", "--space", "lp:1", "--M", "10"]), 0);
        let csv = std::fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
        assert!(csv.starts_with("K,partial_sum,lower_bound\n"));
        let text = std::fs::read_to_string(tmp.path().join("report.json")).unwrap();
        assert!(text.contains("22026"), "{text}");
    }

    #[test]
    fn unreached_thresholds_exit_two() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("basis");
        assert_eq!(run_in(&dir, &["hardy-basis", "--n", "3", "--lambdas", "2", "--t-max", "6"]), 2);
        let r = report(&dir);
        assert!(!r.all_certified());
        assert!(r.results.iter().filter(|e| e.label.starts_with("element")).all(|e| e.certified));
        assert!(dir.join("trace_2.csv").exists());
    }

    #[test]
    fn usage_errors_exit_one_and_write_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let cases: [&[&str]; 5] = [
            &["witness", "--ambient", "lp:1", "--sub", "c0"],
            &["membership", "--seq", "bogus", "--space", "c0"],
            &["thma", "--q", "2"],
            &["hardy-growth", "--gamma", "0.5", "--t-min", "9", "--t-max", "3"],
            &["no-such-command"],
        ];
        for (i, args) in cases.iter().enumerate() {
            let dir = tmp.path().join(i.to_string());
            assert_eq!(run_in(&dir, args), 1, "{args:?}");
            assert!(!dir.exists(), "{args:?}");
        }
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["genlab", "--help"]), 0);
    }

    #[test]
    fn repeated_runs_are_byte_identical_and_never_overwrite() {
        let tmp = tempfile::tempdir().unwrap();
        let args = ["--seed", "9", "spaceability", "--combos", "10"];
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        assert_eq!(run_in(&a, &args), 0);
        assert_eq!(run_in(&b, &args), 0);
        for name in ["report.json", "trace.csv"] {
            assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        }
        let before = std::fs::read(a.join("report.json")).unwrap();
        assert_eq!(run_in(&a, &["--seed", "10", "spaceability", "--combos", "10"]), 1);
        assert_eq!(std::fs::read(a.join("report.json")).unwrap(), before);
    }

    #[test]
    fn timestamp_is_opt_in() {
        let tmp = tempfile::tempdir().unwrap();
        assert_eq!(run_in(tmp.path(), &["--timestamp", "witness", "--chain", "1,2"]), 0);
        assert!(report(tmp.path()).timestamp.is_some());
    }
}
