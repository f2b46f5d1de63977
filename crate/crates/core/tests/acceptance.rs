//! Acceptance suite. Every criterion runs, prints one `PASS`/`FAIL` line and
//! the process exits nonzero if any of them failed.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use genlab::cli::{random_coefficients, seeded_rng, truncation};
use genlab::enumeration::{QComplex, RationalSeq};
use genlab::hardy::{
    dense_avoiding_basis, localized_growth, critical_probe, critical_witness, verify_dense_avoiding,
    Arc, HardyFn, RadialSchedule,
};
use genlab::lineability::{lineable_basis, verify_lineable_combo, NeighborhoodSpec};
use genlab::seq::{
    escape_index, frechet_distance, lp_distance, membership, BlockConstants, ComplexSeq, SpaceSpec,
};
use genlab::spaceability::{
    block_constant_embed, decompose, spaceable_basis, verify_spaceable_combo, BlockRatio,
};
use genlab::witness::{chain_pairs, chain_witness};
use num_complex::Complex64 as C64;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_secs {
        Ok(())
    } else {
        Err(format!("runtime {:.2}s exceeds {limit_secs}s", elapsed.as_secs_f64()))
    }
}

fn to_c64(v: &[QComplex]) -> Vec<C64> {
    v.iter().map(QComplex::to_c64).collect()
}

fn witness_table() -> Outcome {
    let start = Instant::now();
    let mut certified = 0;
    let pairs = chain_pairs(1.0, 2.0).map_err(|e| e.to_string())?;
    for (ambient, sub) in &pairs {
        let w = chain_witness(ambient, sub).map_err(|e| format!("({ambient}, {sub}): {e}"))?;
        if w.verdict_in.is_in() && w.verdict_out.is_out() {
            certified += 1;
        }
    }
    within(start.elapsed(), 1.0)?;
    check(
        pairs.len() == 6 && certified == 6,
        format!("{certified}/{} pairs certified in {:?}", pairs.len(), start.elapsed()),
    )
}

fn harmonic_escape() -> Outcome {
    let start = Instant::now();
    let g = ComplexSeq::power_law(1.0, 0).map_err(|e| e.to_string())?;
    let rec = escape_index(&ComplexSeq::zero(), &g, 1, 10.0, 1.0).map_err(|e| e.to_string())?;
    let certified = rec.escape.index.ok_or("no explicit index")?;
    let mut sum = 0.0;
    let mut n = 0u64;
    while sum <= 10.0 {
        n += 1;
        sum += 1.0 / n as f64;
    }
    let mut at_certified = 0.0;
    for k in 1..=certified {
        at_certified += 1.0 / k as f64;
    }
    within(start.elapsed(), 1.0)?;
    check(
        n == 12367 && n <= certified && at_certified > 10.0,
        format!("true crossing {n}, certified N = {certified}, H_N = {at_certified:.6}"),
    )
}

fn random_finite(rng: &mut impl Rng) -> ComplexSeq {
    let len = rng.gen_range(1..=12);
    RationalSeq::new(random_coefficients(rng, len)).to_seq()
}

fn metric_axioms() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(3);
    let t = 64;
    let cap = SpaceSpec::cap_above(1.0).map_err(|e| e.to_string())?;
    let slack = |x: f64| 1e-12 * x.max(1.0);
    for i in 0..1000 {
        let (f, g, h) = (random_finite(&mut rng), random_finite(&mut rng), random_finite(&mut rng));
        for p in [0.5, 1.0, 2.0, 3.5] {
            let fg = lp_distance(&f, &g, p, t);
            let gf = lp_distance(&g, &f, p, t);
            if (fg.hi - gf.hi).abs() > slack(fg.hi) || (fg.lo - gf.lo).abs() > slack(fg.lo) {
                return Err(format!("pair {i}, p = {p}: symmetry {fg:?} vs {gf:?}"));
            }
            let fh = lp_distance(&f, &h, p, t);
            let gh = lp_distance(&g, &h, p, t);
            if fh.lo > fg.hi + gh.hi + slack(fh.lo) {
                return Err(format!("pair {i}, p = {p}: triangle {fh:?} > {fg:?} + {gh:?}"));
            }
            if lp_distance(&f, &f, p, t).hi != 0.0 {
                return Err(format!("pair {i}, p = {p}: d(f, f) != 0"));
            }
            let differ = (1..=12).any(|n| f.value(n) != g.value(n));
            if differ != (fg.lo > 0.0) {
                return Err(format!("pair {i}, p = {p}: indiscernibles, differ = {differ}, d = {fg:?}"));
            }
        }
        let fr = frechet_distance(&f, &g, &cap, 30, t).map_err(|e| e.to_string())?;
        if fr.hi.partial_cmp(&1.0) != Some(std::cmp::Ordering::Less) {
            return Err(format!("pair {i}: Fréchet distance {fr:?} not below 1"));
        }
    }
    within(start.elapsed(), 10.0)?;
    check(true, format!("1000 triples, p in {{0.5, 1, 2, 3.5}}, {:?}", start.elapsed()))
}

fn lineability() -> Outcome {
    let start = Instant::now();
    let trunc = truncation().map_err(|e| e.to_string())?;
    let basis = lineable_basis(1.0, 32).map_err(|e| e.to_string())?;
    for j in 1..=32u64 {
        let v = NeighborhoodSpec::new(&basis.ambient, j).map_err(|e| e.to_string())?;
        let d = basis.neighborhood_distances(j, trunc).map_err(|e| e.to_string())?;
        if d.len() != j as usize || v.radius != 1.0 / j as f64 || d.iter().any(|i| i.hi.is_nan() || i.hi >= v.radius) {
            return Err(format!("f_{j} - x_{j} not certified inside V_{j}: {d:?}"));
        }
    }
    let mut rng = seeded_rng(4);
    let mut escapes = 0;
    for i in 0..100 {
        let len = rng.gen_range(1..=32);
        let coeffs = random_coefficients(&mut rng, len);
        let esc = verify_lineable_combo(&to_c64(&coeffs), &basis, 1e3)
            .map_err(|e| format!("combination {i}: {e}"))?;
        if esc.escape.ln_position.is_finite() && esc.escape.threshold == 1e3 {
            escapes += 1;
        }
    }
    within(start.elapsed(), 10.0)?;
    check(escapes == 100, format!("32 elements inside V_j, {escapes}/100 escapes, {:?}", start.elapsed()))
}

fn spaceability() -> Outcome {
    let start = Instant::now();
    let count = 8;
    let basis = spaceable_basis(&SpaceSpec::C0, 1.0, count).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(5);
    let (mut recovered, mut escapes) = (0, 0);
    for i in 0..100 {
        let coeffs = random_coefficients(&mut rng, count as usize);
        let cc = to_c64(&coeffs);
        let f = basis.combination(&cc).map_err(|e| e.to_string())?;
        let ratios = decompose(&f, &basis, 16).map_err(|e| e.to_string())?;
        let exact = ratios.iter().zip(&coeffs).all(|(r, q)| {
            matches!(r, BlockRatio::Consistent { rational: Some(x), .. } if x == q)
        });
        if exact {
            recovered += 1;
        }
        let esc = verify_spaceable_combo(&cc, &basis, 1e2).map_err(|e| format!("combination {i}: {e}"))?;
        if esc.escape.ln_position.is_finite() {
            escapes += 1;
        }
    }
    let constants = [C64::new(1.0, 0.0), C64::new(-0.25, 0.5), C64::new(0.0, 1e-9), C64::new(7.0, -3.0)];
    let outside = constants
        .iter()
        .filter(|c| membership(&block_constant_embed(BlockConstants::constant(**c)), &SpaceSpec::C0).is_out())
        .count();
    within(start.elapsed(), 5.0)?;
    check(
        recovered == 100 && escapes == 100 && outside == constants.len(),
        format!(
            "{recovered}/100 recovered, {escapes}/100 escapes, {outside}/{} constants out of c0, {:?}",
            constants.len(),
            start.elapsed()
        ),
    )
}

fn growth_law() -> Outcome {
    let start = Instant::now();
    let schedule = RadialSchedule::new(5, 12).map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    let mut ok = true;
    for (gamma, q) in [(0.75, 2.0), (0.5, 3.0), (0.9, 1.5)] {
        let f = HardyFn::single(C64::new(1.0, 0.0), 0.0, gamma).map_err(|e| e.to_string())?;
        let g = localized_growth(&f, &Arc::full(), q, &schedule, &[], Some((5, 12)), 1e-8)
            .map_err(|e| e.to_string())?;
        let expected = gamma * q - 1.0;
        let slope = g.slope.ok_or("no slope")?;
        let rel = (slope - expected).abs() / expected;
        ok &= rel <= 0.1 && !g.flagged;
        details.push(format!("(γ={gamma}, q={q}) slope {slope:.4} vs {expected:.4}"));
    }
    within(start.elapsed(), 60.0)?;
    check(ok, format!("{}, {:?}", details.join("; "), start.elapsed()))
}

fn dense_avoiding() -> Outcome {
    let start = Instant::now();
    let basis = dense_avoiding_basis(1.0, 2.0, 8, 1e-8).map_err(|e| e.to_string())?;
    let close = basis.elements.iter().filter(|e| e.distance < 1.0 / e.n as f64).count();
    let schedule = RadialSchedule::new(1, 14).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(0);
    let (mut exceeded, mut stable, mut peak) = (0, 0, 0.0f64);
    for _ in 0..20 {
        let lambdas = random_coefficients(&mut rng, 8);
        let r = verify_dense_avoiding(&lambdas, &basis, &schedule, 1e2, 1e-8).map_err(|e| e.to_string())?;
        if r.first_exceeded.is_some() {
            exceeded += 1;
        }
        if r.contributions_stable() {
            stable += 1;
        }
        peak = peak.max(r.rows.last().map_or(0.0, |row| row.value));
    }
    within(start.elapsed(), 120.0)?;
    check(
        close == 8 && exceeded == 20 && stable == 20,
        format!(
            "{close}/8 elements within 1/n, {exceeded}/20 exceed 1e2 by t=14 (largest value {peak:.3}), \
             {stable}/20 with stable contributions, {:?}",
            start.elapsed()
        ),
    )
}

fn critical_candidate() -> Outcome {
    let start = Instant::now();
    let w = critical_witness(1.0, 16, None).map_err(|e| e.to_string())?;
    let schedule = RadialSchedule::new(1, 14).map_err(|e| e.to_string())?;
    let probe = critical_probe(&w, 0.5, 1.0, &schedule, 1e2, 1e-4, 1e-8).map_err(|e| e.to_string())?;
    let bq = &probe.bounded.boundary;
    let rel = (bq.refined_value - bq.value).abs() / bq.value.abs().max(1.0);
    let exceeded = probe.arcs.iter().filter(|a| a.first_exceeded.is_some()).count();
    let tau = probe
        .arcs
        .iter()
        .filter_map(|a| a.escape.as_ref().map(|e| e.tau))
        .fold(f64::INFINITY, f64::min);
    within(start.elapsed(), 120.0)?;
    check(
        probe.clause_bounded() && rel <= 1e-4 && exceeded == probe.arcs.len(),
        format!(
            "bounded clause {} (boundary {:.10}, refined {:.10}), {exceeded}/{} arcs exceed 1e2 by t=14 (smallest certified t = {tau:.0}), {:?}",
            probe.clause_bounded(),
            bq.value,
            bq.refined_value,
            probe.arcs.len(),
            start.elapsed()
        ),
    )
}

fn run_cli(out: &Path, args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_genlab"))
        .arg("--out")
        .arg(out)
        .arg("--seed")
        .arg("11")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?
        .status;
    match status.code() {
        Some(0) | Some(2) => Ok(()),
        other => Err(format!("{args:?} exited with {other:?}")),
    }
}

fn dir_contents(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.map_err(|e| e.to_string())?;
            let body = fs::read(e.path()).map_err(|e| e.to_string())?;
            Ok((e.file_name().to_string_lossy().into_owned(), body))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (name, args) in [
        ("lineability", &["lineability", "--b", "1", "--count", "32", "--combos", "100", "--M", "1000"][..]),
        ("hardy-basis", &["hardy-basis", "--p", "1", "--q", "2", "--n", "8", "--lambdas", "20"][..]),
    ] {
        let (a, b) = (tmp.path().join(format!("{name}-1")), tmp.path().join(format!("{name}-2")));
        run_cli(&a, args)?;
        run_cli(&b, args)?;
        let (fa, fb) = (dir_contents(&a)?, dir_contents(&b)?);
        if fa.is_empty() || fa != fb {
            return Err(format!("{name}: outputs differ"));
        }
        compared += fa.len();
    }
    check(true, format!("{compared} files byte-identical across repeated runs, {:?}", start.elapsed()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("witness table", witness_table),
        ("harmonic escape", harmonic_escape),
        ("metric axioms", metric_axioms),
        ("lineability", lineability),
        ("spaceability", spaceability),
        ("Hardy growth law", growth_law),
        ("dense avoiding subspace", dense_avoiding),
        ("bounded and blow-up clauses", critical_candidate),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
