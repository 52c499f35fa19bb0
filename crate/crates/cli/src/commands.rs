use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use nct_core::algebra::{AlgebraElement, RationalTheta};
use nct_core::arithmetic::{make_weyl_context, TknnRecord, WeylContext};
use nct_core::chern::{
    fhs_chern, fhs_chern_twisted, pullback_field, ChernResult, TknnVerification, TknnVerifier,
};
use nct_core::format::sig12;
use nct_core::representations::{FiberedRep, RepKind};
use nct_core::spectral::{
    detect_gaps, energies_on_grid, fermi_projector_field, spectral_hausdorff, BandData, GapReport, Grid,
    ProjectorField,
};

use crate::config::{Format, RunConfig};
use crate::output::{ensure_dir, json_text, tag, write_file, write_text};
use crate::svg::{self, ThetaColumn};
use crate::CliError;

/// `Ok(true)` when every verification passed.
pub type Outcome = Result<bool, CliError>;

fn core(e: nct_core::Error) -> CliError {
    use nct_core::Error as E;
    match e {
        E::GapViolation { .. } | E::GridTooCoarse { .. } | E::NotQuantized { .. } | E::NoConstrainedSolution { .. } => {
            CliError::Verification(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    }
}

fn grid(cfg: &RunConfig) -> Result<Grid, CliError> {
    Grid::square(cfg.grid).map_err(core)
}

fn hofstadter(c: &WeylContext) -> AlgebraElement {
    AlgebraElement::hofstadter(c.theta)
}

fn write_spectrum_csv(w: &mut dyn Write, theta: RationalTheta, bd: &BandData) -> std::io::Result<()> {
    for i in 0..bd.grid.g1 {
        for j in 0..bd.grid.g2 {
            let [k1, k2] = bd.grid.k(i, j);
            let (k1, k2) = (sig12(k1), sig12(k2));
            for (b, e) in bd.energies[bd.grid.index(i, j)].iter().enumerate() {
                writeln!(w, "{},{},{k1},{k2},{b},{}", theta.numerator(), theta.denominator(), sig12(*e))?;
            }
        }
    }
    Ok(())
}

const SPECTRUM_HEADER: &str = "theta_num,theta_den,k1,k2,band,energy";

/// Merged band intervals between consecutive gaps of a report.
fn band_intervals(report: &GapReport) -> Vec<(f64, f64)> {
    report.gaps.windows(2).map(|w| (w[0].upper, w[1].lower)).collect()
}

pub fn gaps(cfg: &RunConfig) -> Outcome {
    let g = grid(cfg)?;
    ensure_dir(&cfg.out)?;
    for c in cfg.contexts()? {
        let bd = energies_on_grid(&FiberedRep::new(c, RepKind::Weyl), &hofstadter(&c), g).map_err(core)?;
        let report = detect_gaps(&bd, cfg.tol).map_err(core)?;
        let labels: Vec<String> = report.gaps.iter().map(|g| g.d.to_string()).collect();
        println!("theta {} rep ({},{}): {} bands, gap labels d = {}", c.theta, c.q, c.r, report.bands, labels.join(","));
        let t = tag(&c);
        if cfg.wants(Format::Json) {
            let doc = json!({"theta": c.theta.to_string(), "q": c.q, "r": c.r, "grid": cfg.grid, "report": report});
            write_text(&cfg.out, &format!("gaps_{t}.json"), &json_text(&doc))?;
        }
        if cfg.wants(Format::Csv) {
            write_file(&cfg.out, &format!("spectrum_{t}.csv"), |w| {
                writeln!(w, "{SPECTRUM_HEADER}")?;
                write_spectrum_csv(w, c.theta, &bd)
            })?;
        }
        if cfg.wants(Format::Svg) {
            let col = ThetaColumn { theta: c.theta, bands: band_intervals(&report), gaps: Vec::new() };
            write_text(&cfg.out, &format!("gaps_{t}.svg"), &svg::butterfly(&[col]))?;
        }
    }
    Ok(true)
}

/// Verified records for every detected gap, or the first hard failure.
fn label_context(c: &WeylContext, g: Grid, tol: f64) -> Result<(GapReport, Vec<TknnVerification>), CliError> {
    let v = TknnVerifier::new(*c, g).map_err(core)?;
    let report = detect_gaps(&v.weyl, tol).map_err(core)?;
    let mut out = Vec::new();
    for gap in &report.gaps {
        let res = v.verify(gap.g, gap.fermi).map_err(|e| match core(e) {
            CliError::Verification(m) => CliError::Verification(format!("theta {} gap {}: {m}", c.theta, gap.g)),
            other => other,
        })?;
        out.push(res);
    }
    Ok((report, out))
}

fn print_records(c: &WeylContext, rows: &[TknnVerification]) {
    println!("theta {} rep ({},{}) M0={}", c.theta, c.q, c.r, c.m0);
    println!("  {:>3} {:>3} {:>4} {:>4} {:>14} {:>10}  status", "g", "d", "t", "s", "fermi", "residual");
    for v in rows {
        let r = &v.record;
        let status = if v.passed() { "ok" } else { "FAILED" };
        println!("  {:>3} {:>3} {:>4} {:>4} {:>14} {:>10.2e}  {status}", r.g, r.d, r.t, r.s, sig12(r.fermi), r.residual);
    }
}

pub fn labels(cfg: &RunConfig) -> Outcome {
    let g = grid(cfg)?;
    ensure_dir(&cfg.out)?;
    let mut all_ok = true;
    for c in cfg.contexts()? {
        let (_, rows) = match label_context(&c, g, cfg.tol) {
            Ok(x) => x,
            Err(CliError::Verification(msg)) => {
                eprintln!("verification failed: {msg}");
                all_ok = false;
                continue;
            }
            Err(e) => return Err(e),
        };
        print_records(&c, &rows);
        all_ok &= rows.iter().all(TknnVerification::passed);
        let records: Vec<TknnRecord> = rows.iter().map(|v| v.record).collect();
        let t = tag(&c);
        if cfg.wants(Format::Json) {
            write_text(&cfg.out, &format!("labels_{t}.json"), &json_text(&records))?;
        }
        if cfg.wants(Format::Csv) {
            write_file(&cfg.out, &format!("labels_{t}.csv"), |w| {
                writeln!(w, "g,d,t,s,fermi,residual")?;
                for r in &records {
                    writeln!(w, "{},{},{},{},{},{}", r.g, r.d, r.t, r.s, sig12(r.fermi), sig12(r.residual))?;
                }
                Ok(())
            })?;
        }
    }
    Ok(all_ok)
}

#[derive(Serialize)]
struct ChernReport {
    theta: String,
    q: i64,
    r: i64,
    grid: usize,
    ambient: ChernResult,
    gaps: Vec<TknnVerification>,
}

pub fn chern(cfg: &RunConfig) -> Outcome {
    let g = grid(cfg)?;
    ensure_dir(&cfg.out)?;
    let mut all_ok = true;
    for c in cfg.contexts()? {
        let identity = ProjectorField::identity(&FiberedRep::new(c, RepKind::Weyl), g);
        let ambient = fhs_chern_twisted(&identity, &c).map_err(core)?;
        let ambient_ok = ambient.value == c.q;
        println!(
            "theta {} rep ({},{}): ambient C1 = {} (raw {}){}",
            c.theta,
            c.q,
            c.r,
            ambient.value,
            sig12(ambient.raw),
            if ambient_ok { "" } else { "  FAILED" }
        );
        all_ok &= ambient_ok;
        let rows = match label_context(&c, g, cfg.tol) {
            Ok((_, rows)) => rows,
            Err(CliError::Verification(msg)) => {
                eprintln!("verification failed: {msg}");
                all_ok = false;
                continue;
            }
            Err(e) => return Err(e),
        };
        println!("  {:>3} {:>5} {:>6} {:>6} {:>6}", "g", "rank", "t", "C1bar", "C1ref");
        for v in &rows {
            println!(
                "  {:>3} {:>5} {:>6} {:>6} {:>6}",
                v.record.g, v.rank, v.t.value, v.connes_chern.value, v.reference_chern.value
            );
            all_ok &= v.passed();
        }
        if cfg.wants(Format::Json) {
            let doc = ChernReport { theta: c.theta.to_string(), q: c.q, r: c.r, grid: cfg.grid, ambient, gaps: rows };
            write_text(&cfg.out, &format!("chern_{}.json", tag(&c)), &json_text(&doc))?;
        }
    }
    Ok(all_ok)
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    skipped: bool,
    detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, skipped: false, detail }
    }

    fn skip(name: &'static str, detail: &str) -> Self {
        Self { name, passed: true, skipped: true, detail: detail.to_string() }
    }
}

/// Deterministic low-discrepancy sample of `[-1, 2)²`.
fn sample_points(n: usize) -> Vec<[f64; 2]> {
    let (a, b) = (0.754_877_666_246_692_7, 0.569_840_290_998_053_3);
    (1..=n).map(|i| [3.0 * (i as f64 * a).fract() - 1.0, 3.0 * (i as f64 * b).fract() - 1.0]).collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn verify_context(c: &WeylContext, cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    const RESIDUAL: f64 = 1e-12;
    let g = grid(cfg)?;
    let h = hofstadter(c);
    let mut checks = Vec::new();

    let mut worst = [0.0f64; 4];
    for kind in [RepKind::Weyl, RepKind::Reference, RepKind::ReferencePullback] {
        let rep = FiberedRep::new(*c, kind);
        for k in sample_points(100) {
            let r = [
                rep.commutation_residual(k),
                rep.unitarity_residual(k),
                rep.power_residual(k),
                rep.check_pseudoperiodicity(&h, k).map_err(core)?,
            ];
            for (w, x) in worst.iter_mut().zip(r) {
                *w = w.max(x);
            }
        }
    }
    for (name, w) in ["commutation", "unitarity", "power identities", "pseudo-periodicity"].into_iter().zip(worst) {
        checks.push(Check::new(name, w < RESIDUAL, format!("max residual {w:.2e}")));
    }

    let identity = ProjectorField::identity(&FiberedRep::new(*c, RepKind::Weyl), g);
    match fhs_chern_twisted(&identity, c) {
        Ok(res) => checks.push(Check::new("ambient Chern", res.value == c.q, format!("C1 = {}, q = {}", res.value, c.q))),
        Err(e) => checks.push(Check::new("ambient Chern", false, e.to_string())),
    }

    let nm0 = (c.n * c.m0).unsigned_abs() as usize;
    if c.m0 == 0 {
        checks.push(Check::skip("isospectrality", "M0 = 0: the Weyl pair is not faithful"));
    } else {
        let g_iso = (cfg.grid..).find(|g| gcd(*g, nm0) == 1).unwrap_or(cfg.grid);
        let gi = Grid::square(g_iso).map_err(core)?;
        let w = energies_on_grid(&FiberedRep::new(*c, RepKind::Weyl), &h, gi).map_err(core)?;
        let r = energies_on_grid(&FiberedRep::new(*c, RepKind::Reference), &h, gi).map_err(core)?;
        let d = spectral_hausdorff(&w, &r);
        checks.push(Check::new("isospectrality", d < 1e-6, format!("Hausdorff {d:.2e} at grid {g_iso}")));
    }

    if c.m0 == 0 {
        for name in ["generalized TKNN", "duality", "pullback lemma"] {
            checks.push(Check::skip(name, "M0 = 0: the Weyl pair is not faithful"));
        }
        return Ok(checks);
    }
    match label_context(c, g, cfg.tol) {
        Ok((report, rows)) => {
            let bad: Vec<String> = rows.iter().filter(|v| !(v.checks.linear && v.checks.formula)).map(|v| v.record.g.to_string()).collect();
            checks.push(Check::new(
                "generalized TKNN",
                bad.is_empty(),
                format!("{} gaps, failing: [{}]", rows.len(), bad.join(",")),
            ));
            let bad: Vec<String> = rows.iter().filter(|v| !v.checks.duality).map(|v| v.record.g.to_string()).collect();
            checks.push(Check::new("duality", bad.is_empty(), format!("failing gaps: [{}]", bad.join(","))));

            let gap = report.internal().first().copied();
            match gap {
                None => checks.push(Check::skip("pullback lemma", "no internal gap")),
                Some(gap) => {
                    let bd = nct_core::spectral::bands_on_grid(&FiberedRep::new(*c, RepKind::ReferencePullback), &h, g)
                        .map_err(core)?;
                    let lemma = || -> nct_core::Result<(i64, Vec<i64>)> {
                        let f = fermi_projector_field(&bd, gap.fermi)?;
                        let base = fhs_chern(&f)?.value;
                        let mut vals = Vec::new();
                        for (n1, n2) in [(2, 1), (1, 3), (2, 3)] {
                            vals.push(fhs_chern(&pullback_field(&f, n1, n2)?)?.value);
                        }
                        Ok((base, vals))
                    };
                    match lemma() {
                        Ok((base, vals)) => checks.push(Check::new(
                            "pullback lemma",
                            vals == [2 * base, 3 * base, 6 * base],
                            format!("C1 = {base}, pullbacks (2,1),(1,3),(2,3) -> {vals:?}"),
                        )),
                        Err(e) => checks.push(Check::new("pullback lemma", false, e.to_string())),
                    }
                }
            }
        }
        Err(CliError::Verification(msg)) => {
            checks.push(Check::new("generalized TKNN", false, msg));
        }
        Err(e) => return Err(e),
    }
    Ok(checks)
}

pub fn verify(cfg: &RunConfig) -> Outcome {
    ensure_dir(&cfg.out)?;
    let mut all_ok = true;
    for c in cfg.contexts()? {
        let checks = verify_context(&c, cfg)?;
        println!("theta {} rep ({},{}) grid {}", c.theta, c.q, c.r, cfg.grid);
        for ch in &checks {
            let status = if ch.skipped {
                "SKIP"
            } else if ch.passed {
                "PASS"
            } else {
                "FAIL"
            };
            println!("  {status} {}: {}", ch.name, ch.detail);
        }
        let ok = checks.iter().all(|c| c.passed);
        all_ok &= ok;
        if cfg.wants(Format::Json) {
            let doc = json!({
                "theta": c.theta.to_string(), "q": c.q, "r": c.r, "grid": cfg.grid,
                "passed": ok, "checks": checks,
            });
            write_text(&cfg.out, &format!("verify_{}.json", tag(&c)), &json_text(&doc))?;
        }
    }
    Ok(all_ok)
}

struct ThetaJob {
    theta: RationalTheta,
    bands: BandData,
    report: GapReport,
    /// Per twist: `t` of each internal gap, or the failure message.
    labels: Vec<Result<Vec<TknnRecord>, String>>,
}

pub fn butterfly(cfg: &RunConfig) -> Outcome {
    let g = grid(cfg)?;
    cfg.contexts()?;
    ensure_dir(&cfg.out)?;
    let want_labels = cfg.wants(Format::Svg) || cfg.wants(Format::Json);

    let jobs: Vec<ThetaJob> = cfg
        .thetas
        .par_iter()
        .map(|&theta| -> Result<ThetaJob, CliError> {
            let base = make_weyl_context(theta, 1, 0).map_err(core)?;
            let bands = energies_on_grid(&FiberedRep::new(base, RepKind::Reference), &hofstadter(&base), g).map_err(core)?;
            let report = detect_gaps(&bands, cfg.tol).map_err(core)?;
            let mut labels = Vec::new();
            if want_labels {
                for &(q, r) in &cfg.reps {
                    let c = make_weyl_context(theta, q, r).map_err(core)?;
                    labels.push(label_internal(&c, g, &report));
                }
            }
            Ok(ThetaJob { theta, bands, report, labels })
        })
        .collect::<Result<_, _>>()?;

    let mut all_ok = true;
    for job in &jobs {
        for (res, (q, r)) in job.labels.iter().zip(&cfg.reps) {
            if let Err(msg) = res {
                eprintln!("theta {} rep ({q},{r}): verification failed: {msg}", job.theta);
                all_ok = false;
            }
        }
    }
    println!("butterfly: {} values of theta, grid {}", jobs.len(), cfg.grid);

    if cfg.wants(Format::Csv) {
        let path = write_file(&cfg.out, "butterfly.csv", |w| {
            writeln!(w, "{SPECTRUM_HEADER}")?;
            for job in &jobs {
                write_spectrum_csv(w, job.theta, &job.bands)?;
            }
            Ok(())
        })?;
        println!("wrote {}", path.display());
    }
    if cfg.wants(Format::Json) {
        let doc: Vec<_> = jobs
            .iter()
            .map(|job| {
                let labels: Vec<_> = cfg
                    .reps
                    .iter()
                    .zip(&job.labels)
                    .map(|((q, r), res)| match res {
                        Ok(records) => json!({"q": q, "r": r, "records": records}),
                        Err(msg) => json!({"q": q, "r": r, "error": msg}),
                    })
                    .collect();
                json!({"theta": job.theta.to_string(), "report": job.report, "labels": labels})
            })
            .collect();
        let path = write_text(&cfg.out, "butterfly.json", &json_text(&doc))?;
        println!("wrote {}", path.display());
    }
    if cfg.wants(Format::Svg) {
        let plain: Vec<ThetaColumn> = jobs
            .iter()
            .map(|j| ThetaColumn { theta: j.theta, bands: band_intervals(&j.report), gaps: Vec::new() })
            .collect();
        let path = write_text(&cfg.out, "butterfly.svg", &svg::butterfly(&plain))?;
        println!("wrote {}", path.display());
        for (idx, &(q, r)) in cfg.reps.iter().enumerate() {
            let cols: Vec<ThetaColumn> = jobs
                .iter()
                .map(|j| {
                    let t_of = |d: i64| j.labels[idx].as_ref().ok().and_then(|recs| recs.iter().find(|x| x.d == d)).map(|x| x.t);
                    let gaps = j.report.internal().iter().map(|gp| (gp.lower, gp.upper, t_of(gp.d))).collect();
                    ThetaColumn { theta: j.theta, bands: band_intervals(&j.report), gaps }
                })
                .collect();
            let path = write_text(&cfg.out, &format!("butterfly_q{q}_r{r}.svg"), &svg::butterfly_by_gap(&cols, q, r))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(all_ok)
}

/// Verified records for the internal gaps of `report` under twist `c`.
fn label_internal(c: &WeylContext, g: Grid, report: &GapReport) -> Result<Vec<TknnRecord>, String> {
    if report.internal().is_empty() {
        return Ok(Vec::new());
    }
    let v = TknnVerifier::new(*c, g).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for gap in report.internal() {
        let res = v.verify(gap.g, gap.fermi).map_err(|e| format!("gap {}: {e}", gap.g))?;
        if !res.passed() {
            return Err(format!("gap {}: identity check failed {:?}", gap.g, res.checks));
        }
        out.push(res.record);
    }
    Ok(out)
}
