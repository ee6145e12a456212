//! The `verify` subcommand: quadrature, path-assumption, stabilization,
//! consistency and stability checks, itemized as PASS/FAIL/SKIP.

use std::f64::consts::PI;
use std::fmt;

use cutfem::assembly::strong_interpolant;
use cutfem::geometry::{LevelSet, Vec2};
use cutfem::space::DofVector;
use cutfem::stabilization::{stab_seminorm, StabilizationFamily, StabilizationSpec};
use cutfem::study::{stability_ratio, Discretization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Experiment;
use crate::error::CliError;
use crate::output::{OutputDir, Table};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const KERNEL_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-12;
pub const HALFPLANE_TOL: f64 = 1e-12;
pub const STRONG_CONSISTENCY_TOL: f64 = 1e-12;
pub const STABILITY_GROWTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub level: Option<usize>,
    pub status: Status,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, level: Option<usize>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            level,
            status: if passed { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    fn skip(name: impl Into<String>, level: Option<usize>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            level,
            status: Status::Skip,
            detail: note.into(),
        }
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DofVector<f64> {
    DofVector((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Clips a convex counter-clockwise polygon against `normal . x < offset`.
fn clip_polygon(poly: &[Vec2<f64>], normal: Vec2<f64>, offset: f64) -> Vec<Vec2<f64>> {
    let mut out = Vec::new();
    for k in 0..poly.len() {
        let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
        let (fa, fb) = (normal.dot(a) - offset, normal.dot(b) - offset);
        if fa < 0.0 {
            out.push(a);
        }
        if (fa < 0.0) != (fb < 0.0) {
            out.push(a.lerp(b, fa / (fa - fb)));
        }
    }
    out
}

fn polygon_area(poly: &[Vec2<f64>]) -> f64 {
    (0..poly.len())
        .map(|k| poly[k].cross(poly[(k + 1) % poly.len()]))
        .sum::<f64>()
        * 0.5
}

fn quadrature_check(exp: &Experiment, disc: &Discretization<f64>, n: usize) -> Check {
    let active = &disc.active;
    let area: f64 = active
        .elements
        .iter()
        .map(|&e| {
            active
                .volume_rule(e, exp.settings.volume_order)
                .map(|r| r.total_weight())
        })
        .sum::<Result<f64, _>>()
        .unwrap_or(f64::NAN);
    let perimeter: f64 = active
        .cut_elements()
        .map(|e| active.interface_rule(e, 2).map(|r| r.total_weight()))
        .sum::<Result<f64, _>>()
        .unwrap_or(f64::NAN);
    let h = disc.h();
    let bbox = exp.bbox;
    match exp.level_set {
        LevelSet::Circle { center, radius } => {
            let inside = center.x - radius > bbox.min.x
                && center.x + radius < bbox.max.x
                && center.y - radius > bbox.min.y
                && center.y + radius < bbox.max.y;
            if !inside {
                return Check::skip(
                    "quadrature",
                    Some(n),
                    "circle not contained in the box; no closed form",
                );
            }
            // Inscribed chords of length at most h: deficits are bounded by
            // pi h^2 / 6 (area) and pi h^2 / (12 r) (length), doubled here.
            let (da, dp) = (PI * radius * radius - area, 2.0 * PI * radius - perimeter);
            let (ba, bp) = (PI * h * h / 3.0, PI * h * h / (6.0 * radius));
            Check::new(
                "quadrature",
                Some(n),
                (0.0..=ba).contains(&da) && (0.0..=bp).contains(&dp),
                format!(
                    "area deficit {da:.3e} (<= {ba:.3e}); perimeter deficit {dp:.3e} (<= {bp:.3e})"
                ),
            )
        }
        LevelSet::HalfPlane { normal, offset } => {
            let corners = [
                bbox.min,
                Vec2::new(bbox.max.x, bbox.min.y),
                bbox.max,
                Vec2::new(bbox.min.x, bbox.max.y),
            ];
            let poly = clip_polygon(&corners, normal, offset);
            let exact_area = polygon_area(&poly);
            let on_line = |p: Vec2<f64>| (normal.dot(p) - offset).abs() <= 1e-12;
            let exact_length: f64 = (0..poly.len())
                .filter(|&k| on_line(poly[k]) && on_line(poly[(k + 1) % poly.len()]))
                .map(|k| poly[k].distance(poly[(k + 1) % poly.len()]))
                .sum();
            let scale = bbox.area().max(1.0);
            let (ea, el) = ((area - exact_area).abs(), (perimeter - exact_length).abs());
            Check::new(
                "quadrature",
                Some(n),
                ea <= HALFPLANE_TOL * scale && el <= HALFPLANE_TOL * scale,
                format!(
                    "area error {ea:.3e}; interface length error {el:.3e} (<= {:.0e})",
                    HALFPLANE_TOL * scale
                ),
            )
        }
    }
}

fn assumption_check(
    exp: &Experiment,
    disc: &Discretization<f64>,
    n: usize,
    out: &mut OutputDir,
) -> Result<Check, CliError> {
    let report = disc.verify(exp.max_path_length);
    let mut buf = Vec::new();
    report.write_csv(&mut buf).expect("writing to memory");
    out.write(
        &format!("assumptions_n{n}.csv"),
        &String::from_utf8(buf).expect("utf-8 csv"),
    )?;
    let counts = format!(
        "L_max {}: {} small elements, {} unstable dofs, a2_path {}, a3_small_pair {}, a3_mixed_pair {}",
        exp.max_path_length,
        disc.partition.small.len(),
        disc.dofs.small.len(),
        report.count(cutfem::classification::ViolationKind::A2Path),
        report.count(cutfem::classification::ViolationKind::A3SmallPair),
        report.count(cutfem::classification::ViolationKind::A3MixedPair),
    );
    Ok(Check::new(
        "assumptions A2/A3",
        Some(n),
        report.is_empty(),
        counts,
    ))
}

fn stabilization_checks(
    exp: &Experiment,
    disc: &Discretization<f64>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let m = exp.settings.stabilization.m;
    let tau = exp.settings.stabilization.tau;
    let affines: [fn(Vec2<f64>) -> f64; 3] = [|_| 1.0, |x| x.x, |x| x.y];
    for family in StabilizationFamily::ALL {
        let name = format!("stabilization {family}");
        let Ok(spec) = StabilizationSpec::new(family, m, tau) else {
            checks.push(Check::skip(
                name,
                Some(n),
                format!("not defined for m = {m}"),
            ));
            continue;
        };
        if family.uses_agglomeration() && (disc.map.is_empty() || disc.dofs.small.is_empty()) {
            checks.push(Check::skip(
                name,
                Some(n),
                "I^S empty; extension checks skipped",
            ));
            continue;
        }
        let s = disc.stabilization(&spec)?;
        let norm = s.matrix.norm_inf();
        let asym = s.matrix.asymmetry();
        let mut kernel = 0.0f64;
        for f in affines {
            let p = disc.dofmap.interpolate(f);
            let sp = s.matrix.matvec(p.as_slice())?;
            let worst = sp.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            kernel = kernel.max(worst / (norm * p.max_abs()).max(f64::MIN_POSITIVE));
        }
        let mut min_form = f64::INFINITY;
        for _ in 0..exp.samples {
            let v = random_vector(rng, disc.num_dofs());
            let vv: f64 = v.as_slice().iter().map(|x| x * x).sum();
            min_form = min_form
                .min(s.matrix.quadratic_form(v.as_slice())? / (norm * vv).max(f64::MIN_POSITIVE));
        }
        let passed = asym <= SYMMETRY_TOL * norm && kernel <= KERNEL_TOL && min_form >= -PSD_TOL;
        checks.push(Check::new(
            name,
            Some(n),
            passed,
            format!(
                "asymmetry {:.2e}; affine kernel residual {kernel:.2e}; min v'Sv/(|S| |v|^2) {min_form:.2e}",
                asym / norm.max(f64::MIN_POSITIVE)
            ),
        ));
    }
    Ok(checks)
}

fn strong_consistency_check(
    exp: &Experiment,
    disc: &Discretization<f64>,
    n: usize,
) -> Result<Check, CliError> {
    let name = "strong consistency";
    if disc.dofs.small.is_empty() {
        return Ok(Check::skip(
            name,
            Some(n),
            "I^S empty; nodal penalty vanishes identically",
        ));
    }
    let data = exp.problem_data();
    let u = data
        .exact
        .expect("manufactured problems have a reference solution");
    let spec = StabilizationSpec::new(
        StabilizationFamily::Nodal,
        exp.settings.stabilization.m,
        exp.settings.stabilization.tau,
    )?;
    let s = disc.stabilization(&spec)?;
    let pu = strong_interpolant(|x| u(x), &disc.active, &disc.dofmap, &disc.dofs, &disc.map)?;
    let ratio = stab_seminorm(&s, &pu)? / (pu.max_abs() * s.matrix.norm_inf().sqrt());
    Ok(Check::new(
        name,
        Some(n),
        ratio <= STRONG_CONSISTENCY_TOL,
        format!("|Pi u|_s / (|Pi u|_inf |S|^1/2) = {ratio:.3e} (<= {STRONG_CONSISTENCY_TOL:.0e})"),
    ))
}

fn stability_checks(
    exp: &Experiment,
    discs: &[Discretization<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    if discs.iter().any(|d| d.dofs.small.is_empty()) {
        checks.push(Check::skip(
            "stability ratio",
            None,
            "I^S empty on some level; extension checks skipped",
        ));
        return Ok(checks);
    }
    for m in [0u32, 1] {
        let spec = StabilizationSpec::new(
            StabilizationFamily::Nodal,
            m,
            exp.settings.stabilization.tau,
        )?;
        let mut worst = Vec::new();
        for d in discs {
            let s = d.stabilization(&spec)?;
            let mut w = 0.0f64;
            for _ in 0..exp.samples {
                w = w.max(stability_ratio(d, &s, &random_vector(rng, d.num_dofs()))?);
            }
            worst.push(w);
        }
        let growth: Vec<f64> = worst.windows(2).map(|p| p[1] / p[0]).collect();
        let fmt = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        checks.push(Check::new(
            format!("stability ratio m={m}"),
            None,
            worst.iter().all(|w| w.is_finite()) && growth.iter().all(|&g| g <= STABILITY_GROWTH),
            format!(
                "max ratio per level [{}]; growth [{}] (<= {STABILITY_GROWTH})",
                fmt(&worst),
                fmt(&growth)
            ),
        ));
    }
    Ok(checks)
}

pub fn run_checks(exp: &Experiment, out: &mut OutputDir) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(exp.seed);
    let mut checks = Vec::new();
    let mut discs = Vec::new();
    for &n in &exp.levels {
        let d = Discretization::structured(
            n,
            exp.bbox,
            &exp.level_set,
            exp.settings.gamma,
            exp.settings.target,
        )?;
        if exp.verbose {
            eprintln!(
                "[verify] n = {n}, {} dofs, {} unstable",
                d.num_dofs(),
                d.dofs.small.len()
            );
        }
        checks.push(quadrature_check(exp, &d, n));
        checks.push(assumption_check(exp, &d, n, out)?);
        if d.dofs.small.is_empty() {
            checks.push(Check::skip("unstable dofs", Some(n), "I^S empty"));
        }
        checks.extend(stabilization_checks(exp, &d, n, &mut rng)?);
        checks.push(strong_consistency_check(exp, &d, n)?);
        discs.push(d);
    }
    checks.extend(stability_checks(exp, &discs, &mut rng)?);
    Ok(checks)
}

pub fn verify(exp: &Experiment) -> Result<(), CliError> {
    let mut out = OutputDir::create(&exp.output_dir)?;
    let checks = run_checks(exp, &mut out)?;
    let mut table = Table::new(&["check", "level", "status", "detail"]);
    for c in &checks {
        let level = c.level.map(|n| n.to_string()).unwrap_or_default();
        let where_ = c.level.map(|n| format!(" n={n}")).unwrap_or_default();
        println!("{} {}{where_}: {}", c.status, c.name, c.detail);
        table.push(vec![
            c.name.clone(),
            level,
            c.status.to_string(),
            c.detail.replace(',', ";"),
        ]);
    }
    out.table("verify.csv", &table)?;
    out.metadata(exp)?;
    let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
    let skipped = checks.iter().filter(|c| c.status == Status::Skip).count();
    println!(
        "{} passed, {failed} failed, {skipped} skipped",
        checks.len() - failed - skipped
    );
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::VerifyFailed { failed })
    }
}
