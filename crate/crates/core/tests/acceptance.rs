//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported but do not fail `cargo test` unless
//! `CUTFEM_ACCEPTANCE_STRICT=1` is set, so the remaining test binaries still run.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cutfem::assembly::{clement_interpolate, discrete_extension, strong_interpolant};
use cutfem::classification::AgglomerationTarget;
use cutfem::cut::extract_active_mesh;
use cutfem::geometry::{BoundingBox, LevelSet, Vec2};
use cutfem::linalg::{condition_estimate, solve_spd, SparseMatrix};
use cutfem::mesh::BackgroundMesh;
use cutfem::problem::ProblemData;
use cutfem::space::DofVector;
use cutfem::stabilization::{stab_seminorm, StabilizationFamily, StabilizationSpec};
use cutfem::study::{
    condition_row, convergence_study, loglog_slope, observed_rates, stability_ratio, tau_sweep,
    ConvergenceRow, Discretization, SolverSettings, DEFAULT_SWEEP_TAUS, DEFAULT_SWEEP_TOL,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use StabilizationFamily::*;

const LEVELS: [usize; 4] = [8, 16, 32, 64];
const FAMILIES: [StabilizationFamily; 3] = [Nodal, FaceGradient, ExtensionGradient];
const RADIUS: f64 = 0.5;
const GAMMA: f64 = 0.5;
const EIGEN_TOL: f64 = 1e-6;

const GEOMETRY_MIN_SLOPE: f64 = 1.9;
const GEOMETRY_BUDGET: Duration = Duration::from_secs(5);
const PATCH_MAX_ERROR: f64 = 1e-10;
const PATCH_SOLVER_TOL: f64 = 1e-14;
const PATCH_BUDGET: Duration = Duration::from_secs(1);
const L2_RATE: (f64, f64) = (1.8, 2.2);
const H1_RATE: (f64, f64) = (0.85, 1.15);
const CONVERGENCE_BUDGET: Duration = Duration::from_secs(120);
const NODAL_LOCKING_FACTOR: f64 = 2.0;
const FACE_LOCKING_FACTOR: f64 = 5.0;
const LOCKING_CONTRAST: f64 = 10.0;
const LOCKING_TAU: f64 = 1e3;
const KAPPA_SLOPE: (f64, f64) = (-2.3, -1.7);
const KAPPA_TAUS: [f64; 3] = [0.1, 10.0, 1e3];
const STRONG_SEMINORM_TOL: f64 = 1e-12;
const STRONG_KERNEL_TOL: f64 = 1e-13;
const STRONG_SAMPLES: usize = 100;
const LIMIT_SLOPE: (f64, f64) = (-0.6, -0.4);
const LIMIT_MESH: usize = 32;
const STABILITY_LEVELS: [usize; 3] = [16, 32, 64];
const STABILITY_SAMPLES: usize = 200;
const STABILITY_GROWTH: f64 = 2.0;
const WEAK_MIN_SLOPE: f64 = 0.9;
const WEAK_TAU: f64 = 1.0;
const WEAK_SCALING_TOL: f64 = 1e-12;
const ORACLE_SEMINORM_CASES: usize = 200;
const ORACLE_SOLVE_CASES: usize = 150;
const ORACLE_EIGEN_CASES: usize = 150;
const ORACLE_SEMINORM_TOL: f64 = 1e-12;
const ORACLE_SOLVE_TOL: f64 = 1e-10;
const ORACLE_EIGEN_TOL: f64 = 0.01;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn bbox() -> BoundingBox<f64> {
    BoundingBox::square(-1.0, 1.0).unwrap()
}

fn circle() -> LevelSet<f64> {
    LevelSet::circle(Vec2::new(0.0, 0.0), RADIUS).unwrap()
}

fn cosine() -> ProblemData<f64> {
    ProblemData::cosine_radial(Vec2::new(0.0, 0.0))
}

fn disc(n: usize) -> Discretization<f64> {
    Discretization::structured(n, bbox(), &circle(), GAMMA, AgglomerationTarget::Large).unwrap()
}

fn settings(family: StabilizationFamily, tau: f64) -> SolverSettings<f64> {
    SolverSettings::default().with_family(family).with_tau(tau)
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn geometry() -> Outcome {
    let start = Instant::now();
    let (mut hs, mut area_err, mut perim_err) = (vec![], vec![], vec![]);
    for n in LEVELS {
        let active =
            extract_active_mesh(&BackgroundMesh::structured(n, bbox()).unwrap(), &circle())
                .unwrap();
        let area: f64 = active
            .elements
            .iter()
            .map(|&e| active.volume_rule(e, 1).unwrap().total_weight())
            .sum();
        let perimeter: f64 = active
            .cut_elements()
            .map(|e| active.interface_rule(e, 1).unwrap().total_weight())
            .sum();
        hs.push(active.h());
        area_err.push((area - std::f64::consts::PI * RADIUS * RADIUS).abs());
        perim_err.push((perimeter - 2.0 * std::f64::consts::PI * RADIUS).abs());
    }
    let (sa, sp) = (loglog_slope(&hs, &area_err), loglog_slope(&hs, &perim_err));
    let elapsed = start.elapsed();
    Outcome {
        id: 1,
        name: "geometry oracle",
        passed: sa >= GEOMETRY_MIN_SLOPE && sp >= GEOMETRY_MIN_SLOPE && elapsed <= GEOMETRY_BUDGET,
        detail: format!(
            "area slope {sa:.3}, perimeter slope {sp:.3} (>= {GEOMETRY_MIN_SLOPE}); area errors {}, perimeter errors {}; {elapsed:.2?}",
            fmt_list(&area_err),
            fmt_list(&perim_err)
        ),
    }
}

fn patch() -> Outcome {
    let start = Instant::now();
    let ls = LevelSet::half_plane(Vec2::new(1.0, 0.35), 0.23).unwrap();
    let data = ProblemData::affine(0.0, 1.0, 0.0);
    let mut worst: Vec<f64> = Vec::new();
    for family in FAMILIES {
        let d =
            Discretization::structured(16, bbox(), &ls, GAMMA, AgglomerationTarget::Large).unwrap();
        let mut s = settings(family, 0.1);
        s.tol = PATCH_SOLVER_TOL;
        let err = match cutfem::study::solve(&d, &data, &s) {
            Ok(sol) => (0..d.num_dofs())
                .map(|i| (sol.u[i] - d.dofmap.coordinate(i).x).abs())
                .fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        };
        worst.push(err);
    }
    let elapsed = start.elapsed();
    Outcome {
        id: 2,
        name: "patch test",
        passed: worst.iter().all(|&e| e <= PATCH_MAX_ERROR) && elapsed <= PATCH_BUDGET,
        detail: format!(
            "max nodal error nodal/face_gradient/extension_gradient {} (<= {PATCH_MAX_ERROR:e}); {elapsed:.2?}",
            fmt_list(&worst)
        ),
    }
}

struct Studies {
    base: Vec<(StabilizationFamily, Vec<ConvergenceRow>)>,
    nodal_locked: Vec<ConvergenceRow>,
    face_locked: Vec<ConvergenceRow>,
    elapsed: Duration,
}

fn run_studies() -> Result<Studies, String> {
    let start = Instant::now();
    let run = |family, tau, levels: &[usize]| {
        convergence_study(levels, bbox(), &circle(), &cosine(), &settings(family, tau))
            .map_err(|e| format!("{family} tau={tau}: {e}"))
    };
    let mut base = Vec::new();
    for family in FAMILIES {
        base.push((family, run(family, 0.1, &LEVELS)?));
    }
    let elapsed = start.elapsed();
    let nodal_locked = run(Nodal, LOCKING_TAU, &LEVELS)?;
    let face_locked = run(FaceGradient, LOCKING_TAU, &LEVELS[..1])?;
    Ok(Studies {
        base,
        nodal_locked,
        face_locked,
        elapsed,
    })
}

fn convergence(studies: &Result<Studies, String>) -> Outcome {
    let mut out = Outcome {
        id: 3,
        name: "convergence",
        passed: false,
        detail: String::new(),
    };
    let st = match studies {
        Ok(st) => st,
        Err(e) => {
            out.detail = e.clone();
            return out;
        }
    };
    let mut ok = st.elapsed <= CONVERGENCE_BUDGET;
    let mut parts = Vec::new();
    for (family, rows) in &st.base {
        let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let l2: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
        let h1: Vec<f64> = rows.iter().map(|r| r.h1_error).collect();
        let rl2 = *observed_rates(&h, &l2).last().unwrap();
        let rh1 = *observed_rates(&h, &h1).last().unwrap();
        ok &= within(rl2, L2_RATE) && within(rh1, H1_RATE);
        parts.push(format!("{family} L2 {rl2:.3} H1 {rh1:.3}"));
    }
    out.passed = ok;
    out.detail = format!(
        "finest-pair rates: {} (L2 in {L2_RATE:?}, H1 in {H1_RATE:?}); {:.2?}",
        parts.join(", "),
        st.elapsed
    );
    out
}

fn nodal_locking(studies: &Result<Studies, String>) -> Outcome {
    let mut out = Outcome {
        id: 4,
        name: "nodal locking-freeness",
        passed: false,
        detail: String::new(),
    };
    let Ok(st) = studies else {
        out.detail = "studies failed".into();
        return out;
    };
    let base = &st.base.iter().find(|(f, _)| *f == Nodal).unwrap().1;
    let ratios: Vec<f64> = base
        .iter()
        .zip(&st.nodal_locked)
        .map(|(a, b)| b.l2_error / a.l2_error)
        .collect();
    out.passed = ratios
        .iter()
        .all(|r| (1.0 / NODAL_LOCKING_FACTOR..=NODAL_LOCKING_FACTOR).contains(r));
    out.detail = format!(
        "L2(tau=1e3)/L2(tau=0.1) per level {} (within factor {NODAL_LOCKING_FACTOR})",
        fmt_list(&ratios)
    );
    out
}

fn face_locking(studies: &Result<Studies, String>) -> Outcome {
    let mut out = Outcome {
        id: 5,
        name: "face penalty locking",
        passed: false,
        detail: String::new(),
    };
    let Ok(st) = studies else {
        out.detail = "studies failed".into();
        return out;
    };
    let coarse =
        |f: StabilizationFamily| st.base.iter().find(|(g, _)| *g == f).unwrap().1[0].l2_error;
    let face = st.face_locked[0].l2_error / coarse(FaceGradient);
    let nodal = st.nodal_locked[0].l2_error / coarse(Nodal);
    out.passed = face >= FACE_LOCKING_FACTOR && face >= LOCKING_CONTRAST * nodal;
    out.detail = format!(
        "n={}: face ratio {face:.3} (>= {FACE_LOCKING_FACTOR}), nodal ratio {nodal:.3}, contrast {:.3} (>= {LOCKING_CONTRAST})",
        LEVELS[0],
        face / nodal
    );
    out
}

fn conditioning() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut monotone = Vec::new();
    for family in FAMILIES {
        let mut hs = Vec::new();
        let mut kappa = Vec::new();
        for n in LEVELS {
            let d = disc(n);
            let mut per_tau = Vec::new();
            for tau in KAPPA_TAUS {
                match condition_row(&d, n, &cosine(), &settings(family, tau), EIGEN_TOL) {
                    Ok((row, _)) => per_tau.push(row.kappa),
                    Err(e) => {
                        ok = false;
                        parts.push(format!("{family} n={n} tau={tau}: {e}"));
                        per_tau.push(f64::NAN);
                    }
                }
            }
            if !per_tau.windows(2).all(|w| w[1] > w[0]) {
                ok = false;
                monotone.push(format!("{family} n={n} {}", fmt_list(&per_tau)));
            }
            hs.push(d.h());
            kappa.push(per_tau[0]);
        }
        let slope = loglog_slope(&hs, &kappa);
        ok &= within(slope, KAPPA_SLOPE);
        parts.push(format!(
            "{family} slope {slope:.3} kappa {}",
            fmt_list(&kappa)
        ));
    }
    let mono = if monotone.is_empty() {
        "kappa increasing in tau everywhere".to_string()
    } else {
        format!("not increasing in tau: {}", monotone.join("; "))
    };
    Outcome {
        id: 6,
        name: "condition scaling",
        passed: ok,
        detail: format!("{} (slope in {KAPPA_SLOPE:?}); {mono}", parts.join(", ")),
    }
}

fn strong_consistency() -> Outcome {
    let mut ok = true;
    let mut seminorm = Vec::new();
    let mut kernel = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let data = cosine();
    let u = data.exact.clone().unwrap();
    for n in LEVELS {
        let d = disc(n);
        let spec = StabilizationSpec::new(Nodal, 1, 0.1).unwrap();
        let s = d.stabilization(&spec).unwrap();
        let pu = strong_interpolant(|x| u(x), &d.active, &d.dofmap, &d.dofs, &d.map).unwrap();
        let scale = pu.max_abs() * s.matrix.norm_inf().sqrt();
        let value = stab_seminorm(&s, &pu).unwrap();
        ok &= value <= STRONG_SEMINORM_TOL * scale;
        seminorm.push(value / scale);
        let per_level = STRONG_SAMPLES / LEVELS.len();
        for _ in 0..per_level {
            let v = DofVector(common::random_vector(&mut rng, d.num_dofs()));
            let ev = discrete_extension(&v, &d.dofmap, &d.dofs, &d.map).unwrap();
            let sv = s.matrix.matvec(ev.as_slice()).unwrap();
            let worst = sv.iter().fold(0.0f64, |m, x| m.max(x.abs())) / v.max_abs();
            kernel = kernel.max(worst);
        }
    }
    ok &= kernel <= STRONG_KERNEL_TOL;
    Outcome {
        id: 7,
        name: "strong consistency",
        passed: ok,
        detail: format!(
            "|Pi u|_s / (|Pi u|_inf |S|^1/2) per level {} (<= {STRONG_SEMINORM_TOL:e}); max |S Pi v| / |v|_inf over {STRONG_SAMPLES} v {kernel:.3e} (<= {STRONG_KERNEL_TOL:e})",
            fmt_list(&seminorm)
        ),
    }
}

fn penalty_limit() -> Outcome {
    let d = disc(LIMIT_MESH);
    let mut s = settings(Nodal, 1.0);
    s.tol = DEFAULT_SWEEP_TOL;
    let mut out = Outcome {
        id: 8,
        name: "penalty limit",
        passed: false,
        detail: String::new(),
    };
    match tau_sweep(&d, LIMIT_MESH, &DEFAULT_SWEEP_TAUS, &cosine(), &s) {
        Ok(rows) => {
            let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
            let delta: Vec<f64> = rows.iter().map(|r| r.nodal_defect).collect();
            let semi: Vec<f64> = rows.iter().map(|r| r.seminorm).collect();
            let slope = loglog_slope(&taus, &delta);
            out.passed = within(slope, LIMIT_SLOPE);
            out.detail = format!(
                "n={LIMIT_MESH}: slope of max|omega_i.u| vs tau {slope:.4} (in {LIMIT_SLOPE:?}); delta {}; seminorm slope {:.4}",
                fmt_list(&delta),
                loglog_slope(&taus, &semi)
            );
        }
        Err(e) => out.detail = e.to_string(),
    }
    out
}

fn stability() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for m in [0u32, 1] {
        let mut ratios = Vec::new();
        for n in STABILITY_LEVELS {
            let d = disc(n);
            let s = d
                .stabilization(&StabilizationSpec::new(Nodal, m, 0.1).unwrap())
                .unwrap();
            let worst = (0..STABILITY_SAMPLES)
                .map(|_| {
                    let v = DofVector(common::random_vector(&mut rng, d.num_dofs()));
                    stability_ratio(&d, &s, &v).unwrap()
                })
                .fold(0.0f64, f64::max);
            ratios.push(worst);
        }
        let growth: Vec<f64> = ratios.windows(2).map(|w| w[1] / w[0]).collect();
        ok &= growth.iter().all(|&g| g <= STABILITY_GROWTH);
        parts.push(format!(
            "m={m} max ratio {} growth {}",
            fmt_list(&ratios),
            fmt_list(&growth)
        ));
    }
    Outcome {
        id: 9,
        name: "stability ratio",
        passed: ok,
        detail: format!("{} (growth <= {STABILITY_GROWTH})", parts.join("; ")),
    }
}

fn weak_consistency() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut worst_scaling = 0.0f64;
    let u = cosine().exact.unwrap();
    let discs: Vec<_> = LEVELS.iter().map(|&n| disc(n)).collect();
    let interpolants: Vec<_> = discs
        .iter()
        .map(|d| clement_interpolate(|x| u(x), &d.active, &d.dofmap).unwrap())
        .collect();
    for family in StabilizationFamily::ALL {
        let mut hs = Vec::new();
        let mut norms = Vec::new();
        for (d, pu) in discs.iter().zip(&interpolants) {
            let spec = StabilizationSpec::new(family, 1, WEAK_TAU).unwrap();
            let s1 = d.stabilization(&spec).unwrap();
            let s4 = d.stabilization(&spec.with_tau(4.0 * WEAK_TAU)).unwrap();
            let (n1, n4) = (
                stab_seminorm(&s1, pu).unwrap(),
                stab_seminorm(&s4, pu).unwrap(),
            );
            worst_scaling = worst_scaling.max((n4 / (2.0 * n1) - 1.0).abs());
            hs.push(d.h());
            norms.push(n1);
        }
        let slope = loglog_slope(&hs, &norms);
        ok &= slope >= WEAK_MIN_SLOPE;
        parts.push(format!("{family} {slope:.3}"));
    }
    ok &= worst_scaling <= WEAK_SCALING_TOL;
    Outcome {
        id: 10,
        name: "weak consistency",
        passed: ok,
        detail: format!(
            "seminorm slopes {} (>= {WEAK_MIN_SLOPE}); tau^1/2 scaling deviation {worst_scaling:.2e} (<= {WEAK_SCALING_TOL:e})",
            parts.join(", ")
        ),
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Discretization<f64>, StabilizationSpec<f64>) {
    loop {
        let n = rng.gen_range(4..=12);
        let center = Vec2::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        let ls = LevelSet::circle(center, rng.gen_range(0.3..0.7)).unwrap();
        let gamma = rng.gen_range(0.2..0.8);
        let family = StabilizationFamily::ALL[rng.gen_range(0..5)];
        let m = if family == ExtensionGradient {
            1
        } else {
            rng.gen_range(0..=1)
        };
        let tau = rng.gen_range(0.1..10.0);
        if let Ok(d) = Discretization::structured(n, bbox(), &ls, gamma, AgglomerationTarget::Large)
        {
            return (d, StabilizationSpec::new(family, m, tau).unwrap());
        }
    }
}

fn oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut seminorm_worst = 0.0f64;
    for _ in 0..ORACLE_SEMINORM_CASES {
        let (d, spec) = random_instance(&mut rng);
        let s = d.stabilization(&spec).unwrap();
        let v = common::random_vector(&mut rng, d.num_dofs());
        let matrix = s.matrix.quadratic_form(&v).unwrap();
        let free = common::seminorm_squared(&spec, &d.active, &d.dofmap, &d.dofs, &d.map, &v);
        let rel = if free == 0.0 {
            matrix.abs()
        } else {
            (matrix - free).abs() / free
        };
        seminorm_worst = seminorm_worst.max(rel);
    }
    let mut solve_worst = 0.0f64;
    for _ in 0..ORACLE_SOLVE_CASES {
        let n = 20;
        let a = common::random_spd(&mut rng, n, 1.0);
        let b = common::random_vector(&mut rng, n);
        let reference = common::gauss_solve(n, &a, &b);
        let err = match solve_spd(&SparseMatrix::from_dense(n, &a), &b, 1e-12) {
            Ok((x, _)) => x
                .iter()
                .zip(&reference)
                .fold(0.0f64, |m, (p, q)| m.max((p - q).abs())),
            Err(_) => f64::INFINITY,
        };
        solve_worst = solve_worst.max(err);
    }
    let mut eigen_worst = 0.0f64;
    for _ in 0..ORACLE_EIGEN_CASES {
        let n = 12;
        let a = common::random_spd(&mut rng, n, 1.0);
        let ev = common::jacobi_eigenvalues(n, &a);
        let reference = ev[n - 1] / ev[0];
        let rel = match condition_estimate(&SparseMatrix::from_dense(n, &a), EIGEN_TOL) {
            Ok(est) => (est.kappa - reference).abs() / reference,
            Err(_) => f64::INFINITY,
        };
        eigen_worst = eigen_worst.max(rel);
    }
    let elapsed = start.elapsed();
    let total = ORACLE_SEMINORM_CASES + ORACLE_SOLVE_CASES + ORACLE_EIGEN_CASES;
    Outcome {
        id: 11,
        name: "oracle equivalences",
        passed: seminorm_worst <= ORACLE_SEMINORM_TOL
            && solve_worst <= ORACLE_SOLVE_TOL
            && eigen_worst <= ORACLE_EIGEN_TOL
            && elapsed <= ORACLE_BUDGET,
        detail: format!(
            "{total} cases: seminorm rel {seminorm_worst:.2e} (<= {ORACLE_SEMINORM_TOL:e}), solve abs {solve_worst:.2e} (<= {ORACLE_SOLVE_TOL:e}), kappa rel {eigen_worst:.2e} (<= {ORACLE_EIGEN_TOL}); {elapsed:.2?}"
        ),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut outcomes = vec![geometry(), patch()];
    let studies = run_studies();
    outcomes.push(convergence(&studies));
    outcomes.push(nodal_locking(&studies));
    outcomes.push(face_locking(&studies));
    outcomes.push(conditioning());
    outcomes.push(strong_consistency());
    outcomes.push(penalty_limit());
    outcomes.push(stability());
    outcomes.push(weak_consistency());
    outcomes.push(oracles());

    println!("acceptance suite");
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} [{:>2}] {}: {}", o.id, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "{} passed, {failed} failed ({:.1?})",
        outcomes.len() - failed,
        start.elapsed()
    );
    let strict = std::env::var("CUTFEM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
