//! The `solve`, `convergence`, `tau-sweep` and `condition` subcommands.

use cutfem::linalg::{condition_estimate_with, EigenOptions};
use cutfem::study::{
    self, loglog_slope, observed_rates, tau_sweep, Discretization, SystemMatrices,
};

use crate::config::Experiment;
use crate::error::CliError;
use crate::output::{gnuplot_loglog, num, param, Curve, OutputDir, Table};

fn discretization(exp: &Experiment, n: usize) -> Result<Discretization<f64>, CliError> {
    let s = &exp.settings;
    Ok(Discretization::structured(
        n,
        exp.bbox,
        &exp.level_set,
        s.gamma,
        s.target,
    )?)
}

fn progress(exp: &Experiment, msg: impl AsRef<str>) {
    if exp.verbose {
        eprintln!("[{}] {}", exp.command.name(), msg.as_ref());
    }
}

fn warn(matrices: &SystemMatrices<f64>) {
    for w in &matrices.stabilization.warnings {
        eprintln!("warning: {w}");
    }
}

fn dump(out: &mut OutputDir, tag: &str, matrices: &SystemMatrices<f64>) -> Result<(), CliError> {
    out.matrix(&format!("system_{tag}.csv"), &matrices.system)?;
    out.matrix(
        &format!("stabilization_{tag}.csv"),
        &matrices.stabilization.matrix,
    )?;
    out.vector(&format!("load_{tag}.csv"), &matrices.nitsche.load)
}

fn rate_cell(rates: &[f64], k: usize) -> String {
    if k == 0 {
        String::new()
    } else {
        format!("{:.6}", rates[k - 1])
    }
}

pub fn solve(exp: &Experiment) -> Result<(), CliError> {
    let data = exp.problem_data();
    let disc = discretization(exp, exp.n)?;
    progress(exp, format!("n = {}, {} dofs", exp.n, disc.num_dofs()));
    let sol = study::solve(&disc, &data, &exp.settings)?;
    warn(&sol.matrices);

    let mut out = OutputDir::create(&exp.output_dir)?;
    let mut buf = Vec::new();
    sol.u
        .write_csv(&disc.dofmap, &mut buf)
        .expect("writing to memory");
    out.write("solution.csv", &String::from_utf8(buf).expect("utf-8 csv"))?;

    let spec = exp.settings.stabilization;
    let (l2, h1) = sol
        .errors
        .map_or((f64::NAN, f64::NAN), |e| (e.l2, e.h1_semi));
    let mut summary = Table::new(&[
        "n",
        "h",
        "dofs",
        "family",
        "m",
        "tau",
        "l2_error",
        "h1_error",
        "iterations",
        "residual",
    ]);
    summary.push(vec![
        exp.n.to_string(),
        num(disc.h()),
        disc.num_dofs().to_string(),
        spec.family.to_string(),
        spec.m.to_string(),
        param(spec.tau),
        num(l2),
        num(h1),
        sol.report.iterations.to_string(),
        num(sol.report.residual),
    ]);
    out.table("summary.csv", &summary)?;
    out.metadata(exp)?;
    if exp.dump_matrices {
        dump(&mut out, &format!("n{}", exp.n), &sol.matrices)?;
    }

    println!(
        "n = {}  h = {:.4e}  dofs = {}  L2 = {:.4e}  H1 = {:.4e}  iterations = {}  residual = {:.2e}",
        exp.n,
        disc.h(),
        disc.num_dofs(),
        l2,
        h1,
        sol.report.iterations,
        sol.report.residual
    );
    Ok(())
}

pub fn convergence(exp: &Experiment) -> Result<(), CliError> {
    let data = exp.problem_data();
    let mut out = OutputDir::create(&exp.output_dir)?;
    let spec = exp.settings.stabilization;
    let mut table = Table::new(&[
        "family",
        "m",
        "tau",
        "n",
        "h",
        "dofs",
        "l2_error",
        "h1_error",
        "l2_rate",
        "h1_rate",
        "iterations",
        "residual",
    ]);
    let mut anchor = None;
    for &tau in &exp.taus {
        let settings = exp.settings_with_tau(tau);
        let (mut hs, mut l2, mut h1, mut rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &n in &exp.levels {
            let disc = discretization(exp, n)?;
            progress(
                exp,
                format!("tau = {tau}, n = {n}, {} dofs", disc.num_dofs()),
            );
            let sol = study::solve(&disc, &data, &settings)?;
            warn(&sol.matrices);
            if exp.dump_matrices {
                dump(&mut out, &format!("n{n}_tau{tau}"), &sol.matrices)?;
            }
            let e = sol
                .errors
                .expect("manufactured problems have a reference solution");
            hs.push(disc.h());
            l2.push(e.l2);
            h1.push(e.h1_semi);
            rows.push((n, disc.num_dofs(), sol.report));
        }
        let (l2_rates, h1_rates) = (observed_rates(&hs, &l2), observed_rates(&hs, &h1));
        anchor.get_or_insert((hs[0], l2[0], h1[0]));
        println!("{} tau = {tau}", spec.family);
        println!(
            "{:>6} {:>12} {:>12} {:>8} {:>12} {:>8}",
            "n", "h", "L2", "rate", "H1", "rate"
        );
        for (k, (n, dofs, report)) in rows.into_iter().enumerate() {
            table.push(vec![
                spec.family.to_string(),
                spec.m.to_string(),
                param(tau),
                n.to_string(),
                num(hs[k]),
                dofs.to_string(),
                num(l2[k]),
                num(h1[k]),
                rate_cell(&l2_rates, k),
                rate_cell(&h1_rates, k),
                report.iterations.to_string(),
                num(report.residual),
            ]);
            println!(
                "{n:>6} {:>12.4e} {:>12.4e} {:>8} {:>12.4e} {:>8}",
                hs[k],
                l2[k],
                rate_cell(&l2_rates, k),
                h1[k],
                rate_cell(&h1_rates, k)
            );
        }
    }
    out.table("convergence.csv", &table)?;

    let mut curves = Vec::new();
    for &tau in &exp.taus {
        for (label, column) in [("L2", 7), ("H1", 8)] {
            curves.push(Curve {
                title: format!("{label} tau={tau}"),
                x_column: 5,
                y_column: column,
                filter: Some((3, tau)),
            });
        }
    }
    let (h0, e0, g0) = anchor.expect("at least one tau");
    let references = [
        ("O(h^2)".to_string(), e0.ln() - 2.0 * h0.ln(), 2.0),
        ("O(h)".to_string(), g0.ln() - h0.ln(), 1.0),
    ];
    out.write(
        "convergence.gp",
        &gnuplot_loglog(
            "convergence.csv",
            "convergence.svg",
            "log h",
            "log error",
            &curves,
            &references,
        ),
    )?;
    out.metadata(exp)
}

pub fn tau_sweep_cmd(exp: &Experiment) -> Result<(), CliError> {
    let data = exp.problem_data();
    let disc = discretization(exp, exp.n)?;
    progress(
        exp,
        format!(
            "n = {}, {} dofs, {} unstable",
            exp.n,
            disc.num_dofs(),
            disc.dofs.small.len()
        ),
    );
    let rows = tau_sweep(&disc, exp.n, &exp.taus, &data, &exp.settings)?;
    let mut out = OutputDir::create(&exp.output_dir)?;
    let mut table = Table::new(&[
        "n",
        "h",
        "tau",
        "nodal_defect",
        "extension_defect",
        "relative_extension_defect",
        "max_abs",
        "seminorm",
        "l2_error",
        "h1_error",
        "iterations",
        "residual",
    ]);
    println!(
        "{:>10} {:>12} {:>12} {:>12}",
        "tau", "delta", "|u-Eu|_inf", "|u|_s"
    );
    for r in &rows {
        table.push(vec![
            r.n.to_string(),
            num(r.h),
            param(r.tau),
            num(r.nodal_defect),
            num(r.extension_defect),
            num(r.extension_defect / r.max_abs),
            num(r.max_abs),
            num(r.seminorm),
            num(r.l2_error),
            num(r.h1_error),
            r.iterations.to_string(),
            num(r.residual),
        ]);
        println!(
            "{:>10e} {:>12.4e} {:>12.4e} {:>12.4e}",
            r.tau, r.nodal_defect, r.extension_defect, r.seminorm
        );
    }
    out.table("tau_sweep.csv", &table)?;

    let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let mut summary = Table::new(&["quantity", "loglog_slope_vs_tau"]);
    if rows.len() >= 2 && !disc.dofs.small.is_empty() {
        for (name, values) in [
            (
                "nodal_defect",
                rows.iter().map(|r| r.nodal_defect).collect::<Vec<_>>(),
            ),
            (
                "extension_defect",
                rows.iter().map(|r| r.extension_defect).collect(),
            ),
            ("seminorm", rows.iter().map(|r| r.seminorm).collect()),
        ] {
            let slope = loglog_slope(&taus, &values);
            summary.push(vec![name.to_string(), format!("{slope:.6}")]);
            println!("slope of log {name} vs log tau: {slope:.4}");
        }
    } else {
        println!("no unstable dofs or fewer than two tau values; slopes not reported");
    }
    out.table("tau_sweep_summary.csv", &summary)?;
    let curves = [
        Curve {
            title: "max |omega_i . u_h|".into(),
            x_column: 3,
            y_column: 4,
            filter: None,
        },
        Curve {
            title: "|u_h - E u_h|_inf".into(),
            x_column: 3,
            y_column: 5,
            filter: None,
        },
    ];
    let references = match rows.first() {
        Some(r) if r.nodal_defect > 0.0 => vec![(
            "O(tau^-1/2)".to_string(),
            r.nodal_defect.ln() + 0.5 * r.tau.ln(),
            -0.5,
        )],
        _ => Vec::new(),
    };
    out.write(
        "tau_sweep.gp",
        &gnuplot_loglog(
            "tau_sweep.csv",
            "tau_sweep.svg",
            "log tau",
            "log defect",
            &curves,
            &references,
        ),
    )?;
    out.metadata(exp)
}

pub fn condition(exp: &Experiment) -> Result<(), CliError> {
    let data = exp.problem_data();
    let mut out = OutputDir::create(&exp.output_dir)?;
    let spec = exp.settings.stabilization;
    let options = EigenOptions {
        tol: exp.eigen_tol,
        seed: exp.seed,
        ..EigenOptions::default()
    };
    let mut table = Table::new(&[
        "family",
        "m",
        "tau",
        "n",
        "h",
        "dofs",
        "lambda_min",
        "lambda_max",
        "kappa",
        "power_iterations",
        "inverse_iterations",
    ]);
    let discs: Vec<_> = exp
        .levels
        .iter()
        .map(|&n| discretization(exp, n))
        .collect::<Result<_, _>>()?;
    let mut kappas = vec![Vec::new(); exp.taus.len()];
    let hs: Vec<f64> = discs.iter().map(|d| d.h()).collect();
    for (t, &tau) in exp.taus.iter().enumerate() {
        let settings = exp.settings_with_tau(tau);
        for (disc, &n) in discs.iter().zip(&exp.levels) {
            progress(exp, format!("tau = {tau}, n = {n}"));
            let matrices = study::assemble(disc, &data, &settings)?;
            warn(&matrices);
            if exp.dump_matrices {
                dump(&mut out, &format!("n{n}_tau{tau}"), &matrices)?;
            }
            let est = condition_estimate_with(&matrices.system, &options)?;
            kappas[t].push(est.kappa);
            table.push(vec![
                spec.family.to_string(),
                spec.m.to_string(),
                param(tau),
                n.to_string(),
                num(disc.h()),
                disc.num_dofs().to_string(),
                num(est.lambda_min),
                num(est.lambda_max),
                num(est.kappa),
                est.power_iterations.to_string(),
                est.inverse_iterations.to_string(),
            ]);
        }
    }
    out.table("condition.csv", &table)?;

    let mut summary = Table::new(&["tau", "kappa_slope_vs_h"]);
    println!("{} condition numbers", spec.family);
    for (t, &tau) in exp.taus.iter().enumerate() {
        let slope = loglog_slope(&hs, &kappas[t]);
        summary.push(vec![param(tau), format!("{slope:.6}")]);
        let list: Vec<String> = kappas[t].iter().map(|k| format!("{k:.4e}")).collect();
        println!(
            "tau = {tau}: kappa [{}], slope vs h {slope:.4}",
            list.join(", ")
        );
    }
    out.table("condition_summary.csv", &summary)?;
    if exp.taus.len() > 1 {
        let increasing = (0..exp.levels.len()).all(|l| {
            let mut order: Vec<(f64, f64)> = exp
                .taus
                .iter()
                .zip(&kappas)
                .map(|(&t, k)| (t, k[l]))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            order.windows(2).all(|w| w[1].1 > w[0].1)
        });
        println!(
            "kappa increasing in tau at every level: {}",
            if increasing { "yes" } else { "no" }
        );
    }

    let curves: Vec<Curve> = exp
        .taus
        .iter()
        .map(|&tau| Curve {
            title: format!("kappa tau={tau}"),
            x_column: 5,
            y_column: 9,
            filter: Some((3, tau)),
        })
        .collect();
    let references = [(
        "O(h^-2)".to_string(),
        kappas[0][0].ln() + 2.0 * hs[0].ln(),
        -2.0,
    )];
    out.write(
        "condition.gp",
        &gnuplot_loglog(
            "condition.csv",
            "condition.svg",
            "log h",
            "log kappa",
            &curves,
            &references,
        ),
    )?;
    out.metadata(exp)
}
