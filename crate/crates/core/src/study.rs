//! End-to-end drivers: build a discretization, solve, and run the
//! refinement, penalty and conditioning studies.

use crate::assembly::{
    assemble_nitsche_with, assemble_system, compute_errors_with, discrete_extension, norm_squared,
    ErrorNorms, NitscheSystem, Region, DEFAULT_BETA, DEFAULT_VOLUME_ORDER,
};
use crate::classification::{
    build_agglomeration_map, partition_dofs, partition_elements, verify_assumptions,
    AgglomerationMap, AgglomerationTarget, AssumptionReport, DofPartition, ElementPartition,
    DEFAULT_GAMMA,
};
use crate::cut::{extract_active_mesh, ActiveMesh};
use crate::error::{Result, SolveReport};
use crate::geometry::{BoundingBox, LevelSet};
use crate::linalg::{
    condition_estimate, solve_spd_with, CgOptions, ConditionEstimate, SparseMatrix,
};
use crate::mesh::BackgroundMesh;
use crate::problem::ProblemData;
use crate::scalar::Real;
use crate::space::{DofMap, DofVector};
use crate::stabilization::{
    assemble_stabilization, nodal_vectors, stab_seminorm, StabilizationFamily, StabilizationMatrix,
    StabilizationSpec, DEFAULT_TAU,
};

pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;
/// Relative residual target of the penalty sweep. Rounding in `b - A x`
/// grows with `tau`, so `1e-10` is out of reach at `tau = 1e9`.
pub const DEFAULT_SWEEP_TOL: f64 = 1e-6;
pub const DEFAULT_SWEEP_TAUS: [f64; 3] = [1e3, 1e6, 1e9];
/// Default refinement ladder. At `n = 128` the circle case with `tau = 0.1`
/// and `beta = 10` is no longer positive definite, so it stops at 64.
pub const DEFAULT_LEVELS: [usize; 4] = [8, 16, 32, 64];

/// Everything derived from the mesh and the level set.
#[derive(Debug, Clone)]
pub struct Discretization<T> {
    pub active: ActiveMesh<T>,
    pub dofmap: DofMap<T>,
    pub partition: ElementPartition<T>,
    pub map: AgglomerationMap,
    pub dofs: DofPartition,
}

impl<T: Real> Discretization<T> {
    pub fn new(
        mesh: &BackgroundMesh<T>,
        level_set: &LevelSet<T>,
        gamma: T,
        target: AgglomerationTarget,
    ) -> Result<Self> {
        let active = extract_active_mesh(mesh, level_set)?;
        let dofmap = DofMap::build(&active)?;
        let partition = partition_elements(&active, gamma)?;
        let map = build_agglomeration_map(&partition, &active, target)?;
        let dofs = partition_dofs(&dofmap, &partition);
        Ok(Self {
            active,
            dofmap,
            partition,
            map,
            dofs,
        })
    }

    /// Structured `n x n` background mesh on `bbox`.
    pub fn structured(
        n: usize,
        bbox: BoundingBox<T>,
        level_set: &LevelSet<T>,
        gamma: T,
        target: AgglomerationTarget,
    ) -> Result<Self> {
        Self::new(
            &BackgroundMesh::structured(n, bbox)?,
            level_set,
            gamma,
            target,
        )
    }

    pub fn h(&self) -> T {
        self.active.h()
    }

    pub fn num_dofs(&self) -> usize {
        self.dofmap.num_dofs()
    }

    pub fn stabilization(&self, spec: &StabilizationSpec<T>) -> Result<StabilizationMatrix<T>> {
        assemble_stabilization(spec, &self.active, &self.dofmap, &self.dofs, &self.map)
    }

    pub fn nitsche(&self, data: &ProblemData<T>, beta: T) -> Result<NitscheSystem<T>> {
        self.nitsche_with(data, beta, DEFAULT_VOLUME_ORDER)
    }

    pub fn nitsche_with(
        &self,
        data: &ProblemData<T>,
        beta: T,
        volume_order: usize,
    ) -> Result<NitscheSystem<T>> {
        assemble_nitsche_with(&self.active, &self.dofmap, data, beta, volume_order)
    }

    pub fn verify(&self, max_path_length: usize) -> AssumptionReport {
        verify_assumptions(
            &self.active,
            &self.map,
            &self.partition,
            &self.dofmap,
            max_path_length,
        )
    }

    /// `max_i |omega_i . v|` over the unstable dofs (zero when there are none).
    pub fn max_nodal_defect(&self, v: &DofVector<T>) -> Result<T> {
        Ok(nodal_vectors(&self.dofmap, &self.dofs, &self.map)?
            .iter()
            .map(|(_, w)| w.dot(v.as_slice()).abs())
            .fold(T::zero(), T::max))
    }
}

/// Parameters of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<T> {
    pub gamma: T,
    pub beta: T,
    pub target: AgglomerationTarget,
    pub stabilization: StabilizationSpec<T>,
    pub tol: T,
    pub max_iterations: Option<usize>,
    /// Order of the volume rule for loads and errors.
    pub volume_order: usize,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            gamma: T::lit(DEFAULT_GAMMA),
            beta: T::lit(DEFAULT_BETA),
            target: AgglomerationTarget::Large,
            stabilization: StabilizationSpec {
                family: StabilizationFamily::Nodal,
                m: 1,
                tau: T::lit(DEFAULT_TAU),
            },
            tol: T::lit(DEFAULT_SOLVER_TOL),
            max_iterations: None,
            volume_order: DEFAULT_VOLUME_ORDER,
        }
    }
}

impl<T: Real> SolverSettings<T> {
    pub fn with_family(mut self, family: StabilizationFamily) -> Self {
        self.stabilization.family = family;
        self
    }

    pub fn with_tau(mut self, tau: T) -> Self {
        self.stabilization.tau = tau;
        self
    }
}

/// Assembled operators of one solve.
#[derive(Debug, Clone)]
pub struct SystemMatrices<T> {
    pub nitsche: NitscheSystem<T>,
    pub stabilization: StabilizationMatrix<T>,
    pub system: SparseMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub u: DofVector<T>,
    pub report: SolveReport,
    pub errors: Option<ErrorNorms<T>>,
    pub matrices: SystemMatrices<T>,
}

pub fn assemble<T: Real>(
    disc: &Discretization<T>,
    data: &ProblemData<T>,
    settings: &SolverSettings<T>,
) -> Result<SystemMatrices<T>> {
    let nitsche = disc.nitsche_with(data, settings.beta, settings.volume_order)?;
    let stabilization = disc.stabilization(&settings.stabilization)?;
    let system = assemble_system(&nitsche, &stabilization)?;
    Ok(SystemMatrices {
        nitsche,
        stabilization,
        system,
    })
}

pub fn solve<T: Real>(
    disc: &Discretization<T>,
    data: &ProblemData<T>,
    settings: &SolverSettings<T>,
) -> Result<Solution<T>> {
    let matrices = assemble(disc, data, settings)?;
    let options = CgOptions {
        tol: settings.tol,
        max_iterations: settings.max_iterations,
    };
    let (u, report) = solve_spd_with(&matrices.system, &matrices.nitsche.load, &options)?;
    let u = DofVector(u);
    let errors = match data.exact {
        Some(_) => Some(compute_errors_with(
            &u,
            data,
            &disc.active,
            &disc.dofmap,
            settings.volume_order,
        )?),
        None => None,
    };
    Ok(Solution {
        u,
        report,
        errors,
        matrices,
    })
}

/// `|grad^m v|^2_{Ω_h} / (|grad^m v|^2_Ω + |v|^2_s)` with `m` taken from the
/// stabilization spec.
pub fn stability_ratio<T: Real>(
    disc: &Discretization<T>,
    stabilization: &StabilizationMatrix<T>,
    v: &DofVector<T>,
) -> Result<T> {
    let m = stabilization.spec.m;
    let active = norm_squared(v, &disc.active, &disc.dofmap, m, Region::ActiveMesh)?;
    let domain = norm_squared(v, &disc.active, &disc.dofmap, m, Region::Domain)?;
    let s = stabilization.matrix.quadratic_form(v.as_slice())?;
    Ok(active / (domain + s))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Rates `log(e_k / e_{k+1}) / log(h_k / h_{k+1})` between consecutive levels.
pub fn observed_rates(h: &[f64], e: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(e.windows(2))
        .map(|(hw, ew)| (ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dofs: usize,
    pub l2_error: f64,
    pub h1_error: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Refinement study on structured meshes.
pub fn convergence_study<T: Real>(
    levels: &[usize],
    bbox: BoundingBox<T>,
    level_set: &LevelSet<T>,
    data: &ProblemData<T>,
    settings: &SolverSettings<T>,
) -> Result<Vec<ConvergenceRow>> {
    levels
        .iter()
        .map(|&n| {
            let disc =
                Discretization::structured(n, bbox, level_set, settings.gamma, settings.target)?;
            let sol = solve(&disc, data, settings)?;
            let errors = sol.errors.unwrap_or(ErrorNorms {
                l2: T::nan(),
                h1_semi: T::nan(),
            });
            Ok(ConvergenceRow {
                n,
                h: disc.h().as_f64(),
                dofs: disc.num_dofs(),
                l2_error: errors.l2.as_f64(),
                h1_error: errors.h1_semi.as_f64(),
                iterations: sol.report.iterations,
                residual: sol.report.residual,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauSweepRow {
    pub family: StabilizationFamily,
    pub n: usize,
    pub h: f64,
    pub tau: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    /// `max_i |omega_i . u_h|` over the unstable dofs.
    pub nodal_defect: f64,
    /// `max |u_h - E u_h|` with `E` the discrete extension.
    pub extension_defect: f64,
    pub max_abs: f64,
    /// Stabilization seminorm of `u_h` at this `tau`.
    pub seminorm: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves on one mesh for each `tau`, keeping everything else fixed.
pub fn tau_sweep<T: Real>(
    disc: &Discretization<T>,
    n: usize,
    taus: &[T],
    data: &ProblemData<T>,
    settings: &SolverSettings<T>,
) -> Result<Vec<TauSweepRow>> {
    let nitsche = disc.nitsche_with(data, settings.beta, settings.volume_order)?;
    let base = disc.stabilization(&settings.stabilization.with_tau(T::one()))?;
    taus.iter()
        .map(|&tau| {
            let stab = base.scaled(tau);
            let system = assemble_system(&nitsche, &stab)?;
            let options = CgOptions {
                tol: settings.tol,
                max_iterations: settings.max_iterations,
            };
            let (u, report) = solve_spd_with(&system, &nitsche.load, &options)?;
            let u = DofVector(u);
            let errors =
                compute_errors_with(&u, data, &disc.active, &disc.dofmap, settings.volume_order)
                    .ok();
            let extended = discrete_extension(&u, &disc.dofmap, &disc.dofs, &disc.map)?;
            let extension_defect = u
                .as_slice()
                .iter()
                .zip(extended.as_slice())
                .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
            Ok(TauSweepRow {
                family: settings.stabilization.family,
                n,
                h: disc.h().as_f64(),
                tau: tau.as_f64(),
                l2_error: errors.map_or(f64::NAN, |e| e.l2.as_f64()),
                h1_error: errors.map_or(f64::NAN, |e| e.h1_semi.as_f64()),
                nodal_defect: disc.max_nodal_defect(&u)?.as_f64(),
                extension_defect: extension_defect.as_f64(),
                max_abs: u.max_abs().as_f64(),
                seminorm: stab_seminorm(&stab, &u)?.as_f64(),
                iterations: report.iterations,
                residual: report.residual,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub family: StabilizationFamily,
    pub n: usize,
    pub h: f64,
    pub tau: f64,
    pub dofs: usize,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub kappa: f64,
}

pub fn condition_row<T: Real>(
    disc: &Discretization<T>,
    n: usize,
    data: &ProblemData<T>,
    settings: &SolverSettings<T>,
    eigen_tol: T,
) -> Result<(ConditionRow, ConditionEstimate<T>)> {
    let matrices = assemble(disc, data, settings)?;
    let est = condition_estimate(&matrices.system, eigen_tol)?;
    Ok((
        ConditionRow {
            family: settings.stabilization.family,
            n,
            h: disc.h().as_f64(),
            tau: settings.stabilization.tau.as_f64(),
            dofs: disc.num_dofs(),
            lambda_max: est.lambda_max.as_f64(),
            lambda_min: est.lambda_min.as_f64(),
            kappa: est.kappa.as_f64(),
        },
        est,
    ))
}
