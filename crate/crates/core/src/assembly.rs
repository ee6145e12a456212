//! Symmetric Nitsche formulation of the Poisson problem, interpolation
//! operators and error norms on the physical domain.

use std::collections::BTreeMap;

use crate::classification::{AgglomerationMap, DofPartition};
use crate::cut::ActiveMesh;
use crate::error::{CutFemError, Result};
use crate::geometry::Vec2;
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::problem::ProblemData;
use crate::scalar::Real;
use crate::space::{DofMap, DofVector};
use crate::stabilization::StabilizationMatrix;

pub const DEFAULT_BETA: f64 = 10.0;
/// Volume quadrature order for loads, projections and errors.
pub const DEFAULT_VOLUME_ORDER: usize = 4;
/// Boundary quadrature order (three Gauss points).
pub const DEFAULT_BOUNDARY_ORDER: usize = 5;

/// `a_h` without stabilization and the load `l_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct NitscheSystem<T> {
    pub matrix: SparseMatrix<T>,
    pub load: Vec<T>,
    pub beta: T,
    /// Mesh size in the `beta / h` boundary weight.
    pub h: T,
}

/// Assembles
/// `(grad u, grad v)_Ω - (∂_n u, v)_Γ - (u, ∂_n v)_Γ + β/h (u, v)_Γ` and
/// `(f, v)_Ω - (g, ∂_n v)_Γ + β/h (g, v)_Γ`.
pub fn assemble_nitsche<T: Real>(
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    data: &ProblemData<T>,
    beta: T,
) -> Result<NitscheSystem<T>> {
    assemble_nitsche_with(active, dofmap, data, beta, DEFAULT_VOLUME_ORDER)
}

/// [`assemble_nitsche`] with the load integrated by a rule of `volume_order`.
pub fn assemble_nitsche_with<T: Real>(
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    data: &ProblemData<T>,
    beta: T,
    volume_order: usize,
) -> Result<NitscheSystem<T>> {
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(CutFemError::InvalidConfiguration(format!(
            "Nitsche parameter beta must be positive, got {beta}"
        )));
    }
    let h = active.h();
    let penalty = beta / h;
    let n = dofmap.num_dofs();
    let mut builder = TripletBuilder::new(n);
    let mut load = vec![T::zero(); n];

    for &e in &active.elements {
        let dofs = dofmap.element_dofs(e);
        let basis = dofmap.basis(e);
        let grads = basis.gradients;
        let mut local = [T::zero(); 9];

        let volume = active.volume_rule(e, volume_order)?;
        let measure = volume.total_weight();
        for a in 0..3 {
            for b in 0..3 {
                local[a * 3 + b] += measure * grads[a].dot(grads[b]);
            }
        }
        for (x, w) in volume.iter() {
            let f = (data.source)(x);
            let phi = basis.eval_all(x);
            for a in 0..3 {
                load[dofs[a]] += w * f * phi[a];
            }
        }

        for (x, w, normal) in active.boundary_rule(e, DEFAULT_BOUNDARY_ORDER)?.iter() {
            let phi = basis.eval_all(x);
            let dn = grads.map(|g| g.dot(normal));
            let g = (data.dirichlet)(x);
            for a in 0..3 {
                for b in 0..3 {
                    local[a * 3 + b] +=
                        w * (penalty * phi[a] * phi[b] - dn[b] * phi[a] - phi[b] * dn[a]);
                }
                load[dofs[a]] += w * g * (penalty * phi[a] - dn[a]);
            }
        }
        builder.add_local(&dofs, &local);
    }

    Ok(NitscheSystem {
        matrix: builder.build(),
        load,
        beta,
        h,
    })
}

/// `A_h = a_h + s_h`.
pub fn assemble_system<T: Real>(
    nitsche: &NitscheSystem<T>,
    stabilization: &StabilizationMatrix<T>,
) -> Result<SparseMatrix<T>> {
    nitsche.matrix.add(&stabilization.matrix)
}

/// Solves the 3x3 system `m c = b` by Gaussian elimination with partial pivoting.
fn solve3<T: Real>(mut m: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    let scale = m.iter().flatten().fold(T::zero(), |s, v| s.max(v.abs()));
    if !(scale > T::zero()) {
        return None;
    }
    for col in 0..3 {
        let pivot =
            (col..3).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if !(m[pivot][col].abs() > scale * T::epsilon()) {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (x, &v) in m[row].iter_mut().zip(&pivot_row).skip(col) {
                *x -= factor * v;
            }
            let v = b[col];
            b[row] -= factor * v;
        }
    }
    let mut x = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Nodal coefficients of the L2 projection of `f` onto affines over the full element.
pub fn local_l2_projection<T: Real>(
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    element: usize,
    f: &dyn Fn(Vec2<T>) -> T,
) -> Result<[T; 3]> {
    let basis = dofmap.basis(element);
    let mut mass = [[T::zero(); 3]; 3];
    let mut rhs = [T::zero(); 3];
    for (x, w) in active.element_rule(element, DEFAULT_VOLUME_ORDER)?.iter() {
        let phi = basis.eval_all(x);
        let fx = f(x);
        for a in 0..3 {
            rhs[a] += w * fx * phi[a];
            for b in 0..3 {
                mass[a][b] += w * phi[a] * phi[b];
            }
        }
    }
    solve3(mass, rhs).ok_or_else(|| {
        CutFemError::Internal(format!("singular local mass matrix on element {element}"))
    })
}

/// Clément-type quasi-interpolant: dof `i` takes the value at `x_i` of the
/// local L2 projection on the smallest-id active element containing `x_i`.
pub fn clement_interpolate<T: Real>(
    f: impl Fn(Vec2<T>) -> T,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
) -> Result<DofVector<T>> {
    let mut projections: BTreeMap<usize, [T; 3]> = BTreeMap::new();
    let mut out = DofVector::zeros(dofmap.num_dofs());
    for i in 0..dofmap.num_dofs() {
        let t = *dofmap
            .support(i)
            .first()
            .ok_or_else(|| CutFemError::Internal(format!("dof {i} has empty support")))?;
        let coeffs = match projections.get(&t) {
            Some(c) => *c,
            None => {
                let c = local_l2_projection(active, dofmap, t, &f)?;
                projections.insert(t, c);
                c
            }
        };
        let k = dofmap
            .local_index(t, i)
            .expect("support element contains dof");
        out[i] = coeffs[k];
    }
    Ok(out)
}

/// Replaces every unstable value by the extension of `v` from the target
/// element of its anchor, evaluated at the node.
pub fn discrete_extension<T: Real>(
    v: &DofVector<T>,
    dofmap: &DofMap<T>,
    dofs: &DofPartition,
    map: &AgglomerationMap,
) -> Result<DofVector<T>> {
    if v.len() != dofmap.num_dofs() {
        return Err(CutFemError::DimensionMismatch {
            expected: dofmap.num_dofs(),
            found: v.len(),
        });
    }
    let mut out = v.clone();
    for &i in &dofs.small {
        let anchor = dofs
            .anchor(i)
            .ok_or_else(|| CutFemError::Internal(format!("unstable dof {i} has no anchor")))?;
        let target = map.get(anchor).ok_or_else(|| {
            CutFemError::Internal(format!(
                "small element {anchor} has no agglomeration target"
            ))
        })?;
        out[i] = dofmap.restrict(v, target).eval(dofmap.coordinate(i));
    }
    Ok(out)
}

/// Discrete extension of the quasi-interpolant.
pub fn strong_interpolant<T: Real>(
    f: impl Fn(Vec2<T>) -> T,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    dofs: &DofPartition,
    map: &AgglomerationMap,
) -> Result<DofVector<T>> {
    let clement = clement_interpolate(f, active, dofmap)?;
    discrete_extension(&clement, dofmap, dofs, map)
}

/// Integration region for [`norm_squared`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `T ∩ Ω` on every active element.
    Domain,
    /// The full active elements.
    ActiveMesh,
}

/// `|v|^2` (`m = 0`) or `|grad v|^2` (`m = 1`) integrated over `region`.
pub fn norm_squared<T: Real>(
    v: &DofVector<T>,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    m: u32,
    region: Region,
) -> Result<T> {
    if m > 1 {
        return Err(CutFemError::InvalidConfiguration(format!(
            "norm order m must be 0 or 1, got {m}"
        )));
    }
    if v.len() != dofmap.num_dofs() {
        return Err(CutFemError::DimensionMismatch {
            expected: dofmap.num_dofs(),
            found: v.len(),
        });
    }
    let mut total = T::zero();
    for &e in &active.elements {
        let p = dofmap.restrict(v, e);
        let rule = match region {
            Region::Domain => active.volume_rule(e, 2)?,
            Region::ActiveMesh => active.element_rule(e, 2)?,
        };
        total += if m == 1 {
            rule.total_weight() * p.gradient.norm_squared()
        } else {
            rule.integrate(|x| p.eval(x) * p.eval(x))
        };
    }
    Ok(total)
}

/// `|∂_n v|^2` integrated over the boundary of the domain.
pub fn normal_derivative_squared<T: Real>(
    v: &DofVector<T>,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
) -> Result<T> {
    if v.len() != dofmap.num_dofs() {
        return Err(CutFemError::DimensionMismatch {
            expected: dofmap.num_dofs(),
            found: v.len(),
        });
    }
    let mut total = T::zero();
    for &e in &active.elements {
        let g = dofmap.restrict(v, e).gradient;
        for (_, w, normal) in active.boundary_rule(e, DEFAULT_BOUNDARY_ORDER)?.iter() {
            let dn = g.dot(normal);
            total += w * dn * dn;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms<T> {
    /// `|u_h - u|` in L2 over the domain.
    pub l2: T,
    /// `|grad(u_h - u)|` in L2 over the domain.
    pub h1_semi: T,
}

/// Errors against the reference solution by cut volume quadrature.
pub fn compute_errors<T: Real>(
    u_h: &DofVector<T>,
    data: &ProblemData<T>,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
) -> Result<ErrorNorms<T>> {
    compute_errors_with(u_h, data, active, dofmap, DEFAULT_VOLUME_ORDER)
}

pub fn compute_errors_with<T: Real>(
    u_h: &DofVector<T>,
    data: &ProblemData<T>,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    order: usize,
) -> Result<ErrorNorms<T>> {
    let (Some(u), Some(grad)) = (&data.exact, &data.exact_gradient) else {
        return Err(CutFemError::UnsupportedOperation(format!(
            "problem `{}` has no reference solution",
            data.name
        )));
    };
    if u_h.len() != dofmap.num_dofs() {
        return Err(CutFemError::DimensionMismatch {
            expected: dofmap.num_dofs(),
            found: u_h.len(),
        });
    }
    let (mut l2, mut h1) = (T::zero(), T::zero());
    for &e in &active.elements {
        let p = dofmap.restrict(u_h, e);
        for (x, w) in active.volume_rule(e, order)?.iter() {
            let d = p.eval(x) - u(x);
            let dg = p.gradient - grad(x);
            l2 += w * d * d;
            h1 += w * dg.norm_squared();
        }
    }
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_dense_solve() {
        let m = [[0.0, 2.0, 1.0], [1.0, 1.0, 1.0], [4.0, 0.0, 1.0]];
        let x = solve3(m, [5.0, 6.0, 7.0]).unwrap();
        for (row, b) in m.iter().zip([5.0, 6.0, 7.0]) {
            let lhs: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((lhs - b).abs() < 1e-13);
        }
        assert!(solve3(
            [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]],
            [1.0; 3]
        )
        .is_none());
    }
}
