//! Ghost-penalty style stabilization matrices.
//!
//! Five variants are provided: normal-gradient jumps across faces of cut
//! elements, L2 jumps of element extensions across the same faces, gradient
//! and L2 jumps between each small element and its agglomeration target,
//! and the nodal penalty that ties every unstable dof to the extension of
//! its target element.

use std::fmt;
use std::str::FromStr;

use crate::classification::{AgglomerationMap, DofPartition};
use crate::cut::{ActiveMesh, ElementClass};
use crate::error::{CutFemError, Result};
use crate::geometry::Vec2;
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::scalar::Real;
use crate::space::{DofMap, DofVector};

pub const DEFAULT_TAU: f64 = 0.1;

/// Exact for the products of two affine functions.
const JUMP_QUADRATURE_ORDER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StabilizationFamily {
    FaceGradient,
    FaceL2,
    ExtensionGradient,
    ExtensionL2,
    Nodal,
}

impl StabilizationFamily {
    pub const ALL: [StabilizationFamily; 5] = [
        StabilizationFamily::FaceGradient,
        StabilizationFamily::FaceL2,
        StabilizationFamily::ExtensionGradient,
        StabilizationFamily::ExtensionL2,
        StabilizationFamily::Nodal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StabilizationFamily::FaceGradient => "face_gradient",
            StabilizationFamily::FaceL2 => "face_l2",
            StabilizationFamily::ExtensionGradient => "extension_gradient",
            StabilizationFamily::ExtensionL2 => "extension_l2",
            StabilizationFamily::Nodal => "nodal",
        }
    }

    /// Whether the family needs the agglomeration map.
    pub fn uses_agglomeration(&self) -> bool {
        !matches!(
            self,
            StabilizationFamily::FaceGradient | StabilizationFamily::FaceL2
        )
    }
}

impl fmt::Display for StabilizationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StabilizationFamily {
    type Err = CutFemError;

    fn from_str(s: &str) -> Result<Self> {
        let parsed = match s {
            "face_gradient" | "face" => StabilizationFamily::FaceGradient,
            "face_l2" => StabilizationFamily::FaceL2,
            "extension_gradient" | "extension" => StabilizationFamily::ExtensionGradient,
            "extension_l2" => StabilizationFamily::ExtensionL2,
            "nodal" => StabilizationFamily::Nodal,
            other => {
                return Err(CutFemError::InvalidConfiguration(format!(
                    "unknown stabilization family `{other}`"
                )))
            }
        };
        Ok(parsed)
    }
}

/// Family, norm target `m` and strength `tau`; the power of `h` follows from
/// the family and `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationSpec<T> {
    pub family: StabilizationFamily,
    pub m: u32,
    pub tau: T,
}

impl<T: Real> StabilizationSpec<T> {
    pub fn new(family: StabilizationFamily, m: u32, tau: T) -> Result<Self> {
        let spec = Self { family, m, tau };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m > 1 {
            return Err(CutFemError::InvalidConfiguration(format!(
                "norm target m must be 0 or 1, got {}",
                self.m
            )));
        }
        if self.family == StabilizationFamily::ExtensionGradient && self.m != 1 {
            return Err(CutFemError::InvalidConfiguration(
                "extension_gradient is only defined for m = 1".into(),
            ));
        }
        if !(self.tau >= T::zero()) || !self.tau.is_finite() {
            return Err(CutFemError::InvalidConfiguration(format!(
                "tau must be finite and non-negative, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// Exponent `alpha` of the `h^alpha` weight.
    pub fn alpha(&self) -> i32 {
        let m = self.m as i32;
        match self.family {
            StabilizationFamily::FaceGradient => 3 - 2 * m,
            StabilizationFamily::FaceL2 => -2 * m,
            StabilizationFamily::ExtensionGradient => 0,
            StabilizationFamily::ExtensionL2 => -2 * m,
            StabilizationFamily::Nodal => 2 - 2 * m,
        }
    }

    /// `tau * h^alpha`.
    pub fn weight(&self, h: T) -> T {
        self.tau * h.powi(self.alpha())
    }

    pub fn with_tau(&self, tau: T) -> Self {
        Self { tau, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationMatrix<T> {
    pub matrix: SparseMatrix<T>,
    /// Rank-one terms `(w, c)` with `matrix = sum w c c^T`.
    pub terms: Vec<(T, SparseCoefficients<T>)>,
    pub spec: StabilizationSpec<T>,
    /// Non-fatal remarks such as an empty face set.
    pub warnings: Vec<String>,
}

impl<T: Real> StabilizationMatrix<T> {
    fn from_terms(
        dim: usize,
        spec: StabilizationSpec<T>,
        terms: Vec<(T, SparseCoefficients<T>)>,
        warnings: Vec<String>,
    ) -> Self {
        let mut builder = TripletBuilder::new(dim);
        for (w, c) in &terms {
            c.add_outer_to(&mut builder, *w);
        }
        Self {
            matrix: builder.build(),
            terms,
            spec,
            warnings,
        }
    }

    /// The same penalty with `tau` multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            matrix: self.matrix.scaled(factor),
            terms: self
                .terms
                .iter()
                .map(|(w, c)| (*w * factor, c.clone()))
                .collect(),
            spec: self.spec.with_tau(self.spec.tau * factor),
            warnings: self.warnings.clone(),
        }
    }
}

/// Sparse coefficient vector with merged duplicate indices, ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCoefficients<T> {
    pub entries: Vec<(usize, T)>,
}

impl<T: Real> SparseCoefficients<T> {
    fn from_unsorted(mut raw: Vec<(usize, T)>) -> Self {
        raw.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, T)> = Vec::with_capacity(raw.len());
        for (i, v) in raw {
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != T::zero());
        Self { entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dot(&self, v: &[T]) -> T {
        self.entries.iter().map(|&(i, c)| c * v[i]).sum()
    }

    pub fn sum(&self) -> T {
        self.entries.iter().map(|&(_, c)| c).sum()
    }

    fn add_outer_to(&self, builder: &mut TripletBuilder<T>, scale: T) {
        for &(i, a) in &self.entries {
            for &(j, b) in &self.entries {
                builder.add(i, j, scale * a * b);
            }
        }
    }
}

/// Internal faces between two active elements of which at least one is cut,
/// as `(face, first, second)`.
pub fn stabilized_faces<T: Real>(active: &ActiveMesh<T>) -> Vec<(usize, usize, usize)> {
    active
        .mesh
        .faces
        .iter()
        .enumerate()
        .filter_map(|(f, face)| {
            let (a, b) = (face.elements.0, face.elements.1?);
            let both_active = active.is_active(a) && active.is_active(b);
            let any_cut = both_active
                && (active.class(a) == ElementClass::Cut || active.class(b) == ElementClass::Cut);
            any_cut.then_some((f, a, b))
        })
        .collect()
}

/// Coefficients of `v -> (grad v_1 - grad v_2) . n` for a face.
pub fn normal_jump_coefficients<T: Real>(
    dofmap: &DofMap<T>,
    first: usize,
    second: usize,
    normal: Vec2<T>,
) -> SparseCoefficients<T> {
    let mut raw = Vec::with_capacity(6);
    for (e, sign) in [(first, T::one()), (second, -T::one())] {
        let basis = dofmap.basis(e);
        for (k, &d) in dofmap.element_dofs(e).iter().enumerate() {
            raw.push((d, sign * basis.gradients[k].dot(normal)));
        }
    }
    SparseCoefficients::from_unsorted(raw)
}

/// Coefficients of `v -> v_1^e(x) - v_2^e(x)`.
pub fn value_jump_coefficients<T: Real>(
    dofmap: &DofMap<T>,
    first: usize,
    second: usize,
    x: Vec2<T>,
) -> SparseCoefficients<T> {
    let mut raw = Vec::with_capacity(6);
    for (e, sign) in [(first, T::one()), (second, -T::one())] {
        let values = dofmap.basis(e).eval_all(x);
        for (k, &d) in dofmap.element_dofs(e).iter().enumerate() {
            raw.push((d, sign * values[k]));
        }
    }
    SparseCoefficients::from_unsorted(raw)
}

/// Coefficients of one Cartesian component of `grad v_1 - grad v_2`.
fn gradient_jump_component<T: Real>(
    dofmap: &DofMap<T>,
    first: usize,
    second: usize,
    component: usize,
) -> SparseCoefficients<T> {
    let axis = if component == 0 {
        Vec2::new(T::one(), T::zero())
    } else {
        Vec2::new(T::zero(), T::one())
    };
    normal_jump_coefficients(dofmap, first, second, axis)
}

fn l2_jump_into<T: Real>(
    terms: &mut Vec<(T, SparseCoefficients<T>)>,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    pair: (usize, usize),
    domain: &[usize],
    weight: T,
) -> Result<()> {
    for &e in domain {
        for (x, w) in active.element_rule(e, JUMP_QUADRATURE_ORDER)?.iter() {
            terms.push((
                weight * w,
                value_jump_coefficients(dofmap, pair.0, pair.1, x),
            ));
        }
    }
    Ok(())
}

fn check_family(
    spec: &StabilizationSpec<impl Real>,
    allowed: &[StabilizationFamily],
) -> Result<()> {
    spec.validate()?;
    if !allowed.contains(&spec.family) {
        return Err(CutFemError::InvalidConfiguration(format!(
            "family {} not handled by this assembler",
            spec.family
        )));
    }
    Ok(())
}

/// Face penalty over the faces returned by [`stabilized_faces`]; `spec.family`
/// selects the gradient or the L2 variant.
pub fn assemble_face_penalty<T: Real>(
    spec: &StabilizationSpec<T>,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
) -> Result<StabilizationMatrix<T>> {
    check_family(
        spec,
        &[
            StabilizationFamily::FaceGradient,
            StabilizationFamily::FaceL2,
        ],
    )?;
    let weight = spec.weight(active.h());
    let mut terms = Vec::new();
    let faces = stabilized_faces(active);
    for &(f, a, b) in &faces {
        match spec.family {
            StabilizationFamily::FaceGradient => {
                let c = normal_jump_coefficients(dofmap, a, b, active.mesh.faces[f].normal);
                terms.push((weight * active.mesh.face_length(f), c));
            }
            _ => l2_jump_into(&mut terms, active, dofmap, (a, b), &[a, b], weight)?,
        }
    }
    let mut warnings = Vec::new();
    if faces.is_empty() {
        warnings.push("no internal face touches a cut element; face penalty is zero".to_string());
    }
    Ok(StabilizationMatrix::from_terms(
        dofmap.num_dofs(),
        *spec,
        terms,
        warnings,
    ))
}

/// Jump penalty between each small element and its agglomeration target.
pub fn assemble_extension_penalty<T: Real>(
    spec: &StabilizationSpec<T>,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    map: &AgglomerationMap,
) -> Result<StabilizationMatrix<T>> {
    check_family(
        spec,
        &[
            StabilizationFamily::ExtensionGradient,
            StabilizationFamily::ExtensionL2,
        ],
    )?;
    let weight = spec.weight(active.h());
    let mut terms = Vec::new();
    for (t, s) in map.iter() {
        match spec.family {
            StabilizationFamily::ExtensionGradient => {
                let scale = weight * active.mesh.area(t);
                for component in 0..2 {
                    terms.push((scale, gradient_jump_component(dofmap, t, s, component)));
                }
            }
            _ => l2_jump_into(&mut terms, active, dofmap, (t, s), &[t], weight)?,
        }
    }
    Ok(StabilizationMatrix::from_terms(
        dofmap.num_dofs(),
        *spec,
        terms,
        Vec::new(),
    ))
}

/// `omega_i = e_i - sum_j phi_{j,S}^e(x_i) e_j` for each unstable dof `i`,
/// with `S = S_h(T_i)`.
pub fn nodal_vectors<T: Real>(
    dofmap: &DofMap<T>,
    dofs: &DofPartition,
    map: &AgglomerationMap,
) -> Result<Vec<(usize, SparseCoefficients<T>)>> {
    dofs.small
        .iter()
        .map(|&i| {
            let anchor = dofs
                .anchor(i)
                .ok_or_else(|| CutFemError::Internal(format!("unstable dof {i} has no anchor")))?;
            let target = map.get(anchor).ok_or_else(|| {
                CutFemError::Internal(format!(
                    "small element {anchor} has no agglomeration target"
                ))
            })?;
            let x = dofmap.coordinate(i);
            let values = dofmap.basis(target).eval_all(x);
            let mut raw = vec![(i, T::one())];
            for (k, &d) in dofmap.element_dofs(target).iter().enumerate() {
                raw.push((d, -values[k]));
            }
            Ok((i, SparseCoefficients::from_unsorted(raw)))
        })
        .collect()
}

/// Rank-one penalties `tau h^{2-2m} omega_i (x) omega_i` summed over the
/// unstable dofs.
pub fn assemble_nodal_penalty<T: Real>(
    spec: &StabilizationSpec<T>,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    dofs: &DofPartition,
    map: &AgglomerationMap,
) -> Result<StabilizationMatrix<T>> {
    check_family(spec, &[StabilizationFamily::Nodal])?;
    let weight = spec.weight(active.h());
    let terms = nodal_vectors(dofmap, dofs, map)?
        .into_iter()
        .map(|(_, omega)| (weight, omega))
        .collect();
    Ok(StabilizationMatrix::from_terms(
        dofmap.num_dofs(),
        *spec,
        terms,
        Vec::new(),
    ))
}

/// Dispatches on `spec.family`.
pub fn assemble_stabilization<T: Real>(
    spec: &StabilizationSpec<T>,
    active: &ActiveMesh<T>,
    dofmap: &DofMap<T>,
    dofs: &DofPartition,
    map: &AgglomerationMap,
) -> Result<StabilizationMatrix<T>> {
    match spec.family {
        StabilizationFamily::FaceGradient | StabilizationFamily::FaceL2 => {
            assemble_face_penalty(spec, active, dofmap)
        }
        StabilizationFamily::ExtensionGradient | StabilizationFamily::ExtensionL2 => {
            assemble_extension_penalty(spec, active, dofmap, map)
        }
        StabilizationFamily::Nodal => assemble_nodal_penalty(spec, active, dofmap, dofs, map),
    }
}

/// `sqrt(sum w (c . v)^2)` over the rank-one terms, which avoids the
/// cancellation of `v^T S v` for `v` near the kernel.
pub fn stab_seminorm<T: Real>(s: &StabilizationMatrix<T>, v: &DofVector<T>) -> Result<T> {
    if v.len() != s.matrix.dim() {
        return Err(CutFemError::ContractViolation(format!(
            "vector of length {} against a {}-dof stabilization matrix",
            v.len(),
            s.matrix.dim()
        )));
    }
    let v = v.as_slice();
    Ok(s.terms
        .iter()
        .map(|(w, c)| {
            let d = c.dot(v);
            *w * d * d
        })
        .sum::<T>()
        .sqrt())
}
