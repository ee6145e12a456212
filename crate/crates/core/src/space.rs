//! Continuous piecewise-linear Lagrange space on the active mesh.

use std::io::{self, Write};
use std::ops::{Index, IndexMut};

use crate::cut::ActiveMesh;
use crate::error::{CutFemError, Result};
use crate::geometry::Vec2;
use crate::scalar::Real;

/// Affine nodal basis of one triangle, stored as values at the centroid
/// plus constant gradients so it can be evaluated anywhere in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementBasis<T> {
    pub centroid: Vec2<T>,
    pub gradients: [Vec2<T>; 3],
    pub area: T,
}

impl<T: Real> ElementBasis<T> {
    pub fn new(vertices: [Vec2<T>; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let twice_area = (p1 - p0).cross(p2 - p0);
        let inv = T::one() / twice_area;
        let gradients = [
            Vec2::new(p1.y - p2.y, p2.x - p1.x) * inv,
            Vec2::new(p2.y - p0.y, p0.x - p2.x) * inv,
            Vec2::new(p0.y - p1.y, p1.x - p0.x) * inv,
        ];
        Self {
            centroid: (p0 + p1 + p2) * (T::one() / T::lit(3.0)),
            gradients,
            area: twice_area.abs() * T::lit(0.5),
        }
    }

    /// Canonical extension of local basis function `j` evaluated at `x`.
    pub fn eval(&self, j: usize, x: Vec2<T>) -> T {
        T::one() / T::lit(3.0) + self.gradients[j].dot(x - self.centroid)
    }

    pub fn eval_all(&self, x: Vec2<T>) -> [T; 3] {
        [self.eval(0, x), self.eval(1, x), self.eval(2, x)]
    }
}

/// Global numbering of the active nodes.
#[derive(Debug, Clone)]
pub struct DofMap<T> {
    /// Polynomial degree; only 1 is implemented.
    pub degree: usize,
    node_to_dof: Vec<Option<usize>>,
    dof_to_node: Vec<usize>,
    coordinates: Vec<Vec2<T>>,
    element_dofs: Vec<Option<[usize; 3]>>,
    bases: Vec<Option<ElementBasis<T>>>,
    support: Vec<Vec<usize>>,
}

impl<T: Real> DofMap<T> {
    pub fn build(active: &ActiveMesh<T>) -> Result<Self> {
        if active.elements.is_empty() {
            return Err(CutFemError::EmptyDomain);
        }
        let mesh = &active.mesh;
        let mut node_to_dof = vec![None; mesh.num_nodes()];
        for &e in &active.elements {
            for &v in &mesh.elements[e] {
                node_to_dof[v] = Some(0);
            }
        }
        let mut dof_to_node = Vec::new();
        for (node, slot) in node_to_dof.iter_mut().enumerate() {
            if slot.is_some() {
                *slot = Some(dof_to_node.len());
                dof_to_node.push(node);
            }
        }
        let coordinates = dof_to_node.iter().map(|&v| mesh.nodes[v]).collect();

        let mut element_dofs = vec![None; mesh.num_elements()];
        let mut bases = vec![None; mesh.num_elements()];
        let mut support = vec![Vec::new(); dof_to_node.len()];
        for &e in &active.elements {
            let dofs = mesh.elements[e].map(|v| node_to_dof[v].expect("active node"));
            for &d in &dofs {
                support[d].push(e);
            }
            element_dofs[e] = Some(dofs);
            bases[e] = Some(ElementBasis::new(mesh.vertices(e)));
        }
        Ok(Self {
            degree: 1,
            node_to_dof,
            dof_to_node,
            coordinates,
            element_dofs,
            bases,
            support,
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.node_to_dof.get(node).copied().flatten()
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    pub fn coordinate(&self, dof: usize) -> Vec2<T> {
        self.coordinates[dof]
    }

    /// Local-to-global map `I_T` of an active element.
    pub fn element_dofs(&self, element: usize) -> [usize; 3] {
        self.element_dofs[element].expect("active element")
    }

    pub fn try_element_dofs(&self, element: usize) -> Option<[usize; 3]> {
        self.element_dofs.get(element).copied().flatten()
    }

    pub fn basis(&self, element: usize) -> &ElementBasis<T> {
        self.bases[element].as_ref().expect("active element")
    }

    /// Active elements in the support of basis function `dof`, ascending.
    pub fn support(&self, dof: usize) -> &[usize] {
        &self.support[dof]
    }

    pub fn local_index(&self, element: usize, dof: usize) -> Option<usize> {
        self.try_element_dofs(element)?
            .iter()
            .position(|&d| d == dof)
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Vec2<T>) -> T) -> DofVector<T> {
        DofVector(self.coordinates.iter().map(|&x| f(x)).collect())
    }

    /// Restriction of `v` to `element` as an affine polynomial.
    pub fn restrict(&self, v: &DofVector<T>, element: usize) -> ElementPolynomial<T> {
        let dofs = self.element_dofs(element);
        ElementPolynomial::new(element, self.basis(element), dofs.map(|d| v[d]))
    }
}

/// Coefficient vector indexed by the global dofs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DofVector<T>(pub Vec<T>);

impl<T: Real> DofVector<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Writes `dof_id,x,y,value` rows with a header.
    pub fn write_csv<W: Write>(&self, dofmap: &DofMap<T>, mut out: W) -> io::Result<()> {
        writeln!(out, "dof_id,x,y,value")?;
        for (i, v) in self.0.iter().enumerate() {
            let x = dofmap.coordinate(i);
            writeln!(out, "{i},{},{},{v}", x.x, x.y)?;
        }
        Ok(())
    }
}

impl<T> Index<usize> for DofVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for DofVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T> From<Vec<T>> for DofVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// An element restriction `v|_T` and its canonical extension to the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPolynomial<T> {
    pub element: usize,
    pub coefficients: [T; 3],
    pub centroid: Vec2<T>,
    pub centroid_value: T,
    pub gradient: Vec2<T>,
}

impl<T: Real> ElementPolynomial<T> {
    pub fn new(element: usize, basis: &ElementBasis<T>, coefficients: [T; 3]) -> Self {
        let [a, b, c] = coefficients;
        let third = T::one() / T::lit(3.0);
        Self {
            element,
            coefficients,
            centroid: basis.centroid,
            centroid_value: (a + b + c) * third,
            gradient: basis.gradients[0] * a + basis.gradients[1] * b + basis.gradients[2] * c,
        }
    }

    pub fn eval(&self, x: Vec2<T>) -> T {
        self.centroid_value + self.gradient.dot(x - self.centroid)
    }
}

/// Value and gradient of the extension of `v|_T` at an arbitrary point.
pub fn extend_and_eval<T: Real>(
    dofmap: &DofMap<T>,
    v: &DofVector<T>,
    element: usize,
    x: Vec2<T>,
) -> (T, Vec2<T>) {
    let p = dofmap.restrict(v, element);
    (p.eval(x), p.gradient)
}

/// `[v]_{T1,T2}(x) = v_1^e(x) - v_2^e(x)` and the jump of the gradients.
pub fn jump_eval<T: Real>(
    dofmap: &DofMap<T>,
    v: &DofVector<T>,
    first: usize,
    second: usize,
    x: Vec2<T>,
) -> (T, Vec2<T>) {
    let (a, ga) = extend_and_eval(dofmap, v, first, x);
    let (b, gb) = extend_and_eval(dofmap, v, second, x);
    (a - b, ga - gb)
}

/// Degree of freedom `i` of element `T` applied to `p` (point evaluation at `x_i`).
pub fn nodal_functional<T: Real>(
    dofmap: &DofMap<T>,
    dof: usize,
    element: usize,
    p: &ElementPolynomial<T>,
) -> Result<T> {
    if dofmap.local_index(element, dof).is_none() {
        return Err(CutFemError::ContractViolation(format!(
            "dof {dof} does not belong to element {element}"
        )));
    }
    Ok(p.eval(dofmap.coordinate(dof)))
}
