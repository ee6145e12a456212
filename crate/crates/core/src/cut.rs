//! Element classification against a level set and cut-cell quadrature.
//!
//! The interface inside each cut triangle is reconstructed as the chord
//! between the roots of `phi` on the two sign-changing edges. Roots are
//! located by bisection on the exact level set, always walking from the
//! endpoint with the lower node id, so that neighbouring elements share
//! bit-identical interface points.

use crate::error::{CutFemError, Result};
use crate::geometry::{LevelSet, Vec2};
use crate::mesh::BackgroundMesh;
use crate::quadrature::{BoundaryQuadratureRule, QuadratureRule};
use crate::scalar::Real;

const ROOT_TOLERANCE: f64 = 1e-13;
const ROOT_MAX_STEPS: usize = 200;
/// Vertices with `phi == 0` are shifted by this multiple of `h` (outside).
const VERTEX_NUDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementClass {
    /// All vertices strictly inside the domain.
    Interior,
    /// Vertices on both sides of the interface.
    Cut,
}

/// Part of the background-box boundary that lies inside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterSegment<T> {
    pub start: Vec2<T>,
    pub end: Vec2<T>,
    pub normal: Vec2<T>,
}

/// Geometry of `T ∩ Ω` for one active element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementCut<T> {
    pub class: ElementClass,
    /// Convex counter-clockwise polygon approximating `T ∩ Ω`.
    pub polygon: Vec<Vec2<T>>,
    /// Interface chord `(p, q)` for cut elements.
    pub chord: Option<(Vec2<T>, Vec2<T>)>,
    pub outer_segments: Vec<OuterSegment<T>>,
    /// `|T ∩ Ω| / |T|`, exactly one for interior elements.
    pub fraction: T,
}

fn polygon_area<T: Real>(polygon: &[Vec2<T>]) -> T {
    let mut twice = T::zero();
    for k in 1..polygon.len().saturating_sub(1) {
        twice += (polygon[k] - polygon[0]).cross(polygon[k + 1] - polygon[0]);
    }
    twice * T::lit(0.5)
}

fn vertex_value<T: Real>(level_set: &LevelSet<T>, p: Vec2<T>, h: T) -> T {
    let v = level_set.eval(p);
    if v == T::zero() {
        T::lit(VERTEX_NUDGE) * h
    } else {
        v
    }
}

/// Root of `phi` on the segment `a -> b`, where `fa` and `fb` have opposite signs.
fn edge_root<T: Real>(level_set: &LevelSet<T>, a: Vec2<T>, b: Vec2<T>, fa: T) -> Vec2<T> {
    let a_inside = fa < T::zero();
    let (mut lo, mut hi) = (T::zero(), T::one());
    let tol = T::lit(ROOT_TOLERANCE).max(T::epsilon());
    for _ in 0..ROOT_MAX_STEPS {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        let fm = level_set.eval(a.lerp(b, mid));
        if fm == T::zero() {
            lo = mid;
            hi = mid;
            break;
        }
        if (fm < T::zero()) == a_inside {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    a.lerp(b, (lo + hi) * T::lit(0.5))
}

/// Classifies and clips one background element. Returns `None` when the
/// element does not meet the (reconstructed) domain.
pub fn clip_element<T: Real>(
    mesh: &BackgroundMesh<T>,
    element: usize,
    level_set: &LevelSet<T>,
) -> Option<ElementCut<T>> {
    let ids = mesh.elements[element];
    let pts = mesh.vertices(element);
    let vals = pts.map(|p| vertex_value(level_set, p, mesh.h));
    let inside = vals.map(|v| v < T::zero());
    let n_inside = inside.iter().filter(|&&b| b).count();
    if n_inside == 0 {
        return None;
    }

    let root = |k: usize, l: usize| {
        if ids[k] < ids[l] {
            edge_root(level_set, pts[k], pts[l], vals[k])
        } else {
            edge_root(level_set, pts[l], pts[k], vals[l])
        }
    };

    let mut polygon = Vec::with_capacity(4);
    let mut chord_points = Vec::with_capacity(2);
    for k in 0..3 {
        let l = (k + 1) % 3;
        if inside[k] {
            polygon.push(pts[k]);
        }
        if inside[k] != inside[l] {
            let r = root(k, l);
            polygon.push(r);
            chord_points.push((inside[k], r));
        }
    }

    let mut outer_segments = Vec::new();
    for k in 0..3 {
        let face = &mesh.faces[mesh.element_faces[element][k]];
        if face.is_internal() {
            continue;
        }
        let l = (k + 1) % 3;
        let segment = match (inside[k], inside[l]) {
            (true, true) => Some((pts[k], pts[l])),
            (true, false) => Some((pts[k], root(k, l))),
            (false, true) => Some((root(k, l), pts[l])),
            (false, false) => None,
        };
        if let Some((start, end)) = segment {
            outer_segments.push(OuterSegment {
                start,
                end,
                normal: face.normal,
            });
        }
    }

    if n_inside == 3 {
        return Some(ElementCut {
            class: ElementClass::Interior,
            polygon,
            chord: None,
            outer_segments,
            fraction: T::one(),
        });
    }

    // Walking counter-clockwise, the interface is entered on the edge that
    // leaves the domain and left on the edge that re-enters it.
    let exit = chord_points
        .iter()
        .find(|(from_inside, _)| *from_inside)
        .map(|c| c.1);
    let entry = chord_points
        .iter()
        .find(|(from_inside, _)| !*from_inside)
        .map(|c| c.1);
    let chord = exit.zip(entry);
    let area = polygon_area(&polygon);
    let fraction = (area / mesh.area(element)).min(T::one());
    Some(ElementCut {
        class: ElementClass::Cut,
        polygon,
        chord,
        outer_segments,
        fraction,
    })
}

/// Elements of the background mesh that meet the domain.
#[derive(Debug, Clone)]
pub struct ActiveMesh<T> {
    pub mesh: BackgroundMesh<T>,
    pub level_set: LevelSet<T>,
    /// Active element ids, ascending.
    pub elements: Vec<usize>,
    cuts: Vec<Option<ElementCut<T>>>,
}

impl<T: Real> ActiveMesh<T> {
    pub fn is_active(&self, element: usize) -> bool {
        self.cuts.get(element).is_some_and(Option::is_some)
    }

    fn require(&self, element: usize) -> Result<&ElementCut<T>> {
        self.cuts
            .get(element)
            .and_then(Option::as_ref)
            .ok_or_else(|| {
                CutFemError::ContractViolation(format!("element {element} is not active"))
            })
    }

    /// Cut geometry of an active element. Panics for inactive elements.
    pub fn cut(&self, element: usize) -> &ElementCut<T> {
        self.cuts[element].as_ref().expect("active element")
    }

    pub fn try_cut(&self, element: usize) -> Option<&ElementCut<T>> {
        self.cuts.get(element).and_then(Option::as_ref)
    }

    pub fn class(&self, element: usize) -> ElementClass {
        self.cut(element).class
    }

    pub fn fraction(&self, element: usize) -> T {
        self.cut(element).fraction
    }

    pub fn h(&self) -> T {
        self.mesh.h
    }

    pub fn cut_elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.elements
            .iter()
            .copied()
            .filter(|&e| self.class(e) == ElementClass::Cut)
    }

    pub fn active_neighbors(&self, element: usize) -> impl Iterator<Item = usize> + '_ {
        self.mesh.neighbors(element).filter(|&e| self.is_active(e))
    }

    /// Quadrature over `T ∩ Ω`.
    pub fn volume_rule(&self, element: usize, order: usize) -> Result<QuadratureRule<T>> {
        let cut = self.require(element)?;
        match cut.class {
            ElementClass::Interior => QuadratureRule::triangle(self.mesh.vertices(element), order),
            ElementClass::Cut => QuadratureRule::polygon(&cut.polygon, order),
        }
    }

    /// Quadrature over the whole element, regardless of the cut.
    pub fn element_rule(&self, element: usize, order: usize) -> Result<QuadratureRule<T>> {
        QuadratureRule::triangle(self.mesh.vertices(element), order)
    }

    /// Quadrature on the interface chord of a cut element.
    pub fn interface_rule(
        &self,
        element: usize,
        order: usize,
    ) -> Result<BoundaryQuadratureRule<T>> {
        let cut = self.require(element)?;
        let (p, q) = match (cut.class, cut.chord) {
            (ElementClass::Cut, Some(chord)) => chord,
            _ => {
                return Err(CutFemError::ContractViolation(format!(
                    "element {element} is not cut by the interface"
                )))
            }
        };
        let mut rule = BoundaryQuadratureRule::new();
        let level_set = self.level_set;
        rule.push_segment(p, q, order, |x| level_set.normal(x))?;
        Ok(rule)
    }

    /// Quadrature on all of `T ∩ ∂Ω`: the interface chord plus any piece of
    /// the background box boundary lying inside the domain.
    pub fn boundary_rule(&self, element: usize, order: usize) -> Result<BoundaryQuadratureRule<T>> {
        let cut = self.require(element)?;
        let mut rule = if cut.class == ElementClass::Cut {
            self.interface_rule(element, order)?
        } else {
            BoundaryQuadratureRule::new()
        };
        for seg in &cut.outer_segments {
            let n = seg.normal;
            rule.push_segment(seg.start, seg.end, order, |_| n)?;
        }
        Ok(rule)
    }

    pub fn num_cut(&self) -> usize {
        self.cut_elements().count()
    }
}

/// Restricts the background mesh to the elements meeting `{phi < 0}`.
pub fn extract_active_mesh<T: Real>(
    mesh: &BackgroundMesh<T>,
    level_set: &LevelSet<T>,
) -> Result<ActiveMesh<T>> {
    let cuts: Vec<_> = (0..mesh.num_elements())
        .map(|e| clip_element(mesh, e, level_set))
        .collect();
    let elements: Vec<usize> = cuts
        .iter()
        .enumerate()
        .filter_map(|(e, c)| c.as_ref().map(|_| e))
        .collect();
    if elements.is_empty() {
        return Err(CutFemError::EmptyDomain);
    }
    Ok(ActiveMesh {
        mesh: mesh.clone(),
        level_set: *level_set,
        elements,
        cuts,
    })
}

/// Quadrature over `T ∩ Ω` for a single element of the background mesh.
pub fn cut_volume_quadrature<T: Real>(
    mesh: &BackgroundMesh<T>,
    element: usize,
    level_set: &LevelSet<T>,
    order: usize,
) -> Result<QuadratureRule<T>> {
    let cut = clip_element(mesh, element, level_set).ok_or_else(|| {
        CutFemError::ContractViolation(format!("element {element} is not active"))
    })?;
    match cut.class {
        ElementClass::Interior => QuadratureRule::triangle(mesh.vertices(element), order),
        ElementClass::Cut => QuadratureRule::polygon(&cut.polygon, order),
    }
}

/// Gauss points on the interface chord of a cut element.
pub fn cut_boundary_quadrature<T: Real>(
    mesh: &BackgroundMesh<T>,
    element: usize,
    level_set: &LevelSet<T>,
    order: usize,
) -> Result<BoundaryQuadratureRule<T>> {
    let cut = clip_element(mesh, element, level_set);
    match cut {
        Some(ElementCut {
            class: ElementClass::Cut,
            chord: Some((p, q)),
            ..
        }) => {
            let mut rule = BoundaryQuadratureRule::new();
            rule.push_segment(p, q, order, |x| level_set.normal(x))?;
            Ok(rule)
        }
        _ => Err(CutFemError::ContractViolation(format!(
            "element {element} is not cut by the interface"
        ))),
    }
}

/// `|T ∩ Ω| / |T|` for an active element.
pub fn cut_fraction<T: Real>(
    mesh: &BackgroundMesh<T>,
    element: usize,
    level_set: &LevelSet<T>,
) -> Result<T> {
    clip_element(mesh, element, level_set)
        .map(|c| c.fraction)
        .ok_or_else(|| CutFemError::ContractViolation(format!("element {element} is not active")))
}
