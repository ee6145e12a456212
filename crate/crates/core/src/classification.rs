//! Large/small element split, the agglomeration map `S_h` and the
//! partition of the degrees of freedom into stable and unstable sets.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::cut::{ActiveMesh, ElementClass};
use crate::error::{CutFemError, Result};
use crate::scalar::Real;
use crate::space::DofMap;

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_MAX_PATH_LENGTH: usize = 6;

/// Threshold split of the active elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementPartition<T> {
    pub gamma: T,
    /// Elements with cut fraction at least `gamma`, ascending.
    pub large: Vec<usize>,
    /// Remaining active elements, ascending.
    pub small: Vec<usize>,
    is_large: Vec<bool>,
}

impl<T: Real> ElementPartition<T> {
    pub fn is_large(&self, element: usize) -> bool {
        self.is_large.get(element).copied().unwrap_or(false)
    }

    pub fn is_small(&self, element: usize) -> bool {
        self.small.binary_search(&element).is_ok()
    }
}

pub fn partition_elements<T: Real>(
    active: &ActiveMesh<T>,
    gamma: T,
) -> Result<ElementPartition<T>> {
    if !(gamma > T::zero() && gamma <= T::one()) {
        return Err(CutFemError::InvalidConfiguration(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    let mut is_large = vec![false; active.mesh.num_elements()];
    let (mut large, mut small) = (Vec::new(), Vec::new());
    for &e in &active.elements {
        if active.fraction(e) >= gamma {
            is_large[e] = true;
            large.push(e);
        } else {
            small.push(e);
        }
    }
    if large.is_empty() {
        return Err(CutFemError::UnusableGeometry(format!(
            "no active element has cut fraction >= {gamma}"
        )));
    }
    Ok(ElementPartition {
        gamma,
        large,
        small,
        is_large,
    })
}

/// Candidate set for the image of `S_h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AgglomerationTarget {
    #[default]
    Large,
    /// Only elements lying entirely inside the domain.
    Interior,
}

impl fmt::Display for AgglomerationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgglomerationTarget::Large => "large",
            AgglomerationTarget::Interior => "interior",
        })
    }
}

impl FromStr for AgglomerationTarget {
    type Err = CutFemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "large" => Ok(Self::Large),
            "interior" => Ok(Self::Interior),
            other => Err(CutFemError::InvalidConfiguration(format!(
                "unknown agglomeration target `{other}` (expected large or interior)"
            ))),
        }
    }
}

/// `S_h` together with a shortest face-neighbour path for each small element.
#[derive(Debug, Clone, PartialEq)]
pub struct AgglomerationMap {
    pub target: AgglomerationTarget,
    assignments: BTreeMap<usize, usize>,
    paths: BTreeMap<usize, Option<Vec<usize>>>,
}

impl AgglomerationMap {
    /// `S_h(T)` for a small element.
    pub fn get(&self, small: usize) -> Option<usize> {
        self.assignments.get(&small).copied()
    }

    /// Stored path from `T` to `S_h(T)` (both included), `None` if the two
    /// lie in different components of the active mesh.
    pub fn path(&self, small: usize) -> Option<&[usize]> {
        self.paths.get(&small).and_then(|p| p.as_deref())
    }

    pub fn path_length(&self, small: usize) -> Option<usize> {
        self.path(small).map(<[usize]>::len)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// `(T, S_h(T))` in ascending order of `T`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|(&t, &s)| (t, s))
    }

    pub fn max_path_length(&self) -> Option<usize> {
        self.paths
            .values()
            .map(|p| p.as_ref().map(Vec::len))
            .try_fold(0, |m, l| l.map(|l| m.max(l)))
    }

    /// Overrides `S_h(small)` and recomputes its path.
    pub fn reassign<T: Real>(&mut self, active: &ActiveMesh<T>, small: usize, target: usize) {
        self.assignments.insert(small, target);
        self.paths.insert(
            small,
            shortest_path(active, small, target, |e| active.is_active(e)),
        );
    }
}

/// Breadth-first search over face neighbours restricted to `allowed`
/// elements. Path includes both ends.
fn shortest_path<T: Real>(
    active: &ActiveMesh<T>,
    from: usize,
    to: usize,
    allowed: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    if !allowed(from) || !allowed(to) {
        return None;
    }
    if from == to {
        return Some(vec![from]);
    }
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    parent.insert(from, from);
    let mut queue = VecDeque::from([from]);
    while let Some(e) = queue.pop_front() {
        for nb in active.mesh.neighbors(e) {
            if !allowed(nb) || parent.contains_key(&nb) {
                continue;
            }
            parent.insert(nb, e);
            if nb == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = parent[&cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(nb);
        }
    }
    None
}

pub fn build_agglomeration_map<T: Real>(
    partition: &ElementPartition<T>,
    active: &ActiveMesh<T>,
    target: AgglomerationTarget,
) -> Result<AgglomerationMap> {
    let candidates: Vec<usize> = match target {
        AgglomerationTarget::Large => partition.large.clone(),
        AgglomerationTarget::Interior => partition
            .large
            .iter()
            .copied()
            .filter(|&e| active.class(e) == ElementClass::Interior)
            .collect(),
    };
    if candidates.is_empty() {
        return Err(CutFemError::UnusableGeometry(format!(
            "no {target} element available as agglomeration target"
        )));
    }
    let centroids: Vec<_> = candidates
        .iter()
        .map(|&e| active.mesh.centroid(e))
        .collect();
    let mut map = AgglomerationMap {
        target,
        assignments: BTreeMap::new(),
        paths: BTreeMap::new(),
    };
    for &t in &partition.small {
        let c = active.mesh.centroid(t);
        let mut best = 0;
        let mut best_d = (centroids[0] - c).norm_squared();
        for (k, &ck) in centroids.iter().enumerate().skip(1) {
            let d = (ck - c).norm_squared();
            // Candidates ascend by id, so strict comparison keeps the smallest id on ties.
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        map.reassign(active, t, candidates[best]);
    }
    Ok(map)
}

/// Stable (`I^L`) and unstable (`I^S`) degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct DofPartition {
    /// `I^S`, ascending.
    pub small: Vec<usize>,
    /// `I^L`, ascending.
    pub large: Vec<usize>,
    anchors: Vec<Option<usize>>,
}

impl DofPartition {
    pub fn is_small(&self, dof: usize) -> bool {
        self.anchors.get(dof).is_some_and(Option::is_some)
    }

    /// Anchor element `T_i` of an unstable dof.
    pub fn anchor(&self, dof: usize) -> Option<usize> {
        self.anchors.get(dof).copied().flatten()
    }

    pub fn num_dofs(&self) -> usize {
        self.anchors.len()
    }
}

pub fn partition_dofs<T: Real>(
    dofmap: &DofMap<T>,
    partition: &ElementPartition<T>,
) -> DofPartition {
    let n = dofmap.num_dofs();
    let mut anchors = vec![None; n];
    let (mut small, mut large) = (Vec::new(), Vec::new());
    for (i, anchor) in anchors.iter_mut().enumerate() {
        let support = dofmap.support(i);
        if support.iter().any(|&e| partition.is_large(e)) {
            large.push(i);
        } else {
            *anchor = support.iter().copied().min();
            small.push(i);
        }
    }
    DofPartition {
        small,
        large,
        anchors,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    /// Path from a small element to its target is too long or missing.
    A2Path,
    /// Two small elements of one support have targets not joined by a
    /// short path of large elements.
    A3SmallPair,
    /// A large and a small element of one support: the large element is
    /// not joined to the small element's target by a short large path.
    A3MixedPair,
}

impl ViolationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationKind::A2Path => "a2_path",
            ViolationKind::A3SmallPair => "a3_small_pair",
            ViolationKind::A3MixedPair => "a3_mixed_pair",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// The small element concerned (`T` for A2, `T_1` or `T_2` for A3).
    pub element_id: usize,
    pub kind: ViolationKind,
    /// Shortest admissible path length found, `None` when no path exists.
    pub path_length: Option<usize>,
    /// Dof whose support contains the offending pair (A3 only).
    pub dof: Option<usize>,
    /// Other element of the pair (A3 only).
    pub partner: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssumptionReport {
    pub max_path_length: usize,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    /// CSV with header `element_id,violation_kind,path_length`; a missing
    /// path leaves the last column empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "element_id,violation_kind,path_length")?;
        for v in &self.violations {
            let len = v.path_length.map(|l| l.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{}", v.element_id, v.kind, len)?;
        }
        Ok(())
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "path bound L_max = {}", self.max_path_length)?;
        for kind in [
            ViolationKind::A2Path,
            ViolationKind::A3SmallPair,
            ViolationKind::A3MixedPair,
        ] {
            writeln!(f, "{kind}: {} violation(s)", self.count(kind))?;
        }
        for v in &self.violations {
            write!(f, "  element {} {}", v.element_id, v.kind)?;
            match v.path_length {
                Some(l) => write!(f, " path length {l}")?,
                None => write!(f, " no path")?,
            }
            if let (Some(d), Some(p)) = (v.dof, v.partner) {
                write!(f, " (dof {d}, partner {p})")?;
            }
            writeln!(f)?;
        }
        if self.is_empty() {
            writeln!(f, "all path assumptions hold")?;
        }
        Ok(())
    }
}

/// Checks the path assumptions at bound `max_path_length` (number of
/// elements on a path, both ends included). A3 is examined for the
/// support of every dof.
pub fn verify_assumptions<T: Real>(
    active: &ActiveMesh<T>,
    map: &AgglomerationMap,
    partition: &ElementPartition<T>,
    dofmap: &DofMap<T>,
    max_path_length: usize,
) -> AssumptionReport {
    let mut report = AssumptionReport {
        max_path_length,
        violations: Vec::new(),
    };
    for &t in &partition.small {
        let len = map.path_length(t);
        if len.is_none_or(|l| l > max_path_length) {
            report.violations.push(Violation {
                element_id: t,
                kind: ViolationKind::A2Path,
                path_length: len,
                dof: None,
                partner: None,
            });
        }
    }

    let mut cache: BTreeMap<(usize, usize), Option<usize>> = BTreeMap::new();
    let mut large_path = |a: usize, b: usize| {
        let key = (a.min(b), a.max(b));
        *cache.entry(key).or_insert_with(|| {
            shortest_path(active, key.0, key.1, |e| partition.is_large(e)).map(|p| p.len())
        })
    };
    let too_long = |len: Option<usize>| len.is_none_or(|l| l > max_path_length);

    for i in 0..dofmap.num_dofs() {
        let support = dofmap.support(i);
        let small: Vec<usize> = support
            .iter()
            .copied()
            .filter(|&e| !partition.is_large(e))
            .collect();
        let large: Vec<usize> = support
            .iter()
            .copied()
            .filter(|&e| partition.is_large(e))
            .collect();
        for (a, &t1) in small.iter().enumerate() {
            for &t2 in &small[a + 1..] {
                let (Some(s1), Some(s2)) = (map.get(t1), map.get(t2)) else {
                    continue;
                };
                let len = large_path(s1, s2);
                if too_long(len) {
                    report.violations.push(Violation {
                        element_id: t1,
                        kind: ViolationKind::A3SmallPair,
                        path_length: len,
                        dof: Some(i),
                        partner: Some(t2),
                    });
                }
            }
        }
        for &t1 in &large {
            for &t2 in &small {
                let Some(s2) = map.get(t2) else { continue };
                let len = large_path(t1, s2);
                if too_long(len) {
                    report.violations.push(Violation {
                        element_id: t2,
                        kind: ViolationKind::A3MixedPair,
                        path_length: len,
                        dof: Some(i),
                        partner: Some(t1),
                    });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cut::extract_active_mesh;
    use crate::geometry::{BoundingBox, LevelSet, Vec2};
    use crate::mesh::BackgroundMesh;

    fn circle(n: usize) -> ActiveMesh<f64> {
        let mesh = BackgroundMesh::structured(n, BoundingBox::square(-1.0, 1.0).unwrap()).unwrap();
        let ls = LevelSet::circle(Vec2::new(0.0, 0.0), 0.5).unwrap();
        extract_active_mesh(&mesh, &ls).unwrap()
    }

    #[test]
    fn tiny_gamma_makes_every_element_large() {
        let active = circle(16);
        let p = partition_elements(&active, 1e-9).unwrap();
        assert!(p.small.is_empty());
        assert_eq!(p.large, active.elements);
    }

    #[test]
    fn interior_elements_are_large_for_any_gamma() {
        let active = circle(16);
        for gamma in [0.1, 0.5, 0.999, 1.0] {
            let p = partition_elements(&active, gamma).unwrap();
            for &e in &active.elements {
                if active.class(e) == ElementClass::Interior {
                    assert!(p.is_large(e));
                }
            }
        }
    }

    #[test]
    fn gamma_out_of_range_rejected() {
        let active = circle(8);
        assert!(partition_elements(&active, 0.0).is_err());
        assert!(partition_elements(&active, 1.5).is_err());
    }

    #[test]
    fn no_large_element_is_unusable() {
        // A sliver of the domain inside a single element.
        let mesh = BackgroundMesh::structured(2, BoundingBox::square(0.0, 1.0).unwrap()).unwrap();
        let ls = LevelSet::circle(Vec2::new(0.0, 0.0), 0.05).unwrap();
        let active = extract_active_mesh(&mesh, &ls).unwrap();
        assert!(matches!(
            partition_elements(&active, 0.5),
            Err(CutFemError::UnusableGeometry(_))
        ));
    }

    #[test]
    fn single_large_face_neighbour_is_chosen() {
        // Halfplane x < 0.6 on [0,1]^2 with n = 1: lower triangle (fraction
        // 0.36) is small, upper one (fraction 0.84) is large.
        let mesh = BackgroundMesh::structured(1, BoundingBox::square(0.0, 1.0).unwrap()).unwrap();
        let ls = LevelSet::half_plane(Vec2::new(1.0, 0.0), 0.6).unwrap();
        let active = extract_active_mesh(&mesh, &ls).unwrap();
        let p = partition_elements(&active, 0.5).unwrap();
        assert_eq!(p.small, vec![0]);
        assert_eq!(p.large, vec![1]);
        let map = build_agglomeration_map(&p, &active, AgglomerationTarget::Large).unwrap();
        assert_eq!(map.get(0), Some(1));
        assert_eq!(map.path(0), Some(&[0, 1][..]));
    }

    #[test]
    fn ties_pick_smallest_id() {
        let nodes = vec![
            Vec2::new(-1.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
        ];
        let left = [0, 2, 4];
        let right = [1, 3, 2];
        for (elements, expect_left) in [
            (vec![[0, 1, 2], left, right], true),
            (vec![[0, 1, 2], right, left], false),
        ] {
            let mesh = BackgroundMesh::from_triangles(nodes.clone(), elements).unwrap();
            let ls = LevelSet::half_plane(Vec2::new(0.0, 1.0), 10.0).unwrap();
            let active = extract_active_mesh(&mesh, &ls).unwrap();
            let mut p = partition_elements(&active, 0.5).unwrap();
            p.small = vec![0];
            p.large = vec![1, 2];
            p.is_large = vec![false, true, true];
            let map = build_agglomeration_map(&p, &active, AgglomerationTarget::Large).unwrap();
            assert_eq!(map.get(0), Some(1), "expect_left = {expect_left}");
            assert_eq!(map.path_length(0), Some(2));
        }
    }
}
