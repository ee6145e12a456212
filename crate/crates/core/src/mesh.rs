//! Structured background triangulation.

use std::collections::BTreeMap;

use crate::error::{CutFemError, Result};
use crate::geometry::{BoundingBox, Vec2};
use crate::scalar::Real;

/// Edge of the triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Face<T> {
    /// Endpoint node ids, ascending.
    pub nodes: [usize; 2],
    /// First adjacent element and, for internal faces, the second.
    pub elements: (usize, Option<usize>),
    /// Unit normal pointing out of the first adjacent element.
    pub normal: Vec2<T>,
}

impl<T: Real> Face<T> {
    pub fn is_internal(&self) -> bool {
        self.elements.1.is_some()
    }

    /// The element across this face from `element`, if any.
    pub fn other(&self, element: usize) -> Option<usize> {
        match self.elements {
            (a, Some(b)) if a == element => Some(b),
            (a, Some(b)) if b == element => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BackgroundMesh<T> {
    pub nodes: Vec<Vec2<T>>,
    /// Counter-clockwise vertex triples.
    pub elements: Vec<[usize; 3]>,
    pub faces: Vec<Face<T>>,
    /// `element_faces[e][k]` is the face between local vertices `k` and `k + 1`.
    pub element_faces: Vec<[usize; 3]>,
    /// Maximum element diameter.
    pub h: T,
    pub bbox: BoundingBox<T>,
    pub subdivisions: usize,
}

impl<T: Real> BackgroundMesh<T> {
    /// Uniform `n x n` grid of squares, each split along its
    /// lower-left to upper-right diagonal.
    pub fn structured(n: usize, bbox: BoundingBox<T>) -> Result<Self> {
        if n == 0 {
            return Err(CutFemError::InvalidConfiguration(
                "mesh needs at least one subdivision per side".into(),
            ));
        }
        let bbox = BoundingBox::new(bbox.min, bbox.max)?;
        let nf = T::from_usize_lossy(n);
        let dx = bbox.width() / nf;
        let dy = bbox.height() / nf;
        let stride = n + 1;

        let mut nodes = Vec::with_capacity(stride * stride);
        for j in 0..=n {
            for i in 0..=n {
                // Pin the last row/column to the box edge to avoid drift.
                let x = if i == n {
                    bbox.max.x
                } else {
                    bbox.min.x + dx * T::from_usize_lossy(i)
                };
                let y = if j == n {
                    bbox.max.y
                } else {
                    bbox.min.y + dy * T::from_usize_lossy(j)
                };
                nodes.push(Vec2::new(x, y));
            }
        }

        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * stride + i;
                let v10 = v00 + 1;
                let v01 = v00 + stride;
                let v11 = v01 + 1;
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }

        let (faces, element_faces) = build_faces(&nodes, &elements);
        let h = (dx * dx + dy * dy).sqrt();
        Ok(Self {
            nodes,
            elements,
            faces,
            element_faces,
            h,
            bbox,
            subdivisions: n,
        })
    }

    /// Arbitrary triangulation; elements are reoriented counter-clockwise.
    /// `subdivisions` is reported as zero.
    pub fn from_triangles(nodes: Vec<Vec2<T>>, mut elements: Vec<[usize; 3]>) -> Result<Self> {
        if nodes.is_empty() || elements.is_empty() {
            return Err(CutFemError::InvalidConfiguration(
                "empty triangulation".into(),
            ));
        }
        for tri in &mut elements {
            if tri.iter().any(|&v| v >= nodes.len()) {
                return Err(CutFemError::InvalidConfiguration(
                    "node index out of range".into(),
                ));
            }
            let [a, b, c] = tri.map(|v| nodes[v]);
            let twice = (b - a).cross(c - a);
            if twice == T::zero() {
                return Err(CutFemError::InvalidConfiguration(
                    "degenerate triangle".into(),
                ));
            }
            if twice < T::zero() {
                tri.swap(1, 2);
            }
        }
        let (faces, element_faces) = build_faces(&nodes, &elements);
        let mut min = nodes[0];
        let mut max = nodes[0];
        for p in &nodes {
            min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
            max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
        }
        let mut mesh = Self {
            nodes,
            elements,
            faces,
            element_faces,
            h: T::zero(),
            bbox: BoundingBox::new(min, max)?,
            subdivisions: 0,
        };
        mesh.h = (0..mesh.num_elements())
            .map(|e| mesh.diameter(e))
            .fold(T::zero(), T::max);
        Ok(mesh)
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn vertices(&self, element: usize) -> [Vec2<T>; 3] {
        let [a, b, c] = self.elements[element];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn signed_area(&self, element: usize) -> T {
        let [a, b, c] = self.vertices(element);
        (b - a).cross(c - a) * T::lit(0.5)
    }

    pub fn area(&self, element: usize) -> T {
        self.signed_area(element).abs()
    }

    pub fn centroid(&self, element: usize) -> Vec2<T> {
        let [a, b, c] = self.vertices(element);
        (a + b + c) * (T::one() / T::lit(3.0))
    }

    pub fn diameter(&self, element: usize) -> T {
        let [a, b, c] = self.vertices(element);
        a.distance(b).max(b.distance(c)).max(c.distance(a))
    }

    pub fn face_length(&self, face: usize) -> T {
        let [a, b] = self.faces[face].nodes;
        self.nodes[a].distance(self.nodes[b])
    }

    /// Face-adjacent elements of `element`.
    pub fn neighbors(&self, element: usize) -> impl Iterator<Item = usize> + '_ {
        self.element_faces[element]
            .iter()
            .filter_map(move |&f| self.faces[f].other(element))
    }

    pub fn num_internal_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_internal()).count()
    }
}

fn build_faces<T: Real>(
    nodes: &[Vec2<T>],
    elements: &[[usize; 3]],
) -> (Vec<Face<T>>, Vec<[usize; 3]>) {
    let mut by_nodes: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (e, tri) in elements.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            by_nodes
                .entry((a.min(b), a.max(b)))
                .or_default()
                .push((e, k));
        }
    }

    let mut faces = Vec::with_capacity(by_nodes.len());
    let mut element_faces = vec![[usize::MAX; 3]; elements.len()];
    for ((a, b), adjacent) in by_nodes {
        let (e0, k0) = adjacent[0];
        let tri = elements[e0];
        // CCW ordering: the outward normal of edge p->q is the clockwise perpendicular.
        let p = nodes[tri[k0]];
        let q = nodes[tri[(k0 + 1) % 3]];
        let t = q - p;
        let normal = t.perp_cw() * (T::one() / t.norm());
        let id = faces.len();
        for &(e, k) in &adjacent {
            element_faces[e][k] = id;
        }
        faces.push(Face {
            nodes: [a, b],
            elements: (e0, adjacent.get(1).map(|&(e, _)| e)),
            normal,
        });
    }
    (faces, element_faces)
}
