//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use cutfem::classification::{AgglomerationMap, DofPartition};
use cutfem::cut::{ActiveMesh, ElementClass};
use cutfem::geometry::Vec2;
use cutfem::space::DofMap;
use cutfem::stabilization::{StabilizationFamily, StabilizationSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Row-major dense matrix-vector product.
pub fn dense_matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
        .collect()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut r = b.to_vec();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if p != col {
            for k in 0..n {
                m.swap(col * n + k, p * n + k);
            }
            r.swap(col, p);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row * n + k] * x[k]).sum();
        x[row] = (r[row] - s) / m[row * n + row];
    }
    x
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(n: usize, a: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum();
        if off <= 1e-30 * diag {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `B^T B + shift I` for `B` with entries uniform in `(-1, 1)`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
    let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>();
        }
        a[i * n + i] += shift;
    }
    a
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Affine function on a triangle given by its vertex values.
#[derive(Clone, Copy)]
pub struct Affine {
    origin: Vec2<f64>,
    value: f64,
    grad: [f64; 2],
}

impl Affine {
    pub fn from_vertices(x: [Vec2<f64>; 3], v: [f64; 3]) -> Self {
        let (e1, e2) = (x[1] - x[0], x[2] - x[0]);
        let det = e1.x * e2.y - e1.y * e2.x;
        let (d1, d2) = (v[1] - v[0], v[2] - v[0]);
        let gx = (d1 * e2.y - d2 * e1.y) / det;
        let gy = (e1.x * d2 - e2.x * d1) / det;
        Self {
            origin: x[0],
            value: v[0],
            grad: [gx, gy],
        }
    }

    pub fn eval(&self, p: Vec2<f64>) -> f64 {
        self.value + self.grad[0] * (p.x - self.origin.x) + self.grad[1] * (p.y - self.origin.y)
    }

    pub fn grad(&self) -> [f64; 2] {
        self.grad
    }
}

fn tri_area(x: [Vec2<f64>; 3]) -> f64 {
    0.5 * ((x[1].x - x[0].x) * (x[2].y - x[0].y) - (x[2].x - x[0].x) * (x[1].y - x[0].y)).abs()
}

/// Exact `∫_T p^2` for affine `p` from its vertex values.
fn affine_square_integral(x: [Vec2<f64>; 3], p: [f64; 3]) -> f64 {
    let sum: f64 = p.iter().sum();
    let sq: f64 = p.iter().map(|v| v * v).sum();
    tri_area(x) * (sq + sum * sum) / 12.0
}

fn local(active: &ActiveMesh<f64>, dofmap: &DofMap<f64>, v: &[f64], e: usize) -> Affine {
    let d = dofmap.element_dofs(e);
    Affine::from_vertices(active.mesh.vertices(e), [v[d[0]], v[d[1]], v[d[2]]])
}

fn jump_square(active: &ActiveMesh<f64>, on: usize, a: Affine, b: Affine) -> f64 {
    let x = active.mesh.vertices(on);
    affine_square_integral(x, [0, 1, 2].map(|k| a.eval(x[k]) - b.eval(x[k])))
}

/// `s_h(v, v)` evaluated element by element from the definitions, without
/// forming a matrix.
pub fn seminorm_squared(
    spec: &StabilizationSpec<f64>,
    active: &ActiveMesh<f64>,
    dofmap: &DofMap<f64>,
    dofs: &DofPartition,
    map: &AgglomerationMap,
    v: &[f64],
) -> f64 {
    let h = active.mesh.h;
    let m = spec.m as i32;
    let tau = spec.tau;
    let mut total = 0.0;
    match spec.family {
        StabilizationFamily::FaceGradient | StabilizationFamily::FaceL2 => {
            for face in &active.mesh.faces {
                let (a, Some(b)) = face.elements else {
                    continue;
                };
                if !(active.is_active(a) && active.is_active(b)) {
                    continue;
                }
                if active.class(a) != ElementClass::Cut && active.class(b) != ElementClass::Cut {
                    continue;
                }
                let (pa, pb) = (local(active, dofmap, v, a), local(active, dofmap, v, b));
                if spec.family == StabilizationFamily::FaceGradient {
                    let (x0, x1) = (
                        active.mesh.nodes[face.nodes[0]],
                        active.mesh.nodes[face.nodes[1]],
                    );
                    let len = x0.distance(x1);
                    let n = [(x1.y - x0.y) / len, -(x1.x - x0.x) / len];
                    let (ga, gb) = (pa.grad(), pb.grad());
                    let jump = (ga[0] - gb[0]) * n[0] + (ga[1] - gb[1]) * n[1];
                    total += tau * h.powi(3 - 2 * m) * len * jump * jump;
                } else {
                    let both = jump_square(active, a, pa, pb) + jump_square(active, b, pa, pb);
                    total += tau * h.powi(-2 * m) * both;
                }
            }
        }
        StabilizationFamily::ExtensionGradient | StabilizationFamily::ExtensionL2 => {
            for (t, s) in map.iter() {
                let (pt, ps) = (local(active, dofmap, v, t), local(active, dofmap, v, s));
                if spec.family == StabilizationFamily::ExtensionGradient {
                    let (gt, gs) = (pt.grad(), ps.grad());
                    let d = (gt[0] - gs[0]).powi(2) + (gt[1] - gs[1]).powi(2);
                    total += tau * tri_area(active.mesh.vertices(t)) * d;
                } else {
                    total += tau * h.powi(-2 * m) * jump_square(active, t, pt, ps);
                }
            }
        }
        StabilizationFamily::Nodal => {
            for &i in &dofs.small {
                let s = map.get(dofs.anchor(i).unwrap()).unwrap();
                let d = v[i] - local(active, dofmap, v, s).eval(dofmap.coordinate(i));
                total += tau * h.powi(2 - 2 * m) * d * d;
            }
        }
    }
    total
}
