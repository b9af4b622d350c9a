//! Discretized flat model domains: the periodic 3-torus grid in T⁷, a
//! tetrahedral ball in ℝ³ × {0} ⊂ ℝ⁷, and a round S³ point cloud used as
//! a curved (non-associative) fixture.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{cross, Vec7};
use crate::error::{G2Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    PeriodicGrid { n: usize },
    BallMesh { refinement: usize },
    /// Round S³ of the given radius in span(e1..e4), sampled at scattered points.
    SpherePointCloud { radius: f64 },
}

/// A discretized 3-manifold embedded in ℝ⁷ with tangent and normal frames.
#[derive(Clone, Debug)]
pub struct Domain {
    pub kind: DomainKind,
    pub nodes: Vec<Vec7>,
    pub cells: Vec<[usize; 4]>,
    /// Orthonormal tangent frame per node.
    pub tangent_frame: Vec<[Vec7; 3]>,
    /// Orthonormal basis of the normal space per node.
    pub normal_frame: Vec<[Vec7; 4]>,
    /// One-ring neighbours (excluding the node itself).
    pub neighbors: Vec<Vec<usize>>,
    /// Nodal quadrature weights (dual volumes).
    pub weights: Vec<f64>,
    pub boundary: Option<SurfaceMesh>,
    /// Characteristic mesh size.
    pub h: f64,
}

impl Domain {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_boundary_node(&self) -> Vec<bool> {
        let mut flags = vec![false; self.len()];
        if let Some(s) = &self.boundary {
            for &i in &s.domain_index {
                flags[i] = true;
            }
        }
        flags
    }

    /// Largest deviation from orthonormality of the tangent/normal frames and
    /// of `e3 = e1 × e2`.
    pub fn frame_defect(&self) -> (f64, f64) {
        let mut ortho = 0.0_f64;
        let mut assoc = 0.0_f64;
        for (t, nf) in self.tangent_frame.iter().zip(&self.normal_frame) {
            let all: Vec<Vec7> = t.iter().chain(nf.iter()).copied().collect();
            for i in 0..7 {
                for j in 0..7 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    ortho = ortho.max((all[i].dot(&all[j]) - target).abs());
                }
            }
            assoc = assoc.max((cross(&t[0], &t[1]) - t[2]).max_abs());
        }
        (ortho, assoc)
    }
}

/// Boundary surface ∂Y with its adapted frames and curvatures.
///
/// `triangles` use local indices and are oriented so that
/// `(b − a) × (c − a)` points out of Y. `normal` is the inner unit normal n.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub points: Vec<Vec7>,
    pub domain_index: Vec<usize>,
    pub triangles: Vec<[usize; 3]>,
    pub normal: Vec<Vec7>,
    pub v: Vec<Vec7>,
    pub w: Vec<Vec7>,
    pub k_v: Vec<f64>,
    pub k_w: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    /// Lumped area per node.
    pub areas: Vec<f64>,
    pub neighbors: Vec<Vec<usize>>,
    pub h: f64,
}

impl SurfaceMesh {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Builds adjacency, areas, and fitted frames/curvatures from positions
    /// and outward-oriented triangles.
    pub fn from_triangles(
        points: Vec<Vec7>,
        triangles: Vec<[usize; 3]>,
        domain_index: Vec<usize>,
    ) -> Result<Self> {
        let n = points.len();
        let mut neighbors = vec![Vec::new(); n];
        let mut areas = vec![0.0; n];
        let mut normal_acc = vec![[0.0; 3]; n];
        let mut edge_len = 0.0;
        for t in &triangles {
            let [a, b, c] = t.map(|i| points[i].r3());
            let nrm = cross3(sub3(b, a), sub3(c, a));
            let area = 0.5 * norm3(nrm);
            for k in 0..3 {
                let i = t[k];
                areas[i] += area / 3.0;
                // outward area vector; inner normal is its negative
                for d in 0..3 {
                    normal_acc[i][d] -= nrm[d];
                }
                for l in 0..3 {
                    if l != k && !neighbors[i].contains(&t[l]) {
                        neighbors[i].push(t[l]);
                    }
                }
            }
            edge_len += norm3(sub3(b, a)) + norm3(sub3(c, b)) + norm3(sub3(a, c));
        }
        for nb in neighbors.iter_mut() {
            nb.sort_unstable();
        }
        let h = edge_len / (3.0 * triangles.len().max(1) as f64);
        let mut s = SurfaceMesh {
            points,
            domain_index,
            triangles,
            normal: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            w: Vec::with_capacity(n),
            k_v: Vec::with_capacity(n),
            k_w: Vec::with_capacity(n),
            mean_curvature: Vec::with_capacity(n),
            areas,
            neighbors,
            h,
        };
        for i in 0..n {
            let guess = normalize3(normal_acc[i]);
            let fit = s.fit_quadratic(i, guess)?;
            s.normal.push(Vec7::from_r3(fit.normal));
            s.v.push(Vec7::from_r3(fit.v));
            s.w.push(cross(&Vec7::from_r3(fit.normal), &Vec7::from_r3(fit.v)));
            s.k_v.push(fit.k_v);
            s.k_w.push(fit.k_w);
            s.mean_curvature.push(0.5 * (fit.k_v + fit.k_w));
        }
        Ok(s)
    }

    /// Nodes within `rings` edges of `i` (excluding `i`).
    pub fn ring(&self, i: usize, rings: usize) -> Vec<usize> {
        ring_of(&self.neighbors, i, rings)
    }

    /// Local height-function fit `z = a₁x + a₂y + ax² + bxy + cy²` in the
    /// frame (t₁, t₂; n), iterated to tilt n onto the fitted normal.
    fn fit_quadratic(&self, i: usize, guess: [f64; 3]) -> Result<SurfaceFit> {
        let p = self.points[i].r3();
        let mut ring = self.ring(i, 2);
        if ring.len() < 8 {
            ring = self.ring(i, 3);
        }
        let mut n = guess;
        let mut coeffs = [0.0; 5];
        let (mut t1, mut t2) = tangent_basis(n);
        for _ in 0..4 {
            let rows = ring.len();
            let mut a = DMatrix::<f64>::zeros(rows, 5);
            let mut z = DVector::<f64>::zeros(rows);
            for (r, &j) in ring.iter().enumerate() {
                let d = sub3(self.points[j].r3(), p);
                let (x, y) = (dot3(d, t1) / self.h, dot3(d, t2) / self.h);
                let wgt = 1.0 / (x * x + y * y).max(1e-12).sqrt();
                let row = [x, y, x * x, x * y, y * y];
                for c in 0..5 {
                    a[(r, c)] = wgt * row[c];
                }
                z[r] = wgt * dot3(d, n) / self.h;
            }
            let svd = a.svd(true, true);
            let sol = svd
                .solve(&z, 1e-12)
                .map_err(|_| G2Error::MissingCurvatureData(i))?;
            coeffs = [sol[0], sol[1], sol[2], sol[3], sol[4]];
            let tilt = coeffs[0].abs() + coeffs[1].abs();
            let nn = [
                n[0] - coeffs[0] * t1[0] - coeffs[1] * t2[0],
                n[1] - coeffs[0] * t1[1] - coeffs[1] * t2[1],
                n[2] - coeffs[0] * t1[2] - coeffs[1] * t2[2],
            ];
            n = normalize3(nn);
            (t1, t2) = tangent_basis(n);
            if tilt < 1e-13 {
                break;
            }
        }
        // refit in the final frame happened in the loop's last pass unless
        // tilt was already negligible; coefficients are in units of 1/h
        let (a2, b2, c2) = (coeffs[2] / self.h, coeffs[3] / self.h, coeffs[4] / self.h);
        let shape = Matrix2::new(2.0 * a2, b2, b2, 2.0 * c2);
        let eig = SymmetricEigen::new(shape);
        let (kmax_idx, kmin_idx) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
        let k_v = eig.eigenvalues[kmax_idx];
        let k_w = eig.eigenvalues[kmin_idx];
        let tie = (k_v - k_w).abs() <= 1e-6 * (1.0 + k_v.abs().max(k_w.abs()));
        let v = if tie {
            // smallest-index coordinate axis with a usable tangential part
            let mut chosen = t1;
            for axis in 0..3 {
                let mut e = [0.0; 3];
                e[axis] = 1.0;
                let proj = sub3(e, scale3(n, dot3(e, n)));
                if norm3(proj) > 0.3 {
                    chosen = normalize3(proj);
                    break;
                }
            }
            chosen
        } else {
            let ev = eig.eigenvectors.column(kmax_idx);
            normalize3(add3(scale3(t1, ev[0]), scale3(t2, ev[1])))
        };
        Ok(SurfaceFit { normal: n, v, k_v, k_w })
    }
}

struct SurfaceFit {
    normal: [f64; 3],
    v: [f64; 3],
    k_v: f64,
    k_w: f64,
}

pub(crate) fn ring_of(adj: &[Vec<usize>], i: usize, rings: usize) -> Vec<usize> {
    let mut seen = vec![i];
    let mut frontier = vec![i];
    for _ in 0..rings {
        let mut next = Vec::new();
        for &f in &frontier {
            for &j in &adj[f] {
                if !seen.contains(&j) {
                    seen.push(j);
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    seen.retain(|&j| j != i);
    seen.sort_unstable();
    seen
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
pub(crate) fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
pub(crate) fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
pub(crate) fn normalize3(a: [f64; 3]) -> [f64; 3] {
    scale3(a, 1.0 / norm3(a))
}

fn tangent_basis(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if n[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let t1 = normalize3(sub3(helper, scale3(n, dot3(helper, n))));
    let t2 = cross3(n, t1);
    (t1, t2)
}

fn flat_frames(count: usize) -> (Vec<[Vec7; 3]>, Vec<[Vec7; 4]>) {
    let t = [Vec7::basis(0), Vec7::basis(1), Vec7::basis(2)];
    let nf = [Vec7::basis(3), Vec7::basis(4), Vec7::basis(5), Vec7::basis(6)];
    (vec![t; count], vec![nf; count])
}

/// Index of grid node `(i, j, k)` on the periodic `n³` grid.
pub fn grid_index(n: usize, i: usize, j: usize, k: usize) -> usize {
    (i % n) + n * ((j % n) + n * (k % n))
}

/// Flat torus T³ × {0} ⊂ T⁷ on an `n³` grid of spacing `1/n`.
pub fn build_torus_grid(n: usize) -> Result<Domain> {
    if n < 4 {
        return Err(G2Error::InvalidResolution(n));
    }
    let h = 1.0 / n as f64;
    let mut nodes = vec![Vec7::ZERO; n * n * n];
    let mut neighbors = vec![Vec::new(); n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let idx = grid_index(n, i, j, k);
                nodes[idx] = Vec7::from_r3([i as f64 * h, j as f64 * h, k as f64 * h]);
                let mut nb = vec![
                    grid_index(n, i + 1, j, k),
                    grid_index(n, i + n - 1, j, k),
                    grid_index(n, i, j + 1, k),
                    grid_index(n, i, j + n - 1, k),
                    grid_index(n, i, j, k + 1),
                    grid_index(n, i, j, k + n - 1),
                ];
                nb.sort_unstable();
                nb.dedup();
                neighbors[idx] = nb;
            }
        }
    }
    let (tangent_frame, normal_frame) = flat_frames(nodes.len());
    Ok(Domain {
        kind: DomainKind::PeriodicGrid { n },
        weights: vec![h * h * h; nodes.len()],
        nodes,
        cells: Vec::new(),
        tangent_frame,
        normal_frame,
        neighbors,
        boundary: None,
        h,
    })
}

/// Radial boundary shapes for [`build_ball_mesh`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BallShape {
    Round { radius: f64 },
    Ellipsoid { axes: [f64; 3] },
    /// `r = 1 − pinch·sin²θ` (θ polar angle); the waist is concave for
    /// `pinch > 1/3`.
    Waisted { pinch: f64 },
}

impl BallShape {
    /// Boundary radius in unit direction `d`.
    pub fn radius(&self, d: [f64; 3]) -> f64 {
        match *self {
            BallShape::Round { radius } => radius,
            BallShape::Ellipsoid { axes } => {
                1.0 / (0..3).map(|k| (d[k] / axes[k]).powi(2)).sum::<f64>().sqrt()
            }
            BallShape::Waisted { pinch } => 1.0 - pinch * (1.0 - d[2] * d[2]),
        }
    }
}

fn icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v = Vec::new();
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            v.push([0.0, s1, s2 * g]);
            v.push([s1, s2 * g, 0.0]);
            v.push([s2 * g, 0.0, s1]);
        }
    }
    let v: Vec<[f64; 3]> = v.into_iter().map(normalize3).collect();
    let edge = norm3(sub3(v[0], v[1])).min(norm3(sub3(v[0], v[2])));
    let mut min_edge = f64::INFINITY;
    for a in 0..12 {
        for b in a + 1..12 {
            min_edge = min_edge.min(norm3(sub3(v[a], v[b])));
        }
    }
    let _ = edge;
    let close = |a: usize, b: usize| (norm3(sub3(v[a], v[b])) - min_edge).abs() < 1e-9;
    let mut faces = Vec::new();
    for a in 0..12 {
        for b in a + 1..12 {
            for c in b + 1..12 {
                if close(a, b) && close(b, c) && close(a, c) {
                    let nrm = cross3(sub3(v[b], v[a]), sub3(v[c], v[a]));
                    if dot3(nrm, v[a]) > 0.0 {
                        faces.push([a, b, c]);
                    } else {
                        faces.push([a, c, b]);
                    }
                }
            }
        }
    }
    (v, faces)
}

fn tet_volume(p: [[f64; 3]; 4]) -> f64 {
    dot3(sub3(p[1], p[0]), cross3(sub3(p[2], p[0]), sub3(p[3], p[0]))) / 6.0
}

/// Tetrahedral ball in ℝ³ × {0}: the 20-tetrahedron icosahedral template is
/// red-refined `refinement` times and mapped radially onto the region
/// `{ r ≤ shape.radius(θ, φ) }`.
pub fn build_ball_mesh(shape: BallShape, refinement: usize) -> Result<Domain> {
    let (ico, faces) = icosahedron();
    let mut pts: Vec<[f64; 3]> = vec![[0.0; 3]];
    pts.extend(ico.iter().copied());
    let mut tets: Vec<[usize; 4]> = faces.iter().map(|f| [0, f[0] + 1, f[1] + 1, f[2] + 1]).collect();
    for _ in 0..refinement {
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, pts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *mids.entry(key).or_insert_with(|| {
                pts.push(scale3(add3(pts[a], pts[b]), 0.5));
                pts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(tets.len() * 8);
        for t in &tets {
            let [v0, v1, v2, v3] = *t;
            let m01 = mid(v0, v1, &mut pts);
            let m02 = mid(v0, v2, &mut pts);
            let m03 = mid(v0, v3, &mut pts);
            let m12 = mid(v1, v2, &mut pts);
            let m13 = mid(v1, v3, &mut pts);
            let m23 = mid(v2, v3, &mut pts);
            next.push([v0, m01, m02, m03]);
            next.push([m01, v1, m12, m13]);
            next.push([m02, m12, v2, m23]);
            next.push([m03, m13, m23, v3]);
            let options = [
                ((m01, m23), [m02, m12, m13, m03]),
                ((m02, m13), [m01, m12, m23, m03]),
                ((m03, m12), [m01, m13, m23, m02]),
            ];
            let (diag, ring) = options
                .iter()
                .min_by(|a, b| {
                    let la = norm3(sub3(pts[a.0 .0], pts[a.0 .1]));
                    let lb = norm3(sub3(pts[b.0 .0], pts[b.0 .1]));
                    la.partial_cmp(&lb).unwrap()
                })
                .unwrap();
            for k in 0..4 {
                next.push([diag.0, diag.1, ring[k], ring[(k + 1) % 4]]);
            }
        }
        tets = next;
    }
    // orient positively in template coordinates
    for t in tets.iter_mut() {
        if tet_volume(t.map(|i| pts[i])) < 0.0 {
            t.swap(2, 3);
        }
    }
    // gauge of the icosahedron: 1 on its surface, 0 at the centre
    let face_planes: Vec<([f64; 3], f64)> = faces
        .iter()
        .map(|f| {
            let nrm = normalize3(cross3(sub3(ico[f[1]], ico[f[0]]), sub3(ico[f[2]], ico[f[0]])));
            (nrm, dot3(nrm, ico[f[0]]))
        })
        .collect();
    let mapped: Vec<[f64; 3]> = pts
        .iter()
        .map(|&p| {
            let r = norm3(p);
            if r < 1e-14 {
                return [0.0; 3];
            }
            let gauge = face_planes
                .iter()
                .map(|(nrm, d)| dot3(*nrm, p) / d)
                .fold(0.0, f64::max);
            let dir = scale3(p, 1.0 / r);
            scale3(dir, gauge * shape.radius(dir))
        })
        .collect();
    let nodes: Vec<Vec7> = mapped.iter().map(|&p| Vec7::from_r3(p)).collect();
    tet_domain(nodes, tets, DomainKind::BallMesh { refinement })
}

/// Assembles a [`Domain`] from tetrahedra in ℝ³ × {0} (positively oriented).
pub fn tet_domain(nodes: Vec<Vec7>, cells: Vec<[usize; 4]>, kind: DomainKind) -> Result<Domain> {
    let n = nodes.len();
    let vols: Vec<f64> = cells.iter().map(|c| tet_volume(c.map(|i| nodes[i].r3()))).collect();
    let mean = vols.iter().map(|v| v.abs()).sum::<f64>() / vols.len().max(1) as f64;
    for (cell, &volume) in vols.iter().enumerate() {
        if volume < 1e-12 * mean {
            return Err(G2Error::MeshQuality { cell, volume, mean });
        }
    }
    let mut weights = vec![0.0; n];
    let mut neighbors = vec![Vec::new(); n];
    let mut face_count: BTreeMap<[usize; 3], (usize, [usize; 3], usize)> = BTreeMap::new();
    let mut edge_sum = 0.0;
    let mut edge_n = 0usize;
    for (c, &vol) in cells.iter().zip(&vols) {
        for a in 0..4 {
            weights[c[a]] += vol / 4.0;
            for b in 0..4 {
                if a != b && !neighbors[c[a]].contains(&c[b]) {
                    neighbors[c[a]].push(c[b]);
                    if c[a] < c[b] {
                        edge_sum += (nodes[c[a]] - nodes[c[b]]).norm();
                        edge_n += 1;
                    }
                }
            }
        }
        for opp in 0..4 {
            let mut f = [0usize; 3];
            let mut k = 0;
            for a in 0..4 {
                if a != opp {
                    f[k] = c[a];
                    k += 1;
                }
            }
            let mut key = f;
            key.sort_unstable();
            let e = face_count.entry(key).or_insert((0, f, c[opp]));
            e.0 += 1;
        }
    }
    for nb in neighbors.iter_mut() {
        nb.sort_unstable();
    }
    let mut boundary_tris: Vec<[usize; 3]> = Vec::new();
    for (_, (count, f, opp)) in face_count {
        if count == 1 {
            let [a, b, c] = f.map(|i| nodes[i].r3());
            let nrm = cross3(sub3(b, a), sub3(c, a));
            let inward = sub3(nodes[opp].r3(), a);
            if dot3(nrm, inward) > 0.0 {
                boundary_tris.push([f[0], f[2], f[1]]);
            } else {
                boundary_tris.push(f);
            }
        }
    }
    let boundary = if boundary_tris.is_empty() {
        None
    } else {
        let mut local = vec![usize::MAX; n];
        let mut domain_index = Vec::new();
        for t in &boundary_tris {
            for &i in t {
                if local[i] == usize::MAX {
                    local[i] = 0;
                    domain_index.push(i);
                }
            }
        }
        domain_index.sort_unstable();
        for (l, &i) in domain_index.iter().enumerate() {
            local[i] = l;
        }
        let points = domain_index.iter().map(|&i| nodes[i]).collect();
        let tris = boundary_tris.iter().map(|t| t.map(|i| local[i])).collect();
        Some(SurfaceMesh::from_triangles(points, tris, domain_index)?)
    };
    let (tangent_frame, normal_frame) = flat_frames(n);
    Ok(Domain {
        kind,
        nodes,
        cells,
        tangent_frame,
        normal_frame,
        neighbors,
        weights,
        boundary,
        h: edge_sum / edge_n.max(1) as f64,
    })
}

/// Genus of a closed orientable triangulated surface from its Euler
/// characteristic.
pub fn euler_genus_of(triangles: &[[usize; 3]]) -> Result<i64> {
    let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut verts = std::collections::BTreeSet::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            verts.insert(a);
        }
    }
    if let Some((&(a, b), &c)) = edges.iter().find(|(_, &c)| c != 2) {
        return Err(G2Error::NonClosedSurface(a, b, c));
    }
    let chi = verts.len() as i64 - edges.len() as i64 + triangles.len() as i64;
    Ok((2 - chi) / 2)
}

pub fn euler_genus(surface: &SurfaceMesh) -> Result<i64> {
    euler_genus_of(&surface.triangles)
}

/// Outward-oriented triangulation of the torus of revolution with radii
/// `(major, minor)` on an `nu × nv` parameter grid.
pub fn torus_surface(major: f64, minor: f64, nu: usize, nv: usize) -> Result<SurfaceMesh> {
    let mut points = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let th = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
        for j in 0..nv {
            let ph = 2.0 * std::f64::consts::PI * j as f64 / nv as f64;
            let rr = major + minor * ph.cos();
            points.push(Vec7::from_r3([rr * th.cos(), rr * th.sin(), minor * ph.sin()]));
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut tris = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    // make orientation outward (normal away from the core circle)
    let t = tris[0].map(|k| points[k].r3());
    let nrm = cross3(sub3(t[1], t[0]), sub3(t[2], t[0]));
    let core = normalize3([t[0][0], t[0][1], 0.0]);
    let radial = sub3(t[0], scale3(core, major));
    if dot3(nrm, radial) < 0.0 {
        tris.iter_mut().for_each(|t| t.swap(1, 2));
    }
    let count = points.len();
    SurfaceMesh::from_triangles(points, tris, (0..count).collect())
}

/// Combinatorial closed surface of genus 2: two triangulated tori glued
/// along a removed triangle.
pub fn genus_two_triangles() -> Vec<[usize; 3]> {
    let grid = |n: usize, offset: usize| -> Vec<[usize; 3]> {
        let idx = |i: usize, j: usize| offset + (i % n) * n + (j % n);
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                t.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        t
    };
    let n = 5;
    let mut first = grid(n, 0);
    let mut second = grid(n, n * n);
    let removed_a = first.remove(0);
    let removed_b = second.remove(0);
    // identify the removed triangles with reversed orientation
    let map: HashMap<usize, usize> = [
        (removed_b[0], removed_a[0]),
        (removed_b[1], removed_a[2]),
        (removed_b[2], removed_a[1]),
    ]
    .into_iter()
    .collect();
    first.extend(second.into_iter().map(|t| t.map(|i| *map.get(&i).unwrap_or(&i))));
    first
}

/// Scattered-point round S³ of `radius` in span(e1..e4), deliberately
/// non-associative, with the left-quaternionic tangent frame and normal
/// frame (x/r, e5, e6, e7).
pub fn build_sphere_cloud(radius: f64, count: usize, neighbors_k: usize, seed: u64) -> Domain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit: Vec<[f64; 4]> = Vec::with_capacity(count);
    while unit.len() < count {
        let p: [f64; 4] = std::array::from_fn(|_| rng.gen::<f64>() * 2.0 - 1.0);
        let r2: f64 = p.iter().map(|x| x * x).sum();
        if r2 > 1e-4 && r2 <= 1.0 {
            let r = r2.sqrt();
            unit.push(p.map(|x| x / r));
        }
    }
    let nodes: Vec<Vec7> = unit
        .iter()
        .map(|q| Vec7([q[0] * radius, q[1] * radius, q[2] * radius, q[3] * radius, 0.0, 0.0, 0.0]))
        .collect();
    let tangent_frame = unit
        .iter()
        .map(|q| {
            let [a, b, c, d] = *q;
            [
                Vec7([-b, a, -d, c, 0.0, 0.0, 0.0]),
                Vec7([-c, d, a, -b, 0.0, 0.0, 0.0]),
                Vec7([-d, -c, b, a, 0.0, 0.0, 0.0]),
            ]
        })
        .collect();
    let normal_frame = unit
        .iter()
        .map(|q| {
            [
                Vec7([q[0], q[1], q[2], q[3], 0.0, 0.0, 0.0]),
                Vec7::basis(4),
                Vec7::basis(5),
                Vec7::basis(6),
            ]
        })
        .collect();
    let mut neighbors = Vec::with_capacity(count);
    let mut spacing = 0.0;
    for i in 0..count {
        let mut d: Vec<(f64, usize)> = (0..count)
            .filter(|&j| j != i)
            .map(|j| ((nodes[i] - nodes[j]).norm_squared(), j))
            .collect();
        d.select_nth_unstable_by(neighbors_k, |a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut nb: Vec<(f64, usize)> = d[..neighbors_k].to_vec();
        nb.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        spacing += nb[0].0.sqrt();
        neighbors.push(nb.into_iter().map(|(_, j)| j).collect());
    }
    let volume = 2.0 * std::f64::consts::PI.powi(2) * radius.powi(3);
    Domain {
        kind: DomainKind::SpherePointCloud { radius },
        nodes,
        cells: Vec::new(),
        tangent_frame,
        normal_frame,
        neighbors,
        weights: vec![volume / count as f64; count],
        boundary: None,
        h: spacing / count as f64,
    }
}

/// On-disk mesh description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshFile {
    pub kind: String,
    pub nodes: Vec<[f64; 7]>,
    pub cells: Vec<[usize; 4]>,
    pub boundary_triangles: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<usize>,
}

impl MeshFile {
    pub fn from_domain(domain: &Domain) -> Self {
        let (kind, n, refinement) = match &domain.kind {
            DomainKind::PeriodicGrid { n } => ("torus", Some(*n), None),
            DomainKind::BallMesh { refinement } => ("ball", None, Some(*refinement)),
            DomainKind::SpherePointCloud { .. } => ("sphere-cloud", None, None),
        };
        let boundary_triangles = domain
            .boundary
            .as_ref()
            .map(|s| s.triangles.iter().map(|t| t.map(|i| s.domain_index[i])).collect())
            .unwrap_or_default();
        MeshFile {
            kind: kind.to_string(),
            nodes: domain.nodes.iter().map(|v| v.0).collect(),
            cells: domain.cells.clone(),
            boundary_triangles,
            n,
            refinement,
        }
    }

    pub fn into_domain(self) -> Result<Domain> {
        match self.kind.as_str() {
            "torus" => {
                let n = self.n.unwrap_or_else(|| (self.nodes.len() as f64).cbrt().round() as usize);
                let d = build_torus_grid(n)?;
                if d.nodes.len() != self.nodes.len()
                    || d.nodes.iter().zip(&self.nodes).any(|(a, b)| (*a - Vec7(*b)).max_abs() > 1e-9)
                {
                    return Err(G2Error::InvalidMesh("torus nodes do not match a uniform grid".into()));
                }
                Ok(d)
            }
            "ball" => {
                if self.cells.is_empty() {
                    return Err(G2Error::InvalidMesh("ball mesh without cells".into()));
                }
                let nodes: Vec<Vec7> = self.nodes.iter().map(|v| Vec7(*v)).collect();
                if nodes.iter().any(|v| v.0[3..].iter().any(|x| x.abs() > 1e-12)) {
                    return Err(G2Error::InvalidMesh("ball nodes must lie in R^3 x {0}".into()));
                }
                if self.cells.iter().flatten().any(|&i| i >= nodes.len()) {
                    return Err(G2Error::InvalidMesh("cell index out of range".into()));
                }
                let d = tet_domain(nodes, self.cells, DomainKind::BallMesh {
                    refinement: self.refinement.unwrap_or(0),
                })?;
                if !self.boundary_triangles.is_empty() {
                    let expected = d.boundary.as_ref().map_or(0, |s| s.triangles.len());
                    if expected != self.boundary_triangles.len() {
                        return Err(G2Error::InvalidMesh(format!(
                            "boundary_triangles lists {} faces, cells give {}",
                            self.boundary_triangles.len(),
                            expected
                        )));
                    }
                }
                Ok(d)
            }
            other => Err(G2Error::InvalidMesh(format!("unsupported mesh kind '{other}'"))),
        }
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
