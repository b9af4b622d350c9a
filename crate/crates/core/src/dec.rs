//! Discrete exterior calculus on oriented simplicial 3-complexes.
//!
//! Cochains live on primal simplices; their Hodge duals live on the cells of
//! the dual complex. Exterior derivatives are signed incidence matrices and
//! the Hodge stars are diagonal ratios of dual to primal volumes.
//!
//! Geometry is supplied per tetrahedron (local vertex coordinates in some
//! ℝ^m), so periodic and abstract complexes need no global embedding.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{G2Error, Result};
use crate::mesh::Domain;
use crate::sparse::{CsrMatrix, TripletBuilder};

/// How dual cells are placed inside each simplex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualKind {
    /// Dual vertices at barycenters; dual volumes are always positive.
    Barycentric,
    /// Dual vertices at circumcenters; requires a well-centered mesh.
    Circumcentric,
}

/// An oriented closed (or bounded) simplicial 3-complex with per-tet
/// coordinates.
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    pub n_vertices: usize,
    pub tets: Vec<[usize; 4]>,
    pub coords: Vec<[Vec<f64>; 4]>,
}

#[derive(Clone, Debug)]
pub struct DecComplex {
    pub n: [usize; 4],
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<[usize; 3]>,
    pub tets: Vec<[usize; 4]>,
    pub d0: CsrMatrix,
    pub d1: CsrMatrix,
    pub d2: CsrMatrix,
    /// Diagonal Hodge stars `*k: primal k-cochains → dual (3−k)-cochains`.
    pub star: [Vec<f64>; 4],
    pub closed: bool,
}

/// Volume of the simplex spanned by `pts` (any dimension ≤ ambient).
pub fn simplex_volume(pts: &[&[f64]]) -> f64 {
    let k = pts.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let m = pts[0].len();
    let edges: Vec<Vec<f64>> = (1..=k).map(|i| (0..m).map(|c| pts[i][c] - pts[0][c]).collect()).collect();
    let g = DMatrix::from_fn(k, k, |a, b| edges[a].iter().zip(&edges[b]).map(|(x, y)| x * y).sum::<f64>());
    let fact: f64 = (1..=k).map(|x| x as f64).product();
    g.determinant().max(0.0).sqrt() / fact
}

fn mean(pts: &[&[f64]]) -> Vec<f64> {
    let m = pts[0].len();
    (0..m).map(|c| pts.iter().map(|p| p[c]).sum::<f64>() / pts.len() as f64).collect()
}

/// Circumcenter of a simplex and its barycentric coordinates.
fn circumcenter(pts: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let k = pts.len() - 1;
    let m = pts[0].len();
    if k == 0 {
        return (pts[0].to_vec(), vec![1.0]);
    }
    let e: Vec<Vec<f64>> = (1..=k).map(|i| (0..m).map(|c| pts[i][c] - pts[0][c]).collect()).collect();
    let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let g = DMatrix::from_fn(k, k, |a, b| dotp(&e[a], &e[b]));
    let rhs = nalgebra::DVector::from_fn(k, |a, _| 0.5 * dotp(&e[a], &e[a]));
    let lam = g.lu().solve(&rhs).unwrap_or_else(|| nalgebra::DVector::zeros(k));
    let mut c = pts[0].to_vec();
    for a in 0..k {
        for (ci, ei) in c.iter_mut().zip(&e[a]) {
            *ci += lam[a] * ei;
        }
    }
    let mut bary = vec![1.0 - lam.sum()];
    bary.extend(lam.iter());
    (c, bary)
}

fn sorted_sign<const K: usize>(mut v: [usize; K]) -> ([usize; K], f64) {
    let mut sign = 1.0;
    for i in 0..K {
        for j in 0..K - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    (v, sign)
}

impl SimplicialComplex {
    /// Reorients tetrahedra so that every interior face appears with opposite
    /// induced orientations. Fails on non-orientable complexes.
    pub fn orient(&mut self) -> Result<()> {
        let mut face_tets: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
        for (t, tet) in self.tets.iter().enumerate() {
            for f in tet_faces(tet) {
                face_tets.entry(sorted_sign(f.0).0).or_default().push(t);
            }
        }
        let mut fixed = vec![false; self.tets.len()];
        for start in 0..self.tets.len() {
            if fixed[start] {
                continue;
            }
            fixed[start] = true;
            let mut stack = vec![start];
            while let Some(t) = stack.pop() {
                for (face, sign) in tet_faces(&self.tets[t]) {
                    let (key, s) = sorted_sign(face);
                    for &u in &face_tets[&key] {
                        if u == t {
                            continue;
                        }
                        let su = tet_faces(&self.tets[u])
                            .into_iter()
                            .find(|(f, _)| sorted_sign(*f).0 == key)
                            .map(|(f, sg)| sg * sorted_sign(f).1)
                            .expect("shared face");
                        let want_opposite = sign * s;
                        if fixed[u] {
                            if su == want_opposite {
                                return Err(G2Error::InvalidMesh("complex is not orientable".into()));
                            }
                        } else {
                            if su == want_opposite {
                                self.tets[u].swap(2, 3);
                                self.coords[u].swap(2, 3);
                            }
                            fixed[u] = true;
                            stack.push(u);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Faces of `[a,b,c,d]` with their incidence signs in ∂.
fn tet_faces(t: &[usize; 4]) -> [([usize; 3], f64); 4] {
    let [a, b, c, d] = *t;
    [([b, c, d], 1.0), ([a, c, d], -1.0), ([a, b, d], 1.0), ([a, b, c], -1.0)]
}

/// Builds incidence matrices and Hodge stars.
pub fn build_dec_from_complex(complex: &SimplicialComplex, dual: DualKind) -> Result<DecComplex> {
    let mut edge_id: HashMap<[usize; 2], usize> = HashMap::new();
    let mut face_id: HashMap<[usize; 3], usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut faces = Vec::new();
    for tet in &complex.tets {
        for i in 0..4 {
            for j in i + 1..4 {
                let (e, _) = sorted_sign([tet[i], tet[j]]);
                edge_id.entry(e).or_insert_with(|| {
                    edges.push(e);
                    edges.len() - 1
                });
                for k in j + 1..4 {
                    let (f, _) = sorted_sign([tet[i], tet[j], tet[k]]);
                    face_id.entry(f).or_insert_with(|| {
                        faces.push(f);
                        faces.len() - 1
                    });
                }
            }
        }
    }
    let (nv, ne, nf, nt) = (complex.n_vertices, edges.len(), faces.len(), complex.tets.len());
    let mut d0 = TripletBuilder::new(ne, nv);
    for (k, e) in edges.iter().enumerate() {
        d0.add(k, e[0], -1.0);
        d0.add(k, e[1], 1.0);
    }
    let mut d1 = TripletBuilder::new(nf, ne);
    for (k, f) in faces.iter().enumerate() {
        d1.add(k, edge_id[&[f[1], f[2]]], 1.0);
        d1.add(k, edge_id[&[f[0], f[2]]], -1.0);
        d1.add(k, edge_id[&[f[0], f[1]]], 1.0);
    }
    let mut d2 = TripletBuilder::new(nt, nf);
    let mut face_count = vec![0usize; nf];
    for (k, tet) in complex.tets.iter().enumerate() {
        for (f, s) in tet_faces(tet) {
            let (key, sg) = sorted_sign(f);
            let id = face_id[&key];
            face_count[id] += 1;
            d2.add(k, id, s * sg);
        }
    }
    let closed = face_count.iter().all(|&c| c == 2);

    // dual volumes accumulated tet by tet
    let mut dual0 = vec![0.0; nv];
    let mut dual1 = vec![0.0; ne];
    let mut dual2 = vec![0.0; nf];
    let mut prim1 = vec![0.0; ne];
    let mut prim2 = vec![0.0; nf];
    let mut star3 = vec![0.0; nt];
    for (k, tet) in complex.tets.iter().enumerate() {
        let p: Vec<&[f64]> = complex.coords[k].iter().map(|v| v.as_slice()).collect();
        let vol = simplex_volume(&p);
        if vol <= 0.0 {
            return Err(G2Error::NonWellCenteredMesh { dim: 3, index: k, volume: vol });
        }
        star3[k] = 1.0 / vol;
        let center = |idx: &[usize]| -> Result<Vec<f64>> {
            let q: Vec<&[f64]> = idx.iter().map(|&i| p[i]).collect();
            match dual {
                DualKind::Barycentric => Ok(mean(&q)),
                DualKind::Circumcentric => {
                    let (c, bary) = circumcenter(&q);
                    if idx.len() > 1 && bary.iter().any(|&b| b <= 1e-12) {
                        let min = bary.iter().copied().fold(f64::INFINITY, f64::min);
                        return Err(G2Error::NonWellCenteredMesh { dim: idx.len() - 1, index: k, volume: min });
                    }
                    Ok(c)
                }
            }
        };
        let ct = center(&[0, 1, 2, 3])?;
        for i in 0..4 {
            dual0[tet[i]] += match dual {
                DualKind::Barycentric => vol / 4.0,
                DualKind::Circumcentric => {
                    // sum of sub-tetrahedra (vertex, edge, face, tet centers)
                    let mut v = 0.0;
                    for j in (0..4).filter(|&j| j != i) {
                        for l in (0..4).filter(|&l| l != i && l != j) {
                            let ce = center(&[i, j])?;
                            let cf = center(&[i, j, l])?;
                            v += simplex_volume(&[p[i], &ce, &cf, &ct]);
                        }
                    }
                    v
                }
            };
        }
        for i in 0..4 {
            for j in i + 1..4 {
                let eid = edge_id[&sorted_sign([tet[i], tet[j]]).0];
                let ce = center(&[i, j])?;
                for l in (0..4).filter(|&l| l != i && l != j) {
                    let cf = center(&[i, j, l])?;
                    dual1[eid] += simplex_volume(&[&ce, &cf, &ct]);
                }
            }
        }
        for (f, _) in tet_faces(&[0, 1, 2, 3]) {
            let fid = face_id[&sorted_sign([tet[f[0]], tet[f[1]], tet[f[2]]]).0];
            let cf = center(&f)?;
            dual2[fid] += simplex_volume(&[&cf, &ct]);
            prim2[fid] = simplex_volume(&[p[f[0]], p[f[1]], p[f[2]]]);
        }
        for i in 0..4 {
            for j in i + 1..4 {
                prim1[edge_id[&sorted_sign([tet[i], tet[j]]).0]] = simplex_volume(&[p[i], p[j]]);
            }
        }
    }
    let star1: Vec<f64> = dual1.iter().zip(&prim1).map(|(d, p)| d / p).collect();
    let star2: Vec<f64> = dual2.iter().zip(&prim2).map(|(d, p)| d / p).collect();
    for (dim, s) in [(0, &dual0), (1, &star1), (2, &star2)] {
        if let Some((index, &v)) = s.iter().enumerate().find(|(_, v)| **v <= 0.0 || !v.is_finite()) {
            return Err(G2Error::NonWellCenteredMesh { dim, index, volume: v });
        }
    }
    Ok(DecComplex {
        n: [nv, ne, nf, nt],
        edges,
        faces,
        tets: complex.tets.clone(),
        d0: d0.build(),
        d1: d1.build(),
        d2: d2.build(),
        star: [dual0, star1, star2, star3],
        closed,
    })
}

/// Kuhn (6 tetrahedra per cube) subdivision of the periodic `n³` grid on the
/// unit torus.
pub fn torus_complex(n: usize) -> Result<SimplicialComplex> {
    if n < 4 {
        return Err(G2Error::InvalidResolution(n));
    }
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize, k: usize| (i % n) + n * ((j % n) + n * (k % n));
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::new();
    let mut coords = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in &perms {
                    let mut cur = [0usize; 3];
                    let mut verts = [0usize; 4];
                    let mut pos: [Vec<f64>; 4] = Default::default();
                    for step in 0..4 {
                        if step > 0 {
                            cur[perm[step - 1]] = 1;
                        }
                        verts[step] = idx(i + cur[0], j + cur[1], k + cur[2]);
                        pos[step] = vec![
                            (i + cur[0]) as f64 * h,
                            (j + cur[1]) as f64 * h,
                            (k + cur[2]) as f64 * h,
                        ];
                    }
                    tets.push(verts);
                    coords.push(pos);
                }
            }
        }
    }
    let mut c = SimplicialComplex {
        n_vertices: n * n * n,
        tets,
        coords,
    };
    c.orient()?;
    Ok(c)
}

/// Boundary of the regular 4-simplex (5 tetrahedra), a 3-sphere.
pub fn four_simplex_boundary() -> SimplicialComplex {
    let pt = |i: usize| -> Vec<f64> { (0..5).map(|c| if c == i { 1.0 } else { 0.0 }).collect() };
    let mut tets = Vec::new();
    for skip in 0..5 {
        let v: Vec<usize> = (0..5).filter(|&i| i != skip).collect();
        tets.push([v[0], v[1], v[2], v[3]]);
    }
    finish(5, tets, pt)
}

/// Boundary of the 16-cell (cross-polytope), a 3-sphere with 16 tetrahedra.
pub fn cross_polytope_boundary() -> SimplicialComplex {
    let pt = |v: usize| -> Vec<f64> {
        let axis = v / 2;
        let sign = if v.is_multiple_of(2) { 1.0 } else { -1.0 };
        (0..4).map(|c| if c == axis { sign } else { 0.0 }).collect()
    };
    let tets = (0..16)
        .map(|mask: usize| std::array::from_fn(|axis| 2 * axis + ((mask >> axis) & 1)))
        .collect();
    finish(8, tets, pt)
}

/// S² × S¹: boundary of a tetrahedron times a 3-cycle, each prism split into
/// three tetrahedra along the vertex order.
pub fn sphere_circle_product() -> SimplicialComplex {
    let s2 = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ];
    let levels = 3;
    let id = |v: usize, l: usize| v + 4 * (l % levels);
    let pos = |g: usize| -> Vec<f64> {
        let (v, l) = (g % 4, g / 4);
        let th = 2.0 * std::f64::consts::PI * l as f64 / levels as f64;
        let s = 1.0 / 3f64.sqrt();
        vec![s2[v][0] * s, s2[v][1] * s, s2[v][2] * s, 2.0 * th.cos(), 2.0 * th.sin()]
    };
    let mut tets = Vec::new();
    for skip in 0..4 {
        let tri: Vec<usize> = (0..4).filter(|&i| i != skip).collect();
        let (a, b, c) = (tri[0], tri[1], tri[2]);
        for l in 0..levels {
            let (x, y) = (l, l + 1);
            tets.push([id(a, x), id(b, x), id(c, x), id(c, y)]);
            tets.push([id(a, x), id(b, x), id(b, y), id(c, y)]);
            tets.push([id(a, x), id(a, y), id(b, y), id(c, y)]);
        }
    }
    finish(4 * levels, tets, pos)
}

fn finish(n: usize, tets: Vec<[usize; 4]>, pos: impl Fn(usize) -> Vec<f64>) -> SimplicialComplex {
    let coords = tets.iter().map(|t| t.map(&pos)).collect();
    let mut c = SimplicialComplex {
        n_vertices: n,
        tets,
        coords,
    };
    c.orient().expect("fixture is orientable");
    c
}

/// Complex underlying a domain: the Kuhn-subdivided grid for the torus, the
/// tetrahedra themselves for a ball mesh.
pub fn complex_of_domain(domain: &Domain) -> Result<SimplicialComplex> {
    match domain.kind {
        crate::mesh::DomainKind::PeriodicGrid { n } => torus_complex(n),
        crate::mesh::DomainKind::BallMesh { .. } => {
            let coords = domain
                .cells
                .iter()
                .map(|c| c.map(|i| domain.nodes[i].r3().to_vec()))
                .collect();
            let mut c = SimplicialComplex {
                n_vertices: domain.len(),
                tets: domain.cells.clone(),
                coords,
            };
            c.orient()?;
            Ok(c)
        }
        _ => Err(G2Error::Unsupported("point clouds carry no cell complex".into())),
    }
}

pub fn build_dec(domain: &Domain, dual: DualKind) -> Result<DecComplex> {
    build_dec_from_complex(&complex_of_domain(domain)?, dual)
}

const PRIME: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % PRIME as u128) as u64
}

fn powmod(mut a: u64, mut e: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a);
        }
        a = mulmod(a, a);
        e >>= 1;
    }
    r
}

/// Rank of an integer matrix by elimination modulo a large prime.
pub fn integer_rank(m: &CsrMatrix) -> usize {
    let to_mod = |v: f64| -> u64 {
        let i = v.round() as i64;
        i.rem_euclid(PRIME as i64) as u64
    };
    let mut rows: Vec<HashMap<usize, u64>> = (0..m.nrows)
        .map(|i| m.row(i).map(|(j, v)| (j, to_mod(v))).filter(|(_, v)| *v != 0).collect())
        .collect();
    let mut pivots: HashMap<usize, HashMap<usize, u64>> = HashMap::new();
    let mut rank = 0;
    for row in rows.iter_mut() {
        let mut r = std::mem::take(row);
        loop {
            let Some(&col) = r.keys().min() else { break };
            if let Some(p) = pivots.get(&col) {
                let f = r[&col];
                for (&j, &pv) in p {
                    let e = r.entry(j).or_insert(0);
                    *e = (*e + PRIME - mulmod(f, pv)) % PRIME;
                    if *e == 0 {
                        r.remove(&j);
                    }
                }
            } else {
                let inv = powmod(r[&col], PRIME - 2);
                for v in r.values_mut() {
                    *v = mulmod(*v, inv);
                }
                pivots.insert(col, r);
                rank += 1;
                break;
            }
        }
    }
    rank
}

impl DecComplex {
    /// Betti numbers from ranks of the incidence matrices.
    pub fn betti(&self) -> [usize; 4] {
        let r0 = integer_rank(&self.d0);
        let r1 = integer_rank(&self.d1);
        let r2 = integer_rank(&self.d2);
        let [v, e, f, t] = self.n;
        [v - r0, e - r0 - r1, f - r1 - r2, t - r2]
    }

    /// `max |d1 d0|` and `max |d2 d1|` (exactly zero for a valid complex).
    pub fn dd_defect(&self) -> (f64, f64) {
        (self.d1.mul(&self.d0).max_abs(), self.d2.mul(&self.d1).max_abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_complex_is_exact_and_has_torus_homology() {
        let c = torus_complex(4).unwrap();
        let dec = build_dec_from_complex(&c, DualKind::Barycentric).unwrap();
        assert_eq!(dec.n, [64, 448, 768, 384]);
        assert_eq!(dec.dd_defect(), (0.0, 0.0));
        assert!(dec.closed);
        assert_eq!(dec.betti(), [1, 3, 3, 1]);
        let h3 = (0.25f64).powi(3);
        assert!(dec.star[0].iter().all(|&s| (s - h3).abs() < 1e-15));
        assert!(dec.star.iter().flatten().all(|&s| s > 0.0));
    }

    #[test]
    fn kuhn_cubes_are_not_well_centered() {
        let c = torus_complex(4).unwrap();
        assert!(matches!(
            build_dec_from_complex(&c, DualKind::Circumcentric),
            Err(G2Error::NonWellCenteredMesh { .. })
        ));
    }

    #[test]
    fn fixture_homology() {
        for c in [four_simplex_boundary(), cross_polytope_boundary()] {
            let dec = build_dec_from_complex(&c, DualKind::Barycentric).unwrap();
            assert_eq!(dec.betti(), [1, 0, 0, 1]);
            assert!(dec.closed);
        }
        let dec = build_dec_from_complex(&sphere_circle_product(), DualKind::Barycentric).unwrap();
        assert_eq!(dec.betti(), [1, 1, 1, 1]);
        assert_eq!(dec.n[3], 36);
        // regular tetrahedra are well centered
        assert!(build_dec_from_complex(&cross_polytope_boundary(), DualKind::Circumcentric).is_ok());
    }

    #[test]
    fn volumes() {
        let p = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let q: Vec<&[f64]> = p.iter().map(|x| x.as_slice()).collect();
        assert!((simplex_volume(&q) - 1.0 / 6.0).abs() < 1e-15);
        assert!((simplex_volume(&q[..3]) - 0.5).abs() < 1e-15);
    }
}
