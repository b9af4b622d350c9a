//! Boundary data for the deformation problem with a coassociative boundary
//! condition: the splitting `ν|∂Y = ν_X ⊕ μ_X`, the zeroth-order operator
//! `𝓓_L = π_L(v × ∇⊥_w − w × ∇⊥_v)`, Chern numbers by discrete holonomy,
//! the index `c1(ν_X) + 1 − g`, and the rigidity verdict.

use nalgebra::{Matrix2, SymmetricEigen};
use serde::Serialize;

use crate::algebra::{cross, Vec7};
use crate::dirac::{dirichlet_energy, flatten, l2_norm_sq, r_nu_matrix, to_ambient, BoundaryCondition, DiracOperator};
use crate::error::{G2Error, Result};
use crate::geometry::SimonsField;
use crate::gradient::surface_weights;
use crate::mesh::{euler_genus, Domain, SurfaceMesh};

/// Per boundary node orthonormal bases `(b, n × b)` of `ν_X` and `μ_X`.
#[derive(Clone, Debug)]
pub struct BoundaryBundles {
    pub e: Vec7,
    pub nu_x: Vec<[Vec7; 2]>,
    pub mu_x: Vec<[Vec7; 2]>,
    /// Largest defect of orthogonality and `n×`-invariance.
    pub invariance_residual: f64,
}

impl BoundaryBundles {
    pub fn condition(&self, which: Bundle) -> BoundaryCondition {
        BoundaryCondition {
            planes: match which {
                Bundle::NuX => self.nu_x.clone(),
                Bundle::MuX => self.mu_x.clone(),
            },
        }
    }

    pub fn planes(&self, which: Bundle) -> &[[Vec7; 2]] {
        match which {
            Bundle::NuX => &self.nu_x,
            Bundle::MuX => &self.mu_x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Bundle {
    NuX,
    MuX,
}

/// Splits the normal bundle along ∂Y for the constant coassociative
/// direction `e`: `ν_X = span(e, n × e)` and `μ_X` its complement.
pub fn decompose_boundary_bundles(domain: &Domain, e: Vec7) -> Result<BoundaryBundles> {
    let surface = domain.boundary.as_ref().ok_or(G2Error::MissingBoundary)?;
    let mut tangential = 0.0_f64;
    for &i in &surface.domain_index {
        for t in &domain.tangent_frame[i] {
            tangential = tangential.max(e.dot(t).abs());
        }
    }
    if tangential > 1e-10 || (e.norm() - 1.0).abs() > 1e-10 {
        return Err(G2Error::InvalidNormal(tangential.max((e.norm() - 1.0).abs())));
    }
    let normal_frames: Vec<[Vec7; 4]> = surface.domain_index.iter().map(|&i| domain.normal_frame[i]).collect();
    Ok(bundles_on_surface(surface, &normal_frames, e))
}

/// Same splitting for a bare surface in ℝ³ × {0} whose normal space is
/// span(e4..e7).
pub fn bundles_on_surface(surface: &SurfaceMesh, normal_frames: &[[Vec7; 4]], e: Vec7) -> BoundaryBundles {
    let mut nu_x = Vec::with_capacity(surface.len());
    let mut mu_x = Vec::with_capacity(surface.len());
    let mut residual = 0.0_f64;
    for l in 0..surface.len() {
        let n = surface.normal[l];
        let b2 = cross(&n, &e);
        let candidate = normal_frames[l]
            .iter()
            .map(|f| *f - e * f.dot(&e) - b2 * f.dot(&b2))
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .expect("four candidates")
            .normalized();
        let m2 = cross(&n, &candidate);
        let nu = [e, b2];
        let mu = [candidate, m2];
        for x in &nu {
            for y in &mu {
                residual = residual.max(x.dot(y).abs());
            }
        }
        // n× maps each plane into itself
        for plane in [&nu, &mu] {
            for x in plane.iter() {
                let jx = cross(&n, x);
                let back = plane[0] * jx.dot(&plane[0]) + plane[1] * jx.dot(&plane[1]);
                residual = residual.max((jx - back).norm());
            }
        }
        nu_x.push(nu);
        mu_x.push(mu);
    }
    BoundaryBundles {
        e,
        nu_x,
        mu_x,
        invariance_residual: residual,
    }
}

/// Tangent planes `(v, w)` of the boundary surface.
pub fn tangent_planes(surface: &SurfaceMesh) -> Vec<[Vec7; 2]> {
    surface.v.iter().zip(&surface.w).map(|(v, w)| [*v, *w]).collect()
}

/// `𝓓_L` in the plane basis at every boundary node.
#[derive(Clone, Debug)]
pub struct DLField {
    /// Symmetrized matrices.
    pub matrices: Vec<Matrix2<f64>>,
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<[f64; 2]>,
    pub traces: Vec<f64>,
    /// `|M₁₂ − M₂₁|` before symmetrization.
    pub asymmetry: Vec<f64>,
}

impl DLField {
    pub fn min_eigenvalue(&self) -> (usize, f64) {
        self.eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, e)| if e[0] < best.1 { (i, e[0]) } else { best })
    }
}

/// `π_{L(q)} x`, normalized.
fn project_unit(plane: &[Vec7; 2], x: Vec7) -> Vec7 {
    (plane[0] * x.dot(&plane[0]) + plane[1] * x.dot(&plane[1])).normalized()
}

/// Rotated tangent frame `(v', w')` with `v' = cos θ v + sin θ w`.
fn rotated_frame(surface: &SurfaceMesh, l: usize, angle: f64) -> (Vec7, Vec7, f64, f64) {
    let (c, s) = (angle.cos(), angle.sin());
    let v = surface.v[l] * c + surface.w[l] * s;
    let w = cross(&surface.normal[l], &v);
    (v, w, c, s)
}

/// `v × ∂_w s − w × ∂_v s` at boundary node `l` (not yet projected), for a
/// field given by its values at the stencil nodes.
fn dl_raw(
    surface: &SurfaceMesh,
    l: usize,
    stencil: &[(usize, [f64; 2])],
    angle: f64,
    value: impl Fn(usize) -> Vec7,
) -> Vec7 {
    let (v, w, c, s) = rotated_frame(surface, l, angle);
    let mut dv = Vec7::ZERO;
    let mut dw = Vec7::ZERO;
    for &(q, wt) in stencil {
        let x = value(q);
        // derivative weights refer to the fitted (v, w); rotate them
        dv += x * (c * wt[0] + s * wt[1]);
        dw += x * (-s * wt[0] + c * wt[1]);
    }
    cross(&v, &dw) - cross(&w, &dv)
}

/// Assembles `𝓓_L` for the plane field `planes` (orthonormal bases with
/// second vector `n ×` first), optionally in a tangent frame rotated by
/// `angle`.
pub fn assemble_dl(surface: &SurfaceMesh, planes: &[[Vec7; 2]], angle: f64) -> Result<DLField> {
    let mut out = DLField {
        matrices: Vec::with_capacity(surface.len()),
        eigenvalues: Vec::with_capacity(surface.len()),
        traces: Vec::with_capacity(surface.len()),
        asymmetry: Vec::with_capacity(surface.len()),
    };
    if surface.k_v.len() != surface.len() || surface.v.len() != surface.len() {
        return Err(G2Error::MissingCurvatureData(surface.k_v.len().min(surface.v.len())));
    }
    for l in 0..surface.len() {
        let stencil = surface_weights(surface, l)?;
        let base = planes[l][0];
        // smooth local sections of L through the plane basis at l
        let first = |q: usize| project_unit(&planes[q], base);
        let second = |q: usize| cross(&surface.normal[q], &first(q));
        let d1 = dl_raw(surface, l, &stencil, angle, first);
        let d2 = dl_raw(surface, l, &stencil, angle, second);
        let b = planes[l];
        let m = Matrix2::new(b[0].dot(&d1), b[0].dot(&d2), b[1].dot(&d1), b[1].dot(&d2));
        let sym = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let (a, c) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        out.asymmetry.push((m[(0, 1)] - m[(1, 0)]).abs());
        out.traces.push(sym.trace());
        out.eigenvalues.push([a.min(c), a.max(c)]);
        out.matrices.push(sym);
    }
    Ok(out)
}

/// `π_L(v × ∇_w s − w × ∇_v s)` for an ambient field `s` given at all
/// boundary nodes.
pub fn apply_dl(surface: &SurfaceMesh, planes: &[[Vec7; 2]], field: &[Vec7]) -> Result<Vec<Vec7>> {
    (0..surface.len())
        .map(|l| {
            let stencil = surface_weights(surface, l)?;
            let raw = dl_raw(surface, l, &stencil, 0.0, |q| field[q]);
            let b = planes[l];
            Ok(b[0] * raw.dot(&b[0]) + b[1] * raw.dot(&b[1]))
        })
        .collect()
}

/// First Chern number of an `n×`-invariant plane field by discrete holonomy.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChernNumber {
    pub value: i64,
    /// Total holonomy divided by 2π before rounding.
    pub raw: f64,
    pub residual: f64,
    pub max_flux: f64,
}

/// Transport coefficient of the unit section `b_p` into the complex line at
/// `q`, as a complex number in the basis `b_q`. The complex structure on the
/// edge is `m×` with `m` the mean of the two unit normals, so the coefficient
/// for `q → p` is exactly the conjugate of the one for `p → q`.
fn link(surface: &SurfaceMesh, planes: &[[Vec7; 2]], p: usize, q: usize) -> (f64, f64) {
    let m = (surface.normal[p] + surface.normal[q]) * 0.5;
    let (bp, bq) = (planes[p][0], planes[q][0]);
    (bq.dot(&bp), cross(&m, &bq).dot(&bp))
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Sums the holonomy of projection transport around every triangle, each
/// triangle oriented positively for the complex structure `n×`. Transport
/// along an edge is the unit-modulus part of the overlap of the two complex
/// lines, so the sum over a closed surface is an integer multiple of 2π up to
/// rounding; `max_flux` (largest per-triangle angle) is the mesh-quality
/// indicator.
pub fn chern_number(surface: &SurfaceMesh, planes: &[[Vec7; 2]]) -> Result<ChernNumber> {
    let mut total = 0.0;
    let mut max_flux = 0.0_f64;
    for t in &surface.triangles {
        let [p, mut q, mut r] = *t;
        let n = surface.normal[p];
        let orient = cross(&n, &(surface.points[q] - surface.points[p])).dot(&(surface.points[r] - surface.points[p]));
        if orient < 0.0 {
            std::mem::swap(&mut q, &mut r);
        }
        let z = cmul(cmul(link(surface, planes, p, q), link(surface, planes, q, r)), link(surface, planes, r, p));
        let flux = z.1.atan2(z.0);
        max_flux = max_flux.max(flux.abs());
        total += flux;
    }
    let raw = total / (2.0 * std::f64::consts::PI);
    let value = raw.round();
    let residual = (raw - value).abs();
    if residual >= 0.1 {
        return Err(G2Error::HolonomyResidualTooLarge { raw, residual });
    }
    Ok(ChernNumber {
        value: value as i64,
        raw,
        residual,
        max_flux,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexReport {
    pub c1_nu_x: ChernNumber,
    pub c1_mu_x: ChernNumber,
    pub c1_tangent: ChernNumber,
    pub genus: i64,
    /// `c1(ν_X) + 1 − g`.
    pub index: i64,
    /// `c1(μ_X) + c1(ν_X) + c1(T∂Y)`.
    pub chern_relation: i64,
}

pub fn index_on_surface(surface: &SurfaceMesh, bundles: &BoundaryBundles) -> Result<IndexReport> {
    let c1_nu_x = chern_number(surface, &bundles.nu_x)?;
    let c1_mu_x = chern_number(surface, &bundles.mu_x)?;
    let c1_tangent = chern_number(surface, &tangent_planes(surface))?;
    let genus = euler_genus(surface)?;
    Ok(IndexReport {
        index: c1_nu_x.value + 1 - genus,
        chern_relation: c1_mu_x.value + c1_nu_x.value + c1_tangent.value,
        c1_nu_x,
        c1_mu_x,
        c1_tangent,
        genus,
    })
}

pub fn index(domain: &Domain, bundles: &BoundaryBundles) -> Result<IndexReport> {
    index_on_surface(domain.boundary.as_ref().ok_or(G2Error::MissingBoundary)?, bundles)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Verdict {
    SmoothModuli,
    Inconclusive { node: usize, eigenvalue: f64, reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    pub verdict: Verdict,
    pub min_dl_mu_x: f64,
    pub min_dl_node: usize,
    pub min_r_nu: f64,
    /// 𝓡_ν vanishes identically (flat, totally geodesic branch).
    pub flat_branch: bool,
    pub expected_dimension: i64,
}

/// Smoothness verdict: `𝓓_{μ_X} > 0` on ∂Y and `𝓡_ν ≥ 0` (accepting
/// `𝓡_ν = 0` in the flat totally geodesic case).
pub fn rigidity_report(dl_mu: &DLField, simons: &SimonsField, index: i64) -> RigidityReport {
    let (min_dl_node, min_dl_mu_x) = dl_mu.min_eigenvalue();
    let (r_node, min_r_nu) = simons.min_r_nu();
    let flat_branch = simons.is_flat(1e-10);
    let verdict = if min_dl_mu_x <= 0.0 {
        Verdict::Inconclusive {
            node: min_dl_node,
            eigenvalue: min_dl_mu_x,
            reason: "boundary operator on mu_X is not positive".into(),
        }
    } else if min_r_nu < -1e-10 {
        Verdict::Inconclusive {
            node: r_node,
            eigenvalue: min_r_nu,
            reason: "R_nu is not non-negative".into(),
        }
    } else {
        Verdict::SmoothModuli
    };
    RigidityReport {
        verdict,
        min_dl_mu_x,
        min_dl_node,
        min_r_nu,
        flat_branch,
        expected_dimension: index,
    }
}

/// `|∫|∇⊥ψ|² + ∫⟨𝓡_νψ,ψ⟩ + ∫_{∂Y}⟨𝓓_Lψ,ψ⟩| / ‖ψ‖²`; meaningful for `Dψ = 0`
/// with `ψ|∂Y ∈ L`.
pub fn boundary_bochner_residual(
    domain: &Domain,
    dirac: &DiracOperator,
    simons: &SimonsField,
    planes: &[[Vec7; 2]],
    psi: &[[f64; 4]],
) -> Result<f64> {
    let surface = domain.boundary.as_ref().ok_or(G2Error::MissingBoundary)?;
    let energy = dirichlet_energy(dirac, psi);
    let x = flatten(psi);
    let rx = r_nu_matrix(simons).matvec(&x);
    let curvature: f64 = rx.iter().zip(&x).zip(&dirac.weights).map(|((a, b), w)| a * b * w).sum();
    let amb = to_ambient(domain, psi);
    let on_boundary: Vec<Vec7> = surface.domain_index.iter().map(|&i| amb[i]).collect();
    let dl = apply_dl(surface, planes, &on_boundary)?;
    let boundary: f64 = (0..surface.len())
        .map(|l| surface.areas[l] * dl[l].dot(&on_boundary[l]))
        .sum();
    Ok((energy + curvature + boundary).abs() / l2_norm_sq(dirac, psi).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_ball_mesh, torus_surface, BallShape};

    fn flat_normal_frames(count: usize) -> Vec<[Vec7; 4]> {
        vec![[Vec7::basis(3), Vec7::basis(4), Vec7::basis(5), Vec7::basis(6)]; count]
    }

    #[test]
    fn bundles_are_invariant_and_orthogonal() {
        let d = build_ball_mesh(BallShape::Round { radius: 1.0 }, 2).unwrap();
        let b = decompose_boundary_bundles(&d, Vec7::basis(3)).unwrap();
        assert!(b.invariance_residual < 1e-10);
        assert!(matches!(
            decompose_boundary_bundles(&d, Vec7::basis(0)),
            Err(G2Error::InvalidNormal(_))
        ));
    }

    #[test]
    fn sphere_chern_numbers() {
        let d = build_ball_mesh(BallShape::Round { radius: 1.0 }, 2).unwrap();
        let b = decompose_boundary_bundles(&d, Vec7::basis(3)).unwrap();
        let r = index(&d, &b).unwrap();
        assert_eq!(r.c1_tangent.value, 2);
        assert_eq!(r.c1_nu_x.value, 0);
        assert_eq!(r.c1_mu_x.value, -2);
        assert_eq!(r.index, 1);
        assert_eq!(r.chern_relation, 0);
    }

    #[test]
    fn torus_surface_index_zero() {
        let s = torus_surface(2.0, 0.7, 40, 16).unwrap();
        let b = bundles_on_surface(&s, &flat_normal_frames(s.len()), Vec7::basis(3));
        let r = index_on_surface(&s, &b).unwrap();
        assert_eq!((r.c1_tangent.value, r.c1_nu_x.value, r.c1_mu_x.value), (0, 0, 0));
        assert_eq!(r.genus, 1);
        assert_eq!(r.index, 0);
    }

    #[test]
    fn sphere_boundary_operator() {
        let d = build_ball_mesh(BallShape::Round { radius: 1.0 }, 2).unwrap();
        let s = d.boundary.as_ref().unwrap();
        let b = decompose_boundary_bundles(&d, Vec7::basis(3)).unwrap();
        let mu = assemble_dl(s, &b.mu_x, 0.0).unwrap();
        for e in &mu.eigenvalues {
            assert!((e[0] - 1.0).abs() < 0.15 && (e[1] - 1.0).abs() < 0.15, "{e:?}");
        }
        let rotated = assemble_dl(s, &b.mu_x, 0.7).unwrap();
        for (x, y) in mu.eigenvalues.iter().zip(&rotated.eigenvalues) {
            assert!((x[0] - y[0]).abs() < 1e-8 && (x[1] - y[1]).abs() < 1e-8);
        }
        let nu = assemble_dl(s, &b.nu_x, 0.0).unwrap();
        for (l, m) in nu.matrices.iter().enumerate() {
            // e is in the kernel and n×e has eigenvalue 2H
            assert!(m[(0, 0)].abs() < 1e-10 && m[(0, 1)].abs() < 0.15);
            assert!((m[(1, 1)] - 2.0 * s.mean_curvature[l]).abs() < 0.2, "{m}");
        }
    }
}
