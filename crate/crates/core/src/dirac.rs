//! The deformation operator `D = Σ_a t_a × ∇⊥_{t_a}` on normal fields, its
//! square, boundary conditions, spectra and kernel estimates, and the
//! residuals of the Weitzenböck, Bochner and Green identities.
//!
//! Normal fields are stored as 4 coefficients per node in the node's normal
//! frame; dof `4·i + b` is the `b`-th coefficient at node `i`.

use nalgebra::Matrix4;

use crate::algebra::{chi, cross, Vec7};
use crate::error::{G2Error, Result};
use crate::geometry::SimonsField;
use crate::gradient::Gradient;
use crate::mesh::{Domain, DomainKind};
use crate::sparse::{dot, CsrMatrix, TripletBuilder};
use crate::spectral::{kernel_from_singular, smallest_singular, symmetric_spectrum, SingularPairs};

/// A section of the normal bundle: 4 frame coefficients per node.
pub type NormalField = Vec<[f64; 4]>;

pub fn flatten(psi: &[[f64; 4]]) -> Vec<f64> {
    psi.iter().flatten().copied().collect()
}

pub fn unflatten(x: &[f64]) -> NormalField {
    x.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect()
}

/// Ambient vectors of a normal field.
pub fn to_ambient(domain: &Domain, psi: &[[f64; 4]]) -> Vec<Vec7> {
    psi.iter()
        .zip(&domain.normal_frame)
        .map(|(c, f)| (0..4).map(|b| f[b] * c[b]).sum())
        .collect()
}

/// Frame coefficients of ambient vectors (normal projection).
pub fn from_ambient(domain: &Domain, v: &[Vec7]) -> NormalField {
    v.iter()
        .zip(&domain.normal_frame)
        .map(|(x, f)| std::array::from_fn(|b| x.dot(&f[b])))
        .collect()
}

/// Matrix of `s ↦ s × (Σ ξ_a e_a)` on span(e4..e7) for the flat tangent frame
/// e1, e2, e3.
pub fn symbol(xi: [f64; 3]) -> Matrix4<f64> {
    let x = Vec7::from_r3(xi);
    Matrix4::from_fn(|c, b| cross(&Vec7::basis(3 + b), &x).dot(&Vec7::basis(3 + c)))
}

/// Assembled `D` together with the pieces needed by the identity checks.
#[derive(Clone, Debug)]
pub struct DiracOperator {
    /// `D` as a `4N × 4N` matrix.
    pub op: CsrMatrix,
    /// `∇⊥_{t_a}` as `4N × 4N` matrices.
    pub nabla: [CsrMatrix; 3],
    /// Quadrature weight per dof (node weight repeated 4 times).
    pub weights: Vec<f64>,
    pub grad: Gradient,
}

/// Assembles `D`. On the periodic grid the result is symmetric (central
/// differences); on meshes it uses least-squares gradients.
pub fn assemble_d(domain: &Domain) -> Result<DiracOperator> {
    if domain.tangent_frame.len() != domain.len() || domain.normal_frame.len() != domain.len() {
        return Err(G2Error::MissingFrames(format!(
            "{} nodes, {} tangent frames, {} normal frames",
            domain.len(),
            domain.tangent_frame.len(),
            domain.normal_frame.len()
        )));
    }
    let grad = Gradient::build(domain)?;
    let n = domain.len();
    let nabla: [CsrMatrix; 3] = std::array::from_fn(|a| {
        let mut b = TripletBuilder::new(4 * n, 4 * n);
        for i in 0..n {
            let fi = &domain.normal_frame[i];
            for (k, g) in grad.g[a].row(i) {
                let fk = &domain.normal_frame[k];
                for bb in 0..4 {
                    for aa in 0..4 {
                        b.add(4 * i + bb, 4 * k + aa, g * fk[aa].dot(&fi[bb]));
                    }
                }
            }
        }
        b.build()
    });
    let mut d = TripletBuilder::new(4 * n, 4 * n);
    for a in 0..3 {
        for i in 0..n {
            let t = domain.tangent_frame[i][a];
            let f = &domain.normal_frame[i];
            let c = Matrix4::from_fn(|c, b| cross(&t, &f[b]).dot(&f[c]));
            for row_b in 0..4 {
                for (col, v) in nabla[a].row(4 * i + row_b) {
                    for row_c in 0..4 {
                        d.add(4 * i + row_c, col, c[(row_c, row_b)] * v);
                    }
                }
            }
        }
    }
    let weights = domain.weights.iter().flat_map(|&w| [w; 4]).collect();
    Ok(DiracOperator {
        op: d.build(),
        nabla,
        weights,
        grad,
    })
}

impl DiracOperator {
    pub fn apply(&self, psi: &[[f64; 4]]) -> NormalField {
        unflatten(&self.op.matvec(&flatten(psi)))
    }

    /// `−Σ_a ∇⊥_a ∇⊥_a` (flat ambient, parallel frames).
    pub fn rough_laplacian(&self) -> CsrMatrix {
        let sq: Vec<CsrMatrix> = self.nabla.iter().map(|n| n.mul(n)).collect();
        sq[0].add(&sq[1], 1.0).add(&sq[2], 1.0).scale(-1.0)
    }

    pub fn square(&self) -> CsrMatrix {
        self.op.mul(&self.op)
    }

    fn inner(&self, x: &[f64], y: &[f64], mask: Option<&[bool]>) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.weights)
            .enumerate()
            .filter(|(k, _)| mask.is_none_or(|m| m[k / 4]))
            .map(|(_, ((a, b), w))| a * b * w)
            .sum()
    }
}

/// Block-diagonal `𝓡_ν` matrix.
pub fn r_nu_matrix(simons: &SimonsField) -> CsrMatrix {
    let n = simons.r_nu.len();
    let mut b = TripletBuilder::new(4 * n, 4 * n);
    for (i, m) in simons.r_nu.iter().enumerate() {
        for r in 0..4 {
            for c in 0..4 {
                b.add(4 * i + r, 4 * i + c, m[(r, c)]);
            }
        }
    }
    b.build()
}

/// `‖D²ψ − (∇⊥*∇⊥ + 𝓡_ν)ψ‖ / ‖ψ‖` in the weighted L² norm, restricted to
/// nodes where `mask` is true (all nodes if `None`).
pub fn weitzenboeck_residual(
    dirac: &DiracOperator,
    simons: &SimonsField,
    psi: &[[f64; 4]],
    mask: Option<&[bool]>,
) -> f64 {
    let x = flatten(psi);
    let dd = dirac.op.matvec(&dirac.op.matvec(&x));
    let lap = dirac.rough_laplacian().matvec(&x);
    let r = r_nu_matrix(simons).matvec(&x);
    let diff: Vec<f64> = dd.iter().zip(&lap).zip(&r).map(|((a, b), c)| a - b - c).collect();
    let num = dirac.inner(&diff, &diff, mask).sqrt();
    let den = dirac.inner(&x, &x, mask).sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Closed Bochner identity `∫ |∇⊥ψ|² − ⟨D²ψ, ψ⟩ + ⟨𝓡_ν ψ, ψ⟩`.
pub fn closed_bochner_residual(dirac: &DiracOperator, simons: &SimonsField, psi: &[[f64; 4]]) -> f64 {
    let x = flatten(psi);
    let grad_sq: f64 = dirac
        .nabla
        .iter()
        .map(|n| {
            let g = n.matvec(&x);
            dirac.inner(&g, &g, None)
        })
        .sum();
    let dd = dirac.op.matvec(&dirac.op.matvec(&x));
    let r = r_nu_matrix(simons).matvec(&x);
    grad_sq - dirac.inner(&dd, &x, None) + dirac.inner(&r, &x, None)
}

/// `|∫⟨Ds, s′⟩ − ⟨s, Ds′⟩ + ∫_{∂Y} ⟨n × s, s′⟩|` with nodal quadrature.
pub fn adjointness_residual(domain: &Domain, dirac: &DiracOperator, s: &[[f64; 4]], s2: &[[f64; 4]]) -> f64 {
    let (x, y) = (flatten(s), flatten(s2));
    let dx = dirac.op.matvec(&x);
    let dy = dirac.op.matvec(&y);
    let mut total = dirac.inner(&dx, &y, None) - dirac.inner(&x, &dy, None);
    if let Some(surf) = &domain.boundary {
        let sa = to_ambient(domain, s);
        let sb = to_ambient(domain, s2);
        for (l, &i) in surf.domain_index.iter().enumerate() {
            total += surf.areas[l] * cross(&surf.normal[l], &sa[i]).dot(&sb[i]);
        }
    }
    total.abs()
}

/// Boundary condition `ψ|∂Y ∈ L`: an orthonormal basis of the plane `L` at
/// each boundary node (indexed like `SurfaceMesh::points`).
#[derive(Clone, Debug)]
pub struct BoundaryCondition {
    pub planes: Vec<[Vec7; 2]>,
}

impl BoundaryCondition {
    /// Orthogonal projector onto `L` in the normal-frame coefficients of
    /// domain node `node` (boundary index `l`).
    pub fn projector(&self, domain: &Domain, l: usize, node: usize) -> Matrix4<f64> {
        let f = &domain.normal_frame[node];
        let cols: Vec<[f64; 4]> = self.planes[l]
            .iter()
            .map(|b| std::array::from_fn(|k| b.dot(&f[k])))
            .collect();
        Matrix4::from_fn(|r, c| cols.iter().map(|v| v[r] * v[c]).sum())
    }
}

/// Reduced basis for fields satisfying a boundary condition: each column is
/// a dof vector in the full `4N` space.
struct ConstrainedBasis {
    /// `(dof, value)` entries of each column.
    columns: Vec<Vec<(usize, f64)>>,
    /// Quadrature weight of the node owning each column.
    col_weight: Vec<f64>,
}

fn constrained_basis(domain: &Domain, bc: Option<&BoundaryCondition>) -> Result<ConstrainedBasis> {
    let n = domain.len();
    let mut boundary_slot = vec![usize::MAX; n];
    if let Some(bc) = bc {
        let surf = domain.boundary.as_ref().ok_or(G2Error::MissingBoundary)?;
        if bc.planes.len() != surf.len() {
            return Err(G2Error::MissingFrames(format!(
                "boundary condition has {} planes for {} boundary nodes",
                bc.planes.len(),
                surf.len()
            )));
        }
        for (l, &i) in surf.domain_index.iter().enumerate() {
            boundary_slot[i] = l;
        }
    }
    let mut columns = Vec::new();
    let mut col_weight = Vec::new();
    for i in 0..n {
        if boundary_slot[i] == usize::MAX {
            for b in 0..4 {
                columns.push(vec![(4 * i + b, 1.0)]);
                col_weight.push(domain.weights[i]);
            }
        } else {
            let bc = bc.expect("slot set only with a condition");
            let f = &domain.normal_frame[i];
            for v in &bc.planes[boundary_slot[i]] {
                columns.push((0..4).map(|k| (4 * i + k, v.dot(&f[k]))).collect());
                col_weight.push(domain.weights[i]);
            }
        }
    }
    Ok(ConstrainedBasis { columns, col_weight })
}

/// `W^{1/2} D P Ŵ^{-1/2}`: the constrained operator in orthonormal-ish
/// coordinates, so singular values approximate those of the continuum
/// problem in L².
fn scaled_constrained(dirac: &DiracOperator, basis: &ConstrainedBasis) -> CsrMatrix {
    let nrows = dirac.op.nrows;
    let mut p = TripletBuilder::new(nrows, basis.columns.len());
    for (c, col) in basis.columns.iter().enumerate() {
        let s = 1.0 / basis.col_weight[c].sqrt();
        for &(r, v) in col {
            p.add(r, c, v * s);
        }
    }
    let p = p.build();
    let left: Vec<f64> = dirac.weights.iter().map(|w| w.sqrt()).collect();
    dirac
        .op
        .mul(&p)
        .scale_rows_cols(&left, &vec![1.0; basis.columns.len()])
}

/// Kernel estimate with the spectral-gap rule.
#[derive(Clone, Debug)]
pub struct KernelEstimate {
    pub dim: usize,
    pub gap: f64,
    pub abs_tol: f64,
    pub singular_values: Vec<f64>,
    /// Kernel vectors as normal fields (weighted-L² normalized).
    pub vectors: Vec<NormalField>,
    pub method: &'static str,
}

/// Default absolute threshold factor relative to the operator scale.
pub const DEFAULT_ABS_TOL_FACTOR: f64 = 1e-6;
pub const DEFAULT_GAP_RATIO: f64 = 50.0;

/// Numerical kernel dimension of `D` with an optional boundary condition.
/// `abs_tol` defaults to `1e−6 · ‖op‖`.
pub fn kernel_dim(
    domain: &Domain,
    dirac: &DiracOperator,
    bc: Option<&BoundaryCondition>,
    abs_tol: Option<f64>,
    gap_ratio: f64,
    count: usize,
) -> Result<KernelEstimate> {
    let basis = constrained_basis(domain, bc)?;
    let a = scaled_constrained(dirac, &basis);
    let tol = abs_tol.unwrap_or(DEFAULT_ABS_TOL_FACTOR * a.norm_inf());
    let SingularPairs { values, vectors, method } = smallest_singular(&a, count, 0x5eed)?;
    let (dim, gap) = kernel_from_singular(&values, tol, gap_ratio)?;
    let fields = vectors
        .iter()
        .take(dim)
        .map(|v| {
            let mut x = vec![0.0; dirac.op.nrows];
            for (c, col) in basis.columns.iter().enumerate() {
                let s = v[c] / basis.col_weight[c].sqrt();
                for &(r, val) in col {
                    x[r] += val * s;
                }
            }
            unflatten(&x)
        })
        .collect();
    Ok(KernelEstimate {
        dim,
        gap,
        abs_tol: tol,
        singular_values: values,
        vectors: fields,
        method,
    })
}

/// Smallest-magnitude spectrum. Without a boundary condition this is the
/// eigenvalues of the weight-symmetrized operator, sorted by magnitude; with
/// one it is the singular values of the constrained (rectangular) operator.
pub fn spectrum(domain: &Domain, dirac: &DiracOperator, bc: Option<&BoundaryCondition>, count: usize) -> Result<Vec<f64>> {
    match bc {
        None => {
            let s: Vec<f64> = dirac.weights.iter().map(|w| w.sqrt()).collect();
            let inv: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
            let a = dirac.op.scale_rows_cols(&s, &inv);
            let sym = a.add(&a.transpose(), 1.0).scale(0.5);
            let mut ev = symmetric_spectrum(&sym)?;
            ev.sort_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap());
            ev.truncate(count);
            Ok(ev)
        }
        Some(_) => {
            let basis = constrained_basis(domain, bc)?;
            let a = scaled_constrained(dirac, &basis);
            Ok(smallest_singular(&a, count, 0x5eed)?.values)
        }
    }
}

/// Associativity defect `χ(t1,t2,t3)/|t1∧t2∧t3|` of the embedding
/// `x ↦ x + displacement(x)`, with tangent vectors from discrete derivatives.
pub fn evaluate_f(domain: &Domain, grad: &Gradient, displacement: &[Vec7]) -> Result<Vec<Vec7>> {
    let pos: Vec<Vec7> = domain.nodes.iter().zip(displacement).map(|(x, d)| *x + *d).collect();
    let t: [Vec<Vec7>; 3] = std::array::from_fn(|a| grad.apply_vec(a, &pos));
    // the periodic grid wraps: derivatives of the coordinate functions pick up
    // the period jump, so use the frame plus the derivative of the displacement
    let t: [Vec<Vec7>; 3] = if matches!(domain.kind, DomainKind::PeriodicGrid { .. }) {
        std::array::from_fn(|a| {
            let dd = grad.apply_vec(a, displacement);
            (0..domain.len()).map(|i| domain.tangent_frame[i][a] + dd[i]).collect()
        })
    } else {
        t
    };
    (0..domain.len())
        .map(|i| {
            let (a, b, c) = (t[0][i], t[1][i], t[2][i]);
            let g = nalgebra::Matrix3::from_fn(|r, s| [a, b, c][r].dot(&[a, b, c][s]));
            let vol = g.determinant().max(0.0).sqrt();
            if vol < 1e-12 {
                return Err(G2Error::DegenerateCell { node: i, volume: vol });
            }
            Ok(chi(&a, &b, &c) * (1.0 / vol))
        })
        .collect()
}

/// Step sweep for the linearization `d/dε F(x + εψ)|₀ = Dψ`: returns
/// `(best relative error, best ε)`.
pub fn linearization_error(domain: &Domain, dirac: &DiracOperator, psi: &[[f64; 4]], steps: &[f64]) -> Result<(f64, f64)> {
    let amb = to_ambient(domain, psi);
    let exact = to_ambient(domain, &dirac.apply(psi));
    let norm_exact = exact.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
    let mut best = (f64::INFINITY, 0.0);
    for &eps in steps {
        let plus: Vec<Vec7> = amb.iter().map(|v| *v * eps).collect();
        let minus: Vec<Vec7> = amb.iter().map(|v| *v * -eps).collect();
        let fp = evaluate_f(domain, &dirac.grad, &plus)?;
        let fm = evaluate_f(domain, &dirac.grad, &minus)?;
        let err = fp
            .iter()
            .zip(&fm)
            .zip(&exact)
            .map(|((a, b), e)| ((*a - *b) * (0.5 / eps) - *e).norm_squared())
            .sum::<f64>()
            .sqrt()
            / norm_exact.max(f64::MIN_POSITIVE);
        if err < best.0 {
            best = (err, eps);
        }
    }
    Ok(best)
}

/// Weighted L² norm squared of a normal field.
pub fn l2_norm_sq(dirac: &DiracOperator, psi: &[[f64; 4]]) -> f64 {
    let x = flatten(psi);
    dot(&x, &x.iter().zip(&dirac.weights).map(|(a, w)| a * w).collect::<Vec<_>>())
}

/// `∫ |∇⊥ψ|²` with nodal quadrature.
pub fn dirichlet_energy(dirac: &DiracOperator, psi: &[[f64; 4]]) -> f64 {
    let x = flatten(psi);
    dirac
        .nabla
        .iter()
        .map(|n| {
            let g = n.matvec(&x);
            dirac.inner(&g, &g, None)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{second_fundamental_form, simons_operators};
    use crate::mesh::{build_ball_mesh, build_torus_grid, BallShape};
    use std::f64::consts::PI;

    #[test]
    fn symbol_squares_to_minus_norm() {
        let xi = [0.3, -1.2, 0.7];
        let s = symbol(xi);
        let n2: f64 = xi.iter().map(|x| x * x).sum();
        assert!((s * s + Matrix4::identity() * n2).abs().max() < 1e-14);
        assert_eq!(symbol([0.0; 3]), Matrix4::zeros());
        let e1 = symbol([1.0, 0.0, 0.0]);
        // s × e1 for s = e4 is −e5
        assert_eq!(e1[(1, 0)], -1.0);
    }

    #[test]
    fn constants_are_annihilated() {
        for d in [
            build_torus_grid(8).unwrap(),
            build_ball_mesh(BallShape::Round { radius: 1.0 }, 2).unwrap(),
        ] {
            let op = assemble_d(&d).unwrap();
            let psi = vec![[0.3, -1.0, 0.25, 2.0]; d.len()];
            let out = op.apply(&psi);
            assert!(out.iter().flatten().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn torus_sine_matches_hand_derivative() {
        let n = 8;
        let d = build_torus_grid(n).unwrap();
        let op = assemble_d(&d).unwrap();
        // ψ = sin(2πx1) e4 ⇒ Dψ = s_h cos(2πx1) e1 × e4 = s_h cos(2πx1) e5
        let psi: NormalField = d.nodes.iter().map(|x| [(2.0 * PI * x[0]).sin(), 0.0, 0.0, 0.0]).collect();
        let out = op.apply(&psi);
        let sh = (2.0 * PI / n as f64).sin() * n as f64;
        for (x, v) in d.nodes.iter().zip(&out) {
            let c = sh * (2.0 * PI * x[0]).cos();
            assert!((v[1] - c).abs() < 1e-10 && v[0].abs() < 1e-12 && v[2].abs() < 1e-12 && v[3].abs() < 1e-12);
        }
        assert!(op.op.asymmetry() < 1e-12);
    }

    #[test]
    fn torus_weitzenboeck_and_bochner_are_exact() {
        let d = build_torus_grid(6).unwrap();
        let op = assemble_d(&d).unwrap();
        let simons = simons_operators(&second_fundamental_form(&d, &op.grad));
        let psi: NormalField = d
            .nodes
            .iter()
            .map(|x| {
                let a = 2.0 * PI * x[0];
                let b = 2.0 * PI * (x[1] + 2.0 * x[2]);
                [a.sin(), b.cos(), (a + b).sin(), 0.5]
            })
            .collect();
        assert!(weitzenboeck_residual(&op, &simons, &psi, None) < 1e-10);
        assert!(closed_bochner_residual(&op, &simons, &psi).abs() < 1e-9);
        assert!(adjointness_residual(&d, &op, &psi, &psi.iter().map(|c| [c[3], c[2], c[1], c[0]]).collect::<Vec<_>>()) < 1e-10);
    }

    #[test]
    fn torus_kernel_counts_vanishing_symbols() {
        // even N: every momentum with k_j ∈ {0, N/2} has a vanishing
        // central-difference symbol, so the kernel is 8 × 4
        let even = build_torus_grid(6).unwrap();
        let k = kernel_dim(&even, &assemble_d(&even).unwrap(), None, None, 50.0, 40).unwrap();
        assert_eq!(k.dim, 32, "{:?} tol {}", k.singular_values, k.abs_tol);
        // odd N: only the zero mode survives
        let odd = build_torus_grid(5).unwrap();
        let k = kernel_dim(&odd, &assemble_d(&odd).unwrap(), None, None, 50.0, 12).unwrap();
        assert_eq!(k.dim, 4);
        assert!(k.gap > 1e3);
    }

    #[test]
    fn translation_preserves_associativity() {
        let d = build_ball_mesh(BallShape::Round { radius: 1.0 }, 1).unwrap();
        let g = Gradient::build(&d).unwrap();
        let zero = vec![Vec7::ZERO; d.len()];
        assert!(evaluate_f(&d, &g, &zero).unwrap().iter().all(|v| v.max_abs() < 1e-10));
        let shift = vec![Vec7::basis(3) * 0.1; d.len()];
        assert!(evaluate_f(&d, &g, &shift).unwrap().iter().all(|v| v.max_abs() < 1e-10));
        let bent: Vec<Vec7> = d.nodes.iter().map(|x| Vec7::basis(4) * (0.1 * x[0])).collect();
        assert!(evaluate_f(&d, &g, &bent).unwrap().iter().any(|v| v.max_abs() > 1e-3));
    }

    #[test]
    fn linearization_matches_d() {
        let d = build_ball_mesh(BallShape::Round { radius: 1.0 }, 1).unwrap();
        let op = assemble_d(&d).unwrap();
        let psi: NormalField = d.nodes.iter().map(|x| [0.0, x[0], (x[1] * x[2]).sin(), 0.0]).collect();
        let steps: Vec<f64> = (1..=8).map(|k| 10f64.powi(-k)).collect();
        let (err, _) = linearization_error(&d, &op, &psi, &steps).unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
