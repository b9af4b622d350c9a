//! Second fundamental form and the Simons operators on the normal bundle.
//!
//! The ambient space is flat, so the curvature term 𝓡 is identically zero
//! and 𝓡_ν = −𝓐. It is still carried as a field so that a curved ambient
//! model only has to fill it in.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen};

use crate::algebra::Vec7;
use crate::gradient::Gradient;
use crate::mesh::Domain;

/// Per node and per normal frame vector `η_k`, the symmetric matrix of the
/// Weingarten map `A_{η_k}` in the tangent frame.
#[derive(Clone, Debug)]
pub struct ShapeField {
    pub a: Vec<[Matrix3<f64>; 4]>,
    /// Largest asymmetry removed by symmetrization.
    pub asymmetry: f64,
}

/// Per-node Simons operators in the normal frame.
#[derive(Clone, Debug)]
pub struct SimonsField {
    pub curvature: Vec<Matrix4<f64>>,
    pub script_a: Vec<Matrix4<f64>>,
    pub r_nu: Vec<Matrix4<f64>>,
    pub min_eigen_r_nu: Vec<f64>,
    pub min_eigen_script_a: Vec<f64>,
}

impl SimonsField {
    /// Smallest eigenvalue of 𝓡_ν over all nodes and the node attaining it.
    pub fn min_r_nu(&self) -> (usize, f64) {
        self.min_eigen_r_nu
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
    }

    /// True when 𝓡_ν vanishes to `tol` everywhere (flat, totally geodesic).
    pub fn is_flat(&self, tol: f64) -> bool {
        self.r_nu.iter().all(|m| m.abs().max() <= tol)
    }
}

fn normal_field(domain: &Domain, k: usize) -> Vec<Vec7> {
    domain.normal_frame.iter().map(|f| f[k]).collect()
}

fn tangent_field(domain: &Domain, a: usize) -> Vec<Vec7> {
    domain.tangent_frame.iter().map(|f| f[a]).collect()
}

/// `A_{η}(u) = −(∇_u η)ᵀ` assembled from discrete derivatives of the normal
/// frame and symmetrized.
pub fn second_fundamental_form(domain: &Domain, grad: &Gradient) -> ShapeField {
    let n = domain.len();
    let mut a = vec![[Matrix3::zeros(); 4]; n];
    let mut asymmetry = 0.0_f64;
    for k in 0..4 {
        let eta = normal_field(domain, k);
        let d: [Vec<Vec7>; 3] = std::array::from_fn(|c| grad.apply_vec(c, &eta));
        for i in 0..n {
            let t = &domain.tangent_frame[i];
            let m = Matrix3::from_fn(|r, c| -d[r][i].dot(&t[c]));
            asymmetry = asymmetry.max((m - m.transpose()).abs().max());
            a[i][k] = 0.5 * (m + m.transpose());
        }
    }
    ShapeField { a, asymmetry }
}

/// `(𝓐)_{kl} = tr(A_{η_k} A_{η_l})`, `𝓡 = 0`, `𝓡_ν = 𝓡 − 𝓐`.
pub fn simons_operators(shape: &ShapeField) -> SimonsField {
    let n = shape.a.len();
    let mut out = SimonsField {
        curvature: vec![Matrix4::zeros(); n],
        script_a: Vec::with_capacity(n),
        r_nu: Vec::with_capacity(n),
        min_eigen_r_nu: Vec::with_capacity(n),
        min_eigen_script_a: Vec::with_capacity(n),
    };
    for (i, a) in shape.a.iter().enumerate() {
        let sa = Matrix4::from_fn(|k, l| (a[k] * a[l]).trace());
        let r_nu = out.curvature[i] - sa;
        out.min_eigen_script_a.push(SymmetricEigen::new(sa).eigenvalues.min());
        out.min_eigen_r_nu.push(SymmetricEigen::new(r_nu).eigenvalues.min());
        out.script_a.push(sa);
        out.r_nu.push(r_nu);
    }
    out
}

/// `∇⊥_u ψ` for an ambient normal field ψ: ambient derivative projected to ν.
fn normal_derivative(domain: &Domain, grad: &Gradient, a: usize, psi: &[Vec7]) -> Vec<Vec7> {
    grad.apply_vec(a, psi)
        .into_iter()
        .zip(&domain.normal_frame)
        .map(|(d, nf)| nf.iter().map(|e| *e * d.dot(e)).sum())
        .collect()
}

/// Result of comparing the normal curvature with the commutator of shape
/// operators.
#[derive(Clone, Copy, Debug)]
pub struct RicciCheck {
    /// Largest `|⟨R⊥(t_a,t_b)η_k, η_l⟩ − ⟨[A_k, A_l] t_a, t_b⟩|`.
    pub residual: f64,
    /// Largest magnitude of either side, for scale.
    pub magnitude: f64,
}

/// Evaluates `∇⊥_a∇⊥_b − ∇⊥_b∇⊥_a − ∇⊥_{[t_a,t_b]}` on the normal frame and
/// compares with `[A_ψ, A_φ]` (flat ambient Ricci equation). Nodes listed in
/// `skip` (e.g. near a boundary) are ignored.
pub fn ricci_equation_check(domain: &Domain, grad: &Gradient, shape: &ShapeField, skip: &[bool]) -> RicciCheck {
    let n = domain.len();
    let t: [Vec<Vec7>; 3] = std::array::from_fn(|a| tangent_field(domain, a));
    let mut residual = 0.0_f64;
    let mut magnitude = 0.0_f64;
    for k in 0..4 {
        let eta = normal_field(domain, k);
        let first: [Vec<Vec7>; 3] = std::array::from_fn(|a| normal_derivative(domain, grad, a, &eta));
        for a in 0..3 {
            for b in a + 1..3 {
                let ab = normal_derivative(domain, grad, a, &first[b]);
                let ba = normal_derivative(domain, grad, b, &first[a]);
                let dtb = grad.apply_vec(a, &t[b]);
                let dta = grad.apply_vec(b, &t[a]);
                for i in (0..n).filter(|&i| !skip.get(i).copied().unwrap_or(false)) {
                    let bracket = dtb[i] - dta[i];
                    let mut along = Vec7::ZERO;
                    for c in 0..3 {
                        along += first[c][i] * bracket.dot(&t[c][i]);
                    }
                    let curv = ab[i] - ba[i] - along;
                    for l in 0..4 {
                        let lhs = curv.dot(&domain.normal_frame[i][l]);
                        let (ak, al) = (shape.a[i][k], shape.a[i][l]);
                        let comm = ak * al - al * ak;
                        // ⟨R⊥(u,v)ξ,η⟩ = ⟨[A_ξ, A_η]u, v⟩ for flat ambient space
                        let rhs = comm[(b, a)];
                        residual = residual.max((lhs - rhs).abs());
                        magnitude = magnitude.max(lhs.abs()).max(rhs.abs());
                    }
                }
            }
        }
    }
    RicciCheck { residual, magnitude }
}

/// Mean curvature vector `Σ_a ∇⊥_{t_a} t_a` per node; vanishes on minimal
/// (in particular associative) domains.
pub fn mean_curvature_vector(domain: &Domain, grad: &Gradient) -> Vec<Vec7> {
    let mut h = vec![Vec7::ZERO; domain.len()];
    for a in 0..3 {
        let ta = tangent_field(domain, a);
        for (i, d) in grad.apply_vec(a, &ta).into_iter().enumerate() {
            for e in &domain.normal_frame[i] {
                h[i] += *e * d.dot(e);
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_ball_mesh, build_sphere_cloud, build_torus_grid, BallShape};

    #[test]
    fn flat_domains_have_zero_shape() {
        for d in [
            build_torus_grid(6).unwrap(),
            build_ball_mesh(BallShape::Round { radius: 1.0 }, 1).unwrap(),
        ] {
            let g = Gradient::build(&d).unwrap();
            let s = second_fundamental_form(&d, &g);
            assert!(s.a.iter().flatten().all(|m| m.abs().max() == 0.0));
            let simons = simons_operators(&s);
            assert!(simons.is_flat(0.0));
            assert!(mean_curvature_vector(&d, &g).iter().all(|v| v.max_abs() == 0.0));
        }
    }

    #[test]
    fn round_three_sphere_shape_operator() {
        let r = 2.0;
        let d = build_sphere_cloud(r, 3000, 24, 11);
        let g = Gradient::build(&d).unwrap();
        let s = second_fundamental_form(&d, &g);
        let simons = simons_operators(&s);
        let mut err_a = 0.0_f64;
        let mut err_eig = 0.0_f64;
        for (i, a) in s.a.iter().enumerate() {
            err_a = err_a.max((a[0] + Matrix3::identity() / r).abs().max());
            for k in 1..4 {
                err_a = err_a.max(a[k].abs().max());
            }
            let mut ev: Vec<f64> = SymmetricEigen::new(simons.script_a[i]).eigenvalues.iter().copied().collect();
            ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
            err_eig = err_eig.max((ev[0] - 3.0 / (r * r)).abs());
            err_eig = err_eig.max(ev[1].abs());
        }
        assert!(err_a < 0.02, "{err_a}");
        assert!(err_eig < 0.02, "{err_eig}");
        assert!(simons.min_eigen_script_a.iter().all(|&v| v >= -1e-8));
        let ricci = ricci_equation_check(&d, &g, &s, &[]);
        assert!(ricci.residual < 0.05, "{ricci:?}");
    }
}
