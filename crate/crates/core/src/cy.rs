//! The deformation operator of a special Lagrangian-type 3-manifold acting on
//! pairs (1-form, function), discretized on a primal/dual cochain pair.
//!
//! The operator maps `X = (dual 1-cochains) ⊕ (primal 0-cochains)` to
//! `Y = (primal 1-cochains) ⊕ (dual 0-cochains)`:
//!
//! ```text
//! D_X(α̃, τ) = (−⋆dα̃ − dτ, ⋆d⋆α̃)
//! ```
//!
//! and the same formula on `Y` gives `D_Y: Y → X`. Both squares equal minus
//! the Hodge Laplacian of the respective complex, and `ker D_X` is the space
//! of harmonic 1-forms plus constants.

use crate::dec::DecComplex;
use crate::error::{G2Error, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::spectral::{kernel_from_singular, smallest_singular, SingularPairs};

#[derive(Clone, Debug)]
pub struct DiracVee {
    /// `D_X: X → Y`, `(E + T) × (F + V)`.
    pub dx: CsrMatrix,
    /// `D_Y: Y → X`, `(F + V) × (E + T)`.
    pub dy: CsrMatrix,
    /// Diagonal inner-product weights on `X` and `Y`.
    pub wx: Vec<f64>,
    pub wy: Vec<f64>,
    pub n: [usize; 4],
}

/// Sign `(−1)^{3p+1}` in `δ = ±⋆d⋆` on p-forms in dimension three.
fn codiff_sign(p: usize) -> f64 {
    if (3 * p + 1).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Dual exterior derivatives `d̃_k = (−1)^k d_{2−k}ᵀ`.
fn dual_d(dec: &DecComplex, k: usize) -> CsrMatrix {
    let m = [&dec.d2, &dec.d1, &dec.d0][k].transpose();
    if k.is_multiple_of(2) {
        m
    } else {
        m.scale(-1.0)
    }
}

fn diag(v: &[f64]) -> CsrMatrix {
    CsrMatrix::diagonal(v)
}

fn inv(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| 1.0 / x).collect()
}

/// Places `blocks[r][c]` (optional) into a single matrix.
fn block(rows: &[usize], cols: &[usize], blocks: &[&[Option<&CsrMatrix>]]) -> CsrMatrix {
    let mut b = TripletBuilder::new(rows.iter().sum(), cols.iter().sum());
    let mut r0 = 0;
    for (r, row) in blocks.iter().enumerate() {
        let mut c0 = 0;
        for (c, m) in row.iter().enumerate() {
            if let Some(m) = m {
                for i in 0..m.nrows {
                    for (j, v) in m.row(i) {
                        b.add(r0 + i, c0 + j, v);
                    }
                }
            }
            c0 += cols[c];
        }
        r0 += rows[r];
    }
    b.build()
}

pub fn assemble_dvee(dec: &DecComplex) -> Result<DiracVee> {
    if !dec.closed {
        return Err(G2Error::Unsupported("the complex has a boundary".into()));
    }
    let [nv, ne, nf, nt] = dec.n;
    let [s0, s1, s2, s3] = &dec.star;
    // D_X
    let a_e = diag(&inv(s1)).mul(&dual_d(dec, 1)).scale(-1.0);
    let t_e = dec.d0.scale(-1.0);
    let a_t = diag(s3).mul(&dec.d2).mul(&diag(&inv(s2)));
    let dx = block(&[ne, nt], &[nf, nv], &[&[Some(&a_e), Some(&t_e)], &[Some(&a_t), None]]);
    // D_Y
    let a_f = diag(s2).mul(&dec.d1).scale(-1.0);
    let t_f = dual_d(dec, 0).scale(-1.0);
    let a_v = diag(&inv(s0)).mul(&dual_d(dec, 2)).mul(&diag(s1));
    let dy = block(&[nf, nv], &[ne, nt], &[&[Some(&a_f), Some(&t_f)], &[Some(&a_v), None]]);
    let mut wx = inv(s2);
    wx.extend_from_slice(s0);
    let mut wy = s1.clone();
    wy.extend(inv(s3));
    Ok(DiracVee {
        dx,
        dy,
        wx,
        wy,
        n: dec.n,
    })
}

/// Hodge Laplacians `(Δ_X, Δ_Y)` assembled from `d` and `δ = ±⋆d⋆`,
/// independently of the Dirac blocks.
pub fn hodge_laplacians(dec: &DecComplex) -> (CsrMatrix, CsrMatrix) {
    let [nv, ne, nf, nt] = dec.n;
    let [s0, s1, s2, s3] = &dec.star;
    // primal complex: δ_p maps primal p-forms to primal (p−1)-forms via the dual
    let delta1 = diag(&inv(s0)).mul(&dual_d(dec, 2)).mul(&diag(s1)).scale(codiff_sign(1));
    let delta2 = diag(&inv(s1)).mul(&dual_d(dec, 1)).mul(&diag(s2)).scale(codiff_sign(2));
    // dual complex: δ̃_p on dual p-forms
    let dual_delta1 = diag(s3).mul(&dec.d2).mul(&diag(&inv(s2))).scale(codiff_sign(1));
    let dual_delta2 = diag(s2).mul(&dec.d1).mul(&diag(&inv(s1))).scale(codiff_sign(2));

    let lap_dual1 = dual_d(dec, 0)
        .mul(&dual_delta1)
        .add(&dual_delta2.mul(&dual_d(dec, 1)), 1.0);
    let lap0 = delta1.mul(&dec.d0);
    let lap_x = block(&[nf, nv], &[nf, nv], &[&[Some(&lap_dual1), None], &[None, Some(&lap0)]]);

    let lap1 = dec.d0.mul(&delta1).add(&delta2.mul(&dec.d1), 1.0);
    let lap_dual0 = dual_delta1.mul(&dual_d(dec, 0));
    let lap_y = block(&[ne, nt], &[ne, nt], &[&[Some(&lap1), None], &[None, Some(&lap_dual0)]]);
    (lap_x, lap_y)
}

/// Relative residuals `|D_Y D_X + Δ_X|`, `|D_X D_Y + Δ_Y|` (max entry over
/// max entry of the Laplacian).
pub fn dvee_square_vs_laplacian(dv: &DiracVee, dec: &DecComplex) -> (f64, f64) {
    let (lx, ly) = hodge_laplacians(dec);
    let rx = dv.dy.mul(&dv.dx).add(&lx, 1.0).max_abs() / lx.max_abs();
    let ry = dv.dx.mul(&dv.dy).add(&ly, 1.0).max_abs() / ly.max_abs();
    (rx, ry)
}

/// Relative skew-adjointness defect `|W_Y D_X + (W_X D_Y)ᵀ|`, i.e. of
/// `⟨D_X x, y⟩ + ⟨x, D_Y y⟩ = 0`.
pub fn adjointness_residual(dv: &DiracVee) -> f64 {
    let lhs = diag(&dv.wy).mul(&dv.dx);
    let rhs = diag(&dv.wx).mul(&dv.dy).transpose();
    lhs.add(&rhs, 1.0).max_abs() / lhs.max_abs()
}

#[derive(Clone, Debug)]
pub struct CyKernel {
    pub dim: usize,
    pub gap: f64,
    pub abs_tol: f64,
    pub singular_values: Vec<f64>,
    /// Kernel vectors in `X` coordinates `(α̃, τ)`.
    pub vectors: Vec<Vec<f64>>,
    /// Largest relative failure of a kernel vector to split into a harmonic
    /// dual 1-form plus a constant.
    pub harmonic_residual: f64,
    pub method: &'static str,
}

pub fn cy_kernel_dim(dv: &DiracVee, abs_tol: Option<f64>, gap_ratio: f64, count: usize) -> Result<CyKernel> {
    let sx: Vec<f64> = dv.wx.iter().map(|w| 1.0 / w.sqrt()).collect();
    let sy: Vec<f64> = dv.wy.iter().map(|w| w.sqrt()).collect();
    let a = dv.dx.scale_rows_cols(&sy, &sx);
    let tol = abs_tol.unwrap_or(crate::dirac::DEFAULT_ABS_TOL_FACTOR * a.norm_inf());
    let count = count.min(a.ncols);
    let SingularPairs { values, vectors, method } = smallest_singular(&a, count, 0xc7)?;
    let (dim, gap) = kernel_from_singular(&values, tol, gap_ratio)?;
    let vectors: Vec<Vec<f64>> = vectors
        .iter()
        .take(dim)
        .map(|v| v.iter().zip(&sx).map(|(x, s)| x * s).collect())
        .collect();
    let harmonic_residual = vectors
        .iter()
        .map(|x| harmonic_split_residual(dv, x))
        .fold(0.0, f64::max);
    Ok(CyKernel {
        dim,
        gap,
        abs_tol: tol,
        singular_values: values,
        vectors,
        harmonic_residual,
        method,
    })
}

fn weighted_norm(x: &[f64], w: &[f64]) -> f64 {
    x.iter().zip(w).map(|(a, b)| a * a * b).sum::<f64>().sqrt()
}

/// Splits `x = (α̃, τ)` and measures `|D_X α̃| + |D_X τ| + |τ − mean τ|`
/// relative to `|x|`.
fn harmonic_split_residual(dv: &DiracVee, x: &[f64]) -> f64 {
    let nf = dv.n[2];
    let mut alpha = x.to_vec();
    alpha[nf..].iter_mut().for_each(|v| *v = 0.0);
    let mut tau = x.to_vec();
    tau[..nf].iter_mut().for_each(|v| *v = 0.0);
    let tw = &dv.wx[nf..];
    let mean = tau[nf..].iter().zip(tw).map(|(t, w)| t * w).sum::<f64>() / tw.iter().sum::<f64>();
    let mut dev = tau.clone();
    dev[nf..].iter_mut().for_each(|v| *v -= mean);
    let r = weighted_norm(&dv.dx.matvec(&alpha), &dv.wy)
        + weighted_norm(&dv.dx.matvec(&tau), &dv.wy)
        + weighted_norm(&dev, &dv.wx);
    let scale = weighted_norm(x, &dv.wx) * (1.0 + dv.dx.norm_inf());
    r / scale.max(f64::MIN_POSITIVE)
}

/// Euclidean norm of `x` under the `X` inner product.
pub fn x_norm(dv: &DiracVee, x: &[f64]) -> f64 {
    weighted_norm(x, &dv.wx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dec::{
        build_dec_from_complex, cross_polytope_boundary, four_simplex_boundary, sphere_circle_product,
        torus_complex, DualKind,
    };
    use proptest::prelude::*;

    fn dec_of(c: crate::dec::SimplicialComplex) -> DecComplex {
        build_dec_from_complex(&c, DualKind::Barycentric).unwrap()
    }

    #[test]
    fn square_is_minus_laplacian() {
        for dec in [
            dec_of(torus_complex(4).unwrap()),
            dec_of(cross_polytope_boundary()),
            dec_of(sphere_circle_product()),
        ] {
            let dv = assemble_dvee(&dec).unwrap();
            let (rx, ry) = dvee_square_vs_laplacian(&dv, &dec);
            assert!(rx < 1e-12 && ry < 1e-12, "{rx} {ry}");
            assert!(adjointness_residual(&dv) < 1e-12);
        }
    }

    #[test]
    fn kernel_counts_harmonic_forms_plus_constants() {
        for (c, expected) in [
            (torus_complex(4).unwrap(), 4),
            (four_simplex_boundary(), 1),
            (cross_polytope_boundary(), 1),
            (sphere_circle_product(), 2),
        ] {
            let dec = dec_of(c);
            let b = dec.betti();
            let dv = assemble_dvee(&dec).unwrap();
            let k = cy_kernel_dim(&dv, None, 50.0, 10).unwrap();
            assert_eq!(k.dim, expected);
            assert_eq!(k.dim, b[0] + b[1]);
            assert!(k.harmonic_residual < 1e-8, "{}", k.harmonic_residual);
        }
    }

    #[test]
    fn rejects_bounded_complexes() {
        let ball = crate::mesh::build_ball_mesh(crate::mesh::BallShape::Round { radius: 1.0 }, 1).unwrap();
        let dec = crate::dec::build_dec(&ball, DualKind::Barycentric).unwrap();
        assert!(!dec.closed);
        assert!(assemble_dvee(&dec).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn skew_adjoint_on_random_cochains(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let dec = dec_of(sphere_circle_product());
            let dv = assemble_dvee(&dec).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..dv.wx.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..dv.wy.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dxx = dv.dx.matvec(&x);
            let dyy = dv.dy.matvec(&y);
            let a: f64 = dxx.iter().zip(&y).zip(&dv.wy).map(|((p, q), w)| p * q * w).sum();
            let b: f64 = x.iter().zip(&dyy).zip(&dv.wx).map(|((p, q), w)| p * q * w).sum();
            let scale = x_norm(&dv, &x) * weighted_norm(&dyy, &dv.wx) + weighted_norm(&dxx, &dv.wy) * weighted_norm(&y, &dv.wy);
            prop_assert!((a + b).abs() <= 1e-12 * scale);
        }
    }
}
