//! The calibration algebra of flat ℝ⁷: the 3-form φ, its Hodge dual *φ,
//! the cross product `u × v` with `⟨u × v, w⟩ = φ(u, v, w)` and the
//! associator `χ` with `⟨χ(u, v, w), η⟩ = *φ(u, v, w, η)`.
//!
//! Coordinates are 0-based in code (`e[0]` is e1). The 3-form is
//!
//! ```text
//! φ = e¹²³ + e¹⁴⁵ + e¹⁶⁷ + e²⁴⁶ − e²⁵⁷ − e³⁴⁷ − e³⁵⁶
//! ```
//!
//! so that ℝ³ × {0} is associative and {0} × ℝ⁴ is coassociative.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{G2Error, Result};

/// A vector of ℝ⁷ with the Euclidean metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec7(pub [f64; 7]);

impl Vec7 {
    pub const ZERO: Vec7 = Vec7([0.0; 7]);

    /// The standard basis vector `e_{i+1}`.
    pub fn basis(i: usize) -> Vec7 {
        let mut v = [0.0; 7];
        v[i] = 1.0;
        Vec7(v)
    }

    /// Embeds a point of ℝ³ as `(x1, x2, x3, 0, 0, 0, 0)`.
    pub fn from_r3(x: [f64; 3]) -> Vec7 {
        Vec7([x[0], x[1], x[2], 0.0, 0.0, 0.0, 0.0])
    }

    pub fn r3(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn dot(&self, other: &Vec7) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(&self) -> Vec7 {
        *self * (1.0 / self.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn cross(&self, other: &Vec7) -> Vec7 {
        cross(self, other)
    }
}

impl Index<usize> for Vec7 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec7 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vec7 {
    type Output = Vec7;
    fn add(mut self, rhs: Vec7) -> Vec7 {
        self += rhs;
        self
    }
}

impl AddAssign for Vec7 {
    fn add_assign(&mut self, rhs: Vec7) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for Vec7 {
    type Output = Vec7;
    fn sub(mut self, rhs: Vec7) -> Vec7 {
        self -= rhs;
        self
    }
}

impl SubAssign for Vec7 {
    fn sub_assign(&mut self, rhs: Vec7) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
    }
}

impl Mul<f64> for Vec7 {
    type Output = Vec7;
    fn mul(self, s: f64) -> Vec7 {
        Vec7(self.0.map(|x| x * s))
    }
}

impl Mul<Vec7> for f64 {
    type Output = Vec7;
    fn mul(self, v: Vec7) -> Vec7 {
        v * self
    }
}

impl Neg for Vec7 {
    type Output = Vec7;
    fn neg(self) -> Vec7 {
        self * -1.0
    }
}

impl std::iter::Sum for Vec7 {
    fn sum<I: Iterator<Item = Vec7>>(iter: I) -> Vec7 {
        iter.fold(Vec7::ZERO, |a, b| a + b)
    }
}

/// Nonzero coefficients of φ on increasing 0-based index triples.
pub const PHI_TERMS: [([usize; 3], f64); 7] = [
    ([0, 1, 2], 1.0),
    ([0, 3, 4], 1.0),
    ([0, 5, 6], 1.0),
    ([1, 3, 5], 1.0),
    ([1, 4, 6], -1.0),
    ([2, 3, 6], -1.0),
    ([2, 4, 5], -1.0),
];

/// φ, *φ and the cross-product table derived from them.
#[derive(Clone, Debug)]
pub struct CalibrationAlgebra {
    pub phi: [[[f64; 7]; 7]; 7],
    pub star_phi: [[[[f64; 7]; 7]; 7]; 7],
    pub cross_table: [[Vec7; 7]; 7],
}

fn permutation_sign(p: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                sign = -sign;
            }
        }
    }
    sign
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Builds the fixed calibration algebra. Deterministic; see [`calibration`]
/// for the shared instance.
pub fn build_calibration() -> CalibrationAlgebra {
    let mut phi = [[[0.0; 7]; 7]; 7];
    let mut star_phi = [[[[0.0; 7]; 7]; 7]; 7];
    let perms3 = permutations(3);
    let perms4 = permutations(4);
    for (idx, c) in PHI_TERMS {
        for p in &perms3 {
            phi[idx[p[0]]][idx[p[1]]][idx[p[2]]] = c * permutation_sign(p);
        }
        // *e^{ijk} = sgn(i j k a b c d) e^{abcd} for the complementary indices
        let comp: Vec<usize> = (0..7).filter(|k| !idx.contains(k)).collect();
        let full: Vec<usize> = idx.iter().copied().chain(comp.iter().copied()).collect();
        let s = c * permutation_sign(&full);
        for p in &perms4 {
            star_phi[comp[p[0]]][comp[p[1]]][comp[p[2]]][comp[p[3]]] = s * permutation_sign(p);
        }
    }
    let mut cross_table = [[Vec7::ZERO; 7]; 7];
    for i in 0..7 {
        for j in 0..7 {
            cross_table[i][j] = Vec7(std::array::from_fn(|k| phi[i][j][k]));
        }
    }
    CalibrationAlgebra {
        phi,
        star_phi,
        cross_table,
    }
}

/// Shared instance of the calibration algebra.
pub fn calibration() -> &'static CalibrationAlgebra {
    static ALGEBRA: OnceLock<CalibrationAlgebra> = OnceLock::new();
    ALGEBRA.get_or_init(build_calibration)
}

impl CalibrationAlgebra {
    pub fn phi_eval(&self, u: &Vec7, v: &Vec7, w: &Vec7) -> f64 {
        let mut s = 0.0;
        for (i, ui) in u.0.iter().enumerate().filter(|(_, x)| **x != 0.0) {
            for (j, vj) in v.0.iter().enumerate().filter(|(_, x)| **x != 0.0) {
                for k in 0..7 {
                    s += ui * vj * w[k] * self.phi[i][j][k];
                }
            }
        }
        s
    }

    pub fn star_phi_eval(&self, u: &Vec7, v: &Vec7, w: &Vec7, eta: &Vec7) -> f64 {
        let c = self.chi(u, v, w);
        c.dot(eta)
    }

    pub fn cross(&self, u: &Vec7, v: &Vec7) -> Vec7 {
        let mut out = Vec7::ZERO;
        for i in 0..7 {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..7 {
                if v[j] == 0.0 || i == j {
                    continue;
                }
                let c = u[i] * v[j];
                for k in 0..7 {
                    out[k] += c * self.phi[i][j][k];
                }
            }
        }
        out
    }

    /// Associator contracted from *φ.
    pub fn chi(&self, u: &Vec7, v: &Vec7, w: &Vec7) -> Vec7 {
        let mut out = Vec7::ZERO;
        for i in 0..7 {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..7 {
                let uv = u[i] * v[j];
                if uv == 0.0 || i == j {
                    continue;
                }
                for k in 0..7 {
                    let uvw = uv * w[k];
                    if uvw == 0.0 {
                        continue;
                    }
                    for l in 0..7 {
                        out[l] += uvw * self.star_phi[i][j][k][l];
                    }
                }
            }
        }
        out
    }
}

pub fn cross(u: &Vec7, v: &Vec7) -> Vec7 {
    calibration().cross(u, v)
}

pub fn chi(u: &Vec7, v: &Vec7, w: &Vec7) -> Vec7 {
    calibration().chi(u, v, w)
}

pub fn phi(u: &Vec7, v: &Vec7, w: &Vec7) -> f64 {
    calibration().phi_eval(u, v, w)
}

/// Algebraic form of the associator, `−u×(v×w) − ⟨u,v⟩w + ⟨u,w⟩v`.
/// Only used as an independent cross-check of [`chi`].
pub fn chi_algebraic(u: &Vec7, v: &Vec7, w: &Vec7) -> Vec7 {
    -cross(u, &cross(v, w)) - *w * u.dot(v) + *v * u.dot(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlaneKind {
    Associative3,
    Coassociative4,
}

/// Gram–Schmidt; returns the orthonormal basis together with the Gram
/// determinant of the input.
pub fn orthonormalize(basis: &[Vec7]) -> Result<Vec<Vec7>> {
    let n = basis.len();
    let gram = nalgebra::DMatrix::from_fn(n, n, |i, j| basis[i].dot(&basis[j]));
    let det = gram.determinant();
    if det < 1e-12 {
        return Err(G2Error::DegenerateBasis { gram_det: det });
    }
    let mut out: Vec<Vec7> = Vec::with_capacity(n);
    for b in basis {
        let mut v = *b;
        // two passes keep the result orthogonal to rounding level
        for _ in 0..2 {
            for q in &out {
                v -= *q * q.dot(&v);
            }
        }
        out.push(v.normalized());
    }
    Ok(out)
}

/// Tests whether `span(basis)` is associative (3-plane) or coassociative
/// (4-plane). Returns the verdict and the residual it is based on.
pub fn classify_plane(basis: &[Vec7], kind: PlaneKind) -> Result<(bool, f64)> {
    let expected = match kind {
        PlaneKind::Associative3 => 3,
        PlaneKind::Coassociative4 => 4,
    };
    if basis.len() != expected {
        return Err(G2Error::BasisLength {
            expected,
            got: basis.len(),
        });
    }
    let q = orthonormalize(basis)?;
    let residual = match kind {
        PlaneKind::Associative3 => chi(&q[0], &q[1], &q[2]).norm(),
        PlaneKind::Coassociative4 => {
            let mut m = 0.0_f64;
            for i in 0..4 {
                for j in i + 1..4 {
                    for k in j + 1..4 {
                        m = m.max(phi(&q[i], &q[j], &q[k]).abs());
                    }
                }
            }
            m
        }
    };
    Ok((residual < 1e-10, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(i: usize) -> Vec7 {
        Vec7::basis(i - 1)
    }

    fn vec7() -> impl Strategy<Value = Vec7> {
        proptest::array::uniform7(-2.0..2.0f64).prop_map(Vec7)
    }

    fn close(a: &Vec7, b: &Vec7, tol: f64) -> bool {
        (*a - *b).max_abs() < tol
    }

    #[test]
    fn convention_values() {
        assert_eq!(phi(&e(1), &e(2), &e(3)), 1.0);
        assert_eq!(cross(&e(1), &e(2)), e(3));
        assert_eq!(cross(&e(1), &e(4)), e(5));
        assert_eq!(cross(&e(2), &e(3)), e(1));
        assert_eq!(cross(&e(1), &e(5)), -e(4));
        assert_eq!(cross(&e(3), &e(4)), -e(7));
    }

    #[test]
    fn star_phi_terms() {
        // *φ = e4567 + e2367 + e2345 + e1357 − e1346 − e1256 − e1247
        let a = calibration();
        let expect = [
            ([3, 4, 5, 6], 1.0),
            ([1, 2, 5, 6], 1.0),
            ([1, 2, 3, 4], 1.0),
            ([0, 2, 4, 6], 1.0),
            ([0, 2, 3, 5], -1.0),
            ([0, 1, 4, 5], -1.0),
            ([0, 1, 3, 6], -1.0),
        ];
        let mut count = 0;
        for i in 0..7 {
            for j in i + 1..7 {
                for k in j + 1..7 {
                    for l in k + 1..7 {
                        let v = a.star_phi[i][j][k][l];
                        if v != 0.0 {
                            count += 1;
                            let hit = expect.iter().find(|(idx, _)| *idx == [i, j, k, l]).unwrap();
                            assert_eq!(v, hit.1);
                        }
                    }
                }
            }
        }
        assert_eq!(count, 7);
    }

    #[test]
    fn chi_on_basis() {
        assert_eq!(chi(&e(1), &e(2), &e(3)), Vec7::ZERO);
        let c = chi(&e(1), &e(2), &e(4));
        assert!(c.norm() > 0.1);
        assert_eq!(c, -e(7));
    }

    #[test]
    fn classify_examples() {
        let (ok, r) = classify_plane(&[e(1), e(2), e(3)], PlaneKind::Associative3).unwrap();
        assert!(ok && r < 1e-12);
        let (ok, r) =
            classify_plane(&[e(4), e(5), e(6), e(7)], PlaneKind::Coassociative4).unwrap();
        assert!(ok && r < 1e-12);
        let (ok, r) = classify_plane(&[e(1), e(2), e(4)], PlaneKind::Associative3).unwrap();
        assert!(!ok && r > 0.1);
    }

    #[test]
    fn classify_rejects_degenerate() {
        let err = classify_plane(&[e(1), e(2), e(1) + e(2)], PlaneKind::Associative3);
        assert!(matches!(err, Err(G2Error::DegenerateBasis { .. })));
        let err = classify_plane(&[e(1), e(2)], PlaneKind::Associative3);
        assert!(matches!(err, Err(G2Error::BasisLength { .. })));
    }

    proptest! {
        #[test]
        fn cross_matches_phi(u in vec7(), v in vec7(), w in vec7()) {
            prop_assert!((cross(&u, &v).dot(&w) - phi(&u, &v, &w)).abs() < 1e-12);
        }

        #[test]
        fn cross_norm_identity(u in vec7(), v in vec7()) {
            let c = cross(&u, &v);
            let lhs = c.norm_squared();
            let rhs = u.norm_squared() * v.norm_squared() - u.dot(&v).powi(2);
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs));
            prop_assert!(c.dot(&u).abs() < 1e-12);
            prop_assert!(close(&cross(&v, &u), &(-c), 1e-14));
        }

        #[test]
        fn chi_is_antisymmetric_and_matches_algebraic_form(u in vec7(), v in vec7(), w in vec7()) {
            let c = chi(&u, &v, &w);
            prop_assert!(close(&c, &chi_algebraic(&u, &v, &w), 1e-12));
            prop_assert!(close(&chi(&v, &u, &w), &(-c), 1e-12));
            prop_assert!(close(&chi(&u, &w, &v), &(-c), 1e-12));
            prop_assert!(c.dot(&u).abs() < 1e-11);
            prop_assert!(c.dot(&v).abs() < 1e-11);
            prop_assert!(c.dot(&w).abs() < 1e-11);
        }

        #[test]
        fn double_cross_on_unit_vector(u in vec7(), psi in vec7()) {
            prop_assume!(u.norm() > 0.1);
            let u = u.normalized();
            let psi = psi - u * u.dot(&psi);
            prop_assert!(close(&cross(&u, &cross(&u, &psi)), &(-psi), 1e-12));
        }

        #[test]
        fn product_rule_along_curves(a in vec7(), b in vec7(), c in vec7(), d in vec7()) {
            // u(t) = a + t b + t² a, v(t) = c + t d
            let u = |t: f64| a + b * t + a * (t * t);
            let v = |t: f64| c + d * t;
            let h = 1e-5;
            let t0 = 0.3;
            let fd = (cross(&u(t0 + h), &v(t0 + h)) - cross(&u(t0 - h), &v(t0 - h))) * (0.5 / h);
            let du = b + a * (2.0 * t0);
            let exact = cross(&du, &v(t0)) + cross(&u(t0), &d);
            prop_assert!(close(&fd, &exact, 1e-7 * (1.0 + a.norm() * d.norm() + b.norm() * c.norm())));
        }
    }
}
