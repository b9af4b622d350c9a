//! Named check suites with machine-readable results.
//!
//! Each suite returns a [`Report`]: a list of checks (computed value,
//! expectation, where the expectation comes from, pass/fail) plus free-form
//! data such as spectra. Suites are deterministic for a fixed seed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::algebra::{chi, cross, orthonormalize, phi, Vec7};
use crate::boundary::{
    assemble_dl, boundary_bochner_residual, bundles_on_surface, decompose_boundary_bundles, index, index_on_surface,
    rigidity_report, Bundle, Verdict,
};
use crate::cy::{adjointness_residual as dvee_adjointness, assemble_dvee, cy_kernel_dim, dvee_square_vs_laplacian};
use crate::dec::{
    build_dec_from_complex, cross_polytope_boundary, four_simplex_boundary, sphere_circle_product, torus_complex,
    DualKind, SimplicialComplex,
};
use crate::dirac::{
    adjointness_residual, assemble_d, closed_bochner_residual, kernel_dim, l2_norm_sq, linearization_error, symbol,
    weitzenboeck_residual, DiracOperator, NormalField, DEFAULT_GAP_RATIO,
};
use crate::error::Result;
use crate::geometry::{second_fundamental_form, simons_operators, SimonsField};
use crate::mesh::{build_ball_mesh, build_torus_grid, torus_surface, BallShape, Domain};
use crate::spectral::symmetric_spectrum;

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    /// Exact value from a closed-form computation.
    ClosedForm,
    /// Independent reference computation.
    Oracle,
    /// Value stated in the published result being reproduced.
    PublishedValue,
    /// Algebraic identity expected to hold to rounding.
    Identity,
    /// Discretization error expected to shrink under refinement.
    Convergence,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub expected: String,
    pub basis: Basis,
    pub pass: bool,
}

impl CheckResult {
    pub fn below(name: impl Into<String>, value: f64, tol: f64, basis: Basis) -> Self {
        CheckResult {
            name: name.into(),
            value,
            expected: format!("< {tol:e}"),
            basis,
            pass: value < tol,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, bound: f64, basis: Basis) -> Self {
        CheckResult {
            name: name.into(),
            value,
            expected: format!("> {bound:e}"),
            basis,
            pass: value > bound,
        }
    }

    pub fn equals(name: impl Into<String>, value: i64, expected: i64, basis: Basis) -> Self {
        CheckResult {
            name: name.into(),
            value: value as f64,
            expected: expected.to_string(),
            basis,
            pass: value == expected,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub data: Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    /// Eigen- or singular values for CSV export; not serialized.
    #[serde(skip)]
    pub spectrum: Vec<f64>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            command: command.into(),
            passed: true,
            checks: Vec::new(),
            data: Map::new(),
            wall_time_s: None,
            spectrum: Vec::new(),
        }
    }

    pub fn push(&mut self, c: CheckResult) {
        self.passed &= c.pass;
        self.checks.push(c);
    }

    pub fn put(&mut self, key: &str, v: impl Serialize) {
        self.data.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn merge(&mut self, other: Report) {
        for c in other.checks {
            self.push(c);
        }
        self.data.extend(other.data);
        if self.spectrum.is_empty() {
            self.spectrum = other.spectrum;
        }
    }
}

/// Tolerances shared by the suites.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Tolerances {
    pub abs_tol: Option<f64>,
    pub gap_ratio: f64,
    pub identity_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            abs_tol: None,
            gap_ratio: DEFAULT_GAP_RATIO,
            identity_tol: 1e-10,
        }
    }
}

fn random_vec7(rng: &mut ChaCha8Rng) -> Vec7 {
    Vec7(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
}

/// Cross product, associator, symbol and associative-plane identities on
/// random inputs.
pub fn algebra_suite(seed: u64, samples: usize) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi_err = 0.0_f64;
    let mut chi_perp = 0.0_f64;
    let mut symbol_err = 0.0_f64;
    let mut law_err = 0.0_f64;
    for _ in 0..samples {
        let (u, v, w) = (random_vec7(&mut rng), random_vec7(&mut rng), random_vec7(&mut rng));
        phi_err = phi_err.max((cross(&u, &v).dot(&w) - phi(&u, &v, &w)).abs());
        let c = chi(&u, &v, &w);
        for x in [u, v, w] {
            chi_perp = chi_perp.max(c.dot(&x).abs());
        }
        let xi: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let s = symbol(xi);
        let n2: f64 = xi.iter().map(|x| x * x).sum();
        symbol_err = symbol_err.max((s * s + nalgebra::Matrix4::identity() * n2).abs().max());

        // three vectors in the associative plane spanned by (a, b, a×b)
        if let Ok(q) = orthonormalize(&[u, v]) {
            let frame = [q[0], q[1], cross(&q[0], &q[1])];
            let pick = |rng: &mut ChaCha8Rng| -> Vec7 { frame.iter().map(|f| *f * rng.gen_range(-1.0..1.0)).sum() };
            let (x, y, z) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            let lhs = cross(&cross(&y, &z), &x);
            let rhs = z * x.dot(&y) - y * x.dot(&z);
            law_err = law_err.max((lhs - rhs).max_abs());
        }
    }
    let mut r = Report::new("algebra-check");
    r.put("samples", samples);
    r.put("seed", seed);
    r.push(CheckResult::below("cross product matches phi", phi_err, 1e-12, Basis::Identity));
    r.push(CheckResult::below("associator orthogonal to its arguments", chi_perp, 1e-12, Basis::Identity));
    r.push(CheckResult::below("symbol squares to -|xi|^2", symbol_err, 1e-12, Basis::Identity));
    r.push(CheckResult::below("(v x w) x u law on associative planes", law_err, 1e-12, Basis::Identity));
    r
}

/// Closed-form spectrum of the central-difference operator on the `n³`
/// torus: `±|s(k)|`, twice each, with `s_j = sin(2πk_j/n)·n`.
pub fn torus_fourier_spectrum(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(4 * n * n * n);
    for k0 in 0..n {
        for k1 in 0..n {
            for k2 in 0..n {
                let s: f64 = [k0, k1, k2]
                    .iter()
                    .map(|&k| ((2.0 * PI * k as f64 / n as f64).sin() * n as f64).powi(2))
                    .sum::<f64>()
                    .sqrt();
                out.extend([s, s, -s, -s]);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Random normal field made of a few low Fourier modes on the unit torus.
pub fn band_limited_field(domain: &Domain, rng: &mut ChaCha8Rng, modes: usize, max_k: i32) -> NormalField {
    let terms: Vec<([f64; 3], [f64; 4], [f64; 4])> = (0..modes)
        .map(|_| {
            let k = std::array::from_fn(|_| rng.gen_range(-max_k..=max_k) as f64);
            (k, std::array::from_fn(|_| rng.gen_range(-1.0..1.0)), std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        })
        .collect();
    domain
        .nodes
        .iter()
        .map(|x| {
            let mut v = [0.0; 4];
            for (k, a, b) in &terms {
                let ph = 2.0 * PI * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
                for c in 0..4 {
                    v[c] += a[c] * ph.cos() + b[c] * ph.sin();
                }
            }
            v
        })
        .collect()
}

/// Smooth random normal field on a bounded domain (low-frequency sines of
/// the coordinates).
pub fn smooth_field(domain: &Domain, rng: &mut ChaCha8Rng) -> NormalField {
    let coef: Vec<([f64; 3], f64, f64)> = (0..4)
        .map(|_| {
            (
                std::array::from_fn(|_| rng.gen_range(-1.5..1.5)),
                rng.gen_range(-PI..PI),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    domain
        .nodes
        .iter()
        .map(|x| std::array::from_fn(|c| {
            let (k, ph, a) = coef[c];
            a + (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).sin()
        }))
        .collect()
}

fn simons_of(domain: &Domain, dirac: &DiracOperator) -> SimonsField {
    simons_operators(&second_fundamental_form(domain, &dirac.grad))
}

/// Spectrum, kernel, Weitzenböck, Bochner, adjointness and linearization on
/// the flat torus.
pub fn certify_torus(n: usize, seed: u64, tol: &Tolerances) -> Result<Report> {
    let mut r = Report::new("certify-torus");
    let domain = build_torus_grid(n)?;
    let dirac = assemble_d(&domain)?;
    let simons = simons_of(&domain, &dirac);
    r.put("n", n);
    r.put("seed", seed);

    let spectrum = symmetric_spectrum(&dirac.op)?;
    let oracle = torus_fourier_spectrum(n);
    let spec_err = spectrum.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    r.push(CheckResult::below("spectrum matches Fourier oracle", spec_err, 1e-8, Basis::Oracle));
    let oracle_zero = oracle.iter().filter(|s| s.abs() < 1e-9).count();
    r.put("oracle_zero_modes", oracle_zero);

    let k = kernel_dim(&domain, &dirac, None, tol.abs_tol, tol.gap_ratio, 4 * oracle_zero + 8)?;
    r.push(CheckResult::equals("kernel dimension", k.dim as i64, 4, Basis::PublishedValue));
    r.push(CheckResult::equals("kernel dimension (Fourier oracle count)", k.dim as i64, oracle_zero as i64, Basis::Oracle));
    r.push(CheckResult::above("kernel spectral gap ratio", k.gap, 1e3, Basis::Oracle));
    r.put("kernel_method", k.method);
    r.put("smallest_singular_values", &k.singular_values);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weitz = 0.0_f64;
    let mut bochner = 0.0_f64;
    let mut adj = 0.0_f64;
    for _ in 0..100 {
        let psi = band_limited_field(&domain, &mut rng, 4, 3);
        let psi2 = band_limited_field(&domain, &mut rng, 4, 3);
        weitz = weitz.max(weitzenboeck_residual(&dirac, &simons, &psi, None));
        let norm = l2_norm_sq(&dirac, &psi);
        bochner = bochner.max(closed_bochner_residual(&dirac, &simons, &psi).abs() / norm);
        let scale = (l2_norm_sq(&dirac, &psi) * l2_norm_sq(&dirac, &psi2)).sqrt();
        adj = adj.max(adjointness_residual(&domain, &dirac, &psi, &psi2) / scale);
    }
    r.push(CheckResult::below("Weitzenboeck residual (100 fields)", weitz, tol.identity_tol, Basis::Identity));
    r.push(CheckResult::below("closed Bochner identity (relative)", bochner, 1e-9, Basis::Identity));
    r.push(CheckResult::below("self-adjointness residual", adj, tol.identity_tol, Basis::Identity));

    let steps: Vec<f64> = (1..=10).map(|k| 10f64.powi(-k)).collect();
    let mut lin = 0.0_f64;
    for _ in 0..20 {
        let psi = band_limited_field(&domain, &mut rng, 3, 2);
        lin = lin.max(linearization_error(&domain, &dirac, &psi, &steps)?.0);
    }
    r.push(CheckResult::below("linearization relative error (20 fields)", lin, 1e-6, Basis::Identity));
    r.spectrum = spectrum;
    Ok(r)
}

/// Weitzenböck (interior) and adjointness residuals of smooth random fields
/// on a ball mesh; used for refinement studies.
pub fn ball_identity_residuals(domain: &Domain, dirac: &DiracOperator, seed: u64, fields: usize) -> (f64, f64) {
    let simons = simons_of(domain, dirac);
    let interior: Vec<bool> = domain.nodes.iter().map(|x| x.norm() < 0.6).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut w, mut a) = (0.0_f64, 0.0_f64);
    for _ in 0..fields {
        let psi = smooth_field(domain, &mut rng);
        let psi2 = smooth_field(domain, &mut rng);
        w = w.max(weitzenboeck_residual(dirac, &simons, &psi, Some(&interior)));
        let scale = (l2_norm_sq(dirac, &psi) * l2_norm_sq(dirac, &psi2)).sqrt();
        a = a.max(adjointness_residual(domain, dirac, &psi, &psi2) / scale);
    }
    (w, a)
}

/// Pointwise boundary-operator quality on a ball mesh: `(asymmetry,
/// frame dependence, max |tr 𝓓_{μ_X} − 2H|, max |𝓓_{ν_X} e|,
/// max |⟨𝓓_{ν_X}(n×e), n×e⟩ − 2H|, max |λ(𝓓_{μ_X}) − 1/r|)`.
pub fn boundary_operator_errors(domain: &Domain, radius: Option<f64>) -> Result<[f64; 6]> {
    let surface = domain.boundary.as_ref().ok_or(crate::G2Error::MissingBoundary)?;
    let b = decompose_boundary_bundles(domain, Vec7::basis(3))?;
    let mu = assemble_dl(surface, &b.mu_x, 0.0)?;
    let mu_rot = assemble_dl(surface, &b.mu_x, 0.7)?;
    let nu = assemble_dl(surface, &b.nu_x, 0.0)?;
    let mut out = [0.0_f64; 6];
    for l in 0..surface.len() {
        let h2 = 2.0 * surface.mean_curvature[l];
        out[0] = out[0].max(mu.asymmetry[l]).max(nu.asymmetry[l]);
        for k in 0..2 {
            out[1] = out[1].max((mu.eigenvalues[l][k] - mu_rot.eigenvalues[l][k]).abs());
        }
        out[2] = out[2].max((mu.traces[l] - h2).abs());
        out[3] = out[3].max(nu.matrices[l][(0, 0)].abs().max(nu.matrices[l][(1, 0)].abs()));
        out[4] = out[4].max((nu.matrices[l][(1, 1)] - h2).abs());
        if let Some(r) = radius {
            for k in 0..2 {
                out[5] = out[5].max((mu.eigenvalues[l][k] - 1.0 / r).abs() * r);
            }
        }
    }
    Ok(out)
}

/// Index, Chern numbers, kernels, boundary operator, Bochner identity and
/// rigidity verdict for the ball, with a refinement comparison against the
/// next coarser level.
pub fn certify_ball(shape: BallShape, refine: usize, seed: u64, tol: &Tolerances) -> Result<Report> {
    let mut r = Report::new("certify-ball");
    r.put("refine", refine);
    r.put("shape", format!("{shape:?}"));
    let domain = build_ball_mesh(shape, refine)?;
    let dirac = assemble_d(&domain)?;
    let simons = simons_of(&domain, &dirac);
    let surface = domain.boundary.as_ref().ok_or(crate::G2Error::MissingBoundary)?;
    r.put("nodes", domain.len());
    r.put("h", domain.h);

    let bundles = decompose_boundary_bundles(&domain, Vec7::basis(3))?;
    let idx = index(&domain, &bundles)?;
    r.push(CheckResult::equals("index", idx.index, 1, Basis::PublishedValue));
    r.push(CheckResult::equals("c1(nu_X)", idx.c1_nu_x.value, 0, Basis::PublishedValue));
    r.push(CheckResult::equals("c1(T boundary)", idx.c1_tangent.value, 2, Basis::ClosedForm));
    r.push(CheckResult::equals("Chern relation on ball", idx.chern_relation, 0, Basis::PublishedValue));
    let holonomy = [idx.c1_nu_x.residual, idx.c1_mu_x.residual, idx.c1_tangent.residual]
        .into_iter()
        .fold(0.0, f64::max);
    r.push(CheckResult::below("holonomy rounding residual", holonomy, 0.1, Basis::ClosedForm));
    r.put("index_report", &idx);

    let torus = torus_surface(2.0, 0.7, 40, 16)?;
    let flat = vec![[Vec7::basis(3), Vec7::basis(4), Vec7::basis(5), Vec7::basis(6)]; torus.len()];
    let tb = bundles_on_surface(&torus, &flat, Vec7::basis(3));
    let tidx = index_on_surface(&torus, &tb)?;
    r.push(CheckResult::equals("Chern relation on genus-1 surface", tidx.chern_relation, 0, Basis::PublishedValue));
    r.put("genus_one_index_report", &tidx);

    let count = 12;
    let k_nu = kernel_dim(&domain, &dirac, Some(&bundles.condition(Bundle::NuX)), tol.abs_tol, tol.gap_ratio, count)?;
    let k_mu = kernel_dim(&domain, &dirac, Some(&bundles.condition(Bundle::MuX)), tol.abs_tol, tol.gap_ratio, count)?;
    r.push(CheckResult::equals("kernel dimension (nu_X)", k_nu.dim as i64, 1, Basis::PublishedValue));
    r.push(CheckResult::equals("kernel dimension (mu_X)", k_mu.dim as i64, 0, Basis::PublishedValue));
    r.push(CheckResult::above("gap ratio (nu_X)", k_nu.gap, tol.gap_ratio, Basis::ClosedForm));
    r.push(CheckResult::above("gap ratio (mu_X)", k_mu.gap, tol.gap_ratio, Basis::ClosedForm));
    r.put("singular_values_nu_x", &k_nu.singular_values);
    r.put("singular_values_mu_x", &k_mu.singular_values);
    r.put("kernel_method", k_nu.method);

    let mu_dl = assemble_dl(surface, &bundles.mu_x, 0.0)?;
    let rigidity = rigidity_report(&mu_dl, &simons, idx.index);
    r.push(CheckResult {
        name: "rigidity verdict".into(),
        value: f64::from(u8::from(rigidity.verdict == Verdict::SmoothModuli)),
        expected: "SmoothModuli".into(),
        basis: Basis::PublishedValue,
        pass: rigidity.verdict == Verdict::SmoothModuli,
    });
    r.put("rigidity", &rigidity);

    // three-term boundary identity on kernel vectors
    let mu_bochner = k_mu
        .vectors
        .iter()
        .map(|psi| boundary_bochner_residual(&domain, &dirac, &simons, &bundles.mu_x, psi))
        .collect::<Result<Vec<f64>>>()?;
    let nu_bochner = k_nu
        .vectors
        .iter()
        .map(|psi| boundary_bochner_residual(&domain, &dirac, &simons, &bundles.nu_x, psi))
        .collect::<Result<Vec<f64>>>()?;
    let mu_max = mu_bochner.iter().copied().fold(0.0, f64::max);
    r.push(CheckResult::below("boundary Bochner residual (mu_X kernel)", mu_max, domain.h, Basis::Convergence));
    r.put("boundary_bochner_mu_x_vectors", mu_bochner.len());
    r.put("boundary_bochner_nu_x", &nu_bochner);

    let radius = match shape {
        BallShape::Round { radius } => Some(radius),
        _ => None,
    };
    let fine = boundary_operator_errors(&domain, radius)?;
    let (wf, af) = ball_identity_residuals(&domain, &dirac, seed, 5);
    r.put("boundary_operator_errors", fine);
    r.put("weitzenboeck_interior", wf);
    r.put("adjointness", af);
    let c = 2.0 * domain.h;
    r.push(CheckResult::below("D_L symmetry residual / h", fine[0] / domain.h, 2.0, Basis::Convergence));
    r.push(CheckResult::below("D_L frame dependence / h", fine[1] / domain.h, 2.0, Basis::Convergence));
    r.push(CheckResult::below("|trace D_L - 2H|", fine[2], c, Basis::Convergence));
    r.push(CheckResult::below("|D_nu e|", fine[3], c, Basis::Convergence));
    r.push(CheckResult::below("|D_nu (n x e) - 2H (n x e)|", fine[4], c, Basis::Convergence));
    if radius.is_some() && refine >= 3 {
        r.push(CheckResult::below("sphere eigenvalues vs 1/r (relative)", fine[5], 0.05, Basis::ClosedForm));
    }

    if refine >= 2 {
        let coarse = build_ball_mesh(shape, refine - 1)?;
        let cd = assemble_d(&coarse)?;
        let (wc, ac) = ball_identity_residuals(&coarse, &cd, seed, 5);
        r.put("weitzenboeck_interior_coarse", wc);
        r.put("adjointness_coarse", ac);
        r.push(CheckResult::above("Weitzenboeck refinement ratio", wc / wf, 1.5, Basis::Convergence));
        r.push(CheckResult::above("adjointness refinement ratio", ac / af, 1.0, Basis::Convergence));
        let coarse_err = boundary_operator_errors(&coarse, radius)?;
        r.push(CheckResult::above("trace error refinement ratio", coarse_err[2] / fine[2], 1.0, Basis::Convergence));
    }
    r.spectrum = k_mu.singular_values.clone();
    Ok(r)
}

fn cy_fixture(name: &str, complex: SimplicialComplex, expected: usize, tol: &Tolerances, r: &mut Report) -> Result<()> {
    let dec = build_dec_from_complex(&complex, DualKind::Barycentric)?;
    let (dd1, dd2) = dec.dd_defect();
    let betti = dec.betti();
    let dv = assemble_dvee(&dec)?;
    let (rx, ry) = dvee_square_vs_laplacian(&dv, &dec);
    let adj = dvee_adjointness(&dv);
    let k = cy_kernel_dim(&dv, tol.abs_tol, tol.gap_ratio, 12)?;
    r.push(CheckResult::below(format!("{name}: d o d"), dd1.max(dd2), 1e-300, Basis::Identity));
    r.push(CheckResult::below(format!("{name}: D^2 + Laplacian"), rx.max(ry), tol.identity_tol, Basis::Identity));
    r.push(CheckResult::below(format!("{name}: skew-adjointness"), adj, tol.identity_tol, Basis::Identity));
    r.push(CheckResult::equals(format!("{name}: kernel dimension"), k.dim as i64, expected as i64, Basis::ClosedForm));
    r.push(CheckResult::equals(format!("{name}: kernel = b1 + 1"), k.dim as i64, (betti[1] + 1) as i64, Basis::PublishedValue));
    r.push(CheckResult::above(format!("{name}: gap ratio"), k.gap, tol.gap_ratio, Basis::ClosedForm));
    r.push(CheckResult::below(format!("{name}: harmonic split residual"), k.harmonic_residual, 1e-8, Basis::Identity));
    r.put(
        name,
        json!({ "betti": betti, "cells": dec.n, "singular_values": k.singular_values, "method": k.method }),
    );
    Ok(())
}

/// Form-level operator on the flat 3-torus, a 3-sphere and S¹ × S².
pub fn certify_cy(n: usize, tol: &Tolerances) -> Result<Report> {
    let mut r = Report::new("certify-cy");
    cy_fixture("T3", torus_complex(n)?, 4, tol, &mut r)?;
    cy_fixture("S3 (4-simplex boundary)", four_simplex_boundary(), 1, tol, &mut r)?;
    cy_fixture("S3 (16-cell boundary)", cross_polytope_boundary(), 1, tol, &mut r)?;
    cy_fixture("S1xS2", sphere_circle_product(), 2, tol, &mut r)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebra_suite_passes_and_is_deterministic() {
        let a = algebra_suite(7, 500);
        let b = algebra_suite(7, 500);
        assert!(a.passed);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn fourier_oracle_counts() {
        let s = torus_fourier_spectrum(4);
        assert_eq!(s.len(), 256);
        // k_j ∈ {0, 2} gives a vanishing symbol
        assert_eq!(s.iter().filter(|x| x.abs() < 1e-9).count(), 32);
        let odd = torus_fourier_spectrum(5);
        assert_eq!(odd.iter().filter(|x| x.abs() < 1e-9).count(), 4);
    }

    #[test]
    fn cy_suite_passes() {
        let r = certify_cy(4, &Tolerances::default()).unwrap();
        for c in &r.checks {
            assert!(c.pass, "{c:?}");
        }
    }
}
