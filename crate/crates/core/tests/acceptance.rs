//! Acceptance criteria 1-10. Each criterion prints one PASS/FAIL line. The
//! tolerances are pinned below and do not follow library defaults.
//!
//! Criterion 2 asks for a 4-dimensional kernel on the N=8 torus. The central
//! difference operator has 32 exact zero modes for even N (every wavenumber
//! component 0 or N/2 has a vanishing symbol), so that line reports FAIL. The
//! process still exits successfully as long as the kernel matches the
//! Fourier count. Any other failure makes the target fail.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use g2cal::algebra::{chi, cross, orthonormalize, Vec7};
use g2cal::boundary::{
    assemble_dl, boundary_bochner_residual, bundles_on_surface, decompose_boundary_bundles, index, index_on_surface,
    rigidity_report, BoundaryBundles, Bundle, Verdict,
};
use g2cal::certify::{band_limited_field, ball_identity_residuals};
use g2cal::cy::{adjointness_residual as dvee_adjointness, assemble_dvee, cy_kernel_dim, dvee_square_vs_laplacian};
use g2cal::dec::{
    build_dec_from_complex, cross_polytope_boundary, four_simplex_boundary, sphere_circle_product, torus_complex,
    DualKind, SimplicialComplex,
};
use g2cal::dirac::{
    adjointness_residual, assemble_d, kernel_dim, l2_norm_sq, linearization_error, symbol, weitzenboeck_residual,
    DiracOperator, KernelEstimate,
};
use g2cal::geometry::{second_fundamental_form, simons_operators, SimonsField};
use g2cal::mesh::{build_ball_mesh, build_torus_grid, torus_surface, BallShape, Domain};
use g2cal::spectral::symmetric_spectrum;

const SEED: u64 = 20_240_611;
const ALGEBRA_SAMPLES: usize = 10_000;
const ALGEBRA_TOL: f64 = 1e-12;
const TORUS_N: usize = 8;
const SPECTRUM_TOL: f64 = 1e-8;
const TORUS_KERNEL: usize = 4;
const TORUS_GAP: f64 = 1e3;
const IDENTITY_TOL: f64 = 1e-10;
const REFINE_FACTOR: f64 = 1.5;
const LINEARIZATION_TOL: f64 = 1e-6;
const BALL_REFINE: usize = 3;
const HOLONOMY_TOL: f64 = 0.1;
const BALL_GAP: f64 = 50.0;
const DL_CONSTANT: f64 = 2.0;
const SPHERE_EIGEN_TOL: f64 = 0.05;
const CY_GAP: f64 = 50.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Ball {
    domain: Domain,
    dirac: DiracOperator,
    simons: SimonsField,
    bundles: BoundaryBundles,
    k_nu: KernelEstimate,
    k_mu: KernelEstimate,
}

fn ball(refine: usize) -> Ball {
    let domain = build_ball_mesh(BallShape::Round { radius: 1.0 }, refine).unwrap();
    let dirac = assemble_d(&domain).unwrap();
    let simons = simons_operators(&second_fundamental_form(&domain, &dirac.grad));
    let bundles = decompose_boundary_bundles(&domain, Vec7::basis(3)).unwrap();
    let k_nu = kernel_dim(&domain, &dirac, Some(&bundles.condition(Bundle::NuX)), None, BALL_GAP, 12).unwrap();
    let k_mu = kernel_dim(&domain, &dirac, Some(&bundles.condition(Bundle::MuX)), None, BALL_GAP, 12).unwrap();
    Ball { domain, dirac, simons, bundles, k_nu, k_mu }
}

fn random_vec7(rng: &mut ChaCha8Rng) -> Vec7 {
    Vec7(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// φ = e123 + e145 + e167 + e246 − e257 − e347 − e356 evaluated term by term.
fn phi_oracle(u: &Vec7, v: &Vec7, w: &Vec7) -> f64 {
    const TERMS: [(f64, [usize; 3]); 7] = [
        (1.0, [0, 1, 2]),
        (1.0, [0, 3, 4]),
        (1.0, [0, 5, 6]),
        (1.0, [1, 3, 5]),
        (-1.0, [1, 4, 6]),
        (-1.0, [2, 3, 6]),
        (-1.0, [2, 4, 5]),
    ];
    TERMS
        .iter()
        .map(|(s, [i, j, k])| {
            let pick = |x: &Vec7| [x.0[*i], x.0[*j], x.0[*k]];
            s * det3(pick(u), pick(v), pick(w))
        })
        .sum()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut phi_err, mut cross_err, mut chi_err, mut sym_err, mut law_err) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..ALGEBRA_SAMPLES {
        let (u, v, w) = (random_vec7(&mut rng), random_vec7(&mut rng), random_vec7(&mut rng));
        let uv = cross(&u, &v);
        phi_err = phi_err.max((uv.dot(&w) - phi_oracle(&u, &v, &w)).abs());
        for k in 0..7 {
            cross_err = cross_err.max((uv.0[k] - phi_oracle(&u, &v, &Vec7::basis(k))).abs());
        }
        let c = chi(&u, &v, &w);
        chi_err = chi_err.max(c.dot(&u).abs()).max(c.dot(&v).abs()).max(c.dot(&w).abs());

        let xi: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let s = symbol(xi);
        let n2: f64 = xi.iter().map(|x| x * x).sum();
        sym_err = sym_err.max((s * s + nalgebra::Matrix4::identity() * n2).abs().max());

        let q = orthonormalize(&[u, v]).unwrap();
        let frame = [q[0], q[1], cross(&q[0], &q[1])];
        let mut pick = || -> Vec7 { frame.iter().map(|f| *f * rng.gen_range(-1.0..1.0)).sum() };
        let (x, y, z) = (pick(), pick(), pick());
        let lhs = cross(&cross(&y, &z), &x);
        let rhs = z * x.dot(&y) - y * x.dot(&z);
        law_err = law_err.max((lhs - rhs).max_abs());
    }
    let worst = phi_err.max(cross_err).max(chi_err).max(sym_err).max(law_err);
    outcome(
        worst < ALGEBRA_TOL,
        format!(
            "phi {phi_err:.1e}, cross {cross_err:.1e}, chi perp {chi_err:.1e}, symbol {sym_err:.1e}, plane law {law_err:.1e} (< {ALGEBRA_TOL:.0e})"
        ),
    )
}

/// Eigenvalues ±|s(k)| (each twice) of the central-difference symbol on the
/// n³ torus of unit side.
fn fourier_oracle(n: usize) -> (Vec<f64>, usize) {
    let s1: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin() * n as f64).collect();
    let mut values = Vec::new();
    let mut zeros = 0;
    for a in &s1 {
        for b in &s1 {
            for c in &s1 {
                let m = (a * a + b * b + c * c).sqrt();
                if m < 1e-9 {
                    zeros += 4;
                }
                values.extend([m, m, -m, -m]);
            }
        }
    }
    values.sort_by(|x, y| x.partial_cmp(y).unwrap());
    (values, zeros)
}

/// Returns the outcome and whether the deviation is the documented one.
fn criterion_2() -> (Outcome, bool) {
    let domain = build_torus_grid(TORUS_N).unwrap();
    let dirac = assemble_d(&domain).unwrap();
    let (oracle, zeros) = fourier_oracle(TORUS_N);
    let spectrum = symmetric_spectrum(&dirac.op).unwrap();
    let spec_err = spectrum.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let k = kernel_dim(&domain, &dirac, None, None, TORUS_GAP, zeros + 8).unwrap();
    let pass = spec_err < SPECTRUM_TOL && k.dim == TORUS_KERNEL && k.gap > TORUS_GAP;
    let documented = spec_err < SPECTRUM_TOL && k.dim == zeros && k.gap > TORUS_GAP;
    (
        outcome(
            pass,
            format!(
                "spectrum error {spec_err:.1e} (< {SPECTRUM_TOL:.0e}), kernel {} (expected {TORUS_KERNEL}; Fourier count {zeros}), gap {:.1e} (> {TORUS_GAP:.0e})",
                k.dim, k.gap
            ),
        ),
        documented,
    )
}

fn criterion_3(fine: &Ball, coarse: &Ball) -> Outcome {
    let domain = build_torus_grid(TORUS_N).unwrap();
    let dirac = assemble_d(&domain).unwrap();
    let simons = simons_operators(&second_fundamental_form(&domain, &dirac.grad));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let torus = (0..100)
        .map(|_| weitzenboeck_residual(&dirac, &simons, &band_limited_field(&domain, &mut rng, 4, 3), None))
        .fold(0.0, f64::max);
    let (wf, _) = ball_identity_residuals(&fine.domain, &fine.dirac, SEED, 5);
    let (wc, _) = ball_identity_residuals(&coarse.domain, &coarse.dirac, SEED, 5);
    outcome(
        torus < IDENTITY_TOL && wc / wf >= REFINE_FACTOR,
        format!(
            "torus {torus:.1e} (< {IDENTITY_TOL:.0e}), ball interior {wc:.3e} -> {wf:.3e}, ratio {:.2} (>= {REFINE_FACTOR})",
            wc / wf
        ),
    )
}

fn criterion_4(fine: &Ball, coarse: &Ball) -> Outcome {
    let domain = build_torus_grid(TORUS_N).unwrap();
    let dirac = assemble_d(&domain).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let mut torus = 0.0_f64;
    for _ in 0..100 {
        let a = band_limited_field(&domain, &mut rng, 4, 3);
        let b = band_limited_field(&domain, &mut rng, 4, 3);
        let scale = (l2_norm_sq(&dirac, &a) * l2_norm_sq(&dirac, &b)).sqrt();
        torus = torus.max(adjointness_residual(&domain, &dirac, &a, &b) / scale);
    }
    let (_, af) = ball_identity_residuals(&fine.domain, &fine.dirac, SEED, 5);
    let (_, ac) = ball_identity_residuals(&coarse.domain, &coarse.dirac, SEED, 5);
    outcome(
        torus < IDENTITY_TOL && af < ac,
        format!("torus {torus:.1e} (< {IDENTITY_TOL:.0e}), ball {ac:.3e} -> {af:.3e} (decreasing)"),
    )
}

fn criterion_5() -> Outcome {
    let domain = build_torus_grid(TORUS_N).unwrap();
    let dirac = assemble_d(&domain).unwrap();
    let steps: Vec<f64> = (1..=10).map(|k| 10f64.powi(-k)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 5);
    let (mut worst, mut at) = (0.0_f64, 0.0);
    for _ in 0..20 {
        let psi = band_limited_field(&domain, &mut rng, 3, 2);
        let (err, eps) = linearization_error(&domain, &dirac, &psi, &steps).unwrap();
        if err > worst {
            (worst, at) = (err, eps);
        }
    }
    outcome(
        worst <= LINEARIZATION_TOL,
        format!("worst relative error {worst:.1e} at step {at:.0e} (<= {LINEARIZATION_TOL:.0e})"),
    )
}

fn criterion_6(b: &Ball) -> Outcome {
    let surface = b.domain.boundary.as_ref().unwrap();
    let idx = index(&b.domain, &b.bundles).unwrap();
    // closed-form oracle: c1(T∂Y) is the Euler characteristic of the boundary
    let mut edges: Vec<(usize, usize)> = surface
        .triangles
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, c)| (a.min(c), a.max(c)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let euler = surface.len() as i64 - edges.len() as i64 + surface.triangles.len() as i64;
    let holonomy = [idx.c1_nu_x.residual, idx.c1_mu_x.residual, idx.c1_tangent.residual]
        .into_iter()
        .fold(0.0, f64::max);
    let dl = assemble_dl(surface, &b.bundles.mu_x, 0.0).unwrap();
    let verdict = rigidity_report(&dl, &b.simons, idx.index).verdict;
    let pass = idx.index == 1
        && idx.c1_nu_x.value == 0
        && idx.c1_tangent.value == 2
        && idx.c1_tangent.value == euler
        && holonomy < HOLONOMY_TOL
        && b.k_nu.dim == 1
        && b.k_mu.dim == 0
        && b.k_nu.gap > BALL_GAP
        && b.k_mu.gap > BALL_GAP
        && verdict == Verdict::SmoothModuli;
    outcome(
        pass,
        format!(
            "index {}, c1(nu_X) {}, c1(T boundary) {} (Euler characteristic {euler}), holonomy residual {holonomy:.1e}, kernel nu_X {} (gap {:.1e}), kernel mu_X {} (gap {:.1e}), verdict {verdict:?}",
            idx.index, idx.c1_nu_x.value, idx.c1_tangent.value, b.k_nu.dim, b.k_nu.gap, b.k_mu.dim, b.k_mu.gap
        ),
    )
}

fn criterion_7(b: &Ball) -> Outcome {
    let surface = b.domain.boundary.as_ref().unwrap();
    let h = b.domain.h;
    let mu = assemble_dl(surface, &b.bundles.mu_x, 0.0).unwrap();
    let mu_rot = assemble_dl(surface, &b.bundles.mu_x, 0.7).unwrap();
    let nu = assemble_dl(surface, &b.bundles.nu_x, 0.0).unwrap();
    // unit sphere: both principal curvatures are 1, so 2H = 2
    let two_h = 2.0;
    let (mut sym, mut frame, mut trace, mut nu_e, mut nu_ne, mut eig) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for l in 0..surface.len() {
        sym = sym.max(mu.asymmetry[l]).max(nu.asymmetry[l]);
        for k in 0..2 {
            frame = frame.max((mu.eigenvalues[l][k] - mu_rot.eigenvalues[l][k]).abs());
            eig = eig.max((mu.eigenvalues[l][k] - 1.0).abs());
        }
        trace = trace.max((mu.traces[l] - two_h).abs());
        nu_e = nu_e.max(nu.matrices[l][(0, 0)].abs()).max(nu.matrices[l][(1, 0)].abs());
        nu_ne = nu_ne.max((nu.matrices[l][(1, 1)] - two_h).abs());
    }
    let ch = DL_CONSTANT * h;
    let pass = sym <= ch && frame <= ch && trace <= ch && nu_e <= ch && nu_ne <= ch && eig < SPHERE_EIGEN_TOL;
    outcome(
        pass,
        format!(
            "C*h = {ch:.3e}: symmetry {sym:.1e}, frame {frame:.1e}, |tr - 2H| {trace:.3e}, |D_nu e| {nu_e:.3e}, |D_nu(n x e) - 2H| {nu_ne:.3e}; sphere eigenvalues {:.2}% (< {:.0}%)",
            100.0 * eig,
            100.0 * SPHERE_EIGEN_TOL
        ),
    )
}

fn criterion_8(b: &Ball) -> Outcome {
    let ball_idx = index(&b.domain, &b.bundles).unwrap();
    let torus = torus_surface(2.0, 0.7, 40, 16).unwrap();
    let flat = vec![[Vec7::basis(3), Vec7::basis(4), Vec7::basis(5), Vec7::basis(6)]; torus.len()];
    let t_idx = index_on_surface(&torus, &bundles_on_surface(&torus, &flat, Vec7::basis(3))).unwrap();
    let raw = |i: &g2cal::boundary::IndexReport| i.c1_mu_x.raw + i.c1_nu_x.raw + i.c1_tangent.raw;
    outcome(
        ball_idx.chern_relation == 0 && t_idx.chern_relation == 0 && t_idx.genus == 1,
        format!(
            "ball {} (raw {:+.1e}), genus-{} torus {} (raw {:+.1e})",
            ball_idx.chern_relation,
            raw(&ball_idx),
            t_idx.genus,
            t_idx.chern_relation,
            raw(&t_idx)
        ),
    )
}

fn criterion_9() -> Outcome {
    // first Betti numbers in closed form
    let fixtures: [(&str, SimplicialComplex, usize); 4] = [
        ("T3", torus_complex(4).unwrap(), 3),
        ("S3/4-simplex", four_simplex_boundary(), 0),
        ("S3/16-cell", cross_polytope_boundary(), 0),
        ("S1xS2", sphere_circle_product(), 1),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, complex, b1) in fixtures {
        let dec = build_dec_from_complex(&complex, DualKind::Barycentric).unwrap();
        let dv = assemble_dvee(&dec).unwrap();
        let (rx, ry) = dvee_square_vs_laplacian(&dv, &dec);
        let adj = dvee_adjointness(&dv);
        let k = cy_kernel_dim(&dv, None, CY_GAP, 12).unwrap();
        let ok = rx.max(ry) < IDENTITY_TOL && adj < IDENTITY_TOL && k.dim == b1 + 1 && k.gap > CY_GAP;
        pass &= ok;
        parts.push(format!(
            "{name} kernel {} (b1+1 = {}), square {:.0e}, gap {:.0e}",
            k.dim,
            b1 + 1,
            rx.max(ry),
            k.gap
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_10(fine: &Ball, coarse: &Ball) -> Outcome {
    let residuals = |b: &Ball, k: &KernelEstimate, which: Bundle| -> Vec<f64> {
        k.vectors
            .iter()
            .map(|psi| boundary_bochner_residual(&b.domain, &b.dirac, &b.simons, b.bundles.planes(which), psi).unwrap())
            .collect()
    };
    let mu_f = residuals(fine, &fine.k_mu, Bundle::MuX);
    let mu_c = residuals(coarse, &coarse.k_mu, Bundle::MuX);
    let bound = DL_CONSTANT * fine.domain.h;
    let worst = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let pass = mu_f.iter().all(|r| *r <= bound) && (mu_f.is_empty() || worst(&mu_f) <= worst(&mu_c));
    let nu_f = worst(&residuals(fine, &fine.k_nu, Bundle::NuX));
    let nu_c = worst(&residuals(coarse, &coarse.k_nu, Bundle::NuX));
    outcome(
        pass,
        format!(
            "mu_X kernel vectors {} (coarse {}), bound C*h = {bound:.3e}; nu_X kernel residual {nu_c:.1e} -> {nu_f:.1e}",
            mu_f.len(),
            mu_c.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut unexpected = Vec::new();
    let mut report = |id: usize, name: &str, start: Instant, o: Outcome, tolerated: bool| {
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass && !tolerated {
            unexpected.push(id);
        }
    };

    let t = Instant::now();
    report(1, "algebra identities", t, criterion_1(), false);
    let t = Instant::now();
    let (o, documented) = criterion_2();
    report(2, "torus spectrum and kernel", t, o, documented);

    let t = Instant::now();
    let fine = ball(BALL_REFINE);
    let coarse = ball(BALL_REFINE - 1);
    println!("ball fixtures (refine {BALL_REFINE} and {}) built in {:.1}s", BALL_REFINE - 1, t.elapsed().as_secs_f64());

    let t = Instant::now();
    report(3, "Weitzenboeck identity", t, criterion_3(&fine, &coarse), false);
    let t = Instant::now();
    report(4, "self-adjointness", t, criterion_4(&fine, &coarse), false);
    let t = Instant::now();
    report(5, "linearization", t, criterion_5(), false);
    let t = Instant::now();
    report(6, "ball certification", t, criterion_6(&fine), false);
    let t = Instant::now();
    report(7, "boundary operator", t, criterion_7(&fine), false);
    let t = Instant::now();
    report(8, "Chern relation", t, criterion_8(&fine), false);
    let t = Instant::now();
    report(9, "form-level operator", t, criterion_9(), false);
    let t = Instant::now();
    report(10, "boundary Bochner identity", t, criterion_10(&fine, &coarse), false);

    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
