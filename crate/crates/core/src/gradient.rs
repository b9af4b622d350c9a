//! Discrete tangential derivatives.
//!
//! Each operator maps nodal scalar values to the directional derivative along
//! the node's tangent frame vectors. The periodic grid uses central
//! differences (antisymmetric, exact summation by parts). Unstructured meshes
//! and point clouds use a weighted least-squares fit of a quadratic in local
//! tangent coordinates, which differentiates quadratics exactly.

use nalgebra::DMatrix;

use crate::algebra::Vec7;
use crate::error::{G2Error, Result};
use crate::mesh::{grid_index, ring_of, Domain, DomainKind, SurfaceMesh};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Three sparse `N × N` matrices; row `i` of `g[a]` gives the derivative at
/// node `i` along `tangent_frame[i][a]`.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub g: [CsrMatrix; 3],
}

impl Gradient {
    pub fn build(domain: &Domain) -> Result<Self> {
        match domain.kind {
            DomainKind::PeriodicGrid { n } => Ok(central_differences(n)),
            _ => least_squares(domain),
        }
    }

    /// Derivative of a vector-valued nodal field along tangent direction `a`.
    pub fn apply_vec(&self, a: usize, f: &[Vec7]) -> Vec<Vec7> {
        let m = &self.g[a];
        (0..m.nrows)
            .map(|i| m.row(i).fold(Vec7::ZERO, |acc, (j, c)| acc + f[j] * c))
            .collect()
    }
}

fn central_differences(n: usize) -> Gradient {
    let h = 1.0 / n as f64;
    let mk = |axis: usize| {
        let mut b = TripletBuilder::new(n * n * n, n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let row = grid_index(n, i, j, k);
                    let mut plus = [i, j, k];
                    let mut minus = [i, j, k];
                    plus[axis] += 1;
                    minus[axis] += n - 1;
                    b.add(row, grid_index(n, plus[0], plus[1], plus[2]), 0.5 / h);
                    b.add(row, grid_index(n, minus[0], minus[1], minus[2]), -0.5 / h);
                }
            }
        }
        b.build()
    };
    Gradient {
        g: [mk(0), mk(1), mk(2)],
    }
}

/// Smallest ratio of singular values accepted for a local fit.
const FIT_CONDITION: f64 = 1e-6;

/// Least-squares differentiation weights at one point: returns, for each
/// neighbour, its weight per tangent direction. `coords` are neighbour
/// offsets in local tangent coordinates (dimension `D`).
fn fit_weights<const D: usize>(coords: &[[f64; D]], scale: f64) -> Option<Vec<[f64; D]>> {
    let nq = D * (D + 1) / 2;
    let cols = D + nq;
    if coords.len() < cols {
        return None;
    }
    let mut a = DMatrix::<f64>::zeros(coords.len(), cols);
    let mut wts = Vec::with_capacity(coords.len());
    for (r, x) in coords.iter().enumerate() {
        let y: [f64; D] = std::array::from_fn(|k| x[k] / scale);
        let dist2: f64 = y.iter().map(|v| v * v).sum();
        let w = 1.0 / dist2.max(1e-12).sqrt();
        wts.push(w);
        let mut c = 0;
        for k in 0..D {
            a[(r, c)] = w * y[k];
            c += 1;
        }
        for k in 0..D {
            for l in k..D {
                a[(r, c)] = w * y[k] * y[l];
                c += 1;
            }
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin < FIT_CONDITION * smax {
        return None;
    }
    let pinv = svd.pseudo_inverse(0.0).ok()?;
    Some(
        (0..coords.len())
            .map(|r| std::array::from_fn(|k| pinv[(k, r)] * wts[r] / scale))
            .collect(),
    )
}

fn least_squares(domain: &Domain) -> Result<Gradient> {
    let n = domain.len();
    let mut builders = [
        TripletBuilder::new(n, n),
        TripletBuilder::new(n, n),
        TripletBuilder::new(n, n),
    ];
    for i in 0..n {
        let t = &domain.tangent_frame[i];
        let mut solved = false;
        for rings in 1..=3 {
            let ring = if rings == 1 {
                domain.neighbors[i].clone()
            } else {
                ring_of(&domain.neighbors, i, rings)
            };
            if rings == 1 && ring.len() < 12 {
                continue;
            }
            let coords: Vec<[f64; 3]> = ring
                .iter()
                .map(|&j| {
                    let d = domain.nodes[j] - domain.nodes[i];
                    [d.dot(&t[0]), d.dot(&t[1]), d.dot(&t[2])]
                })
                .collect();
            if let Some(w) = fit_weights::<3>(&coords, domain.h) {
                for (r, &j) in ring.iter().enumerate() {
                    for a in 0..3 {
                        builders[a].add(i, j, w[r][a]);
                        builders[a].add(i, i, -w[r][a]);
                    }
                }
                solved = true;
                break;
            }
        }
        if !solved {
            return Err(G2Error::DegenerateCell { node: i, volume: domain.weights[i] });
        }
    }
    let [b0, b1, b2] = builders;
    Ok(Gradient {
        g: [b0.build(), b1.build(), b2.build()],
    })
}

/// Surface derivative weights at boundary node `i` along `(v, w)`.
pub fn surface_weights(surface: &SurfaceMesh, i: usize) -> Result<Vec<(usize, [f64; 2])>> {
    let p = surface.points[i];
    for rings in 1..=3 {
        let ring = surface.ring(i, rings);
        let coords: Vec<[f64; 2]> = ring
            .iter()
            .map(|&j| {
                let d = surface.points[j] - p;
                [d.dot(&surface.v[i]), d.dot(&surface.w[i])]
            })
            .collect();
        if let Some(w) = fit_weights::<2>(&coords, surface.h) {
            let mut out: Vec<(usize, [f64; 2])> = ring.iter().copied().zip(w).collect();
            let sum = out.iter().fold([0.0; 2], |s, (_, w)| [s[0] + w[0], s[1] + w[1]]);
            out.push((i, [-sum[0], -sum[1]]));
            return Ok(out);
        }
    }
    Err(G2Error::MissingCurvatureData(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_ball_mesh, build_sphere_cloud, build_torus_grid, BallShape};

    #[test]
    fn torus_derivative_of_sine() {
        let n = 16;
        let d = build_torus_grid(n).unwrap();
        let g = Gradient::build(&d).unwrap();
        let f: Vec<f64> = d.nodes.iter().map(|x| (2.0 * std::f64::consts::PI * x[1]).sin()).collect();
        let df = g.g[1].matvec(&f);
        let h = d.h;
        let scale = (2.0 * std::f64::consts::PI * h).sin() / h;
        for (i, x) in d.nodes.iter().enumerate() {
            let exact = scale * (2.0 * std::f64::consts::PI * x[1]).cos();
            assert!((df[i] - exact).abs() < 1e-12);
        }
        assert_eq!(g.g[0].transpose(), g.g[0].scale(-1.0));
    }

    #[test]
    fn ball_gradient_exact_on_quadratics() {
        let d = build_ball_mesh(BallShape::Round { radius: 1.0 }, 2).unwrap();
        let g = Gradient::build(&d).unwrap();
        let f: Vec<f64> = d
            .nodes
            .iter()
            .map(|x| 0.3 + x[0] - 2.0 * x[1] * x[2] + 0.5 * x[2] * x[2])
            .collect();
        for a in 0..3 {
            let df = g.g[a].matvec(&f);
            for (i, x) in d.nodes.iter().enumerate() {
                let exact = [1.0, -2.0 * x[2], -2.0 * x[1] + x[2]][a];
                assert!((df[i] - exact).abs() < 1e-9, "node {i} dir {a}: {} vs {exact}", df[i]);
            }
        }
    }

    #[test]
    fn sphere_cloud_gradient_of_coordinate() {
        let r = 1.0;
        let d = build_sphere_cloud(r, 2000, 24, 5);
        let g = Gradient::build(&d).unwrap();
        // derivative of x0 along t_a is the first ambient component of t_a
        let f: Vec<f64> = d.nodes.iter().map(|x| x[0]).collect();
        let mut err = 0.0_f64;
        for a in 0..3 {
            let df = g.g[a].matvec(&f);
            for i in 0..d.len() {
                err = err.max((df[i] - d.tangent_frame[i][a][0]).abs());
            }
        }
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn surface_weights_differentiate_linear_functions() {
        let d = build_ball_mesh(BallShape::Round { radius: 1.0 }, 2).unwrap();
        let s = d.boundary.as_ref().unwrap();
        for i in (0..s.len()).step_by(7) {
            let w = surface_weights(s, i).unwrap();
            let dv: f64 = w.iter().map(|(j, c)| c[0] * s.points[*j][0]).sum();
            // derivative of x along v is v_x up to the O(h²) normal offset
            assert!((dv - s.v[i][0]).abs() < 0.05);
        }
    }
}
