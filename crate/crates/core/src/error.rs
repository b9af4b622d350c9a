use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum G2Error {
    #[error("degenerate basis: Gram determinant {gram_det:.3e} below 1e-12")]
    DegenerateBasis { gram_det: f64 },

    #[error("basis has {got} vectors, expected {expected}")]
    BasisLength { expected: usize, got: usize },

    #[error("invalid grid resolution {0} (need N >= 4)")]
    InvalidResolution(usize),

    #[error("mesh quality: tetrahedron {cell} has volume {volume:.3e} (mean {mean:.3e})")]
    MeshQuality { cell: usize, volume: f64, mean: f64 },

    #[error("surface is not closed: edge ({0}, {1}) has {2} incident triangles")]
    NonClosedSurface(usize, usize, usize),

    #[error("domain has no boundary surface")]
    MissingBoundary,

    #[error("domain is missing frames: {0}")]
    MissingFrames(String),

    #[error("missing curvature data on boundary node {0}")]
    MissingCurvatureData(usize),

    #[error("eigensolver did not converge: {0}")]
    SolverNoConvergence(String),

    #[error("ambiguous kernel: no spectral gap (candidates {low} or {high}, ratio {ratio:.3e})")]
    AmbiguousKernel { low: usize, high: usize, ratio: f64 },

    #[error("degenerate tangent triple at node {node} (volume {volume:.3e})")]
    DegenerateCell { node: usize, volume: f64 },

    #[error("vector is not a unit normal to the submanifold (tangential part {0:.3e})")]
    InvalidNormal(f64),

    #[error("holonomy rounding residual {residual:.3e} exceeds 0.1 (raw value {raw:.6})")]
    HolonomyResidualTooLarge { raw: f64, residual: f64 },

    #[error("dual cell of a {dim}-simplex #{index} has non-positive volume {volume:.3e}")]
    NonWellCenteredMesh { dim: usize, index: usize, volume: f64 },

    #[error("unsupported domain for this operation: {0}")]
    Unsupported(String),

    #[error("invalid mesh file: {0}")]
    InvalidMesh(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, G2Error>;
