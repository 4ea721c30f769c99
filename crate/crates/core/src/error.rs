use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("complex has no facets")]
    EmptyComplex,
    #[error("repeated vertex in simplex {0:?}")]
    RepeatedVertex(Vec<usize>),
    #[error("facet {facet:?} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        facet: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("simplex {0:?} listed twice")]
    DuplicateSimplex(Vec<usize>),
    #[error("face {face:?} of {simplex:?} is missing from the complex")]
    MissingFace { simplex: Vec<usize>, face: Vec<usize> },
    #[error("degree {degree} out of range 0..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },
    #[error("simplex {0:?} is not in the complex")]
    UnknownSimplex(Vec<usize>),
    #[error("{0:?} is not a boundary simplex")]
    NotBoundary(Vec<usize>),
    #[error("invalid gluing: {0}")]
    InvalidGluing(String),
    #[error("degenerate gluing: {0}")]
    DegenerateGluing(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("weight {value} for degree-{degree} simplex {index} must be positive")]
    NonPositiveWeight {
        degree: usize,
        index: usize,
        value: f64,
    },
    #[error("edge lengths of triangle {0:?} violate the triangle inequality")]
    TriangleInequality(Vec<usize>),
    #[error("{what} is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { what: String, min_eigenvalue: f64 },
    #[error("operator is indefinite (eigenvalue {min_eigenvalue:e} below cutoff)")]
    Indefinite { min_eigenvalue: f64 },
    #[error("degree-{degree} simplices {a} and {b} share no cofacet to transport through")]
    NoTransportPath { degree: usize, a: usize, b: usize },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("transport {0} is not unitary for the fiber metrics")]
    NotUnitary(String),
    #[error("complex is not a cycle")]
    NotACycle,
    #[error("{0:?} is not a leaf")]
    NotALeaf(Vec<usize>),
    #[error("empty interior: every vertex lies on the Dirichlet boundary")]
    EmptyInterior,
    #[error("index partition does not cover the basis: {0}")]
    PartitionNotCovering(String),
    #[error("expected length {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("gluing is not an isometry: {0}")]
    NonIsometric(String),
    #[error("divergent seam integral: {0}")]
    DivergentSeam(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
