//! Combinatorial Laplacians, Dirichlet restriction and (pseudo)determinants.

use crate::bundle::{adjoint_d, covariant_d, Bundle, Connection};
use crate::error::{Error, Result};
use crate::linalg::{
    fiber_indices, form, hermitian_eigenvalues, log_det_hpd, pencil_eigenvalues, select, select_vector, solve_hpd,
    Mat, Vector, ZERO,
};
use crate::metric::{gram, WeightSystem};
use crate::simplicial::{SimplicialComplex, Subcomplex};

/// Default relative kernel cutoff for pseudodeterminants.
pub const KERNEL_TOLERANCE: f64 = 1e-10;

/// `Δ = d d^∨ + d^∨ d` in one degree, with its local form `Δ^loc = QΔ`.
#[derive(Clone, Debug)]
pub struct LaplacianBundle {
    pub degree: usize,
    pub rank: usize,
    pub gram: Mat,
    pub local: Mat,
    pub full: Mat,
}

impl LaplacianBundle {
    /// `‖QΔ − Δ†Q‖ / ‖QΔ‖`.
    pub fn self_adjointness_residual(&self) -> f64 {
        let qd = &self.gram * &self.full;
        let scale = qd.norm();
        if scale == 0.0 {
            return 0.0;
        }
        (&qd - qd.adjoint()).norm() / scale
    }

    /// Ascending eigenvalues of `Δ`, self-adjoint for the weighted product.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        pencil_eigenvalues(&self.local, &self.gram, "Gram")
    }
}

pub fn laplacian(k: &SimplicialComplex, w: &WeightSystem, bundle: &Bundle, a: &Connection, q: usize) -> Result<LaplacianBundle> {
    if q > k.dim() {
        return Err(Error::DegreeOutOfRange { degree: q, max: k.dim() });
    }
    let g = gram(k, w, bundle, a, q)?;
    let n = g.nrows();
    let mut local = Mat::zeros(n, n);
    if q < k.dim() {
        let d = covariant_d(k, a, q)?;
        let g1 = gram(k, w, bundle, a, q + 1)?;
        local += d.adjoint() * g1 * d;
    }
    if q > 0 {
        // Q d d^∨ = Q D Q_{q-1}⁻¹ D† Q
        let d = covariant_d(k, a, q - 1)?;
        let dv = adjoint_d(k, w, bundle, a, q - 1)?;
        local += &g * d * dv;
    }
    let full = solve_hpd(&g, &local, "Gram")?;
    Ok(LaplacianBundle {
        degree: q,
        rank: bundle.rank(),
        gram: g,
        local,
        full,
    })
}

/// Splitting of 0-cochains into interior and boundary parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirichletProblemSpace {
    pub rank: usize,
    pub vertex_count: usize,
    pub interior_vertices: Vec<usize>,
    pub boundary_vertices: Vec<usize>,
    /// Fiber-basis indices of the interior.
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
}

impl DirichletProblemSpace {
    pub fn new(k: &SimplicialComplex, l: &Subcomplex, rank: usize) -> Self {
        let boundary_vertices = l.indices(0).to_vec();
        let interior_vertices = l.complement(k, 0);
        Self {
            rank,
            vertex_count: k.count(0),
            interior: fiber_indices(&interior_vertices, rank),
            boundary: fiber_indices(&boundary_vertices, rank),
            interior_vertices,
            boundary_vertices,
        }
    }

    /// Restriction to the boundary.
    pub fn p(&self, phi: &Vector) -> Vector {
        select_vector(phi, &self.boundary)
    }

    /// Extension by zero from the boundary.
    pub fn j(&self, eta: &Vector) -> Vector {
        self.assemble(&Vector::zeros(self.interior.len()), eta)
    }

    pub fn interior_part(&self, phi: &Vector) -> Vector {
        select_vector(phi, &self.interior)
    }

    pub fn assemble(&self, interior: &Vector, boundary: &Vector) -> Vector {
        let mut out = Vector::from_element(self.vertex_count * self.rank, ZERO);
        for (x, &i) in self.interior.iter().enumerate() {
            out[i] = interior[x];
        }
        for (x, &i) in self.boundary.iter().enumerate() {
            out[i] = boundary[x];
        }
        out
    }
}

/// The degree-0 Laplacian with Dirichlet conditions on `L`.
#[derive(Clone, Debug)]
pub struct DirichletLaplacian {
    pub space: DirichletProblemSpace,
    /// `Q_{K\L}`.
    pub gram: Mat,
    /// `Δ^loc_{K,L}`.
    pub local: Mat,
    pub full: Mat,
}

impl DirichletLaplacian {
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        pencil_eigenvalues(&self.local, &self.gram, "interior Gram")
    }

    /// `log det(Δ^loc + m² Q_{K\L})`.
    pub fn log_det_massive(&self, m2: f64) -> Result<f64> {
        det_massive(&self.local, m2, &self.gram)
    }
}

pub fn dirichlet_laplacian(
    k: &SimplicialComplex,
    l: &Subcomplex,
    w: &WeightSystem,
    bundle: &Bundle,
    a: &Connection,
) -> Result<DirichletLaplacian> {
    let space = DirichletProblemSpace::new(k, l, bundle.rank());
    if space.interior.is_empty() {
        return Err(Error::EmptyInterior);
    }
    let lap = laplacian(k, w, bundle, a, 0)?;
    let local = select(&lap.local, &space.interior, &space.interior);
    let g = select(&lap.gram, &space.interior, &space.interior);
    let full = solve_hpd(&g, &local, "interior Gram")?;
    Ok(DirichletLaplacian {
        space,
        gram: g,
        local,
        full,
    })
}

/// A pseudodeterminant in log form with its kernel dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetPrime {
    pub log_det: f64,
    pub kernel: usize,
}

impl DetPrime {
    pub fn value(&self) -> f64 {
        self.log_det.exp()
    }
}

/// Product of the eigenvalues above `eps_rel · λ_max · dim`.
pub fn det_prime(eigenvalues: &[f64], eps_rel: f64) -> Result<DetPrime> {
    det_prime_scaled(eigenvalues, eps_rel, 0.0)
}

/// As [`det_prime`], with `λ_max` floored at `scale`. An operator derived
/// from a larger one (a Schur complement, say) can vanish up to rounding,
/// and its own spectrum then sets no usable cutoff.
pub fn det_prime_scaled(eigenvalues: &[f64], eps_rel: f64, scale: f64) -> Result<DetPrime> {
    let n = eigenvalues.len();
    let max = eigenvalues.iter().fold(scale.abs(), |m, &x| m.max(x.abs()));
    let cutoff = eps_rel * max * n as f64;
    let mut log_det = 0.0;
    let mut kernel = 0;
    for &x in eigenvalues {
        if x < -cutoff {
            return Err(Error::Indefinite { min_eigenvalue: x });
        }
        if x <= cutoff {
            kernel += 1;
        } else {
            log_det += x.ln();
        }
    }
    Ok(DetPrime { log_det, kernel })
}

/// Pseudodeterminant of a Hermitian matrix for the Euclidean product.
pub fn det_prime_hermitian(m: &Mat, eps_rel: f64) -> Result<DetPrime> {
    det_prime(&hermitian_eigenvalues(m), eps_rel)
}

/// `log det(op + m² q)` for a positive-semidefinite `op` and `m² > 0`.
pub fn det_massive(op: &Mat, m2: f64, q: &Mat) -> Result<f64> {
    if !(m2 > 0.0) {
        return Err(Error::InvalidArgument(format!("mass squared {m2} must be positive")));
    }
    log_det_hpd(&(op + q.scale(m2)), "massive operator")
}

/// The pieces of the Green formula in degree `q` for a boundary `L`.
#[derive(Clone, Debug)]
pub struct GreenFormula {
    d: Mat,
    dv: Mat,
    g0: Mat,
    g1: Mat,
    /// Boundary blocks of the Gram matrices, embedded back into `K`.
    l0: Mat,
    l1: Mat,
}

impl GreenFormula {
    pub fn new(
        k: &SimplicialComplex,
        l: &Subcomplex,
        w: &WeightSystem,
        bundle: &Bundle,
        a: &Connection,
        q: usize,
    ) -> Result<Self> {
        let r = bundle.rank();
        let g0 = gram(k, w, bundle, a, q)?;
        let g1 = gram(k, w, bundle, a, q + 1)?;
        let b0 = fiber_indices(l.indices(q), r);
        let b1 = if l.depth() > q + 1 { fiber_indices(l.indices(q + 1), r) } else { Vec::new() };
        Ok(Self {
            d: covariant_d(k, a, q)?,
            dv: adjoint_d(k, w, bundle, a, q)?,
            l0: embed_block(&g0, &b0),
            l1: embed_block(&g1, &b1),
            g0,
            g1,
        })
    }

    /// `|⟨dφ,ψ⟩_{K,L} − ⟨φ,d^∨ψ⟩_{K,L} − ⟨pφ,ψ_norm⟩_L|` relative to
    /// `max(1, |⟨dφ,ψ⟩_K|)`.
    pub fn residual(&self, phi: &Vector, psi: &Vector) -> f64 {
        let dphi = &self.d * phi;
        let dvpsi = &self.dv * psi;
        let lhs = form(&self.g1, &dphi, psi) - form(&self.l1, &dphi, psi);
        let inner = form(&self.g0, phi, &dvpsi) - form(&self.l0, phi, &dvpsi);
        let normal = form(&self.l0, phi, &dvpsi) - form(&self.l1, &dphi, psi);
        let scale = form(&self.g1, &dphi, psi).norm().max(1.0);
        (lhs - inner - normal).norm() / scale
    }

    /// The same defect for every pair of basis cochains at once.
    pub fn basis_residual(&self) -> f64 {
        let dt = self.d.adjoint();
        let lhs = &dt * (&self.g1 - &self.l1);
        let inner = (&self.g0 - &self.l0) * &self.dv;
        let normal = &self.l0 * &self.dv - &dt * &self.l1;
        let scale = (&dt * &self.g1).iter().fold(1.0f64, |m, z| m.max(z.norm()));
        (lhs - inner - normal).iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale
    }
}

fn embed_block(m: &Mat, idx: &[usize]) -> Mat {
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for &i in idx {
        for &j in idx {
            out[(i, j)] = m[(i, j)];
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn green_residual(
    k: &SimplicialComplex,
    l: &Subcomplex,
    w: &WeightSystem,
    bundle: &Bundle,
    a: &Connection,
    q: usize,
    phi: &Vector,
    psi: &Vector,
) -> Result<f64> {
    Ok(GreenFormula::new(k, l, w, bundle, a, q)?.residual(phi, psi))
}

/// `max |D†Q_{q+1} − Q_q d^∨|` relative to `max(1, max |D†Q_{q+1}|)`:
/// adjointness of `d^∨` on full bases.
pub fn adjointness_residual(k: &SimplicialComplex, w: &WeightSystem, bundle: &Bundle, a: &Connection, q: usize) -> Result<f64> {
    let d = covariant_d(k, a, q)?;
    let dv = adjoint_d(k, w, bundle, a, q)?;
    let lhs = d.adjoint() * gram(k, w, bundle, a, q + 1)?;
    let rhs = gram(k, w, bundle, a, q)? * dv;
    let scale = lhs.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    Ok((lhs - rhs).iter().fold(0.0f64, |m, z| m.max(z.norm())) / scale)
}

/// Green formula defect over all pairs of basis cochains.
pub fn green_basis_residual(
    k: &SimplicialComplex,
    l: &Subcomplex,
    w: &WeightSystem,
    bundle: &Bundle,
    a: &Connection,
    q: usize,
) -> Result<f64> {
    Ok(GreenFormula::new(k, l, w, bundle, a, q)?.basis_residual())
}
