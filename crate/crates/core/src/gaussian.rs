//! Gaussian scalar fields: actions, Poisson and Dirichlet-to-Neumann
//! operators, partition functions and their behaviour under gluing.
//!
//! Quadratic forms are stored so that `2·S(φ) = φ† B φ`. Gaussian integrals
//! over complex fibers run over real and imaginary parts independently,
//! which turns `det` into `det²` relative to the real case.

use std::f64::consts::PI;

use crate::bundle::{covariant_d, Bundle, Connection, Field};
use crate::error::{Error, Result};
use crate::hodge::{det_massive, det_prime, det_prime_hermitian, det_prime_scaled, dirichlet_laplacian, DirichletProblemSpace, KERNEL_TOLERANCE};
use crate::linalg::{
    fiber_indices, form, hermitian_eigenvalues, hermitian_part, inverse_hpd, log_det_hpd, pencil_eigenvalues, schur_complement, select,
    select_vector, solve_hpd, Mat, Vector, ONE,
};
use crate::metric::{block_decompose, gram, WeightSystem};
use crate::simplicial::{glue, Glued, GluingMap, SimplicialComplex, Subcomplex};

/// A complex with weights and a Hermitian bundle with connection.
#[derive(Clone, Debug)]
pub struct Model {
    pub complex: SimplicialComplex,
    pub weights: WeightSystem,
    pub bundle: Bundle,
    pub connection: Connection,
}

impl Model {
    pub fn new(complex: SimplicialComplex, weights: WeightSystem, bundle: Bundle, connection: Connection) -> Self {
        Self {
            complex,
            weights,
            bundle,
            connection,
        }
    }

    /// Trivial bundle with the trivial connection.
    pub fn trivial(complex: SimplicialComplex, weights: WeightSystem, rank: usize, field: Field) -> Result<Self> {
        let bundle = Bundle::trivial(&complex, rank, field);
        let connection = Connection::trivial(&complex, &bundle)?;
        Ok(Self::new(complex, weights, bundle, connection))
    }

    pub fn rank(&self) -> usize {
        self.bundle.rank()
    }

    pub fn field(&self) -> Field {
        self.bundle.field()
    }

    pub fn gram(&self, q: usize) -> Result<Mat> {
        gram(&self.complex, &self.weights, &self.bundle, &self.connection, q)
    }

    pub fn d(&self, q: usize) -> Result<Mat> {
        covariant_d(&self.complex, &self.connection, q)
    }

    pub fn dirichlet_space(&self, l: &Subcomplex) -> DirichletProblemSpace {
        DirichletProblemSpace::new(&self.complex, l, self.rank())
    }

    /// The matrix of `2·S_L` on 0-cochains of `sub`, in the fiber basis of
    /// `sub.indices(0)`, with weights restricted from the whole complex.
    pub fn boundary_form(&self, sub: &Subcomplex, mass: &Mass) -> Result<Mat> {
        let r = self.rank();
        let b0 = fiber_indices(sub.indices(0), r);
        let mut out = select(&mass.matrix(self)?, &b0, &b0);
        if sub.depth() > 1 && sub.count(1) > 0 {
            let b1 = fiber_indices(sub.indices(1), r);
            let d = select(&self.d(0)?, &b1, &b0);
            let g1 = select(&self.gram(1)?, &b1, &b1);
            out += d.adjoint() * g1 * d;
        }
        Ok(out)
    }
}

/// Scalar mass squared with an optional per-vertex profile.
#[derive(Clone, Debug, PartialEq)]
pub struct Mass {
    pub m2: f64,
    pub per_vertex: Option<Vec<f64>>,
}

impl Mass {
    pub fn constant(m2: f64) -> Self {
        Self { m2, per_vertex: None }
    }

    /// `m² · ½(Q M + M Q)` with `M` the per-vertex profile, or `m² Q`.
    pub fn matrix(&self, model: &Model) -> Result<Mat> {
        if self.m2 < 0.0 || !self.m2.is_finite() {
            return Err(Error::InvalidArgument(format!("mass squared {} must be non-negative", self.m2)));
        }
        let q = model.gram(0)?;
        let Some(profile) = &self.per_vertex else {
            return Ok(q.scale(self.m2));
        };
        if profile.len() != model.complex.count(0) {
            return Err(Error::ShapeMismatch {
                expected: model.complex.count(0),
                found: profile.len(),
            });
        }
        let r = model.rank();
        let m = Mat::from_fn(q.nrows(), q.ncols(), |i, j| if i == j { ONE * profile[i / r] } else { 0.0 * ONE });
        Ok(hermitian_part(&(&q * &m)).scale(self.m2))
    }
}

/// Gram and coboundary matrices behind `S_K` and `S_L`, built once.
struct ActionTerms {
    q0: Mat,
    /// `d_A` and `Q₁` when the complex has edges.
    edges: Option<(Mat, Mat)>,
    boundary_q0: Mat,
    boundary_edges: Option<(Mat, Mat)>,
}

impl ActionTerms {
    fn new(model: &Model, l: Option<&Subcomplex>) -> Result<Self> {
        let r = model.rank();
        let q0 = model.gram(0)?;
        let edges = if model.complex.dim() > 0 {
            Some((model.d(0)?, model.gram(1)?))
        } else {
            None
        };
        let (boundary_q0, boundary_edges) = match l {
            Some(l) => {
                let b0 = fiber_indices(l.indices(0), r);
                let boundary_edges = match &edges {
                    Some((d, q1)) if l.depth() > 1 && l.count(1) > 0 => {
                        let b1 = fiber_indices(l.indices(1), r);
                        Some((select(d, &b1, &b0), select(q1, &b1, &b1)))
                    }
                    _ => None,
                };
                (select(&q0, &b0, &b0), boundary_edges)
            }
            None => (Mat::zeros(0, 0), None),
        };
        Ok(Self {
            q0,
            edges,
            boundary_q0,
            boundary_edges,
        })
    }

    fn s_k(&self, m2: f64, phi: &Vector) -> f64 {
        Self::energy(&self.q0, self.edges.as_ref(), m2, phi)
    }

    fn s_l(&self, m2: f64, eta: &Vector) -> f64 {
        Self::energy(&self.boundary_q0, self.boundary_edges.as_ref(), m2, eta)
    }

    fn energy(q0: &Mat, edges: Option<&(Mat, Mat)>, m2: f64, phi: &Vector) -> f64 {
        let mut s = 0.5 * m2 * form(q0, phi, phi).re;
        if let Some((d, q1)) = edges {
            let dphi = d * phi;
            s += 0.5 * form(q1, &dphi, &dphi).re;
        }
        s
    }
}

/// `S_K(φ) = ½⟨d_Aφ, d_Aφ⟩_K + (m²/2)⟨φ, φ⟩_K`.
pub fn action_s_k(model: &Model, m2: f64, phi: &Vector) -> Result<f64> {
    Ok(ActionTerms::new(model, None)?.s_k(m2, phi))
}

/// Boundary action of `η` on `L`, with the weights of `K` restricted to `L`.
pub fn action_s_l(model: &Model, l: &Subcomplex, m2: f64, eta: &Vector) -> Result<f64> {
    Ok(ActionTerms::new(model, Some(l))?.s_l(m2, eta))
}

/// `S_{K,L}(φ) = S_K(φ) − S_L(φ|_L)`.
pub fn action_s_kl(model: &Model, l: &Subcomplex, m2: f64, phi: &Vector) -> Result<f64> {
    let terms = ActionTerms::new(model, Some(l))?;
    let eta = model.dirichlet_space(l).p(phi);
    Ok(terms.s_k(m2, phi) - terms.s_l(m2, &eta))
}

/// The quadratic form of `S_{K,L}` split into interior and boundary blocks.
#[derive(Clone, Debug)]
pub struct ActionForm {
    pub space: DirichletProblemSpace,
    pub field: Field,
    pub mass: Mass,
    /// Form of `2·S_K` on all 0-cochains.
    pub bulk: Mat,
    /// Form of `2·S_L` on boundary cochains.
    pub boundary_action: Mat,
    pub b_ii: Mat,
    pub b_ib: Mat,
    /// Boundary block of `2·S_{K,L}`: `bulk_bb − boundary_action`.
    pub b_bb: Mat,
    /// `Q` restricted to the interior and to the boundary.
    pub interior_gram: Mat,
    pub boundary_gram: Mat,
}

pub fn assemble_action(model: &Model, l: &Subcomplex, mass: &Mass) -> Result<ActionForm> {
    model.complex.check_boundary(l)?;
    let space = model.dirichlet_space(l);
    let q0 = model.gram(0)?;
    let mut bulk = mass.matrix(model)?;
    if model.complex.dim() > 0 {
        let d = model.d(0)?;
        bulk += d.adjoint() * model.gram(1)? * d;
    }
    let boundary_action = model.boundary_form(l, mass)?;
    let (i, b) = (&space.interior, &space.boundary);
    Ok(ActionForm {
        b_ii: select(&bulk, i, i),
        b_ib: select(&bulk, i, b),
        b_bb: select(&bulk, b, b) - &boundary_action,
        interior_gram: select(&q0, i, i),
        boundary_gram: select(&q0, b, b),
        field: model.field(),
        mass: mass.clone(),
        space,
        bulk,
        boundary_action,
    })
}

impl ActionForm {
    /// `S_{K,L}(φ)` from the assembled form.
    pub fn value(&self, phi: &Vector) -> f64 {
        let x = self.space.interior_part(phi);
        let eta = self.space.p(phi);
        let two_s = form(&self.b_ii, &x, &x).re + 2.0 * form(&self.b_ib, &x, &eta).re + form(&self.b_bb, &eta, &eta).re;
        0.5 * two_s
    }

    pub fn interior_dimension(&self) -> usize {
        self.space.interior.len()
    }
}

/// The interior minimizer `φ_η = −B_ii⁻¹ B_ib η`.
pub fn poisson_solve(f: &ActionForm, eta: &Vector) -> Result<Vector> {
    if eta.len() != f.space.boundary.len() {
        return Err(Error::ShapeMismatch {
            expected: f.space.boundary.len(),
            found: eta.len(),
        });
    }
    let rhs = -(&f.b_ib * eta);
    let x = solve_hpd(&f.b_ii, &Mat::from_column_slice(rhs.len(), 1, rhs.as_slice()), "interior action block")?;
    Ok(x.column(0).into_owned())
}

/// Full cochain `φ_η ⊕ η`.
pub fn harmonic_extension(f: &ActionForm, eta: &Vector) -> Result<Vector> {
    Ok(f.space.assemble(&poisson_solve(f, eta)?, eta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DnFlavor {
    /// `R^K_L` of a complex with boundary.
    Boundary,
    /// The seam operator `R_c(K_f, L₂)` of a gluing.
    Glued,
}

/// A Dirichlet-to-Neumann operator `R` and its local form `Q_L R`.
#[derive(Clone, Debug)]
pub struct DnOperator {
    pub flavor: DnFlavor,
    pub gram: Mat,
    pub local: Mat,
    pub operator: Mat,
}

impl DnOperator {
    fn new(flavor: DnFlavor, gram: Mat, local: Mat) -> Result<Self> {
        let operator = solve_hpd(&gram, &local, "boundary Gram")?;
        Ok(Self {
            flavor,
            gram,
            local,
            operator,
        })
    }
}

/// `R^K_L` with `Q_L R = B_bb − B_bi B_ii⁻¹ B_ib`.
pub fn dn_operator(f: &ActionForm) -> Result<DnOperator> {
    let local = if f.space.interior.is_empty() {
        f.b_bb.clone()
    } else {
        &f.b_bb - f.b_ib.adjoint() * solve_hpd(&f.b_ii, &f.b_ib, "interior action block")?
    };
    DnOperator::new(DnFlavor::Boundary, f.boundary_gram.clone(), hermitian_part(&local))
}

/// Matrix of `η ↦ 2·S_{K,L}(φ_η)` recovered by polarization from action
/// values at harmonic extensions of basis cochains.
pub fn dn_form_from_action(model: &Model, l: &Subcomplex, f: &ActionForm) -> Result<Mat> {
    let n = f.space.boundary.len();
    let terms = ActionTerms::new(model, Some(l))?;
    // harmonic extension is linear: extend the basis once
    let interior = if f.space.interior.is_empty() {
        Mat::zeros(0, n)
    } else {
        -solve_hpd(&f.b_ii, &f.b_ib, "interior action block")?
    };
    let extend = |eta: &Vector| f.space.assemble(&(&interior * eta), eta);
    let s = |eta: &Vector| -> Result<f64> {
        let phi = extend(eta);
        Ok(terms.s_k(f.mass.m2, &phi) - terms.s_l(f.mass.m2, &f.space.p(&phi)))
    };
    let unit = |i: usize, z| {
        let mut v = Vector::zeros(n);
        v[i] = z;
        v
    };
    let diag: Vec<f64> = (0..n).map(|i| s(&unit(i, ONE))).collect::<Result<_>>()?;
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = ONE * (2.0 * diag[i]);
        for j in 0..i {
            let re = s(&(unit(i, ONE) + unit(j, ONE)))? - diag[i] - diag[j];
            let im = if f.field == Field::Complex {
                diag[i] + diag[j] - s(&(unit(i, ONE) + unit(j, num_complex::Complex64::i())))?
            } else {
                0.0
            };
            // `re + i·im` is the (i, j) entry of the form
            m[(i, j)] = num_complex::Complex64::new(re, im);
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    Ok(m)
}

/// `log Z_{K,L}(η) = (νk/2) log 2π − S_{K,L}(φ_η) − (ν/2) log det B_ii`
/// with `k` the interior fiber dimension and `ν` the real dimension of the
/// scalars.
pub fn log_partition_function(f: &ActionForm, eta: &Vector) -> Result<f64> {
    let nu = f.field.real_dimension() as f64;
    let k = f.interior_dimension() as f64;
    let phi = harmonic_extension(f, eta)?;
    let log_det = log_det_hpd(&f.b_ii, "interior action block")?;
    Ok(0.5 * nu * k * (2.0 * PI).ln() - f.value(&phi) - 0.5 * nu * log_det)
}

/// A complex `K` with boundary `L₁ ⊔ L₂ ⊔ L₃`, the gluing map `L₁ → L₂`
/// and the glued complex `K_f`, each side carrying its own model.
#[derive(Clone, Debug)]
pub struct GluingSetup {
    pub cut: Model,
    pub glued: Model,
    pub map: GluingMap,
    pub projection: Glued,
    /// `L₃` in `K` and its image in `K_f`.
    pub l3: Subcomplex,
    pub l3_glued: Subcomplex,
}

impl GluingSetup {
    /// Weights, bundle and connection live on `K_f` and are pulled back.
    pub fn from_glued(
        k: SimplicialComplex,
        map: GluingMap,
        l3: Subcomplex,
        weights: WeightSystem,
        bundle: Bundle,
        connection: Connection,
    ) -> Result<Self> {
        let projection = glue(&k, &map)?;
        let cut_weights = weights.pullback(&k, &projection)?;
        let cut_bundle = bundle.pullback(&projection);
        let cut_connection = connection.pullback(&k, &projection)?;
        let glued = Model::new(projection.complex.clone(), weights, bundle, connection);
        Self::assemble(k, map, l3, projection, glued, cut_weights, cut_bundle, cut_connection)
    }

    /// Weights given on `K` and induced on `K_f`; bundle and connection on `K_f`.
    pub fn from_cut(
        k: SimplicialComplex,
        map: GluingMap,
        l3: Subcomplex,
        weights: WeightSystem,
        bundle: Bundle,
        connection: Connection,
    ) -> Result<Self> {
        let projection = glue(&k, &map)?;
        let glued_weights = weights.induce(&k, &map, &projection, true)?;
        let cut_bundle = bundle.pullback(&projection);
        let cut_connection = connection.pullback(&k, &projection)?;
        let glued = Model::new(projection.complex.clone(), glued_weights, bundle, connection);
        Self::assemble(k, map, l3, projection, glued, weights, cut_bundle, cut_connection)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        k: SimplicialComplex,
        map: GluingMap,
        l3: Subcomplex,
        projection: Glued,
        glued: Model,
        cut_weights: WeightSystem,
        cut_bundle: Bundle,
        cut_connection: Connection,
    ) -> Result<Self> {
        k.check_boundary(&l3)?;
        if !l3.is_disjoint(map.source()) || !l3.is_disjoint(map.target()) {
            return Err(Error::InvalidGluing("L3 meets the glued components".into()));
        }
        let l3_glued = projection.image(&l3);
        Ok(Self {
            cut: Model::new(k, cut_weights, cut_bundle, cut_connection),
            glued,
            map,
            projection,
            l3,
            l3_glued,
        })
    }

    pub fn l1(&self) -> &Subcomplex {
        self.map.source()
    }

    pub fn l2(&self) -> &Subcomplex {
        self.map.target()
    }

    /// `L = L₁ ⊔ L₂ ⊔ L₃` in `K`.
    pub fn boundary(&self) -> Subcomplex {
        self.l1().union(self.l2()).union(&self.l3)
    }

    /// Images in `K_f` of the vertices of `L₂`, in the order of `L₂`.
    pub fn seam_vertices(&self) -> Vec<usize> {
        self.l2().indices(0).iter().map(|&v| self.projection.project(0, v).0).collect()
    }

    /// `L₃` data on `K` moved to the vertex order of `L₃` in `K_f`.
    fn eta3_glued(&self, eta3: &Vector) -> Result<Vector> {
        let r = self.cut.rank();
        let src = self.l3.indices(0);
        if eta3.len() != src.len() * r {
            return Err(Error::ShapeMismatch {
                expected: src.len() * r,
                found: eta3.len(),
            });
        }
        let dst = self.l3_glued.indices(0);
        let mut out = Vector::zeros(eta3.len());
        for (x, &v) in src.iter().enumerate() {
            let y = dst.binary_search(&self.projection.project(0, v).0).expect("image of L3");
            out.rows_mut(y * r, r).copy_from(&eta3.rows(x * r, r));
        }
        Ok(out)
    }

    /// Places `(f*η₂, η₂, η₃)` into the boundary basis of `K`: returns the
    /// matrix `J` acting on `η₂` and the vector carrying `η₃`.
    fn seam_embedding(&self, space: &DirichletProblemSpace, eta3: &Vector) -> (Mat, Vector) {
        let r = self.cut.rank();
        let l2 = self.l2().indices(0);
        let pos = |v: usize| space.boundary_vertices.binary_search(&v).expect("boundary vertex");
        let mut j = Mat::zeros(space.boundary.len(), l2.len() * r);
        for (col, &v) in l2.iter().enumerate() {
            for a in 0..r {
                j[(pos(v) * r + a, col * r + a)] = ONE;
            }
        }
        for (s, t, _) in self.map.pairs(0) {
            let col = l2.binary_search(&t).expect("target vertex");
            for a in 0..r {
                j[(pos(s) * r + a, col * r + a)] = ONE;
            }
        }
        let mut e = Vector::zeros(space.boundary.len());
        for (x, &v) in self.l3.indices(0).iter().enumerate() {
            e.rows_mut(pos(v) * r, r).copy_from(&eta3.rows(x * r, r));
        }
        (j, e)
    }
}

/// The seam operators of a gluing.
#[derive(Clone, Debug)]
pub struct GluedDn {
    /// `R_c(K_f, L₂)` with its local form `Q_{L₂} R_c`.
    pub dn: DnOperator,
    /// Seam Schur complement of `Δ^loc_{K_f} + m² Q` on `K_f \ L₃`.
    pub seam_schur: Mat,
}

impl GluedDn {
    /// Relative Frobenius distance between `R^loc_c` and the seam Schur complement.
    pub fn schur_residual(&self) -> f64 {
        crate::linalg::relative_difference(&self.dn.local, &self.seam_schur, 0.0)
    }
}

pub fn dn_glued(setup: &GluingSetup, mass: &Mass) -> Result<GluedDn> {
    let cut = &setup.cut;
    let l = setup.boundary();
    let f = assemble_action(cut, &l, mass)?;
    let boundary_dn = dn_operator(&f)?;
    let (j, _) = setup.seam_embedding(&f.space, &Vector::zeros(setup.l3.count(0) * cut.rank()));
    let l2_form = cut.boundary_form(setup.l2(), mass)?;
    let local = hermitian_part(&(j.adjoint() * &boundary_dn.local * &j + l2_form));
    let l2 = fiber_indices(setup.l2().indices(0), cut.rank());
    let gram_l2 = select(&cut.gram(0)?, &l2, &l2);
    let dn = DnOperator::new(DnFlavor::Glued, gram_l2, local)?;
    Ok(GluedDn {
        seam_schur: glued_seam_schur(setup, mass)?,
        dn,
    })
}

fn glued_seam_schur(setup: &GluingSetup, mass: &Mass) -> Result<Mat> {
    let g = &setup.glued;
    let r = g.rank();
    let mut op = mass.matrix(g)?;
    let d = g.d(0)?;
    op += d.adjoint() * g.gram(1)? * d;
    let seam_vertices = setup.seam_vertices();
    let seam = fiber_indices(&seam_vertices, r);
    let rest: Vec<usize> = setup
        .l3_glued
        .complement(&g.complex, 0)
        .into_iter()
        .filter(|v| !seam_vertices.contains(v))
        .collect();
    let interior = fiber_indices(&rest, r);
    Ok(hermitian_part(&schur_complement(&op, &seam, &interior, "glued interior block")?))
}

/// Both sides of the determinant gluing identity.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterminantGluingReport {
    pub m2: f64,
    /// `log det(Δ^loc_{K_f} + m²Q) − log det(Δ^loc_K + m²Q)`, or the
    /// pseudodeterminant version at zero mass.
    pub lhs: f64,
    /// `log det R^loc_c`, or its pseudodeterminant at zero mass.
    pub rhs: f64,
    pub residual: f64,
    /// The identity in the form `det(Δ_{K_f}+m²)/det(Δ_K+m²)` against the
    /// Gram block factorization and `det R_c`.
    pub q_lhs: f64,
    pub q_rhs: f64,
    pub q_residual: f64,
    pub kernel_glued: usize,
    pub kernel_cut: usize,
    pub kernel_dn: usize,
}

impl DeterminantGluingReport {
    /// Kernels of the two Laplacians agree, so the zero-mass identity
    /// compares like with like.
    pub fn kernel_matched(&self) -> bool {
        self.kernel_glued == self.kernel_cut
    }
}

fn ratio_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).exp_m1().abs()
}

pub fn verify_determinant_gluing(setup: &GluingSetup, m2: f64) -> Result<DeterminantGluingReport> {
    let mass = Mass::constant(m2);
    let lg = dirichlet_laplacian(
        &setup.glued.complex,
        &setup.l3_glued,
        &setup.glued.weights,
        &setup.glued.bundle,
        &setup.glued.connection,
    )?;
    let lk = match dirichlet_laplacian(
        &setup.cut.complex,
        &setup.boundary(),
        &setup.cut.weights,
        &setup.cut.bundle,
        &setup.cut.connection,
    ) {
        Ok(lk) => Some(lk),
        Err(Error::EmptyInterior) => None,
        Err(e) => return Err(e),
    };
    let glued_dn = dn_glued(setup, &mass)?;
    let r_loc = &glued_dn.dn.local;
    let q_l2 = &glued_dn.dn.gram;

    // Gram blocks of K_f \ L3 split into the interior of K and the seam.
    let r = setup.glued.rank();
    let seam_vertices = setup.seam_vertices();
    let positions = |vs: &[usize]| -> Vec<usize> {
        vs.iter()
            .map(|v| lg.space.interior_vertices.binary_search(v).expect("vertex of K_f \\ L3"))
            .collect()
    };
    let interior_vertices: Vec<usize> = lg
        .space
        .interior_vertices
        .iter()
        .copied()
        .filter(|v| !seam_vertices.contains(v))
        .collect();
    let blocks = block_decompose(
        &lg.gram,
        &fiber_indices(&positions(&interior_vertices), r),
        &fiber_indices(&positions(&seam_vertices), r),
    )?;
    let log_q_l2 = log_det_hpd(q_l2, "L2 Gram")?;
    let q_schur = if blocks.interior.nrows() == 0 {
        q_l2.clone()
    } else {
        let q_cut = lk.as_ref().map(|l| l.gram.clone()).unwrap_or_else(|| Mat::zeros(0, 0));
        q_l2 - blocks.coupling.adjoint() * inverse_hpd(&q_cut, "interior Gram")? * &blocks.coupling
    };
    let log_q_factor = log_q_l2 - log_det_hpd(&hermitian_part(&q_schur), "seam Gram complement")?;

    let spectrum_g = lg.spectrum()?;
    let spectrum_k = match &lk {
        Some(l) => l.spectrum()?,
        None => Vec::new(),
    };
    if m2 > 0.0 {
        let lhs = lg.log_det_massive(m2)? - lk.as_ref().map_or(Ok(0.0), |l| det_massive(&l.local, m2, &l.gram))?;
        let rhs = log_det_hpd(r_loc, "glued Dirichlet-to-Neumann operator")?;
        let shifted = |ev: &[f64]| ev.iter().map(|x| (x + m2).ln()).sum::<f64>();
        let q_lhs = shifted(&spectrum_g) - shifted(&spectrum_k);
        let q_rhs = log_q_factor + rhs - log_q_l2;
        Ok(DeterminantGluingReport {
            m2,
            lhs,
            rhs,
            residual: ratio_residual(lhs, rhs),
            q_lhs,
            q_rhs,
            q_residual: ratio_residual(q_lhs, q_rhs),
            kernel_glued: 0,
            kernel_cut: 0,
            kernel_dn: 0,
        })
    } else {
        let local_g = hermitian_eigenvalues(&lg.local);
        let dg = det_prime(&local_g, KERNEL_TOLERANCE)?;
        let dk = match &lk {
            Some(l) => det_prime_hermitian(&l.local, KERNEL_TOLERANCE)?,
            None => det_prime(&[], KERNEL_TOLERANCE)?,
        };
        // the seam operator is measured against the glued Laplacian
        let local_scale = local_g.last().copied().unwrap_or(0.0);
        let spectral_scale = spectrum_g.last().copied().unwrap_or(0.0);
        let dr = det_prime_scaled(&hermitian_eigenvalues(r_loc), KERNEL_TOLERANCE, local_scale)?;
        let pg = det_prime(&spectrum_g, KERNEL_TOLERANCE)?;
        let pk = det_prime(&spectrum_k, KERNEL_TOLERANCE)?;
        let pr = det_prime_scaled(&pencil_eigenvalues(r_loc, q_l2, "L2 Gram")?, KERNEL_TOLERANCE, spectral_scale)?;
        let lhs = dg.log_det - dk.log_det;
        let q_lhs = pg.log_det - pk.log_det;
        let q_rhs = log_q_factor + pr.log_det;
        Ok(DeterminantGluingReport {
            m2,
            lhs,
            rhs: dr.log_det,
            residual: ratio_residual(lhs, dr.log_det),
            q_lhs,
            q_rhs,
            q_residual: ratio_residual(q_lhs, q_rhs),
            kernel_glued: dg.kernel,
            kernel_cut: dk.kernel,
            kernel_dn: dr.kernel,
        })
    }
}

/// Seam integral data: the exponent of `Z_K(f*η₂, η₂, η₃) e^{−S_{L₂}(η₂)}`
/// is `−½η₂†Mη₂ − Re(η₂†c) − ½e†Se`.
struct SeamQuadratic {
    m: Mat,
    c: Vector,
    constant: f64,
    cut: ActionForm,
}

fn seam_quadratic(setup: &GluingSetup, mass: &Mass, eta3: &Vector) -> Result<SeamQuadratic> {
    let f = assemble_action(&setup.cut, &setup.boundary(), mass)?;
    let dn = dn_operator(&f)?;
    let (j, e) = setup.seam_embedding(&f.space, eta3);
    let s = &dn.local;
    let m = hermitian_part(&(j.adjoint() * s * &j + setup.cut.boundary_form(setup.l2(), mass)?));
    let c = j.adjoint() * (s * &e);
    let constant = 0.5 * form(s, &e, &e).re;
    Ok(SeamQuadratic { m, c, constant, cut: f })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionGluingReport {
    /// `log` of the seam integral of the cut partition function.
    pub lhs: f64,
    /// `log Z_{K_f, L₃}(η₃)`.
    pub rhs: f64,
    pub residual: f64,
}

pub fn verify_partition_gluing(setup: &GluingSetup, m2: f64, eta3: &Vector) -> Result<PartitionGluingReport> {
    let mass = Mass::constant(m2);
    let sq = seam_quadratic(setup, &mass, eta3)?;
    let nu = setup.cut.field().real_dimension() as f64;
    let n = sq.m.nrows() as f64;
    let k = sq.cut.interior_dimension() as f64;
    let log_c = 0.5 * nu * k * (2.0 * PI).ln() - 0.5 * nu * log_det_hpd(&sq.cut.b_ii, "interior action block")?;
    let log_det_m = log_det_hpd(&sq.m, "seam form").map_err(|e| match e {
        Error::NotPositiveDefinite { min_eigenvalue, .. } => Error::DivergentSeam(format!(
            "seam form has eigenvalue {min_eigenvalue:e}; zero modes make the integral diverge"
        )),
        other => other,
    })?;
    let minv_c = solve_hpd(&sq.m, &Mat::from_column_slice(sq.c.len(), 1, sq.c.as_slice()), "seam form")?;
    let lhs = log_c - sq.constant
        + 0.5 * (sq.c.adjoint() * minv_c)[(0, 0)].re
        + 0.5 * nu * n * (2.0 * PI).ln()
        - 0.5 * nu * log_det_m;

    let g = &setup.glued;
    let fg = assemble_action(g, &setup.l3_glued, &mass)?;
    let eta3g = setup.eta3_glued(eta3)?;
    let phi = harmonic_extension(&fg, &eta3g)?;
    let s = action_s_kl(g, &setup.l3_glued, m2, &phi)?;
    let kg = fg.interior_dimension() as f64;
    let rhs = 0.5 * nu * kg * (2.0 * PI).ln() - s - 0.5 * nu * log_det_hpd(&fg.b_ii, "glued interior action block")?;
    Ok(PartitionGluingReport {
        lhs,
        rhs,
        residual: ratio_residual(lhs, rhs),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalActionReport {
    /// `S_{K_f,L₃}(φ_{η₃})`.
    pub lhs: f64,
    /// `min over η of S_{K,L}(φ_{η,η,η₃}) + S_{L₂}(η)`.
    pub rhs: f64,
    /// `|lhs − rhs| / max(1, |lhs|)`.
    pub residual: f64,
}

pub fn verify_critical_action_gluing(setup: &GluingSetup, m2: f64, eta3: &Vector) -> Result<CriticalActionReport> {
    let mass = Mass::constant(m2);
    let sq = seam_quadratic(setup, &mass, eta3)?;
    let minv_c = solve_hpd(&sq.m, &Mat::from_column_slice(sq.c.len(), 1, sq.c.as_slice()), "seam form")?;
    let rhs = sq.constant - 0.5 * (sq.c.adjoint() * minv_c)[(0, 0)].re;

    let g = &setup.glued;
    let fg = assemble_action(g, &setup.l3_glued, &mass)?;
    let phi = harmonic_extension(&fg, &setup.eta3_glued(eta3)?)?;
    let lhs = action_s_kl(g, &setup.l3_glued, m2, &phi)?;
    Ok(CriticalActionReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs() / lhs.abs().max(1.0),
    })
}

/// Vertex values restricted to a subcomplex, in its vertex order.
pub fn restrict_vertices(model: &Model, sub: &Subcomplex, phi: &Vector) -> Vector {
    select_vector(phi, &fiber_indices(sub.indices(0), model.rank()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{random_flat, twist_matrix};
    use crate::linalg::{c, from_real, relative_difference};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path(n: usize) -> SimplicialComplex {
        SimplicialComplex::from_facets(&(0..n).map(|i| vec![i, i + 1]).collect::<Vec<_>>()).unwrap()
    }

    fn unit_model(k: SimplicialComplex) -> Model {
        let w = WeightSystem::unit(&k);
        Model::trivial(k, w, 1, Field::Real).unwrap()
    }

    fn vector(values: &[f64]) -> Vector {
        Vector::from_iterator(values.len(), values.iter().map(|&x| c(x)))
    }

    /// Path `v0..v4` glued into a square; weights live on the square.
    fn square_setup(w: impl Fn(&SimplicialComplex) -> WeightSystem, twist: Option<f64>) -> GluingSetup {
        let k = path(4);
        let f = GluingMap::new(&k, k.spanned_by(&[0]).unwrap(), k.spanned_by(&[4]).unwrap(), &[(0, 4)]).unwrap();
        let kf = glue(&k, &f).unwrap().complex;
        let b = Bundle::trivial(&kf, 1, Field::Complex);
        let a = match twist {
            Some(theta) => Connection::holonomy_twist(&kf, &b, &twist_matrix(1, Field::Complex, theta).unwrap()).unwrap(),
            None => Connection::trivial(&kf, &b).unwrap(),
        };
        GluingSetup::from_glued(k, f, Subcomplex::empty(), w(&kf), b, a).unwrap()
    }

    /// Two paths `0..n` and `n+1..2n+1` glued end to start; `L₃` is the outer ends.
    fn interval_setup(n: usize, weights: &[f64], whitney: bool) -> GluingSetup {
        let (k, off) = path(n).disjoint_union(&path(n)).unwrap();
        let f = GluingMap::new(&k, k.spanned_by(&[off]).unwrap(), k.spanned_by(&[n]).unwrap(), &[(off, n)]).unwrap();
        let l3 = k.spanned_by(&[0]).unwrap().union(&k.spanned_by(&[off + n]).unwrap());
        let kf = glue(&k, &f).unwrap().complex;
        let w = if whitney {
            WeightSystem::whitney_1d(&kf, weights).unwrap()
        } else {
            WeightSystem::lumped_1d(&kf, weights).unwrap()
        };
        let b = Bundle::trivial(&kf, 1, Field::Real);
        let a = Connection::trivial(&kf, &b).unwrap();
        GluingSetup::from_glued(k, f, l3, w, b, a).unwrap()
    }

    #[test]
    fn three_path_anchors() {
        let m = unit_model(path(2));
        let l = m.complex.boundary().simplices;
        assert_eq!(action_s_k(&m, 0.0, &vector(&[0.0, 1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(action_s_k(&m, 0.0, &vector(&[2.0, 2.0, 2.0])).unwrap(), 0.0);
        assert_eq!(action_s_l(&m, &l, 0.0, &vector(&[3.0, -1.0])).unwrap(), 0.0);
        assert_eq!(action_s_l(&m, &l, 2.0, &vector(&[3.0, -1.0])).unwrap(), 10.0);
        let f = assemble_action(&m, &l, &Mass::constant(0.0)).unwrap();
        assert_eq!(f.b_ii, from_real(&DMatrix::from_element(1, 1, 2.0)));
        assert_eq!(f.b_ib, from_real(&DMatrix::from_row_slice(1, 2, &[-1.0, -1.0])));
        assert_eq!(f.b_bb, Mat::identity(2, 2));
        let eta = vector(&[0.3, 1.1]);
        assert_relative_eq!(poisson_solve(&f, &eta).unwrap()[0].re, 0.7, epsilon = 1e-15);
        assert_eq!(poisson_solve(&f, &vector(&[0.0, 0.0])).unwrap()[0], c(0.0));
        let dn = dn_operator(&f).unwrap();
        let half = from_real(&DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]));
        assert!(relative_difference(&dn.local, &half, 0.0) < 1e-15);
        assert_eq!(dn.operator, dn.local);
        for (e0, e2) in [(0.0, 0.0), (1.0, -1.0), (0.25, 2.0)] {
            let z = log_partition_function(&f, &vector(&[e0, e2])).unwrap();
            let expected = 0.5 * PI.ln() - (e2 - e0) * (e2 - e0) / 4.0;
            assert_relative_eq!(z, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn diagonal_weights_give_the_explicit_poisson_map() {
        let k = path(5);
        let w = WeightSystem::diagonal(&k, vec![vec![1.0, 2.0, 0.5, 3.0, 1.5, 2.0], vec![0.7, 1.3, 0.4, 2.2, 1.0]]).unwrap();
        let m = Model::trivial(k, w, 1, Field::Real).unwrap();
        let l = m.complex.boundary().simplices;
        let m2 = 0.3;
        let f = assemble_action(&m, &l, &Mass::constant(m2)).unwrap();
        let eta = vector(&[1.0, -2.0]);
        // P(Pφ) = −(PΔP + m²)⁻¹ PΔη with Δ = Q⁻¹Δ^loc
        let lap = crate::hodge::laplacian(&m.complex, &m.weights, &m.bundle, &m.connection, 0).unwrap();
        let i = &f.space.interior;
        let pdp = select(&lap.full, i, i) + Mat::identity(i.len(), i.len()).scale(m2);
        let rhs = select(&lap.full, i, &f.space.boundary) * &eta;
        let expected = -pdp.lu().solve(&rhs).unwrap();
        assert!((poisson_solve(&f, &eta).unwrap() - expected).norm() < 1e-12);
    }

    #[test]
    fn form_matches_functionals_in_two_dimensions() {
        let k = SimplicialComplex::from_facets(&[
            vec![0, 1, 4],
            vec![1, 5, 4],
            vec![1, 2, 5],
            vec![2, 3, 5],
            vec![2, 0, 3],
            vec![0, 4, 3],
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = WeightSystem::whitney_2d(&k, &vec![1.0; k.count(1)]).unwrap();
        let (b, a) = random_flat(&k, 2, Field::Complex, true, &mut rng).unwrap();
        let m = Model::new(k, w, b, a);
        let l = m.complex.boundary().components[0].clone();
        assert!(l.count(1) > 0);
        let f = assemble_action(&m, &l, &Mass::constant(0.7)).unwrap();
        for _ in 0..100 {
            let phi = Vector::from_fn(12, |_, _| num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let direct = action_s_k(&m, 0.7, &phi).unwrap() - action_s_l(&m, &l, 0.7, &f.space.p(&phi)).unwrap();
            assert!((f.value(&phi) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
        let dn = dn_operator(&f).unwrap();
        let polarized = dn_form_from_action(&m, &l, &f).unwrap();
        assert!(relative_difference(&polarized, &dn.local, 0.0) < 1e-12);
        assert!(crate::linalg::hermitian_eigenvalues(&dn.local)[0] > -1e-12);
    }

    #[test]
    fn per_vertex_mass_reduces_to_constant() {
        let m = unit_model(path(3));
        let l = m.complex.boundary().simplices;
        let flat = Mass {
            m2: 2.0,
            per_vertex: Some(vec![1.0; 4]),
        };
        let a = assemble_action(&m, &l, &flat).unwrap();
        let b = assemble_action(&m, &l, &Mass::constant(2.0)).unwrap();
        assert_eq!(a.bulk, b.bulk);
        assert!(assemble_action(&m, &l, &Mass { m2: 1.0, per_vertex: Some(vec![1.0]) }).is_err());
    }

    #[test]
    fn square_seam_operators() {
        let setup = square_setup(|k| WeightSystem::unit(k), None);
        let massless = dn_glued(&setup, &Mass::constant(0.0)).unwrap();
        assert_eq!(massless.dn.local.shape(), (1, 1));
        assert!(massless.dn.local[(0, 0)].norm() < 1e-14);
        assert!(massless.schur_residual() < 1e-12 || massless.seam_schur.norm() < 1e-14);
        let massive = dn_glued(&setup, &Mass::constant(1.0)).unwrap();
        // seam Schur complement of the circulant tridiag(−1, 3, −1) on four vertices
        let path3 = DMatrix::from_row_slice(3, 3, &[3.0, -1.0, 0.0, -1.0, 3.0, -1.0, 0.0, -1.0, 3.0]);
        let coupling = nalgebra::DVector::from_vec(vec![-1.0, 0.0, -1.0]);
        let oracle = 3.0 - coupling.dot(&path3.clone().lu().solve(&coupling).unwrap());
        assert_relative_eq!(massive.dn.local[(0, 0)].re, oracle, max_relative = 1e-14);
        assert!(massive.schur_residual() < 1e-12);
    }

    #[test]
    fn square_determinant_gluing() {
        let setup = square_setup(|k| WeightSystem::unit(k), None);
        let report = verify_determinant_gluing(&setup, 1.0).unwrap();
        assert_relative_eq!(report.lhs, (45.0f64 / 21.0).ln(), epsilon = 1e-13);
        assert!(report.residual < 1e-10);
        assert!(report.q_residual < 1e-10);
        let massless = verify_determinant_gluing(&setup, 0.0).unwrap();
        assert_eq!((massless.kernel_glued, massless.kernel_cut), (1, 0));
        assert!(!massless.kernel_matched());
        let twisted = square_setup(|k| WeightSystem::whitney_1d(k, &[0.3, 0.2, 0.4, 0.1]).unwrap(), Some(2.0));
        let report = verify_determinant_gluing(&twisted, 0.0).unwrap();
        assert!(report.kernel_matched());
        assert_eq!(report.kernel_dn, 0);
        assert!(report.residual < 1e-8, "{report:?}");
        assert!(report.q_residual < 1e-8, "{report:?}");
    }

    #[test]
    fn partition_and_action_gluing() {
        let setup = square_setup(|k| WeightSystem::whitney_1d(k, &[0.5; 4]).unwrap(), None);
        let empty = Vector::zeros(0);
        let z = verify_partition_gluing(&setup, 1.0, &empty).unwrap();
        assert!(z.residual < 1e-10, "{z:?}");
        let s = verify_critical_action_gluing(&setup, 1.0, &empty).unwrap();
        assert_eq!((s.lhs, s.rhs), (0.0, 0.0));
        assert!(matches!(
            verify_partition_gluing(&setup, 0.0, &empty),
            Err(Error::DivergentSeam(_)) | Err(Error::NotPositiveDefinite { .. })
        ));
        for whitney in [false, true] {
            let setup = interval_setup(3, &[0.3, 0.5, 0.2, 0.4, 0.6, 0.35], whitney);
            let eta3 = vector(&[0.8, -1.7]);
            let s = verify_critical_action_gluing(&setup, 1.0, &eta3).unwrap();
            assert!(s.residual < 1e-12 && s.lhs > 0.0, "{s:?}");
            let z = verify_partition_gluing(&setup, 1.0, &eta3).unwrap();
            assert!(z.residual < 1e-10, "{z:?}");
            let massless = verify_critical_action_gluing(&setup, 0.0, &eta3).unwrap();
            assert!(massless.residual < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn gauge_invariance(seed in any::<u64>(), m2 in prop::sample::select(vec![0.1, 1.0, 10.0])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = path(5);
            let f = GluingMap::new(&k, k.spanned_by(&[0]).unwrap(), k.spanned_by(&[5]).unwrap(), &[(0, 5)]).unwrap();
            let kf = glue(&k, &f).unwrap().complex;
            let lengths: Vec<f64> = (0..5).map(|_| rng.random_range(0.2..1.0)).collect();
            let w = WeightSystem::whitney_1d(&kf, &lengths).unwrap();
            let (b, a) = random_flat(&kf, 2, Field::Complex, false, &mut rng).unwrap();
            let gauged = GluingSetup::from_glued(k.clone(), f.clone(), Subcomplex::empty(), w.clone(), b, a).unwrap();
            let b0 = Bundle::trivial(&kf, 2, Field::Complex);
            let a0 = Connection::trivial(&kf, &b0).unwrap();
            let plain = GluingSetup::from_glued(k, f, Subcomplex::empty(), w, b0, a0).unwrap();
            let x = verify_determinant_gluing(&gauged, m2).unwrap();
            let y = verify_determinant_gluing(&plain, m2).unwrap();
            prop_assert!(x.residual < 1e-10 && y.residual < 1e-10);
            prop_assert!((x.lhs - y.lhs).abs() < 1e-10 && (x.rhs - y.rhs).abs() < 1e-10);
        }
    }
}
