//! Hermitian vector bundles over complexes and combinatorial connections.
//!
//! A connection stores one invertible matrix `A(τ, σ)`, mapping the fiber
//! over `σ` to the fiber over `τ`, for every face `σ` of every simplex `τ`.
//! Transports in the opposite direction are the inverses.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, is_real, solve_hpd, Mat, Vector, ONE};
use crate::metric::{gram, WeightSystem};
use crate::simplicial::{Glued, Leaf, SimplexRef, SimplicialComplex};

const UNITARY_TOLERANCE: f64 = 1e-10;
pub const FLATNESS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    /// Real dimension of the scalar field.
    pub fn real_dimension(self) -> usize {
        match self {
            Field::Real => 1,
            Field::Complex => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Bundle {
    rank: usize,
    field: Field,
    metrics: Vec<Vec<Mat>>,
}

impl Bundle {
    /// Bundle with the standard fiber metric everywhere.
    pub fn trivial(k: &SimplicialComplex, rank: usize, field: Field) -> Self {
        let id = Mat::identity(rank, rank);
        Self {
            rank,
            field,
            metrics: k.counts().iter().map(|&n| vec![id.clone(); n]).collect(),
        }
    }

    pub fn with_metrics(k: &SimplicialComplex, rank: usize, field: Field, metrics: Vec<Vec<Mat>>) -> Result<Self> {
        if metrics.len() != k.dim() + 1 {
            return Err(Error::ShapeMismatch {
                expected: k.dim() + 1,
                found: metrics.len(),
            });
        }
        for (q, level) in metrics.iter().enumerate() {
            if level.len() != k.count(q) {
                return Err(Error::ShapeMismatch {
                    expected: k.count(q),
                    found: level.len(),
                });
            }
            for (i, h) in level.iter().enumerate() {
                if h.shape() != (rank, rank) {
                    return Err(Error::ShapeMismatch {
                        expected: rank,
                        found: h.nrows(),
                    });
                }
                if field == Field::Real && !is_real(h) {
                    return Err(Error::InvalidArgument(format!("complex fiber metric on real simplex ({q}, {i})")));
                }
                if (h - h.adjoint()).norm() > 1e-12 * h.norm().max(1.0) {
                    return Err(Error::InvalidArgument(format!("fiber metric at ({q}, {i}) is not Hermitian")));
                }
                cholesky_factor(h, &format!("fiber metric at degree {q} simplex {i}"))?;
            }
        }
        Ok(Self { rank, field, metrics })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn fiber_metric(&self, q: usize, i: usize) -> &Mat {
        &self.metrics[q][i]
    }

    /// The bundle on an unglued complex whose fibers are those of their images.
    pub fn pullback(&self, glued: &Glued) -> Bundle {
        Bundle {
            rank: self.rank,
            field: self.field,
            metrics: glued
                .projection
                .iter()
                .enumerate()
                .map(|(q, p)| p.iter().map(|&(j, _)| self.metrics[q][j].clone()).collect())
                .collect(),
        }
    }
}

/// One fiber vector per q-simplex, flattened as `simplex * rank + component`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub rank: usize,
    pub values: Vector,
}

impl Cochain {
    pub fn zeros(k: &SimplicialComplex, q: usize, rank: usize) -> Self {
        Self {
            degree: q,
            rank,
            values: Vector::zeros(k.count(q) * rank),
        }
    }

    pub fn new(k: &SimplicialComplex, q: usize, rank: usize, values: Vector) -> Result<Self> {
        if values.len() != k.count(q) * rank {
            return Err(Error::ShapeMismatch {
                expected: k.count(q) * rank,
                found: values.len(),
            });
        }
        Ok(Self {
            degree: q,
            rank,
            values,
        })
    }

    pub fn fiber(&self, i: usize) -> Vector {
        self.values.rows(i * self.rank, self.rank).into_owned()
    }
}

#[derive(Clone, Debug)]
pub struct Connection {
    rank: usize,
    /// `transports[q][τ][slot]` is `A(τ, σ)` for the face in that slot.
    transports: Vec<Vec<Vec<Mat>>>,
}

impl Connection {
    /// Validates invertibility and `h`-unitarity of every transport.
    pub fn new(k: &SimplicialComplex, bundle: &Bundle, transports: Vec<Vec<Vec<Mat>>>) -> Result<Self> {
        let r = bundle.rank;
        for q in 1..=k.dim() {
            for tau in 0..k.count(q) {
                for (slot, &(sigma, _)) in k.faces(q, tau).iter().enumerate() {
                    let a = &transports[q][tau][slot];
                    let name = format!("A({}, {})", k.simplex(q, tau), k.simplex(q - 1, sigma));
                    if a.shape() != (r, r) {
                        return Err(Error::ShapeMismatch {
                            expected: r,
                            found: a.nrows(),
                        });
                    }
                    if bundle.field == Field::Real && !is_real(a) {
                        return Err(Error::NotUnitary(format!("{name} is complex on a real bundle")));
                    }
                    if a.clone().try_inverse().is_none() {
                        return Err(Error::Singular(name));
                    }
                    let h_tau = bundle.fiber_metric(q, tau);
                    let h_sigma = bundle.fiber_metric(q - 1, sigma);
                    let defect = (a.adjoint() * h_tau * a - h_sigma).norm();
                    if defect > UNITARY_TOLERANCE * h_sigma.norm().max(1.0) {
                        return Err(Error::NotUnitary(name));
                    }
                }
            }
        }
        Ok(Self { rank: r, transports })
    }

    pub fn from_fn(
        k: &SimplicialComplex,
        bundle: &Bundle,
        mut f: impl FnMut(usize, usize, usize) -> Mat,
    ) -> Result<Self> {
        let mut transports = vec![Vec::new()];
        for q in 1..=k.dim() {
            transports.push(
                (0..k.count(q))
                    .map(|tau| k.faces(q, tau).iter().map(|&(sigma, _)| f(q, tau, sigma)).collect())
                    .collect(),
            );
        }
        Self::new(k, bundle, transports)
    }

    pub fn trivial(k: &SimplicialComplex, bundle: &Bundle) -> Result<Self> {
        let id = Mat::identity(bundle.rank, bundle.rank);
        Self::from_fn(k, bundle, |_, _, _| id.clone())
    }

    /// `A(τ, σ) = g_τ g_σ⁻¹`, flat by construction.
    pub fn pure_gauge(k: &SimplicialComplex, bundle: &Bundle, gauges: &[Vec<Mat>]) -> Result<Self> {
        let mut inverses: Vec<Vec<Mat>> = Vec::new();
        for (q, level) in gauges.iter().enumerate() {
            inverses.push(
                level
                    .iter()
                    .enumerate()
                    .map(|(i, g)| {
                        g.clone()
                            .try_inverse()
                            .ok_or_else(|| Error::Singular(format!("gauge on {}", k.simplex(q, i))))
                    })
                    .collect::<Result<_>>()?,
            );
        }
        Self::from_fn(k, bundle, |q, tau, sigma| &gauges[q][tau] * &inverses[q - 1][sigma])
    }

    /// Identity transports except `A(e, a) = U` on the first edge `e = [a, b]`
    /// of a cycle, so the loop holonomy is `U`.
    pub fn holonomy_twist(k: &SimplicialComplex, bundle: &Bundle, u: &Mat) -> Result<Self> {
        if !k.is_cycle() {
            return Err(Error::NotACycle);
        }
        let id = Mat::identity(bundle.rank, bundle.rank);
        Self::from_fn(k, bundle, |_, tau, sigma| {
            if tau == 0 && k.faces(1, 0)[0].0 == sigma {
                u.clone()
            } else {
                id.clone()
            }
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `A(τ, σ)` for the face in the given slot of `τ`.
    pub fn down(&self, q: usize, tau: usize, slot: usize) -> &Mat {
        &self.transports[q][tau][slot]
    }

    /// `A(τ, σ)` for a face `σ` of `τ` (degree `q` of `τ`).
    pub fn face_transport(&self, k: &SimplicialComplex, q: usize, tau: usize, sigma: usize) -> Result<&Mat> {
        let slot = k
            .faces(q, tau)
            .iter()
            .position(|f| f.0 == sigma)
            .ok_or(Error::NoTransportPath {
                degree: q,
                a: tau,
                b: sigma,
            })?;
        Ok(&self.transports[q][tau][slot])
    }

    /// Transport along one D(K) edge, from `from` to `to`.
    pub fn step(&self, k: &SimplicialComplex, to: SimplexRef, from: SimplexRef) -> Result<Mat> {
        if to.degree == from.degree + 1 {
            Ok(self.face_transport(k, to.degree, to.index, from.index)?.clone())
        } else if from.degree == to.degree + 1 {
            invert(self.face_transport(k, from.degree, from.index, to.index)?)
        } else {
            Err(Error::NoTransportPath {
                degree: to.degree,
                a: to.index,
                b: from.index,
            })
        }
    }

    /// Composite transport along a D(K) edge path, from `path[0]` to the end.
    pub fn path(&self, k: &SimplicialComplex, path: &[SimplexRef]) -> Result<Mat> {
        let mut acc = Mat::identity(self.rank, self.rank);
        for w in path.windows(2) {
            acc = self.step(k, w[1], w[0])? * acc;
        }
        Ok(acc)
    }

    /// `A(σ_a, σ_b)` between same-degree simplices through their common cofacet.
    pub fn pair_transport(&self, k: &SimplicialComplex, q: usize, a: usize, b: usize) -> Result<Mat> {
        if a == b {
            return Ok(Mat::identity(self.rank, self.rank));
        }
        let eta = k.common_cofacet(q, a, b).ok_or(Error::NoTransportPath { degree: q, a, b })?;
        let up_a = self.face_transport(k, q + 1, eta, a)?;
        let up_b = self.face_transport(k, q + 1, eta, b)?;
        Ok(invert(up_a)? * up_b)
    }

    /// Connection on the unglued complex with transports of the images.
    pub fn pullback(&self, cut: &SimplicialComplex, glued: &Glued) -> Result<Connection> {
        let mut transports = vec![Vec::new()];
        for q in 1..=cut.dim() {
            let mut level = Vec::with_capacity(cut.count(q));
            for tau in 0..cut.count(q) {
                let image = glued.project(q, tau).0;
                let row = cut
                    .faces(q, tau)
                    .iter()
                    .map(|&(sigma, _)| {
                        self.face_transport(&glued.complex, q, image, glued.project(q - 1, sigma).0)
                            .cloned()
                    })
                    .collect::<Result<Vec<_>>>()?;
                level.push(row);
            }
            transports.push(level);
        }
        Ok(Connection {
            rank: self.rank,
            transports,
        })
    }

    /// Copy with `A(τ, σ)` replaced by `m · A(τ, σ)` in one slot.
    pub fn perturbed(&self, q: usize, tau: usize, slot: usize, m: &Mat) -> Connection {
        let mut out = self.clone();
        out.transports[q][tau][slot] = m * &self.transports[q][tau][slot];
        out
    }
}

fn invert(m: &Mat) -> Result<Mat> {
    m.clone().try_inverse().ok_or_else(|| Error::Singular("transport".into()))
}

/// `F = A(η,τ+)A(τ+,σ) − A(η,τ−)A(τ−,σ)` on a leaf.
pub fn curvature(k: &SimplicialComplex, a: &Connection, leaf: &Leaf) -> Result<Mat> {
    let q = leaf.degree;
    let route = |tau| -> Result<Mat> {
        Ok(a.face_transport(k, q + 2, leaf.top, tau)? * a.face_transport(k, q + 1, tau, leaf.base)?)
    };
    Ok(route(leaf.plus)? - route(leaf.minus)?)
}

/// Largest curvature entry in absolute value over all leaves.
pub fn max_curvature(k: &SimplicialComplex, a: &Connection) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for leaf in k.leaves() {
        worst = curvature(k, a, &leaf)?.iter().map(|z| z.norm()).fold(worst, f64::max);
    }
    Ok(worst)
}

pub fn is_flat(k: &SimplicialComplex, a: &Connection) -> Result<bool> {
    Ok(max_curvature(k, a)? <= FLATNESS_TOLERANCE)
}

/// Matrix of `d_A` from q-cochains to (q+1)-cochains.
pub fn covariant_d(k: &SimplicialComplex, a: &Connection, q: usize) -> Result<Mat> {
    if q >= k.dim() {
        return Err(Error::DegreeOutOfRange {
            degree: q,
            max: k.dim().saturating_sub(1),
        });
    }
    let r = a.rank;
    let mut d = Mat::zeros(k.count(q + 1) * r, k.count(q) * r);
    for tau in 0..k.count(q + 1) {
        for (slot, &(sigma, sign)) in k.faces(q + 1, tau).iter().enumerate() {
            let block = a.down(q + 1, tau, slot) * Complex64::from(sign as f64);
            d.view_mut((tau * r, sigma * r), (r, r)).copy_from(&block);
        }
    }
    Ok(d)
}

pub fn apply_d(k: &SimplicialComplex, a: &Connection, phi: &Cochain) -> Result<Cochain> {
    let d = covariant_d(k, a, phi.degree)?;
    Ok(Cochain {
        degree: phi.degree + 1,
        rank: phi.rank,
        values: d * &phi.values,
    })
}

/// Matrix of `d_A^∨ = Q_q⁻¹ D† Q_{q+1}` from (q+1)-cochains to q-cochains.
pub fn adjoint_d(
    k: &SimplicialComplex,
    w: &WeightSystem,
    bundle: &Bundle,
    a: &Connection,
    q: usize,
) -> Result<Mat> {
    let d = covariant_d(k, a, q)?;
    let q0 = gram(k, w, bundle, a, q)?;
    let q1 = gram(k, w, bundle, a, q + 1)?;
    solve_hpd(&q0, &(d.adjoint() * q1), &format!("degree-{q} Gram"))
}

/// Haar-like random unitary (or orthogonal, for a real field) matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize, field: Field) -> Mat {
    let g = random_gaussian(rng, n, field);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_diagonal(&r.diagonal().map(|z| if z.norm() > 0.0 { z / z.norm() } else { ONE }));
    q * phases
}

fn random_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, field: Field) -> Mat {
    Mat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = match field {
            Field::Real => 0.0,
            Field::Complex => rng.sample(StandardNormal),
        };
        Complex64::new(re, im)
    })
}

/// Random fiber metric `G†G` with `G` a bounded perturbation of the identity.
pub fn random_fiber_frame<R: Rng + ?Sized>(rng: &mut R, n: usize, field: Field) -> Mat {
    Mat::identity(n, n) + random_gaussian(rng, n, field).scale(0.25 / (n as f64).sqrt())
}

/// A random flat Hermitian connection in pure-gauge form. With `metrics`
/// the fiber metrics are random as well and the gauges `g = G⁻¹U` keep
/// transports unitary for `H = G†G`.
pub fn random_flat<R: Rng + ?Sized>(
    k: &SimplicialComplex,
    rank: usize,
    field: Field,
    metrics: bool,
    rng: &mut R,
) -> Result<(Bundle, Connection)> {
    let mut hs = Vec::new();
    let mut gauges = Vec::new();
    for q in 0..=k.dim() {
        let mut h_level = Vec::new();
        let mut g_level = Vec::new();
        for _ in 0..k.count(q) {
            let u = random_unitary(rng, rank, field);
            if metrics {
                let frame = random_fiber_frame(rng, rank, field);
                let inv = frame.clone().try_inverse().ok_or_else(|| Error::Singular("fiber frame".into()))?;
                h_level.push(frame.adjoint() * &frame);
                g_level.push(inv * u);
            } else {
                h_level.push(Mat::identity(rank, rank));
                g_level.push(u);
            }
        }
        hs.push(h_level);
        gauges.push(g_level);
    }
    let bundle = Bundle::with_metrics(k, rank, field, hs)?;
    let conn = Connection::pure_gauge(k, &bundle, &gauges)?;
    Ok((bundle, conn))
}

/// Rotation by `theta` in the first two fiber coordinates; a phase for rank one.
pub fn twist_matrix(rank: usize, field: Field, theta: f64) -> Result<Mat> {
    let mut u = Mat::identity(rank, rank);
    match (field, rank) {
        (Field::Complex, _) => u[(0, 0)] = Complex64::from_polar(1.0, theta),
        (Field::Real, 1) if (theta - std::f64::consts::PI).abs() < 1e-15 => u[(0, 0)] = -ONE,
        (Field::Real, 1) => {
            return Err(Error::InvalidArgument(
                "a real line bundle only admits the holonomy -1".into(),
            ))
        }
        (Field::Real, _) => {
            let (s, c) = theta.sin_cos();
            u[(0, 0)] = Complex64::from(c);
            u[(0, 1)] = Complex64::from(-s);
            u[(1, 0)] = Complex64::from(s);
            u[(1, 1)] = Complex64::from(c);
        }
    }
    Ok(u)
}
