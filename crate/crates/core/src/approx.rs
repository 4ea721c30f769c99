//! Whitney and de Rham maps on piecewise flat complexes, and the mesh
//! refinement experiments for determinant ratios.
//!
//! Continuum reference values are classical closed forms: the
//! zeta-regularized determinant of the Laplacian on a circle of
//! circumference `L` is `L²`, and on an interval of length `L` with
//! Dirichlet conditions it is `2L`.

use gauss_quad::GaussLegendre;
use nalgebra::{Cholesky, DMatrix, DVector};
use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::linalg::{from_real, log_det_hpd, pencil_eigenvalues, schur_complement};
use crate::metric::{FlatTriangle, WeightPreset, WeightSystem};
use crate::simplicial::{
    closed_double, glue, permutation_sign, standard_subdivision, GluingMap, SimplicialComplex, Subdivision, VertexId,
};

/// `det_ζ` of the Laplacian on a circle of circumference `l`.
pub fn zeta_det_circle(l: f64) -> f64 {
    l * l
}

/// `det_ζ` of the Dirichlet Laplacian on an interval of length `l`.
pub fn zeta_det_interval(l: f64) -> f64 {
    2.0 * l
}

/// Edge lengths making every simplex flat.
#[derive(Clone, Debug)]
pub struct PiecewiseFlatGeometry {
    pub complex: SimplicialComplex,
    pub lengths: Vec<f64>,
}

impl PiecewiseFlatGeometry {
    pub fn new(complex: SimplicialComplex, lengths: Vec<f64>) -> Result<Self> {
        if complex.dim() == 0 || complex.dim() > 2 {
            return Err(Error::Unsupported(format!("{}-dimensional geometry", complex.dim())));
        }
        if lengths.len() != complex.count(1) {
            return Err(Error::ShapeMismatch {
                expected: complex.count(1),
                found: lengths.len(),
            });
        }
        for (e, &h) in lengths.iter().enumerate() {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::NonPositiveWeight {
                    degree: 1,
                    index: e,
                    value: h,
                });
            }
        }
        if complex.dim() == 2 {
            for t in 0..complex.count(2) {
                FlatTriangle::new(&complex, t, &lengths)?;
            }
        }
        Ok(Self { complex, lengths })
    }

    pub fn uniform(complex: SimplicialComplex, h: f64) -> Result<Self> {
        let n = complex.count(1);
        Self::new(complex, vec![h; n])
    }

    /// The mesh size: the longest edge.
    pub fn mesh(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }

    pub fn weights(&self, preset: WeightPreset) -> Result<WeightSystem> {
        preset.build(&self.complex, &self.lengths)
    }

    /// Standard subdivision with every new edge half as long as the parallel
    /// (or containing) old edge.
    pub fn subdivide(&self) -> Result<(Subdivision, PiecewiseFlatGeometry)> {
        let sub = standard_subdivision(&self.complex)?;
        let k = &self.complex;
        let origin = |label: VertexId| -> Option<usize> { sub.midpoints.iter().position(|&m| m == label) };
        let edge_of = |a: VertexId, b: VertexId| k.find(&[a, b]).map(|r| self.lengths[r.index]);
        let mut lengths = Vec::with_capacity(sub.complex.count(1));
        for e in sub.complex.simplices(1) {
            let (a, b) = (e.vertices()[0], e.vertices()[1]);
            let h = match (origin(a), origin(b)) {
                (None, None) => unreachable!("old vertices are never adjacent after subdivision"),
                (Some(m), None) | (None, Some(m)) => self.lengths[m] / 2.0,
                (Some(m1), Some(m2)) => {
                    // midpoints of two sides of a triangle: half the third side
                    let s1 = k.simplex(1, m1).key();
                    let s2 = k.simplex(1, m2).key();
                    let shared = s1.iter().find(|v| s2.contains(v)).expect("sides of one triangle");
                    let p = *s1.iter().find(|v| *v != shared).expect("edge");
                    let q = *s2.iter().find(|v| *v != shared).expect("edge");
                    edge_of(p, q).expect("third side") / 2.0
                }
            };
            lengths.push(h);
        }
        let geometry = PiecewiseFlatGeometry::new(sub.complex.clone(), lengths)?;
        Ok((sub, geometry))
    }
}

/// One level of a refinement sequence.
#[derive(Clone, Debug)]
pub struct RefinementLevel {
    pub geometry: PiecewiseFlatGeometry,
    pub weights: WeightSystem,
}

/// Successive standard subdivisions with halved lengths.
#[derive(Clone, Debug)]
pub struct RefinementSequence {
    pub preset: WeightPreset,
    pub levels: Vec<RefinementLevel>,
}

impl RefinementSequence {
    pub fn new(geometry: PiecewiseFlatGeometry, preset: WeightPreset, steps: usize) -> Result<Self> {
        let mut levels = Vec::with_capacity(steps + 1);
        let mut current = geometry;
        for step in 0..=steps {
            let weights = current.weights(preset)?;
            let next = if step < steps { Some(current.subdivide()?.1) } else { None };
            levels.push(RefinementLevel {
                geometry: current,
                weights,
            });
            match next {
                Some(g) => current = g,
                None => break,
            }
        }
        Ok(Self { preset, levels })
    }
}

/// `sign · μ_mu dμ_{d[0]} ∧ … ∧ dμ_{d[q-1]}`, vertices by complex index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WhitneyTerm {
    pub sign: i8,
    pub mu: usize,
    pub d: Vec<usize>,
}

/// The Whitney form of a q-simplex: `q! Σ_k (−1)^k μ_{i_k} dμ_{i_0} ∧ … ∧ dμ_{i_q}`
/// with the `k`-th differential omitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WhitneyForm {
    pub degree: usize,
    /// Vertex indices in the stored orientation.
    pub vertices: Vec<usize>,
    pub factor: i64,
    pub terms: Vec<WhitneyTerm>,
    /// Top simplices whose closure contains the simplex.
    pub support: Vec<usize>,
}

pub fn whitney_coefficients(k: &SimplicialComplex, q: usize, tau: usize) -> Result<WhitneyForm> {
    if k.dim() > 2 {
        return Err(Error::Unsupported(format!("Whitney forms on a {}-complex", k.dim())));
    }
    if q > k.dim() {
        return Err(Error::DegreeOutOfRange { degree: q, max: k.dim() });
    }
    let vertices: Vec<usize> = k
        .simplex(q, tau)
        .vertices()
        .iter()
        .map(|&v| k.vertex(v).expect("vertex"))
        .collect();
    let terms = (0..=q)
        .map(|i| WhitneyTerm {
            sign: if i % 2 == 0 { 1 } else { -1 },
            mu: vertices[i],
            d: vertices.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect(),
        })
        .collect();
    let labels = k.simplex(q, tau).key();
    let support = (0..k.count(k.dim()))
        .filter(|&t| {
            let top = k.simplex(k.dim(), t).vertices();
            labels.iter().all(|v| top.contains(v))
        })
        .collect();
    Ok(WhitneyForm {
        degree: q,
        vertices,
        factor: (1..=q as i64).product(),
        terms,
        support,
    })
}

/// `∫_{Δ_q} Π μ_i^{α_i} = Π α_i! / (|α| + q)!` over the standard simplex
/// in barycentric coordinates.
pub fn simplex_monomial_integral(alpha: &[u32]) -> Rational64 {
    let q = alpha.len() as i64 - 1;
    let fact = |n: i64| (1..=n).product::<i64>();
    let num: i64 = alpha.iter().map(|&a| fact(a as i64)).product();
    let total: i64 = alpha.iter().map(|&a| a as i64).sum();
    Rational64::new(num, fact(total + q))
}

/// Exact `∫_σ W(τ*)` over the oriented simplex `σ`.
pub fn integrate_whitney(k: &SimplicialComplex, w: &WhitneyForm, sigma: usize) -> Rational64 {
    let q = w.degree;
    let s: Vec<usize> = k
        .simplex(q, sigma)
        .vertices()
        .iter()
        .map(|&v| k.vertex(v).expect("vertex"))
        .collect();
    let position = |v: usize| s.iter().position(|&x| x == v);
    let mut total = Rational64::from_integer(0);
    for term in &w.terms {
        let Some(mu) = position(term.mu) else { continue };
        let Some(ds) = term.d.iter().map(|&v| position(v)).collect::<Option<Vec<_>>>() else {
            continue;
        };
        // μ_{s_0} = 1 − Σt, μ_{s_i} = t_i: each dμ is a row of coefficients in dt
        let rows: Vec<Vec<i64>> = ds
            .iter()
            .map(|&p| (1..=q).map(|i| if p == 0 { -1 } else { i64::from(p == i) }).collect())
            .collect();
        let det = integer_det(&rows);
        if det == 0 {
            continue;
        }
        let mut alpha = vec![0u32; q + 1];
        alpha[mu] = 1;
        total += Rational64::from_integer(term.sign as i64 * det) * simplex_monomial_integral(&alpha);
    }
    total * Rational64::from_integer(w.factor)
}

fn integer_det(rows: &[Vec<i64>]) -> i64 {
    let n = rows.len();
    if n == 0 {
        return 1;
    }
    let mut total = 0;
    let perm: Vec<usize> = (0..n).collect();
    permutations(&perm, &mut |p| {
        let sign = permutation_sign(&perm, p) as i64;
        total += sign * (0..n).map(|i| rows[i][p[i]]).product::<i64>();
    });
    total
}

fn permutations(items: &[usize], f: &mut impl FnMut(&[usize])) {
    fn go(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            go(v, k + 1, f);
            v.swap(k, i);
        }
    }
    go(&mut items.to_vec(), 0, f);
}

/// The matrix `(∫_σ W(τ*))_{σ,τ}` in exact arithmetic.
pub fn derham_of_whitney(k: &SimplicialComplex, q: usize) -> Result<DMatrix<Rational64>> {
    let forms = (0..k.count(q)).map(|t| whitney_coefficients(k, q, t)).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(k.count(q), k.count(q), |s, t| integrate_whitney(k, &forms[t], s)))
}

/// Vertex positions of an embedded complex.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub points: Vec<Vec<f64>>,
}

impl Embedding {
    pub fn new(k: &SimplicialComplex, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != k.count(0) {
            return Err(Error::ShapeMismatch {
                expected: k.count(0),
                found: points.len(),
            });
        }
        let n = points.first().map_or(0, Vec::len);
        if n == 0 || points.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidArgument("points must share one positive dimension".into()));
        }
        Ok(Self { points })
    }

    pub fn ambient_dimension(&self) -> usize {
        self.points[0].len()
    }

    fn simplex_points(&self, k: &SimplicialComplex, q: usize, i: usize) -> Vec<&[f64]> {
        k.simplex(q, i)
            .vertices()
            .iter()
            .map(|&v| self.points[k.vertex(v).expect("vertex")].as_slice())
            .collect()
    }

    /// Barycentric coordinates of `x` in a top simplex and their gradients
    /// (rows), in the order of the stored vertices. Requires the ambient
    /// dimension to equal the complex dimension.
    pub fn barycentric(&self, k: &SimplicialComplex, top: usize, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let n = k.dim();
        if self.ambient_dimension() != n {
            return Err(Error::Unsupported("barycentrics need a full-dimensional embedding".into()));
        }
        let p = self.simplex_points(k, n, top);
        let m = DMatrix::from_fn(n + 1, n + 1, |r, c| if c < n { p[r][c] } else { 1.0 });
        let inv = m.try_inverse().ok_or_else(|| Error::Singular("degenerate simplex".into()))?;
        // μ = [x, 1] · inv; gradient of μ_j is column j of the first n rows
        let row = DVector::from_fn(n + 1, |c, _| if c < n { x[c] } else { 1.0 });
        let mu: Vec<f64> = (0..=n).map(|j| (0..=n).map(|r| row[r] * inv[(r, j)]).sum()).collect();
        let grads = DMatrix::from_fn(n + 1, n, |j, c| inv[(c, j)]);
        Ok((mu, grads))
    }

    /// Components of `W(τ*)` at `x` inside `top`: the value for `q = 0`,
    /// the covector for `q = 1`, the `dx∧dy` coefficient for `q = 2`.
    pub fn whitney_value(&self, k: &SimplicialComplex, w: &WhitneyForm, top: usize, x: &[f64]) -> Result<Vec<f64>> {
        let (mu, grads) = self.barycentric(k, top, x)?;
        let tv: Vec<usize> = k
            .simplex(k.dim(), top)
            .vertices()
            .iter()
            .map(|&v| k.vertex(v).expect("vertex"))
            .collect();
        let slot = |v: usize| tv.iter().position(|&t| t == v);
        let n = k.dim();
        let size = match w.degree {
            0 => 1,
            1 => n,
            _ => 1,
        };
        let mut out = vec![0.0; size];
        for term in &w.terms {
            let Some(m) = slot(term.mu) else { continue };
            let Some(ds) = term.d.iter().map(|&v| slot(v)).collect::<Option<Vec<_>>>() else {
                continue;
            };
            let c = term.sign as f64 * w.factor as f64 * mu[m];
            match w.degree {
                0 => out[0] += c,
                1 => {
                    for (x, o) in out.iter_mut().enumerate() {
                        *o += c * grads[(ds[0], x)];
                    }
                }
                _ => {
                    let (a, b) = (ds[0], ds[1]);
                    out[0] += c * (grads[(a, 0)] * grads[(b, 1)] - grads[(a, 1)] * grads[(b, 0)]);
                }
            }
        }
        Ok(out)
    }
}

/// Numerical de Rham map of a continuum form given pointwise: the value at
/// each vertex for `q = 0`, line integrals of a covector field for `q = 1`,
/// and oriented integrals of a `dx∧dy` density for `q = 2`.
pub fn derham_numeric(
    k: &SimplicialComplex,
    embedding: &Embedding,
    q: usize,
    order: usize,
    f: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Vec<f64>> {
    if q > k.dim() {
        return Err(Error::DegreeOutOfRange { degree: q, max: k.dim() });
    }
    let rule = GaussLegendre::new(order.max(2)).map_err(|e| Error::Quadrature(e.to_string()))?;
    let n = embedding.ambient_dimension();
    let mut out = Vec::with_capacity(k.count(q));
    for i in 0..k.count(q) {
        let p = embedding.simplex_points(k, q, i);
        let value = match q {
            0 => f(p[0])[0],
            1 => {
                let dir: Vec<f64> = (0..n).map(|c| p[1][c] - p[0][c]).collect();
                rule.integrate(0.0, 1.0, |t| {
                    let x: Vec<f64> = (0..n).map(|c| p[0][c] + t * dir[c]).collect();
                    f(&x).iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>()
                })
            }
            2 => {
                if n != 2 {
                    return Err(Error::Unsupported("2-forms need a planar embedding".into()));
                }
                let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
                let e2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
                let jac = e1[0] * e2[1] - e1[1] * e2[0];
                // collapsed coordinates t1 = u(1 − v), t2 = uv with Jacobian u
                jac * rule.integrate(0.0, 1.0, |u| {
                    rule.integrate(0.0, 1.0, |v| {
                        let (t1, t2) = (u * (1.0 - v), u * v);
                        let x = [p[0][0] + t1 * e1[0] + t2 * e2[0], p[0][1] + t1 * e1[1] + t2 * e2[1]];
                        u * f(&x)[0]
                    })
                })
            }
            _ => return Err(Error::Unsupported(format!("degree {q}"))),
        };
        if !value.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integral over simplex {i}")));
        }
        out.push(value);
    }
    Ok(out)
}

/// Gram matrix of Whitney forms, shared with the metric module.
pub fn whitney_gram(geometry: &PiecewiseFlatGeometry, q: usize) -> Result<DMatrix<f64>> {
    if q > geometry.complex.dim() {
        return Err(Error::DegreeOutOfRange {
            degree: q,
            max: geometry.complex.dim(),
        });
    }
    Ok(geometry.weights(WeightPreset::Whitney)?.scalar_matrix(q))
}

/// An interval of length `lambda` cut into `n` equal edges, its two ends
/// glued into a circle, and its closed double.
#[derive(Clone, Debug)]
pub struct CircleDoubling {
    pub lambda: f64,
    pub n: usize,
    pub interval: SimplicialComplex,
    pub circle: SimplicialComplex,
    pub double: SimplicialComplex,
}

impl CircleDoubling {
    pub fn new(lambda: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("{n} edges cannot close up into a circle")));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("length {lambda} must be positive")));
        }
        let interval = SimplicialComplex::from_facets(&(0..n).map(|i| vec![i, i + 1]).collect::<Vec<_>>())?;
        let map = GluingMap::new(&interval, interval.spanned_by(&[0])?, interval.spanned_by(&[n])?, &[(0, n)])?;
        let circle = glue(&interval, &map)?.complex;
        let double = closed_double(&interval, &interval.boundary().simplices)?.complex;
        Ok(Self {
            lambda,
            n,
            interval,
            circle,
            double,
        })
    }

    pub fn h(&self) -> f64 {
        self.lambda / self.n as f64
    }
}

/// Spectrum of the degree-0 Laplacian of the trivial real line bundle,
/// assembled in real arithmetic as the pencil `(Dᵗ Q₁ D, Q₀)`.
pub fn scalar_spectrum(k: &SimplicialComplex, w: &WeightSystem) -> Result<Vec<f64>> {
    let d = k.boundary_matrix(1)?.map(f64::from).transpose();
    let local = d.transpose() * w.scalar_matrix(1) * &d;
    pencil_eigenvalues(&from_real(&local), &from_real(&w.scalar_matrix(0)), "vertex Gram")
}

/// `log det′` of the same Laplacian on a connected complex. The kernel is
/// the constants `u`, so the adjugate of `A` is `det′A · uuᵗ/N` and
/// `det′(Q₀⁻¹A) = det A₀₀ · uᵗQ₀u / det Q₀` with `A₀₀` the matrix with the
/// first vertex struck out. Both factors are diagonally dominant, so their
/// Cholesky factors are accurate entrywise however small the spectral gap.
pub fn scalar_log_det_prime(k: &SimplicialComplex, w: &WeightSystem) -> Result<f64> {
    let (a, q) = scalar_pencil(k, w)?;
    reduced_log_det_prime(k, a, q)
}

fn scalar_pencil(k: &SimplicialComplex, w: &WeightSystem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = k.boundary_matrix(1)?.map(f64::from).transpose();
    Ok((d.transpose() * w.scalar_matrix(1) * &d, w.scalar_matrix(0)))
}

fn reduced_log_det_prime(k: &SimplicialComplex, a: DMatrix<f64>, q: DMatrix<f64>) -> Result<f64> {
    if !k.is_connected() {
        return Err(Error::InvalidArgument("the reduced determinant needs a connected complex".into()));
    }
    let log_det = |m: DMatrix<f64>, what: &str| -> Result<f64> {
        let chol = Cholesky::new(m).ok_or_else(|| Error::NotPositiveDefinite {
            what: what.into(),
            min_eigenvalue: f64::NAN,
        })?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
    };
    let utqu = q.sum();
    let reduced = a.remove_row(0).remove_column(0);
    Ok(log_det(reduced, "reduced Laplacian")? + utqu.ln() - log_det(q, "vertex Gram")?)
}

/// `log det′` at uniform length `h`, and the same with the mesh scale
/// removed: `(hA, Q/h)` has the spectrum of `(A, Q)` times `h²`, so the
/// first value is the second minus `2(N−1) log h`.
fn log_det_prime_uniform(k: &SimplicialComplex, preset: WeightPreset, h: f64) -> Result<(f64, f64)> {
    let w = preset.build(k, &vec![h; k.count(1)])?;
    let (a, q) = scalar_pencil(k, &w)?;
    let unit = reduced_log_det_prime(k, a * h, q / h)?;
    Ok((unit - 2.0 * (k.count(0) - 1) as f64 * h.ln(), unit))
}

/// One row of the determinant ratio experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioRow {
    pub n: usize,
    pub h: f64,
    pub log_det_circle: f64,
    pub log_det_double: f64,
    /// `(det′Δ_{K_f})² / det′Δ_{K̃}`.
    pub ratio: f64,
    pub target: f64,
    pub error: f64,
}

pub fn determinant_ratio(preset: WeightPreset, lambda: f64, n: usize) -> Result<RatioRow> {
    let c = CircleDoubling::new(lambda, n)?;
    let h = c.h();
    let (circle, circle_unit) = log_det_prime_uniform(&c.circle, preset, h)?;
    let (double, double_unit) = log_det_prime_uniform(&c.double, preset, h)?;
    // the double has twice the vertices, so the scales cancel but for h²
    let ratio = (2.0 * circle_unit - double_unit + 2.0 * h.ln()).exp();
    // det_ζ(S¹_Λ)² / det_ζ(S¹_{2Λ}) = Λ⁴ / 4Λ²
    let target = zeta_det_circle(lambda).powi(2) / zeta_det_circle(2.0 * lambda);
    Ok(RatioRow {
        n,
        h,
        log_det_circle: circle,
        log_det_double: double,
        ratio,
        target,
        error: (ratio - target).abs(),
    })
}

/// Ratios at `n₀, 2n₀, …, 2^steps n₀` edges.
pub fn determinant_ratio_experiment(preset: WeightPreset, lambda: f64, n0: usize, steps: usize) -> Result<Vec<RatioRow>> {
    (0..=steps).map(|s| determinant_ratio(preset, lambda, n0 << s)).collect()
}

/// `|r − target|` strictly decreasing along the rows.
pub fn is_monotone_approach(rows: &[RatioRow]) -> bool {
    rows.windows(2).all(|w| w[1].error < w[0].error)
}

/// One row of the Gram seam ratio check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QRatioRow {
    pub n: usize,
    pub h: f64,
    /// `det(Q̃_seam − Ãᵗ Q̃⁻¹ Ã) / det(Q_seam − Aᵗ Q⁻¹ A)²`.
    pub ratio: f64,
    pub deviation: f64,
    /// Whether the collar around the seam is at least two stars deep.
    pub collar: bool,
}

/// Seam Gram complements on the circle (one seam vertex) and on its double
/// (two seam vertices): the Gram analogue of the determinant ratio.
pub fn q_ratio_check(preset: WeightPreset, lambda: f64, n: usize) -> Result<QRatioRow> {
    let c = CircleDoubling::new(lambda, n)?;
    let h = c.h();
    let complement = |k: &SimplicialComplex, seam_labels: &[VertexId]| -> Result<f64> {
        let w = preset.build(k, &vec![h; k.count(1)])?;
        let q = from_real(&w.scalar_matrix(0));
        let seam: Vec<usize> = seam_labels.iter().map(|&v| k.vertex(v).expect("seam vertex")).collect();
        let rest: Vec<usize> = (0..k.count(0)).filter(|v| !seam.contains(v)).collect();
        log_det_hpd(&schur_complement(&q, &seam, &rest, "interior Gram")?, "seam Gram complement")
    };
    // the circle keeps label n for the glued end; the double keeps 0 and n
    let single = complement(&c.circle, &[n])?;
    let double = complement(&c.double, &[0, n])?;
    let ratio = (double - 2.0 * single).exp();
    Ok(QRatioRow {
        n,
        h,
        ratio,
        deviation: (ratio - 1.0).abs(),
        collar: n >= 6,
    })
}
