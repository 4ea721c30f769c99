//! Weight systems: the pairing `|σ, τ|` between same-degree simplices that
//! defines the inner product on cochains.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};

use crate::bundle::{Bundle, Connection};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, Mat};
use crate::simplicial::{GluingMap, Glued, Subcomplex, SimplicialComplex};

/// Positive-definiteness threshold relative to the largest eigenvalue.
pub const DEFINITENESS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightSystem {
    counts: Vec<usize>,
    /// Per degree, entries keyed by `(i, j)` with `i <= j`.
    entries: Vec<BTreeMap<(usize, usize), f64>>,
}

/// A nonzero weight between simplices that share no cofacet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NonLocalPair {
    pub degree: usize,
    pub first: usize,
    pub second: usize,
}

impl WeightSystem {
    pub fn zeros(counts: Vec<usize>) -> Self {
        let entries = vec![BTreeMap::new(); counts.len()];
        Self { counts, entries }
    }

    /// Symmetric entries per degree; unlisted pairs are zero. Checked for
    /// positive diagonals and positive definiteness.
    pub fn from_entries(k: &SimplicialComplex, entries: &[Vec<(usize, usize, f64)>]) -> Result<Self> {
        let mut w = Self::zeros(k.counts());
        for (q, list) in entries.iter().enumerate() {
            if q >= w.counts.len() {
                return Err(Error::DegreeOutOfRange { degree: q, max: k.dim() });
            }
            for &(i, j, value) in list {
                if i >= w.counts[q] || j >= w.counts[q] {
                    return Err(Error::InvalidArgument(format!("degree-{q} weight index out of range")));
                }
                w.set(q, i, j, value);
            }
        }
        w.validate()?;
        Ok(w)
    }

    pub fn diagonal(k: &SimplicialComplex, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != k.dim() + 1 {
            return Err(Error::ShapeMismatch {
                expected: k.dim() + 1,
                found: values.len(),
            });
        }
        let mut w = Self::zeros(k.counts());
        for (q, level) in values.iter().enumerate() {
            if level.len() != k.count(q) {
                return Err(Error::ShapeMismatch {
                    expected: k.count(q),
                    found: level.len(),
                });
            }
            for (i, &v) in level.iter().enumerate() {
                w.set(q, i, i, v);
            }
        }
        w.validate()?;
        Ok(w)
    }

    pub fn unit(k: &SimplicialComplex) -> Self {
        Self::diagonal(k, k.counts().iter().map(|&n| vec![1.0; n]).collect()).expect("unit weights are valid")
    }

    /// Dual-cell lengths on vertices and inverse lengths on edges.
    pub fn lumped_1d(k: &SimplicialComplex, lengths: &[f64]) -> Result<Self> {
        check_lengths(k, lengths, 1)?;
        let mut w = Self::zeros(k.counts());
        for (e, &h) in lengths.iter().enumerate() {
            for &(v, _) in k.faces(1, e) {
                w.add(0, v, v, h / 2.0);
            }
            w.set(1, e, e, 1.0 / h);
        }
        w.validate()?;
        Ok(w)
    }

    /// Inner products of the piecewise-linear hat functions and of the
    /// constant edge forms.
    pub fn whitney_1d(k: &SimplicialComplex, lengths: &[f64]) -> Result<Self> {
        check_lengths(k, lengths, 1)?;
        let mut w = Self::zeros(k.counts());
        for (e, &h) in lengths.iter().enumerate() {
            let fs = k.faces(1, e);
            let (a, b) = (fs[0].0, fs[1].0);
            w.add(0, a, a, h / 3.0);
            w.add(0, b, b, h / 3.0);
            w.add(0, a, b, h / 6.0);
            w.set(1, e, e, 1.0 / h);
        }
        w.validate()?;
        Ok(w)
    }

    /// Whitney inner products on a 2-complex whose triangles are flat with
    /// the given edge lengths.
    pub fn whitney_2d(k: &SimplicialComplex, lengths: &[f64]) -> Result<Self> {
        check_lengths(k, lengths, 2)?;
        let mut w = Self::zeros(k.counts());
        for e in 0..k.count(1) {
            if k.cofaces(1, e).is_empty() {
                return Err(Error::Unsupported("edges outside every triangle".into()));
            }
        }
        for t in 0..k.count(2) {
            let tri = FlatTriangle::new(k, t, lengths)?;
            let verts: Vec<usize> = tri.vertices.to_vec();
            for x in 0..3 {
                for y in x..3 {
                    w.add(0, verts[x], verts[y], tri.mass(x, y));
                }
            }
            let edges: Vec<(usize, [usize; 2])> = k
                .faces(2, t)
                .iter()
                .map(|&(e, _)| {
                    let fs = k.faces(1, e);
                    // stored edge (a, b) has faces [b, a] in slot order
                    (e, [tri.local(fs[1].0), tri.local(fs[0].0)])
                })
                .collect();
            for x in 0..3 {
                for y in x..3 {
                    let (e, [a, b]) = edges[x];
                    let (f, [c, d]) = edges[y];
                    let value = tri.mass(a, c) * tri.grad(b, d) - tri.mass(a, d) * tri.grad(b, c)
                        - tri.mass(b, c) * tri.grad(a, d)
                        + tri.mass(b, d) * tri.grad(a, c);
                    w.add(1, e, f, value);
                }
            }
            w.set(2, t, t, 1.0 / tri.area);
        }
        w.validate()?;
        Ok(w)
    }

    /// Diagonal 2D weights: a third of each incident triangle's area on
    /// vertices, the diagonal of the Whitney edge Gram on edges and inverse
    /// areas on triangles.
    pub fn lumped_2d(k: &SimplicialComplex, lengths: &[f64]) -> Result<Self> {
        let whitney = Self::whitney_2d(k, lengths)?;
        let mut w = Self::zeros(k.counts());
        for t in 0..k.count(2) {
            let tri = FlatTriangle::new(k, t, lengths)?;
            for &v in &tri.vertices {
                w.add(0, v, v, tri.area / 3.0);
            }
            w.set(2, t, t, 1.0 / tri.area);
        }
        for e in 0..k.count(1) {
            w.set(1, e, e, whitney.get(1, e, e));
        }
        w.validate()?;
        Ok(w)
    }

    pub fn degrees(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, q: usize) -> usize {
        self.counts.get(q).copied().unwrap_or(0)
    }

    pub fn get(&self, q: usize, i: usize, j: usize) -> f64 {
        self.entries
            .get(q)
            .and_then(|m| m.get(&(i.min(j), i.max(j))))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, q: usize, i: usize, j: usize, value: f64) {
        self.entries[q].insert((i.min(j), i.max(j)), value);
    }

    pub fn add(&mut self, q: usize, i: usize, j: usize, value: f64) {
        *self.entries[q].entry((i.min(j), i.max(j))).or_insert(0.0) += value;
    }

    /// Stored `(i, j, value)` with `i <= j`.
    pub fn entries(&self, q: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries
            .get(q)
            .into_iter()
            .flat_map(|m| m.iter().map(|(&(i, j), &v)| (i, j, v)))
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries.iter().all(|m| m.iter().all(|(&(i, j), &v)| i == j || v == 0.0))
    }

    pub fn scalar_matrix(&self, q: usize) -> DMatrix<f64> {
        let n = self.count(q);
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.entries(q) {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Positive diagonal and smallest eigenvalue above the relative threshold.
    pub fn validate(&self) -> Result<()> {
        for q in 0..self.degrees() {
            for i in 0..self.count(q) {
                let d = self.get(q, i, i);
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::NonPositiveWeight {
                        degree: q,
                        index: i,
                        value: d,
                    });
                }
            }
            if self.entries(q).all(|(i, j, _)| i == j) || self.count(q) == 0 {
                continue;
            }
            let ev = SymmetricEigen::new(self.scalar_matrix(q)).eigenvalues;
            let max = ev.max();
            let min = ev.min();
            if min <= DEFINITENESS_TOLERANCE * max {
                return Err(Error::NotPositiveDefinite {
                    what: format!("degree-{q} weights"),
                    min_eigenvalue: min,
                });
            }
        }
        Ok(())
    }

    /// First off-diagonal nonzero pair without a common cofacet, if any.
    pub fn locality_violation(&self, k: &SimplicialComplex) -> Option<NonLocalPair> {
        (0..self.degrees()).find_map(|q| {
            self.entries(q)
                .find(|&(i, j, v)| i != j && v != 0.0 && k.common_cofacet(q, i, j).is_none())
                .map(|(i, j, _)| NonLocalPair {
                    degree: q,
                    first: i,
                    second: j,
                })
        })
    }

    pub fn is_local(&self, k: &SimplicialComplex) -> bool {
        self.locality_violation(k).is_none()
    }

    /// Weights of pairs inside `l`, indexed by position in `l.indices(q)`.
    pub fn restrict(&self, l: &Subcomplex) -> WeightSystem {
        let mut out = Self::zeros((0..l.depth()).map(|q| l.count(q)).collect());
        for q in 0..l.depth().min(self.degrees()) {
            let idx = l.indices(q);
            for (i, j, v) in self.entries(q) {
                if let (Ok(a), Ok(b)) = (idx.binary_search(&i), idx.binary_search(&j)) {
                    out.set(q, a, b, v);
                }
            }
        }
        out
    }

    /// Weights on the unglued complex induced from the glued one: each pair
    /// of simplices that are equal or share a cofacet takes the weight of its
    /// image pair, signed by the two orientation parities.
    pub fn pullback(&self, cut: &SimplicialComplex, glued: &Glued) -> Result<WeightSystem> {
        let mut out = Self::zeros(cut.counts());
        for q in 0..=cut.dim() {
            for i in 0..cut.count(q) {
                let (a, _) = glued.project(q, i);
                out.set(q, i, i, self.get(q, a, a));
            }
            for eta in 0..cut.count(q + 1) {
                let fs = cut.faces(q + 1, eta);
                for x in 0..fs.len() {
                    for y in x + 1..fs.len() {
                        let (i, j) = (fs[x].0, fs[y].0);
                        let (a, ea) = glued.project(q, i);
                        let (b, eb) = glued.project(q, j);
                        let v = self.get(q, a, b);
                        if v != 0.0 {
                            out.set(q, i, j, (ea * eb) as f64 * v);
                        }
                    }
                }
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Weights on the glued complex: each image pair takes the weight of its
    /// preimage pairs. Copies of a source pair under the gluing map must agree
    /// (isometry). Two unrelated preimage pairs colliding on one image pair
    /// is an error in strict mode; otherwise the first one wins.
    pub fn induce(&self, cut: &SimplicialComplex, f: &GluingMap, glued: &Glued, strict: bool) -> Result<WeightSystem> {
        let kf = &glued.complex;
        let mut out = Self::zeros(kf.counts());
        for q in 0..=cut.dim() {
            let class = |i: usize| f.map_simplex(q, i).map_or(i, |(t, _)| t);
            let mut origin: BTreeMap<(usize, usize), ((usize, usize), f64)> = BTreeMap::new();
            for (i, j, v) in self.entries(q) {
                let (a, ea) = glued.project(q, i);
                let (b, eb) = glued.project(q, j);
                let key = (a.min(b), a.max(b));
                let value = (ea * eb) as f64 * v;
                let both_source = f.map_simplex(q, i).is_some() && f.map_simplex(q, j).is_some();
                let cls = if both_source { (class(i).min(class(j)), class(i).max(class(j))) } else { (i, j) };
                match origin.get(&key) {
                    None => {
                        origin.insert(key, (cls, value));
                    }
                    Some(&(prev_cls, prev)) if prev_cls == cls => {
                        if (prev - value).abs() > 1e-12 * prev.abs().max(value.abs()) {
                            return Err(Error::NonIsometric(format!(
                                "degree-{q} weights {prev} and {value} of identified pairs differ"
                            )));
                        }
                    }
                    Some(_) if strict => {
                        return Err(Error::NonIsometric(format!(
                            "degree-{q} pair ({}, {}) collides with another pair after gluing",
                            cut.simplex(q, i),
                            cut.simplex(q, j)
                        )));
                    }
                    Some(_) => {}
                }
            }
            for ((a, b), (_, v)) in origin {
                out.set(q, a, b, v);
            }
        }
        if strict {
            out.validate()?;
        }
        Ok(out)
    }

    /// Per-degree matrix of weights in the basis of pullbacks of glued
    /// simplices, `Π† W Π`.
    fn pushed(&self, glued: &Glued, q: usize, only: Option<&Subcomplex>) -> DMatrix<f64> {
        let n = glued.complex.count(q);
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.entries(q) {
            if let Some(l) = only {
                if !(l.contains(q, i) && l.contains(q, j)) {
                    continue;
                }
            }
            let (a, ea) = glued.project(q, i);
            let (b, eb) = glued.project(q, j);
            let s = (ea * eb) as f64 * v;
            m[(a, b)] += s;
            if i != j {
                m[(b, a)] += s;
            }
        }
        m
    }
}

/// Named constructions of weights from edge lengths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightPreset {
    /// All weights one, whatever the lengths.
    DiagonalUnit,
    /// Diagonal 1D weights: dual-cell lengths on vertices, inverse lengths on edges.
    Lumped,
    /// Whitney inner products (1D or 2D).
    Whitney,
}

impl WeightPreset {
    pub fn name(self) -> &'static str {
        match self {
            WeightPreset::DiagonalUnit => "diagonal-unit",
            WeightPreset::Lumped => "lumped",
            WeightPreset::Whitney => "whitney",
        }
    }

    pub fn build(self, k: &SimplicialComplex, lengths: &[f64]) -> Result<WeightSystem> {
        match (self, k.dim()) {
            (WeightPreset::DiagonalUnit, _) => Ok(WeightSystem::unit(k)),
            (WeightPreset::Lumped, 2) => WeightSystem::lumped_2d(k, lengths),
            (WeightPreset::Lumped, _) => WeightSystem::lumped_1d(k, lengths),
            (WeightPreset::Whitney, 2) => WeightSystem::whitney_2d(k, lengths),
            (WeightPreset::Whitney, _) => WeightSystem::whitney_1d(k, lengths),
        }
    }
}

impl std::str::FromStr for WeightPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal-unit" | "unit" => Ok(WeightPreset::DiagonalUnit),
            "lumped" | "lumped-diagonal" | "lumped-1d" | "lumped-2d" => Ok(WeightPreset::Lumped),
            "whitney" | "whitney-1d" | "whitney-2d" => Ok(WeightPreset::Whitney),
            other => Err(Error::InvalidArgument(format!("unknown weight preset {other:?}"))),
        }
    }
}

fn check_lengths(k: &SimplicialComplex, lengths: &[f64], dim: usize) -> Result<()> {
    if k.dim() != dim {
        return Err(Error::Unsupported(format!(
            "{dim}-dimensional weights on a {}-complex",
            k.dim()
        )));
    }
    if lengths.len() != k.count(1) {
        return Err(Error::ShapeMismatch {
            expected: k.count(1),
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
    Ok(())
}

/// A triangle laid out in the plane from its three edge lengths.
#[derive(Clone, Debug)]
pub struct FlatTriangle {
    /// Vertex indices in the stored orientation.
    pub vertices: [usize; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub gradients: [[f64; 2]; 3],
}

impl FlatTriangle {
    pub fn new(k: &SimplicialComplex, t: usize, lengths: &[f64]) -> Result<Self> {
        let s = k.simplex(2, t).vertices();
        let vertices = [
            k.vertex(s[0]).expect("vertex"),
            k.vertex(s[1]).expect("vertex"),
            k.vertex(s[2]).expect("vertex"),
        ];
        let len = |a: usize, b: usize| lengths[k.find(&[s[a], s[b]]).expect("edge").index];
        Self::from_lengths(vertices, len(0, 1), len(1, 2), len(2, 0))
            .map_err(|_| Error::TriangleInequality(s.to_vec()))
    }

    /// Lengths of the edges `01`, `12` and `20`.
    pub fn from_lengths(vertices: [usize; 3], l01: f64, l12: f64, l20: f64) -> Result<Self> {
        let x = (l01 * l01 + l20 * l20 - l12 * l12) / (2.0 * l01);
        let y2 = l20 * l20 - x * x;
        let scale = l01.max(l12).max(l20);
        if !(y2 > 1e-24 * scale * scale) || !(l01 < l12 + l20 && l12 < l01 + l20 && l20 < l01 + l12) {
            return Err(Error::TriangleInequality(vertices.to_vec()));
        }
        let pts = [[0.0, 0.0], [l01, 0.0], [x, y2.sqrt()]];
        let m = Matrix3::new(
            pts[0][0], pts[0][1], 1.0, pts[1][0], pts[1][1], 1.0, pts[2][0], pts[2][1], 1.0,
        );
        let c = m.try_inverse().ok_or_else(|| Error::TriangleInequality(vertices.to_vec()))?;
        let gradients = [[c[(0, 0)], c[(1, 0)]], [c[(0, 1)], c[(1, 1)]], [c[(0, 2)], c[(1, 2)]]];
        Ok(Self {
            vertices,
            area: 0.5 * l01 * y2.sqrt(),
            gradients,
        })
    }

    /// Local slot of a vertex index.
    pub fn local(&self, v: usize) -> usize {
        self.vertices.iter().position(|&x| x == v).expect("vertex of the triangle")
    }

    /// `∫ μ_x μ_y` over the triangle.
    pub fn mass(&self, x: usize, y: usize) -> f64 {
        self.area * if x == y { 2.0 } else { 1.0 } / 12.0
    }

    /// `∇μ_x · ∇μ_y`.
    pub fn grad(&self, x: usize, y: usize) -> f64 {
        self.gradients[x][0] * self.gradients[y][0] + self.gradients[x][1] * self.gradients[y][1]
    }
}

/// Gram matrix of degree `q`: block `(σ, τ)` is `|σ, τ| h_σ A(σ, τ)`.
pub fn gram(k: &SimplicialComplex, w: &WeightSystem, bundle: &Bundle, a: &Connection, q: usize) -> Result<Mat> {
    let r = bundle.rank();
    let n = k.count(q);
    let mut m = Mat::zeros(n * r, n * r);
    for (i, j, v) in w.entries(q) {
        if v == 0.0 {
            continue;
        }
        if i == j {
            let block = bundle.fiber_metric(q, i).scale(v);
            m.view_mut((i * r, i * r), (r, r)).copy_from(&block);
        } else {
            let block = (bundle.fiber_metric(q, i) * a.pair_transport(k, q, i, j)?).scale(v);
            m.view_mut((j * r, i * r), (r, r)).copy_from(&block.adjoint());
            m.view_mut((i * r, j * r), (r, r)).copy_from(&block);
        }
    }
    cholesky_factor(&m, &format!("degree-{q} Gram"))?;
    Ok(m)
}

/// Largest entry of `Π†W_KΠ − W_{K_f} − Π_{L1}†W_{L1}Π_{L1}` over all
/// degrees, with glued weights induced pairwise (first preimage wins).
pub fn mayer_vietoris_check(w: &WeightSystem, cut: &SimplicialComplex, f: &GluingMap, glued: &Glued) -> Result<f64> {
    let induced = w.induce(cut, f, glued, false)?;
    let mut worst: f64 = 0.0;
    for q in 0..=cut.dim() {
        let lhs = w.pushed(glued, q, None);
        let source = w.pushed(glued, q, Some(f.source()));
        let residual = lhs - induced.scalar_matrix(q) - source;
        worst = residual.iter().map(|x| x.abs()).fold(worst, f64::max);
    }
    Ok(worst)
}

/// The blocks of a matrix for an interior/seam split of its basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDecomposition {
    pub interior_indices: Vec<usize>,
    pub seam_indices: Vec<usize>,
    pub interior: Mat,
    /// Rows interior, columns seam.
    pub coupling: Mat,
    pub seam: Mat,
}

pub fn block_decompose(q: &Mat, interior: &[usize], seam: &[usize]) -> Result<BlockDecomposition> {
    let n = q.nrows();
    let mut seen = vec![false; n];
    for &i in interior.iter().chain(seam) {
        if i >= n || seen[i] {
            return Err(Error::PartitionNotCovering(format!("index {i} is out of range or repeated")));
        }
        seen[i] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::PartitionNotCovering(format!("index {missing} is in neither block")));
    }
    Ok(BlockDecomposition {
        interior_indices: interior.to_vec(),
        seam_indices: seam.to_vec(),
        interior: crate::linalg::select(q, interior, interior),
        coupling: crate::linalg::select(q, interior, seam),
        seam: crate::linalg::select(q, seam, seam),
    })
}

impl BlockDecomposition {
    pub fn reassemble(&self) -> Mat {
        let n = self.interior_indices.len() + self.seam_indices.len();
        let mut m = Mat::zeros(n, n);
        for (x, &i) in self.interior_indices.iter().enumerate() {
            for (y, &j) in self.interior_indices.iter().enumerate() {
                m[(i, j)] = self.interior[(x, y)];
            }
            for (y, &j) in self.seam_indices.iter().enumerate() {
                m[(i, j)] = self.coupling[(x, y)];
                m[(j, i)] = self.coupling[(x, y)].conj();
            }
        }
        for (x, &i) in self.seam_indices.iter().enumerate() {
            for (y, &j) in self.seam_indices.iter().enumerate() {
                m[(i, j)] = self.seam[(x, y)];
            }
        }
        m
    }
}
