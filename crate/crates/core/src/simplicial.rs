//! Oriented simplicial complexes.
//!
//! A simplex is oriented by the order in which its vertices are stored. The
//! incidence sign of a face is the alternating sign of the removed position,
//! corrected by the parity between the induced vertex order and the order
//! the face itself was stored with.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type VertexId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex {
    vertices: Vec<VertexId>,
}

impl Simplex {
    pub fn new(vertices: Vec<VertexId>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidArgument("a simplex needs a vertex".into()));
        }
        let key = sorted(&vertices);
        if key.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::RepeatedVertex(vertices));
        }
        Ok(Self { vertices })
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    /// Sorted vertex set, the orientation-free identity of the simplex.
    pub fn key(&self) -> Vec<VertexId> {
        sorted(&self.vertices)
    }

    /// The same simplex with the opposite orientation.
    pub fn reversed(&self) -> Simplex {
        let mut v = self.vertices.clone();
        if v.len() >= 2 {
            v.swap(0, 1);
        }
        Simplex { vertices: v }
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, v) in self.vertices.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

fn sorted(v: &[VertexId]) -> Vec<VertexId> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s
}

/// Parity of the permutation taking `a` to `b` (same vertex set).
pub fn permutation_sign(a: &[VertexId], b: &[VertexId]) -> i8 {
    let pos: Vec<usize> = b
        .iter()
        .map(|v| a.iter().position(|x| x == v).expect("same vertex set"))
        .collect();
    let mut inversions = 0;
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            if pos[i] > pos[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimplexRef {
    pub degree: usize,
    pub index: usize,
}

#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    simplices: Vec<Vec<Simplex>>,
    lookup: HashMap<Vec<VertexId>, usize>,
    faces: Vec<Vec<Vec<(usize, i8)>>>,
    cofaces: Vec<Vec<Vec<(usize, i8)>>>,
}

impl SimplicialComplex {
    /// Builds the complex generated by equal-dimensional facets. Facets keep
    /// their vertex order; lower faces are stored in increasing vertex order.
    pub fn from_facets(facets: &[Vec<VertexId>]) -> Result<Self> {
        let first = facets.first().ok_or(Error::EmptyComplex)?;
        let n = first.len().checked_sub(1).ok_or(Error::EmptyComplex)?;
        let mut lower: Vec<BTreeSet<Vec<VertexId>>> = vec![BTreeSet::new(); n];
        let mut top = Vec::with_capacity(facets.len());
        for facet in facets {
            if facet.len() != n + 1 {
                return Err(Error::DimensionMismatch {
                    facet: facet.clone(),
                    expected: n,
                    found: facet.len().saturating_sub(1),
                });
            }
            let s = Simplex::new(facet.clone())?;
            let key = s.key();
            for mask in 1u64..(1u64 << (n + 1)) - 1 {
                let sub: Vec<VertexId> = (0..=n).filter(|b| mask >> b & 1 == 1).map(|b| key[b]).collect();
                lower[sub.len() - 1].insert(sub);
            }
            top.push(s);
        }
        let mut lists: Vec<Vec<Simplex>> = lower
            .into_iter()
            .map(|set| set.into_iter().map(|vertices| Simplex { vertices }).collect())
            .collect();
        lists.push(top);
        Self::from_simplices(lists)
    }

    /// Builds a complex from explicit per-degree lists, keeping order and
    /// orientation. Every face of every simplex must be listed.
    pub fn from_simplices(mut lists: Vec<Vec<Simplex>>) -> Result<Self> {
        while lists.last().is_some_and(|l| l.is_empty()) {
            lists.pop();
        }
        if lists.is_empty() {
            return Err(Error::EmptyComplex);
        }
        let mut lookup = HashMap::new();
        for (q, list) in lists.iter().enumerate() {
            for (i, s) in list.iter().enumerate() {
                if s.dim() != q {
                    return Err(Error::DimensionMismatch {
                        facet: s.vertices.clone(),
                        expected: q,
                        found: s.dim(),
                    });
                }
                if lookup.insert(s.key(), i).is_some() {
                    return Err(Error::DuplicateSimplex(s.vertices.clone()));
                }
            }
        }
        let mut faces = vec![vec![Vec::new(); lists[0].len()]];
        for q in 1..lists.len() {
            let mut level = Vec::with_capacity(lists[q].len());
            for s in &lists[q] {
                let mut fs = Vec::with_capacity(q + 1);
                for k in 0..=q {
                    let mut induced = s.vertices.clone();
                    induced.remove(k);
                    let idx = *lookup.get(&sorted(&induced)).ok_or_else(|| Error::MissingFace {
                        simplex: s.vertices.clone(),
                        face: induced.clone(),
                    })?;
                    let alternating = if k % 2 == 0 { 1 } else { -1 };
                    fs.push((idx, alternating * permutation_sign(&lists[q - 1][idx].vertices, &induced)));
                }
                level.push(fs);
            }
            faces.push(level);
        }
        let mut cofaces: Vec<Vec<Vec<(usize, i8)>>> = lists.iter().map(|l| vec![Vec::new(); l.len()]).collect();
        for q in 1..lists.len() {
            for (t, fs) in faces[q].iter().enumerate() {
                for &(s, sign) in fs {
                    cofaces[q - 1][s].push((t, sign));
                }
            }
        }
        Ok(Self {
            simplices: lists,
            lookup,
            faces,
            cofaces,
        })
    }

    pub fn dim(&self) -> usize {
        self.simplices.len() - 1
    }

    pub fn count(&self, q: usize) -> usize {
        self.simplices.get(q).map_or(0, Vec::len)
    }

    pub fn counts(&self) -> Vec<usize> {
        self.simplices.iter().map(Vec::len).collect()
    }

    pub fn total_count(&self) -> usize {
        self.simplices.iter().map(Vec::len).sum()
    }

    pub fn simplices(&self, q: usize) -> &[Simplex] {
        self.simplices.get(q).map_or(&[], Vec::as_slice)
    }

    pub fn simplex(&self, q: usize, i: usize) -> &Simplex {
        &self.simplices[q][i]
    }

    /// Index of the simplex with the given vertex set, ignoring orientation.
    pub fn find(&self, vertices: &[VertexId]) -> Option<SimplexRef> {
        let degree = vertices.len().checked_sub(1)?;
        let index = *self.lookup.get(&sorted(vertices))?;
        (degree < self.simplices.len()).then_some(SimplexRef { degree, index })
    }

    pub fn index_of(&self, vertices: &[VertexId]) -> Result<SimplexRef> {
        self.find(vertices).ok_or_else(|| Error::UnknownSimplex(vertices.to_vec()))
    }

    /// +1 if `vertices` orders the stored simplex evenly, -1 otherwise.
    pub fn orientation(&self, vertices: &[VertexId]) -> Result<(SimplexRef, i8)> {
        let r = self.index_of(vertices)?;
        Ok((r, permutation_sign(&self.simplices[r.degree][r.index].vertices, vertices)))
    }

    pub fn vertex(&self, label: VertexId) -> Option<usize> {
        self.find(&[label]).map(|r| r.index)
    }

    pub fn vertex_label(&self, i: usize) -> VertexId {
        self.simplices[0][i].vertices[0]
    }

    pub fn max_label(&self) -> VertexId {
        self.simplices[0].iter().map(|s| s.vertices[0]).max().unwrap_or(0)
    }

    /// Faces of the degree-`q` simplex `i` with their incidence signs.
    pub fn faces(&self, q: usize, i: usize) -> &[(usize, i8)] {
        &self.faces[q][i]
    }

    /// Cofaces of the degree-`q` simplex `i` with their incidence signs.
    pub fn cofaces(&self, q: usize, i: usize) -> &[(usize, i8)] {
        self.cofaces.get(q).map_or(&[], |c| c[i].as_slice())
    }

    /// Incidence sign of face `sigma` (degree q-1) in `tau` (degree q).
    pub fn incidence(&self, q: usize, tau: usize, sigma: usize) -> Option<i8> {
        self.faces[q][tau].iter().find(|f| f.0 == sigma).map(|f| f.1)
    }

    /// The common cofacet of two distinct degree-`q` simplices, if any.
    pub fn common_cofacet(&self, q: usize, a: usize, b: usize) -> Option<usize> {
        if a == b {
            return None;
        }
        self.cofaces(q, a)
            .iter()
            .find(|x| self.cofaces[q][b].iter().any(|y| y.0 == x.0))
            .map(|x| x.0)
    }

    /// Signed incidence matrix from q-chains to (q-1)-chains.
    pub fn boundary_matrix(&self, q: usize) -> Result<DMatrix<i32>> {
        if q == 0 || q > self.dim() {
            return Err(Error::DegreeOutOfRange {
                degree: q,
                max: self.dim(),
            });
        }
        let mut m = DMatrix::zeros(self.count(q - 1), self.count(q));
        for (t, fs) in self.faces[q].iter().enumerate() {
            for &(s, sign) in fs {
                m[(s, t)] = sign as i32;
            }
        }
        Ok(m)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.simplices
            .iter()
            .enumerate()
            .map(|(q, l)| if q % 2 == 0 { l.len() as i64 } else { -(l.len() as i64) })
            .sum()
    }

    /// Closure of a set of simplices under taking faces.
    pub fn closure(&self, seeds: impl IntoIterator<Item = SimplexRef>) -> Subcomplex {
        let mut members: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.simplices.len()];
        let mut stack: Vec<SimplexRef> = seeds.into_iter().collect();
        while let Some(r) = stack.pop() {
            if members[r.degree].insert(r.index) && r.degree > 0 {
                for &(f, _) in &self.faces[r.degree][r.index] {
                    stack.push(SimplexRef {
                        degree: r.degree - 1,
                        index: f,
                    });
                }
            }
        }
        Subcomplex::from_sets(members)
    }

    pub fn full(&self) -> Subcomplex {
        Subcomplex {
            members: self.simplices.iter().map(|l| (0..l.len()).collect()).collect(),
        }
    }

    /// All simplices whose vertices lie in the given label set.
    pub fn spanned_by(&self, labels: &[VertexId]) -> Result<Subcomplex> {
        let set: BTreeSet<VertexId> = labels.iter().copied().collect();
        for &v in &set {
            self.vertex(v).ok_or_else(|| Error::UnknownSimplex(vec![v]))?;
        }
        Ok(Subcomplex {
            members: self
                .simplices
                .iter()
                .map(|l| {
                    (0..l.len())
                        .filter(|&i| l[i].vertices.iter().all(|v| set.contains(v)))
                        .collect()
                })
                .collect(),
        })
    }

    /// Codimension-one simplices with exactly one cofacet, closed under faces.
    pub fn boundary(&self) -> BoundarySubcomplex {
        let n = self.dim();
        let simplices = if n == 0 {
            Subcomplex::empty()
        } else {
            let seeds = (0..self.count(n - 1))
                .filter(|&i| self.cofaces[n - 1][i].len() == 1)
                .map(|index| SimplexRef { degree: n - 1, index });
            self.closure(seeds)
        };
        let components = simplices.components(self);
        BoundarySubcomplex { simplices, components }
    }

    pub fn is_closed(&self) -> bool {
        self.boundary().simplices.is_empty()
    }

    /// Errors unless every simplex of `sub` lies on the boundary.
    pub fn check_boundary(&self, sub: &Subcomplex) -> Result<()> {
        let b = self.boundary().simplices;
        for (q, idx) in sub.members.iter().enumerate() {
            for &i in idx {
                if !b.contains(q, i) {
                    return Err(Error::NotBoundary(self.simplices[q][i].vertices.clone()));
                }
            }
        }
        Ok(())
    }

    /// Connected components as vertex-index lists, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        self.full()
            .components(self)
            .into_iter()
            .map(|c| c.indices(0).to_vec())
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// True for a connected 1-complex in which every vertex has two edges.
    pub fn is_cycle(&self) -> bool {
        self.dim() == 1
            && self.count(1) >= 3
            && self.cofaces[0].iter().all(|c| c.len() == 2)
            && self.is_connected()
    }

    /// Open star: the simplex and every simplex having it as a face.
    pub fn star(&self, vertices: &[VertexId]) -> Result<Vec<SimplexRef>> {
        let root = self.index_of(vertices)?;
        let mut seen = BTreeSet::from([root]);
        let mut frontier = vec![root];
        while let Some(r) = frontier.pop() {
            for &(c, _) in self.cofaces(r.degree, r.index) {
                let up = SimplexRef {
                    degree: r.degree + 1,
                    index: c,
                };
                if seen.insert(up) {
                    frontier.push(up);
                }
            }
        }
        Ok(seen.into_iter().collect())
    }

    pub fn closed_star(&self, vertices: &[VertexId]) -> Result<Subcomplex> {
        Ok(self.closure(self.star(vertices)?))
    }

    /// Leaves `(η, τ+, τ-, σ)` with `σ` a face of both `τ±` and `τ±` faces of `η`.
    pub fn leaves(&self) -> Vec<Leaf> {
        let mut out = Vec::new();
        for q in 0..self.dim().saturating_sub(1) {
            for eta in 0..self.count(q + 2) {
                let mut by_base: BTreeMap<usize, Vec<(usize, i8)>> = BTreeMap::new();
                for &(tau, s1) in &self.faces[q + 2][eta] {
                    for &(sigma, s2) in &self.faces[q + 1][tau] {
                        by_base.entry(sigma).or_default().push((tau, s1 * s2));
                    }
                }
                for (sigma, routes) in by_base {
                    let plus = routes.iter().find(|r| r.1 == 1).expect("two routes of opposite sign");
                    let minus = routes.iter().find(|r| r.1 == -1).expect("two routes of opposite sign");
                    out.push(Leaf {
                        degree: q,
                        top: eta,
                        plus: plus.0,
                        minus: minus.0,
                        base: sigma,
                    });
                }
            }
        }
        out
    }

    pub fn leaf(&self, q: usize, top: usize, base: usize) -> Result<Leaf> {
        self.leaves()
            .into_iter()
            .find(|l| l.degree == q && l.top == top && l.base == base)
            .ok_or_else(|| Error::NotALeaf(self.simplices.get(q).and_then(|l| l.get(base)).map_or(vec![], |s| s.vertices.clone())))
    }

    pub fn double(&self) -> DoubleComplex {
        let mut offsets = Vec::with_capacity(self.simplices.len());
        let mut centers = Vec::new();
        for (q, l) in self.simplices.iter().enumerate() {
            offsets.push(centers.len());
            centers.extend((0..l.len()).map(|index| SimplexRef { degree: q, index }));
        }
        let mut edges = Vec::new();
        for q in 1..self.simplices.len() {
            for (t, fs) in self.faces[q].iter().enumerate() {
                for &(s, _) in fs {
                    edges.push((offsets[q] + t, offsets[q - 1] + s));
                }
            }
        }
        DoubleComplex {
            centers,
            offsets,
            edges,
            leaves: self.leaves(),
        }
    }

    /// Copy with every vertex label passed through `f`, keeping orientations.
    pub fn relabel(&self, f: impl Fn(VertexId) -> VertexId) -> Result<Self> {
        let lists = self
            .simplices
            .iter()
            .map(|l| l.iter().map(|s| Simplex::new(s.vertices.iter().map(|&v| f(v)).collect())).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Self::from_simplices(lists)
    }

    /// Disjoint union; `other` is shifted past this complex's labels.
    /// Returns the union and the label offset applied to `other`.
    pub fn disjoint_union(&self, other: &Self) -> Result<(Self, VertexId)> {
        let offset = self.max_label() + 1;
        let shifted = other.relabel(|v| v + offset)?;
        let depth = self.simplices.len().max(shifted.simplices.len());
        let lists = (0..depth)
            .map(|q| {
                let mut l = self.simplices(q).to_vec();
                l.extend_from_slice(shifted.simplices(q));
                l
            })
            .collect();
        Ok((Self::from_simplices(lists)?, offset))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Leaf {
    /// Degree of the base simplex σ.
    pub degree: usize,
    pub top: usize,
    pub plus: usize,
    pub minus: usize,
    pub base: usize,
}

impl Leaf {
    /// Sum of the two route signs through τ±; zero for a valid complex.
    pub fn sign_sum(&self, k: &SimplicialComplex) -> i32 {
        let q = self.degree;
        let route = |tau| {
            (k.incidence(q + 2, self.top, tau).unwrap_or(0) * k.incidence(q + 1, tau, self.base).unwrap_or(0)) as i32
        };
        route(self.plus) + route(self.minus)
    }
}

/// The 2-skeleton of D(K) plus its leaf quadrilaterals.
#[derive(Clone, Debug)]
pub struct DoubleComplex {
    pub centers: Vec<SimplexRef>,
    offsets: Vec<usize>,
    /// (center of τ, center of σ) for each face σ of τ.
    pub edges: Vec<(usize, usize)>,
    pub leaves: Vec<Leaf>,
}

impl DoubleComplex {
    pub fn center(&self, q: usize, i: usize) -> usize {
        self.offsets[q] + i
    }

    pub fn vertex_count(&self) -> usize {
        self.centers.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Quadrilateral 2-cells `(p_η, p_τ+, p_σ, p_τ-)` as center indices.
    pub fn quads(&self) -> Vec<[usize; 4]> {
        self.leaves
            .iter()
            .map(|l| {
                let q = l.degree;
                [
                    self.center(q + 2, l.top),
                    self.center(q + 1, l.plus),
                    self.center(q, l.base),
                    self.center(q + 1, l.minus),
                ]
            })
            .collect()
    }
}

/// A face-closed set of simplices of a parent complex, by parent index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subcomplex {
    members: Vec<Vec<usize>>,
}

impl Subcomplex {
    pub fn empty() -> Self {
        Self::default()
    }

    fn from_sets(sets: Vec<BTreeSet<usize>>) -> Self {
        let mut members: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        while members.last().is_some_and(|l| l.is_empty()) {
            members.pop();
        }
        Self { members }
    }

    /// Validates face closure of explicit per-degree index lists.
    pub fn from_members(k: &SimplicialComplex, members: Vec<Vec<usize>>) -> Result<Self> {
        let sets: Vec<BTreeSet<usize>> = members.into_iter().map(|l| l.into_iter().collect()).collect();
        for (q, set) in sets.iter().enumerate() {
            for &i in set {
                if i >= k.count(q) {
                    return Err(Error::InvalidArgument(format!("degree-{q} index {i} out of range")));
                }
                if q > 0 {
                    for &(f, _) in k.faces(q, i) {
                        if !sets[q - 1].contains(&f) {
                            return Err(Error::MissingFace {
                                simplex: k.simplex(q, i).vertices.clone(),
                                face: k.simplex(q - 1, f).vertices.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(Self::from_sets(sets))
    }

    pub fn indices(&self, q: usize) -> &[usize] {
        self.members.get(q).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, q: usize, i: usize) -> bool {
        self.indices(q).binary_search(&i).is_ok()
    }

    pub fn count(&self, q: usize) -> usize {
        self.indices(q).len()
    }

    pub fn depth(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.iter().all(Vec::is_empty)
    }

    pub fn union(&self, other: &Self) -> Self {
        let depth = self.members.len().max(other.members.len());
        Self::from_sets(
            (0..depth)
                .map(|q| self.indices(q).iter().chain(other.indices(q)).copied().collect())
                .collect(),
        )
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.indices(0).iter().all(|&v| !other.contains(0, v))
    }

    /// Parent indices of degree `q` outside this subcomplex.
    pub fn complement(&self, k: &SimplicialComplex, q: usize) -> Vec<usize> {
        (0..k.count(q)).filter(|&i| !self.contains(q, i)).collect()
    }

    pub fn vertex_labels(&self, k: &SimplicialComplex) -> Vec<VertexId> {
        self.indices(0).iter().map(|&i| k.vertex_label(i)).collect()
    }

    /// The subcomplex as a standalone complex with parent order and orientation.
    pub fn to_complex(&self, k: &SimplicialComplex) -> Result<SimplicialComplex> {
        SimplicialComplex::from_simplices(
            self.members
                .iter()
                .enumerate()
                .map(|(q, idx)| idx.iter().map(|&i| k.simplex(q, i).clone()).collect())
                .collect(),
        )
    }

    /// Connected components, ordered by smallest vertex index.
    pub fn components(&self, k: &SimplicialComplex) -> Vec<Subcomplex> {
        let verts = self.indices(0);
        let mut parent: HashMap<usize, usize> = verts.iter().map(|&v| (v, v)).collect();
        fn root(p: &mut HashMap<usize, usize>, mut x: usize) -> usize {
            while p[&x] != x {
                let up = p[&p[&x]];
                p.insert(x, up);
                x = up;
            }
            x
        }
        for &e in self.indices(1) {
            let fs = k.faces(1, e);
            let (a, b) = (root(&mut parent, fs[0].0), root(&mut parent, fs[1].0));
            if a != b {
                parent.insert(a.max(b), a.min(b));
            }
        }
        let mut groups: BTreeMap<usize, Vec<SimplexRef>> = BTreeMap::new();
        for (q, idx) in self.members.iter().enumerate() {
            for &i in idx {
                let v = if q == 0 { i } else { first_vertex(k, q, i) };
                let r = root(&mut parent, v);
                groups.entry(r).or_default().push(SimplexRef { degree: q, index: i });
            }
        }
        groups.into_values().map(|refs| k.closure(refs)).collect()
    }
}

fn first_vertex(k: &SimplicialComplex, q: usize, i: usize) -> usize {
    let mut cur = (q, i);
    while cur.0 > 0 {
        cur = (cur.0 - 1, k.faces(cur.0, cur.1)[0].0);
    }
    cur.1
}

#[derive(Clone, Debug)]
pub struct BoundarySubcomplex {
    pub simplices: Subcomplex,
    pub components: Vec<Subcomplex>,
}

/// Simplicial isomorphism between two disjoint boundary subcomplexes.
#[derive(Clone, Debug)]
pub struct GluingMap {
    source: Subcomplex,
    target: Subcomplex,
    vertex_map: BTreeMap<VertexId, VertexId>,
    /// Per degree, aligned with `source.indices(q)`: target index and the
    /// parity between the mapped orientation and the stored target one.
    simplex_map: Vec<Vec<(usize, i8)>>,
}

impl GluingMap {
    pub fn new(
        k: &SimplicialComplex,
        source: Subcomplex,
        target: Subcomplex,
        pairs: &[(VertexId, VertexId)],
    ) -> Result<Self> {
        k.check_boundary(&source)?;
        k.check_boundary(&target)?;
        if !source.is_disjoint(&target) {
            return Err(Error::InvalidGluing("source and target share vertices".into()));
        }
        let vertex_map: BTreeMap<VertexId, VertexId> = pairs.iter().copied().collect();
        let src: BTreeSet<VertexId> = source.vertex_labels(k).into_iter().collect();
        let tgt: BTreeSet<VertexId> = target.vertex_labels(k).into_iter().collect();
        let keys: BTreeSet<VertexId> = vertex_map.keys().copied().collect();
        let values: BTreeSet<VertexId> = vertex_map.values().copied().collect();
        if vertex_map.len() != pairs.len() || keys != src || values != tgt || values.len() != keys.len() {
            return Err(Error::InvalidGluing(
                "vertex map is not a bijection between the two subcomplexes".into(),
            ));
        }
        let mut simplex_map = Vec::new();
        for q in 0..source.depth().max(target.depth()) {
            if source.count(q) != target.count(q) {
                return Err(Error::InvalidGluing(format!(
                    "{} source vs {} target simplices in degree {q}",
                    source.count(q),
                    target.count(q)
                )));
            }
            let mut level = Vec::new();
            for &i in source.indices(q) {
                let image: Vec<VertexId> = k.simplex(q, i).vertices.iter().map(|v| vertex_map[v]).collect();
                let (r, sign) = k
                    .orientation(&image)
                    .map_err(|_| Error::InvalidGluing(format!("image of {} is not a simplex", k.simplex(q, i))))?;
                if !target.contains(q, r.index) {
                    return Err(Error::InvalidGluing(format!(
                        "image of {} leaves the target",
                        k.simplex(q, i)
                    )));
                }
                level.push((r.index, sign));
            }
            simplex_map.push(level);
        }
        let map = Self {
            source,
            target,
            vertex_map,
            simplex_map,
        };
        map.check_incidence(k)?;
        Ok(map)
    }

    fn check_incidence(&self, k: &SimplicialComplex) -> Result<()> {
        for q in 1..self.simplex_map.len() {
            for (pos, &t) in self.source.indices(q).iter().enumerate() {
                let (ft, et) = self.simplex_map[q][pos];
                for &(s, sign) in k.faces(q, t) {
                    let (fs, es) = self.map_simplex(q - 1, s).expect("source is face closed");
                    if k.incidence(q, ft, fs) != Some(sign * et * es) {
                        return Err(Error::InvalidGluing("map does not commute with incidence".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn source(&self) -> &Subcomplex {
        &self.source
    }

    pub fn target(&self) -> &Subcomplex {
        &self.target
    }

    pub fn map_vertex(&self, v: VertexId) -> Option<VertexId> {
        self.vertex_map.get(&v).copied()
    }

    /// Target index and orientation parity of source simplex `(q, i)`.
    pub fn map_simplex(&self, q: usize, i: usize) -> Option<(usize, i8)> {
        let pos = self.source.indices(q).binary_search(&i).ok()?;
        Some(self.simplex_map[q][pos])
    }

    /// `(source, target, parity)` triples in degree `q`.
    pub fn pairs(&self, q: usize) -> Vec<(usize, usize, i8)> {
        self.source
            .indices(q)
            .iter()
            .zip(self.simplex_map.get(q).map_or(&[][..], Vec::as_slice))
            .map(|(&s, &(t, e))| (s, t, e))
            .collect()
    }
}

/// A complex obtained by identifying source with target, and the projection.
#[derive(Clone, Debug)]
pub struct Glued {
    pub complex: SimplicialComplex,
    /// Per degree: image index in the glued complex and orientation parity.
    pub projection: Vec<Vec<(usize, i8)>>,
}

impl Glued {
    pub fn project(&self, q: usize, i: usize) -> (usize, i8) {
        self.projection[q][i]
    }

    /// Image of a subcomplex of the unglued complex.
    pub fn image(&self, sub: &Subcomplex) -> Subcomplex {
        let refs = (0..sub.depth()).flat_map(|q| {
            sub.indices(q).iter().map(move |&i| SimplexRef {
                degree: q,
                index: self.projection[q][i].0,
            })
        });
        self.complex.closure(refs.collect::<Vec<_>>())
    }
}

pub fn glue(k: &SimplicialComplex, f: &GluingMap) -> Result<Glued> {
    let relabel = |v: VertexId| f.map_vertex(v).unwrap_or(v);
    let mut lists: Vec<Vec<Simplex>> = vec![Vec::new(); k.dim() + 1];
    let mut projection: Vec<Vec<(usize, i8)>> = k.simplices.iter().map(|l| vec![(0, 0); l.len()]).collect();
    let mut owner: HashMap<Vec<VertexId>, (usize, usize)> = HashMap::new();
    for q in 0..=k.dim() {
        for i in 0..k.count(q) {
            if f.source.contains(q, i) {
                continue;
            }
            let image: Vec<VertexId> = k.simplex(q, i).vertices.iter().map(|&v| relabel(v)).collect();
            let s = Simplex::new(image).map_err(|_| {
                Error::DegenerateGluing(format!("{} collapses onto a lower simplex", k.simplex(q, i)))
            })?;
            if let Some(&(_, j)) = owner.get(&s.key()) {
                return Err(Error::DegenerateGluing(format!(
                    "{} and {} would become parallel simplices",
                    k.simplex(q, j),
                    k.simplex(q, i)
                )));
            }
            owner.insert(s.key(), (lists[q].len(), i));
            projection[q][i] = (lists[q].len(), 1);
            lists[q].push(s);
        }
    }
    for q in 0..=k.dim() {
        for (s, t, e) in f.pairs(q) {
            projection[q][s] = (projection[q][t].0, e);
        }
        if lists[q].len() + f.source.count(q) != k.count(q) {
            return Err(Error::DegenerateGluing(format!("simplex count mismatch in degree {q}")));
        }
    }
    Ok(Glued {
        complex: SimplicialComplex::from_simplices(lists)?,
        projection,
    })
}

/// Two copies of a complex identified along a boundary subcomplex; the
/// second copy carries the reversed orientation.
#[derive(Clone, Debug)]
pub struct Doubled {
    pub complex: SimplicialComplex,
    /// Index of each original simplex's first copy.
    pub first: Vec<Vec<usize>>,
    /// Index of each original simplex's second copy (equal to the first on L).
    pub second: Vec<Vec<usize>>,
    /// The involution exchanging the copies.
    pub swap: Vec<Vec<usize>>,
    /// Label offset applied to vertices of the second copy.
    pub offset: VertexId,
}

pub fn closed_double(k: &SimplicialComplex, l: &Subcomplex) -> Result<Doubled> {
    k.check_boundary(l)?;
    let offset = k.max_label() + 1;
    let shared: BTreeSet<VertexId> = l.vertex_labels(k).into_iter().collect();
    let relabel = |v: VertexId| if shared.contains(&v) { v } else { v + offset };
    let mut lists: Vec<Vec<Simplex>> = k.simplices.clone();
    let first: Vec<Vec<usize>> = k.simplices.iter().map(|s| (0..s.len()).collect()).collect();
    let mut second = first.clone();
    for q in 0..=k.dim() {
        for i in 0..k.count(q) {
            if l.contains(q, i) {
                continue;
            }
            let image: Vec<VertexId> = k.simplex(q, i).vertices.iter().map(|&v| relabel(v)).collect();
            second[q][i] = lists[q].len();
            lists[q].push(Simplex { vertices: image }.reversed());
        }
    }
    let complex = SimplicialComplex::from_simplices(lists).map_err(|e| match e {
        Error::DuplicateSimplex(s) => Error::DegenerateGluing(format!("doubling duplicates {s:?}")),
        other => other,
    })?;
    let mut swap: Vec<Vec<usize>> = complex.simplices.iter().map(|s| (0..s.len()).collect()).collect();
    for q in 0..=k.dim() {
        for i in 0..k.count(q) {
            swap[q][first[q][i]] = second[q][i];
            swap[q][second[q][i]] = first[q][i];
        }
    }
    Ok(Doubled {
        complex,
        first,
        second,
        swap,
        offset,
    })
}

#[derive(Clone, Debug)]
pub struct Subdivision {
    pub complex: SimplicialComplex,
    /// Label of the midpoint of each old edge.
    pub midpoints: Vec<VertexId>,
    /// Old simplex `(q, i)` to the new q-simplices it is cut into.
    pub refinement: Vec<Vec<Vec<usize>>>,
}

impl Subdivision {
    /// Subdivision of a subcomplex of the old complex.
    pub fn refine(&self, sub: &Subcomplex) -> Subcomplex {
        let refs: Vec<SimplexRef> = (0..sub.depth())
            .flat_map(|q| {
                sub.indices(q).iter().flat_map(move |&i| {
                    self.refinement[q][i].iter().map(move |&index| SimplexRef { degree: q, index })
                })
            })
            .collect();
        self.complex.closure(refs)
    }
}

/// Bisects every edge; in dimension two also splits each triangle in four.
pub fn standard_subdivision(k: &SimplicialComplex) -> Result<Subdivision> {
    let n = k.dim();
    if n == 0 || n > 2 {
        return Err(Error::Unsupported(format!("standard subdivision in dimension {n}")));
    }
    let base = k.max_label() + 1;
    let midpoints: Vec<VertexId> = (0..k.count(1)).map(|e| base + e).collect();
    let mid = |a: VertexId, b: VertexId| midpoints[k.find(&[a, b]).expect("edge of the complex").index];
    let mut lists: Vec<Vec<Simplex>> = vec![k.simplices(0).to_vec()];
    lists[0].extend(midpoints.iter().map(|&m| Simplex { vertices: vec![m] }));
    let mut edges = Vec::new();
    for (e, s) in k.simplices(1).iter().enumerate() {
        let (a, b) = (s.vertices[0], s.vertices[1]);
        edges.push(Simplex { vertices: vec![a, midpoints[e]] });
        edges.push(Simplex { vertices: vec![midpoints[e], b] });
    }
    let mut triangles = Vec::new();
    for s in k.simplices(2) {
        let [a, b, c] = [s.vertices[0], s.vertices[1], s.vertices[2]];
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        edges.push(Simplex { vertices: vec![ab, bc] });
        edges.push(Simplex { vertices: vec![bc, ca] });
        edges.push(Simplex { vertices: vec![ca, ab] });
        triangles.push(Simplex { vertices: vec![a, ab, ca] });
        triangles.push(Simplex { vertices: vec![ab, b, bc] });
        triangles.push(Simplex { vertices: vec![ca, bc, c] });
        triangles.push(Simplex { vertices: vec![ab, bc, ca] });
    }
    lists.push(edges);
    if n == 2 {
        lists.push(triangles);
    }
    let complex = SimplicialComplex::from_simplices(lists)?;
    let mut refinement = vec![(0..k.count(0)).map(|i| vec![i]).collect::<Vec<_>>()];
    refinement.push((0..k.count(1)).map(|e| vec![2 * e, 2 * e + 1]).collect());
    if n == 2 {
        refinement.push((0..k.count(2)).map(|t| (4 * t..4 * t + 4).collect()).collect());
    }
    Ok(Subdivision {
        complex,
        midpoints,
        refinement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(n: usize) -> SimplicialComplex {
        let facets: Vec<Vec<usize>> = (0..n).map(|i| vec![i, i + 1]).collect();
        SimplicialComplex::from_facets(&facets).unwrap()
    }

    fn cycle(n: usize) -> SimplicialComplex {
        let facets: Vec<Vec<usize>> = (0..n).map(|i| vec![i, (i + 1) % n]).collect();
        SimplicialComplex::from_facets(&facets).unwrap()
    }

    fn dd_zero(k: &SimplicialComplex) -> bool {
        (1..k.dim()).all(|q| {
            let p = k.boundary_matrix(q).unwrap() * k.boundary_matrix(q + 1).unwrap();
            p.iter().all(|&x| x == 0)
        })
    }

    #[test]
    fn single_edge_signs() {
        let k = SimplicialComplex::from_facets(&[vec![0, 1]]).unwrap();
        assert_eq!(k.counts(), vec![2, 1]);
        let d = k.boundary_matrix(1).unwrap();
        assert_eq!(d.as_slice(), &[-1, 1]);
    }

    #[test]
    fn triangle_boundary() {
        let k = SimplicialComplex::from_facets(&[vec![0, 1, 2]]).unwrap();
        assert_eq!(k.counts(), vec![3, 3, 1]);
        assert!(dd_zero(&k));
        let d2 = k.boundary_matrix(2).unwrap();
        let sign = |a, b| d2[(k.find(&[a, b]).unwrap().index, 0)];
        assert_eq!((sign(1, 2), sign(0, 2), sign(0, 1)), (1, -1, 1));
    }

    #[test]
    fn path_boundary_matrix() {
        let d = path(2).boundary_matrix(1).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(3, 2, &[-1, 0, 1, -1, 0, 1]));
        assert!(matches!(path(2).boundary_matrix(2), Err(Error::DegreeOutOfRange { .. })));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(SimplicialComplex::from_facets(&[]).unwrap_err(), Error::EmptyComplex);
        assert!(matches!(
            SimplicialComplex::from_facets(&[vec![0, 0]]),
            Err(Error::RepeatedVertex(_))
        ));
        assert!(matches!(
            SimplicialComplex::from_facets(&[vec![0, 1], vec![0, 1, 2]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn square_cycle_is_closed() {
        let k = cycle(4);
        assert_eq!(k.counts(), vec![4, 4]);
        assert!(k.is_closed());
        assert!(k.is_cycle());
        assert_eq!(k.euler_characteristic(), 0);
    }

    #[test]
    fn double_complex_counts() {
        let tri = SimplicialComplex::from_facets(&[vec![0, 1, 2]]).unwrap();
        let d = tri.double();
        assert_eq!(d.vertex_count(), 7);
        assert_eq!(d.quads().len(), 3);
        assert!(tri.leaves().iter().all(|l| l.sign_sum(&tri) == 0));
        let edge = SimplicialComplex::from_facets(&[vec![0, 1]]).unwrap().double();
        assert_eq!((edge.vertex_count(), edge.edge_count()), (3, 2));
    }

    #[test]
    fn path_glues_to_cycle() {
        let k = path(4);
        let l1 = k.spanned_by(&[0]).unwrap();
        let l2 = k.spanned_by(&[4]).unwrap();
        let f = GluingMap::new(&k, l1, l2, &[(0, 4)]).unwrap();
        let g = glue(&k, &f).unwrap();
        assert_eq!(g.complex.counts(), vec![4, 4]);
        assert!(g.complex.is_closed());
        assert!(dd_zero(&g.complex));
    }

    #[test]
    fn triangles_glue_along_an_edge() {
        let k = SimplicialComplex::from_facets(&[vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let l1 = k.spanned_by(&[0, 1]).unwrap();
        let l2 = k.spanned_by(&[4, 3]).unwrap();
        let f = GluingMap::new(&k, l1, l2, &[(0, 3), (1, 4)]).unwrap();
        let g = glue(&k, &f).unwrap();
        assert_eq!(g.complex.counts(), vec![4, 5, 2]);
        assert!(dd_zero(&g.complex));
    }

    #[test]
    fn short_path_gluing_is_rejected() {
        let k = path(2);
        let f = GluingMap::new(&k, k.spanned_by(&[0]).unwrap(), k.spanned_by(&[2]).unwrap(), &[(0, 2)]).unwrap();
        assert!(matches!(glue(&k, &f), Err(Error::DegenerateGluing(_))));
    }

    #[test]
    fn gluing_map_validation() {
        let k = path(4);
        let l1 = k.spanned_by(&[0]).unwrap();
        let l2 = k.spanned_by(&[4]).unwrap();
        assert!(matches!(
            GluingMap::new(&k, l1.clone(), l2.clone(), &[(0, 3)]),
            Err(Error::InvalidGluing(_))
        ));
        let interior = k.spanned_by(&[2]).unwrap();
        assert!(matches!(
            GluingMap::new(&k, l1, interior, &[(0, 2)]),
            Err(Error::NotBoundary(_))
        ));
    }

    #[test]
    fn doubling() {
        let k = path(5);
        let b = k.boundary().simplices;
        let d = closed_double(&k, &b).unwrap();
        assert_eq!(d.complex.counts(), vec![10, 10]);
        assert!(d.complex.is_cycle());
        for q in 0..2 {
            for i in 0..d.complex.count(q) {
                assert_eq!(d.swap[q][d.swap[q][i]], i);
            }
        }
        let closed = closed_double(&cycle(3), &Subcomplex::empty()).unwrap();
        assert_eq!(closed.complex.components().len(), 2);
        let tri = SimplicialComplex::from_facets(&[vec![0, 1, 2]]).unwrap();
        let along = tri.spanned_by(&[0, 1]).unwrap();
        let d = closed_double(&tri, &along).unwrap();
        assert_eq!(d.complex.counts(), vec![4, 5, 2]);
        assert!(dd_zero(&d.complex));
        assert!(matches!(
            closed_double(&path(1), &path(1).boundary().simplices),
            Err(Error::DegenerateGluing(_))
        ));
    }

    #[test]
    fn subdivision_counts() {
        assert_eq!(standard_subdivision(&cycle(5)).unwrap().complex.counts(), vec![10, 10]);
        let tri = SimplicialComplex::from_facets(&[vec![0, 1, 2]]).unwrap();
        let s = standard_subdivision(&tri).unwrap();
        assert_eq!(s.complex.counts(), vec![6, 9, 4]);
        assert_eq!(s.complex.euler_characteristic(), 1);
        let twice = standard_subdivision(&standard_subdivision(&path(1)).unwrap().complex).unwrap();
        assert_eq!(twice.complex.counts(), vec![5, 4]);
        let tet = SimplicialComplex::from_facets(&[vec![0, 1, 2, 3]]).unwrap();
        assert!(matches!(standard_subdivision(&tet), Err(Error::Unsupported(_))));
    }

    #[test]
    fn subdivision_preserves_orientation_and_boundary() {
        let tri = SimplicialComplex::from_facets(&[vec![0, 1, 2], vec![0, 2, 3]]).unwrap();
        let s = standard_subdivision(&tri).unwrap();
        assert!(dd_zero(&s.complex));
        // every interior edge of a consistently oriented surface meets its two
        // triangles with opposite signs
        for e in 0..s.complex.count(1) {
            let c = s.complex.cofaces(1, e);
            if c.len() == 2 {
                assert_eq!(c[0].1 + c[1].1, 0);
            }
        }
        let refined = s.refine(&tri.boundary().simplices);
        assert_eq!(refined, s.complex.boundary().simplices);
    }

    #[test]
    fn stars() {
        let k = path(4);
        assert_eq!(k.star(&[2]).unwrap().len(), 3);
        assert_eq!(k.star(&[0]).unwrap().len(), 2);
        let fan = SimplicialComplex::from_facets(&[vec![0, 1, 2], vec![0, 2, 3], vec![0, 3, 4]]).unwrap();
        assert_eq!(fan.star(&[0]).unwrap().len(), 1 + 4 + 3);
        assert!(fan.closed_star(&[0]).unwrap().count(0) == 5);
        assert!(matches!(k.star(&[9]), Err(Error::UnknownSimplex(_))));
    }

    #[test]
    fn boundary_components() {
        let k = path(3);
        let b = k.boundary();
        assert_eq!(b.components.len(), 2);
        let annulus = SimplicialComplex::from_facets(&[
            vec![0, 1, 4],
            vec![1, 5, 4],
            vec![1, 2, 5],
            vec![2, 3, 5],
            vec![2, 0, 3],
            vec![0, 4, 3],
        ])
        .unwrap();
        let b = annulus.boundary();
        assert_eq!(b.components.len(), 2);
        assert!(b.components.iter().all(|c| c.count(0) == 3 && c.count(1) == 3));
    }

    prop_compose! {
        fn surface_facets()(m in 3usize..6, k in 3usize..5, twist in any::<bool>()) -> Vec<Vec<usize>> {
            // triangulated cylinder with optional reversed facets
            let id = |i: usize, j: usize| j * m + i % m;
            let mut f = Vec::new();
            for j in 0..k - 1 {
                for i in 0..m {
                    let a = vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)];
                    let b = vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)];
                    f.push(if twist { vec![a[1], a[0], a[2]] } else { a });
                    f.push(b);
                }
            }
            f
        }
    }

    proptest! {
        #[test]
        fn boundary_of_boundary_vanishes(facets in surface_facets()) {
            let k = SimplicialComplex::from_facets(&facets).unwrap();
            prop_assert!(dd_zero(&k));
            prop_assert_eq!(k.double().vertex_count(), k.total_count());
            let s = standard_subdivision(&k).unwrap();
            prop_assert!(dd_zero(&s.complex));
            prop_assert_eq!(s.complex.euler_characteristic(), k.euler_characteristic());
            let l = k.boundary().simplices;
            let d = closed_double(&k, &l).unwrap();
            prop_assert!(dd_zero(&d.complex));
            for q in 0..=k.dim() {
                prop_assert_eq!(d.complex.count(q), 2 * k.count(q) - l.count(q));
            }
        }
    }
}
