//! Line-oriented complex description files.
//!
//! ```text
//! # a path with four edges closed into a square
//! facet 0 1
//! facet 1 2
//! facet 2 3
//! facet 3 4
//! component start 0
//! component end 4
//! glue start end 0:4
//! weights whitney
//! edge-length 0 1 0.5
//! rank 2
//! field complex
//! connection holonomy:3.14159
//! ```
//!
//! Line kinds:
//!
//! - `facet v0 v1 …`: a top simplex by vertex labels.
//! - `component NAME v…`: a boundary subcomplex spanned by the vertices.
//! - `glue SOURCE TARGET a:b …`: identify component `SOURCE` with `TARGET`.
//! - `dirichlet NAME…`: the components carrying boundary data; defaults to
//!   every component that is not glued.
//! - `weights PRESET`: `diagonal-unit`, `lumped` or `whitney`.
//! - `edge-length a b h`: preset parameter, 1 when omitted. With a gluing
//!   the preset is evaluated on the glued complex.
//! - `weight q σ τ value`: explicit entry on the unglued complex,
//!   simplices as comma-separated labels (`0,1`); replaces the preset.
//! - `rank N`, `field real|complex`.
//! - `connection trivial|pure-gauge:SEED|holonomy:θ`.
//! - `transport τ σ m…`: explicit `A(τ, σ)` on the glued complex, `rank²`
//!   entries in row-major order, each `re` or `re,im`; unlisted pairs are
//!   the identity.
//!
//! Blank lines and text after `#` are ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::{random_flat, twist_matrix, Bundle, Connection, Field};
use crate::error::{Error, Result};
use crate::gaussian::{GluingSetup, Model};
use crate::linalg::Mat;
use crate::metric::{WeightPreset, WeightSystem};
use crate::simplicial::{glue, GluingMap, SimplicialComplex, Subcomplex, VertexId};

#[derive(Clone, Debug, PartialEq)]
pub enum ConnectionSpec {
    Trivial,
    PureGauge(u64),
    Holonomy(f64),
    Explicit(Vec<(Vec<VertexId>, Vec<VertexId>, Mat)>),
}

impl FromStr for ConnectionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown connection {s:?}"));
        match s.split_once(':') {
            None if s == "trivial" => Ok(ConnectionSpec::Trivial),
            None if s == "pure-gauge" => Ok(ConnectionSpec::PureGauge(0)),
            Some(("pure-gauge", seed)) => seed.parse().map(ConnectionSpec::PureGauge).map_err(|_| bad()),
            Some(("holonomy", theta)) => theta.parse().map(ConnectionSpec::Holonomy).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl ConnectionSpec {
    /// The connection on `k`; random gauges for `pure-gauge` also randomize
    /// the fiber metrics of the returned bundle.
    pub fn build(&self, k: &SimplicialComplex, rank: usize, field: Field) -> Result<(Bundle, Connection)> {
        let bundle = Bundle::trivial(k, rank, field);
        match self {
            ConnectionSpec::Trivial => {
                let a = Connection::trivial(k, &bundle)?;
                Ok((bundle, a))
            }
            ConnectionSpec::PureGauge(seed) => random_flat(k, rank, field, true, &mut ChaCha8Rng::seed_from_u64(*seed)),
            ConnectionSpec::Holonomy(theta) => {
                let a = Connection::holonomy_twist(k, &bundle, &twist_matrix(rank, field, *theta)?)?;
                Ok((bundle, a))
            }
            ConnectionSpec::Explicit(entries) => {
                let mut table = BTreeMap::new();
                for (tau, sigma, m) in entries {
                    let (t, _) = k.orientation(tau)?;
                    let (s, _) = k.orientation(sigma)?;
                    if t.degree != s.degree + 1 || k.incidence(t.degree, t.index, s.index).is_none() {
                        return Err(Error::InvalidArgument(format!("{sigma:?} is not a face of {tau:?}")));
                    }
                    table.insert((t.degree, t.index, s.index), m.clone());
                }
                let id = Mat::identity(rank, rank);
                let a = Connection::from_fn(k, &bundle, |q, tau, sigma| {
                    table.get(&(q, tau, sigma)).cloned().unwrap_or_else(|| id.clone())
                })?;
                Ok((bundle, a))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightSpec {
    Preset {
        preset: WeightPreset,
        lengths: Vec<(VertexId, VertexId, f64)>,
    },
    Explicit(Vec<(usize, Vec<VertexId>, Vec<VertexId>, f64)>),
}

impl WeightSpec {
    pub fn build(&self, k: &SimplicialComplex) -> Result<WeightSystem> {
        match self {
            WeightSpec::Preset { preset, lengths } => {
                let mut h = vec![1.0; k.count(1)];
                for &(a, b, value) in lengths {
                    h[k.index_of(&[a, b])?.index] = value;
                }
                preset.build(k, &h)
            }
            WeightSpec::Explicit(entries) => {
                let mut lists = vec![Vec::new(); k.dim() + 1];
                for (q, s, t, value) in entries {
                    let (i, j) = (k.index_of(s)?, k.index_of(t)?);
                    if i.degree != *q || j.degree != *q {
                        return Err(Error::InvalidArgument(format!("{s:?} and {t:?} are not {q}-simplices")));
                    }
                    lists[*q].push((i.index, j.index, *value));
                }
                WeightSystem::from_entries(k, &lists)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct GlueSpec {
    pub source: String,
    pub target: String,
    pub pairs: Vec<(VertexId, VertexId)>,
}

/// A parsed description file.
#[derive(Clone, Debug)]
pub struct ComplexFile {
    pub complex: SimplicialComplex,
    pub components: BTreeMap<String, Vec<VertexId>>,
    pub gluings: Vec<GlueSpec>,
    pub dirichlet: Vec<String>,
    pub weights: WeightSpec,
    pub rank: usize,
    pub field: Field,
    pub connection: ConnectionSpec,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number<T: FromStr>(line: usize, token: &str) -> Result<T> {
    token.parse().map_err(|_| parse_error(line, format!("bad number {token:?}")))
}

fn labels(line: usize, token: &str) -> Result<Vec<VertexId>> {
    token.split(',').map(|t| number(line, t)).collect()
}

fn entry(line: usize, token: &str) -> Result<Complex64> {
    match token.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(number(line, re)?, number(line, im)?)),
        None => Ok(Complex64::new(number(line, token)?, 0.0)),
    }
}

impl ComplexFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.as_ref().display())))?;
        text.parse()
    }

    fn component(&self, name: &str) -> Result<Subcomplex> {
        let vs = self
            .components
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown component {name:?}")))?;
        self.complex.spanned_by(vs)
    }

    fn union(&self, names: &[String]) -> Result<Subcomplex> {
        names
            .iter()
            .try_fold(Subcomplex::empty(), |acc, name| Ok(acc.union(&self.component(name)?)))
    }

    /// The Dirichlet boundary of the described complex.
    pub fn dirichlet_boundary(&self) -> Result<Subcomplex> {
        let l = self.union(&self.dirichlet)?;
        self.complex.check_boundary(&l)?;
        Ok(l)
    }

    /// All gluings merged into one map.
    pub fn gluing_map(&self) -> Result<Option<GluingMap>> {
        if self.gluings.is_empty() {
            return Ok(None);
        }
        let sources: Vec<String> = self.gluings.iter().map(|g| g.source.clone()).collect();
        let targets: Vec<String> = self.gluings.iter().map(|g| g.target.clone()).collect();
        let pairs: Vec<(VertexId, VertexId)> = self.gluings.iter().flat_map(|g| g.pairs.iter().copied()).collect();
        Ok(Some(GluingMap::new(
            &self.complex,
            self.union(&sources)?,
            self.union(&targets)?,
            &pairs,
        )?))
    }

    /// The complex after gluing, or the complex itself without gluings.
    pub fn glued_complex(&self) -> Result<SimplicialComplex> {
        match self.gluing_map()? {
            Some(f) => Ok(glue(&self.complex, &f)?.complex),
            None => Ok(self.complex.clone()),
        }
    }

    /// The model on the described (unglued) complex with its Dirichlet boundary.
    pub fn model(&self) -> Result<(Model, Subcomplex)> {
        let weights = self.weights.build(&self.complex)?;
        let (bundle, connection) = self.connection.build(&self.complex, self.rank, self.field)?;
        Ok((Model::new(self.complex.clone(), weights, bundle, connection), self.dirichlet_boundary()?))
    }

    /// Preset weights and the connection are built on `K_f` and pulled back;
    /// explicit weights are given on `K` and induced on `K_f`.
    pub fn gluing_setup(&self) -> Result<GluingSetup> {
        let f = self
            .gluing_map()?
            .ok_or_else(|| Error::InvalidArgument("the file declares no gluing".into()))?;
        let kf = glue(&self.complex, &f)?.complex;
        let (bundle, connection) = self.connection.build(&kf, self.rank, self.field)?;
        let l3 = self.dirichlet_boundary()?;
        match &self.weights {
            WeightSpec::Preset { preset, lengths } => {
                let relabel = |v: VertexId| f.map_vertex(v).unwrap_or(v);
                let lengths = lengths.iter().map(|&(a, b, h)| (relabel(a), relabel(b), h)).collect();
                let weights = WeightSpec::Preset {
                    preset: *preset,
                    lengths,
                }
                .build(&kf)?;
                GluingSetup::from_glued(self.complex.clone(), f, l3, weights, bundle, connection)
            }
            WeightSpec::Explicit(_) => {
                let weights = self.weights.build(&self.complex)?;
                GluingSetup::from_cut(self.complex.clone(), f, l3, weights, bundle, connection)
            }
        }
    }
}

impl FromStr for ComplexFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut facets = Vec::new();
        let mut components = BTreeMap::new();
        let mut gluings = Vec::new();
        let mut dirichlet = None;
        let mut preset = None;
        let mut lengths = Vec::new();
        let mut explicit = Vec::new();
        let mut rank = 1;
        let mut field = Field::Real;
        let mut connection = None;
        let mut transports = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = content.split_whitespace().collect();
            let Some((&kind, args)) = tokens.split_first() else { continue };
            let arity = |min: usize| -> Result<()> {
                if args.len() < min {
                    Err(parse_error(line, format!("{kind} needs at least {min} arguments")))
                } else {
                    Ok(())
                }
            };
            match kind {
                "facet" => {
                    arity(1)?;
                    facets.push(args.iter().map(|t| number(line, t)).collect::<Result<Vec<VertexId>>>()?);
                }
                "component" => {
                    arity(2)?;
                    let vs = args[1..].iter().map(|t| number(line, t)).collect::<Result<Vec<VertexId>>>()?;
                    if components.insert(args[0].to_string(), vs).is_some() {
                        return Err(parse_error(line, format!("component {} defined twice", args[0])));
                    }
                }
                "glue" => {
                    arity(3)?;
                    let pairs = args[2..]
                        .iter()
                        .map(|t| {
                            let (a, b) = t.split_once(':').ok_or_else(|| parse_error(line, format!("bad pair {t:?}")))?;
                            Ok((number(line, a)?, number(line, b)?))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    gluings.push(GlueSpec {
                        source: args[0].to_string(),
                        target: args[1].to_string(),
                        pairs,
                    });
                }
                "dirichlet" => dirichlet = Some(args.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
                "weights" => {
                    arity(1)?;
                    preset = Some(args[0].parse::<WeightPreset>().map_err(|e| parse_error(line, e.to_string()))?);
                }
                "edge-length" => {
                    arity(3)?;
                    lengths.push((number(line, args[0])?, number(line, args[1])?, number(line, args[2])?));
                }
                "weight" => {
                    arity(4)?;
                    explicit.push((
                        number(line, args[0])?,
                        labels(line, args[1])?,
                        labels(line, args[2])?,
                        number(line, args[3])?,
                    ));
                }
                "rank" => {
                    arity(1)?;
                    rank = number(line, args[0])?;
                    if rank == 0 {
                        return Err(parse_error(line, "rank must be positive"));
                    }
                }
                "field" => {
                    arity(1)?;
                    field = match args[0] {
                        "real" => Field::Real,
                        "complex" => Field::Complex,
                        other => return Err(parse_error(line, format!("unknown field {other:?}"))),
                    };
                }
                "connection" => {
                    arity(1)?;
                    connection = Some(args[0].parse::<ConnectionSpec>().map_err(|e| parse_error(line, e.to_string()))?);
                }
                "transport" => {
                    arity(3)?;
                    let entries = args[2..].iter().map(|t| entry(line, t)).collect::<Result<Vec<_>>>()?;
                    transports.push((line, labels(line, args[0])?, labels(line, args[1])?, entries));
                }
                other => return Err(parse_error(line, format!("unknown line kind {other:?}"))),
            }
        }
        let complex = SimplicialComplex::from_facets(&facets)?;
        for (name, vs) in &components {
            complex
                .spanned_by(vs)
                .and_then(|s| complex.check_boundary(&s))
                .map_err(|e| Error::InvalidArgument(format!("component {name}: {e}")))?;
        }
        for g in &gluings {
            for name in [&g.source, &g.target] {
                if !components.contains_key(name) {
                    return Err(Error::InvalidArgument(format!("glue refers to unknown component {name:?}")));
                }
            }
        }
        let dirichlet = match dirichlet {
            Some(names) => names,
            None => components
                .keys()
                .filter(|c| !gluings.iter().any(|g| &g.source == *c || &g.target == *c))
                .cloned()
                .collect(),
        };
        let weights = if explicit.is_empty() {
            WeightSpec::Preset {
                preset: preset.unwrap_or(WeightPreset::DiagonalUnit),
                lengths,
            }
        } else {
            WeightSpec::Explicit(explicit)
        };
        let connection = if transports.is_empty() {
            connection.unwrap_or(ConnectionSpec::Trivial)
        } else {
            let mut list = Vec::new();
            for (line, tau, sigma, entries) in transports {
                if entries.len() != rank * rank {
                    return Err(parse_error(line, format!("expected {} entries for rank {rank}", rank * rank)));
                }
                list.push((tau, sigma, Mat::from_row_slice(rank, rank, &entries)));
            }
            ConnectionSpec::Explicit(list)
        };
        Ok(Self {
            complex,
            components,
            gluings,
            dirichlet,
            weights,
            rank,
            field,
            connection,
        })
    }
}
