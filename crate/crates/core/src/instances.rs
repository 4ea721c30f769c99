//! Seeded generators for gluing problems and flat bundles.
//!
//! Every instance is drawn from its own ChaCha stream keyed by
//! `(seed, index)`, so batteries can be built in any order or in parallel
//! and still agree bit for bit.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::{random_flat, Bundle, Connection, Field};
use crate::error::{Error, Result};
use crate::gaussian::GluingSetup;
use crate::linalg::{Mat, Vector};
use crate::metric::WeightPreset;
use crate::simplicial::{glue, GluingMap, SimplicialComplex, Subcomplex, VertexId};

/// Deterministic generator for instance `index` of a battery.
pub fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn path(n: usize) -> SimplicialComplex {
    SimplicialComplex::from_facets(&(0..n).map(|i| vec![i, i + 1]).collect::<Vec<_>>()).expect("path")
}

pub fn cycle(n: usize) -> Result<SimplicialComplex> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("a cycle needs 3 vertices, got {n}")));
    }
    SimplicialComplex::from_facets(&(0..n).map(|i| vec![i, (i + 1) % n]).collect::<Vec<_>>())
}

/// `m` vertices around, `k` layers of squares; vertex `(i, j)` has label
/// `j·m + i`, and layers `0` and `k` are the two boundary circles.
pub fn cylinder(m: usize, k: usize) -> Result<SimplicialComplex> {
    if m < 3 || k == 0 {
        return Err(Error::InvalidArgument(format!("cylinder {m}x{k} needs m ≥ 3 and k ≥ 1")));
    }
    let label = |i: usize, j: usize| j * m + i % m;
    let mut facets = Vec::with_capacity(2 * m * k);
    for j in 0..k {
        for i in 0..m {
            facets.push(vec![label(i, j), label(i + 1, j), label(i + 1, j + 1)]);
            facets.push(vec![label(i, j), label(i + 1, j + 1), label(i, j + 1)]);
        }
    }
    SimplicialComplex::from_facets(&facets)
}

/// A triangulated `m × k` grid of squares (a disk).
pub fn grid(m: usize, k: usize) -> Result<SimplicialComplex> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidArgument("grid needs at least one square".into()));
    }
    let label = |i: usize, j: usize| j * (m + 1) + i;
    let mut facets = Vec::with_capacity(2 * m * k);
    for j in 0..k {
        for i in 0..m {
            facets.push(vec![label(i, j), label(i + 1, j), label(i + 1, j + 1)]);
            facets.push(vec![label(i, j), label(i + 1, j + 1), label(i, j + 1)]);
        }
    }
    SimplicialComplex::from_facets(&facets)
}

/// A cut complex `K` with its gluing map and the remaining boundary `L₃`.
#[derive(Clone, Debug)]
pub struct Shape {
    pub complex: SimplicialComplex,
    pub map: GluingMap,
    pub l3: Subcomplex,
}

impl Shape {
    pub fn glued(&self) -> Result<SimplicialComplex> {
        Ok(glue(&self.complex, &self.map)?.complex)
    }
}

/// A path with `n` edges closed into an `n`-cycle.
pub fn path_to_cycle(n: usize) -> Result<Shape> {
    if n < 3 {
        return Err(Error::DegenerateGluing(format!("a path with {n} edges closes into a multigraph")));
    }
    let k = path(n);
    let map = GluingMap::new(&k, k.spanned_by(&[0])?, k.spanned_by(&[n])?, &[(0, n)])?;
    Ok(Shape {
        complex: k,
        map,
        l3: Subcomplex::empty(),
    })
}

/// Paths with `a` and `b` edges joined end to start; `L₃` is the two outer ends.
pub fn paths_to_path(a: usize, b: usize) -> Result<Shape> {
    let (k, off) = path(a).disjoint_union(&path(b))?;
    let map = GluingMap::new(&k, k.spanned_by(&[off])?, k.spanned_by(&[a])?, &[(off, a)])?;
    let l3 = k.spanned_by(&[0])?.union(&k.spanned_by(&[off + b])?);
    Ok(Shape { complex: k, map, l3 })
}

fn layer(m: usize, j: usize, offset: VertexId) -> Vec<VertexId> {
    (0..m).map(|i| offset + j * m + i).collect()
}

/// An `m × k` cylinder closed into a torus by identifying its two circles.
pub fn cylinder_to_torus(m: usize, k: usize) -> Result<Shape> {
    if k < 3 {
        return Err(Error::DegenerateGluing(format!("{k} layers fold into parallel edges")));
    }
    let c = cylinder(m, k)?;
    let (bottom, top) = (layer(m, 0, 0), layer(m, k, 0));
    let pairs: Vec<(VertexId, VertexId)> = bottom.iter().copied().zip(top.iter().copied()).collect();
    let map = GluingMap::new(&c, c.spanned_by(&bottom)?, c.spanned_by(&top)?, &pairs)?;
    Ok(Shape {
        complex: c,
        map,
        l3: Subcomplex::empty(),
    })
}

/// Two cylinders of heights `a` and `b` stacked into one; `L₃` is the
/// two outer circles.
pub fn cylinders_to_cylinder(m: usize, a: usize, b: usize) -> Result<Shape> {
    let (k, off) = cylinder(m, a)?.disjoint_union(&cylinder(m, b)?)?;
    let (source, target) = (layer(m, 0, off), layer(m, a, 0));
    let pairs: Vec<(VertexId, VertexId)> = source.iter().copied().zip(target.iter().copied()).collect();
    let map = GluingMap::new(&k, k.spanned_by(&source)?, k.spanned_by(&target)?, &pairs)?;
    let l3 = k.spanned_by(&layer(m, 0, 0))?.union(&k.spanned_by(&layer(m, b, off))?);
    Ok(Shape { complex: k, map, l3 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    PathToCycle,
    PathsToPath,
    CylinderToTorus,
    CylindersToCylinder,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::PathToCycle,
        Family::PathsToPath,
        Family::CylinderToTorus,
        Family::CylindersToCylinder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::PathToCycle => "path-cycle",
            Family::PathsToPath => "paths-path",
            Family::CylinderToTorus => "cylinder-torus",
            Family::CylindersToCylinder => "cylinders-cylinder",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Family::PathToCycle | Family::PathsToPath => 1,
            _ => 2,
        }
    }

    fn sample(self, rng: &mut ChaCha8Rng) -> Result<Shape> {
        match self {
            Family::PathToCycle => path_to_cycle(rng.random_range(3..=6)),
            Family::PathsToPath => paths_to_path(rng.random_range(2..=4), rng.random_range(2..=4)),
            Family::CylinderToTorus => cylinder_to_torus(rng.random_range(3..=4), rng.random_range(3..=4)),
            Family::CylindersToCylinder => {
                cylinders_to_cylinder(rng.random_range(3..=4), rng.random_range(2..=3), rng.random_range(2..=3))
            }
        }
    }
}

/// Edge lengths near 1; in 2D every triangle stays well shaped.
pub fn random_lengths(k: &SimplicialComplex, rng: &mut impl Rng) -> Vec<f64> {
    let (lo, hi) = if k.dim() >= 2 { (0.8, 1.2) } else { (0.5, 1.5) };
    (0..k.count(1)).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_vector(n: usize, field: Field, rng: &mut impl Rng) -> Vector {
    Vector::from_fn(n, |_, _| {
        let re = rng.random_range(-1.0..1.0);
        let im = match field {
            Field::Real => 0.0,
            Field::Complex => rng.random_range(-1.0..1.0),
        };
        Complex64::new(re, im)
    })
}

/// A seeded gluing problem with boundary data on `L₃`.
#[derive(Clone, Debug)]
pub struct GluingInstance {
    pub index: usize,
    pub family: Family,
    pub preset: WeightPreset,
    pub rank: usize,
    pub field: Field,
    pub m2: f64,
    pub setup: GluingSetup,
    pub eta3: Vector,
}

impl GluingInstance {
    pub fn label(&self) -> String {
        format!(
            "{}/{}/r{}/{}/m2={}",
            self.family.name(),
            self.preset.name(),
            self.rank,
            match self.field {
                Field::Real => "real",
                Field::Complex => "complex",
            },
            self.m2
        )
    }
}

pub const MASSES: [f64; 3] = [0.1, 1.0, 10.0];

/// Natural weights with random lengths and a random flat connection on
/// `K_f`, pulled back to `K`.
pub fn random_setup(
    shape: Shape,
    preset: WeightPreset,
    rank: usize,
    field: Field,
    rng: &mut ChaCha8Rng,
) -> Result<(GluingSetup, Vector)> {
    let kf = shape.glued()?;
    let lengths = random_lengths(&kf, rng);
    let weights = preset.build(&kf, &lengths)?;
    let (bundle, connection) = random_flat(&kf, rank, field, true, rng)?;
    let eta3 = random_vector(shape.l3.count(0) * rank, field, rng);
    let setup = GluingSetup::from_glued(shape.complex, shape.map, shape.l3, weights, bundle, connection)?;
    Ok((setup, eta3))
}

/// Instance `index` of the massive battery. The index cycles through the
/// family, then the weight preset, rank, mass and scalar field.
pub fn gluing_instance(seed: u64, index: usize) -> Result<GluingInstance> {
    let mut rng = instance_rng(seed, index);
    let family = Family::ALL[index % 4];
    let preset = [WeightPreset::Lumped, WeightPreset::Whitney][(index / 4) % 2];
    let rank = 1 + (index / 8) % 3;
    let m2 = MASSES[(index / 24) % 3];
    let field = [Field::Real, Field::Complex][(index / 72) % 2];
    let shape = family.sample(&mut rng)?;
    let (setup, eta3) = random_setup(shape, preset, rank, field, &mut rng)?;
    Ok(GluingInstance {
        index,
        family,
        preset,
        rank,
        field,
        m2,
        setup,
        eta3,
    })
}

pub fn gluing_battery(seed: u64, count: usize) -> Result<Vec<GluingInstance>> {
    (0..count).map(|i| gluing_instance(seed, i)).collect()
}

/// Batteries restricted to one dimension, reindexed from zero.
pub fn gluing_battery_dim(seed: u64, count: usize, dim: usize) -> Result<Vec<GluingInstance>> {
    (0..)
        .filter(|i| Family::ALL[i % 4].dim() == dim)
        .take(count)
        .enumerate()
        .map(|(n, i)| {
            let mut inst = gluing_instance(seed, i)?;
            inst.index = n;
            Ok(inst)
        })
        .collect()
}

/// Zero-mass instances. Index `0 mod 3`: a cycle with a holonomy whose
/// eigenvalues all differ from 1, so neither side has a kernel. Index
/// `1 mod 3`: two paths with Dirichlet ends and a random flat connection.
/// Index `2 mod 3`: an untwisted cycle, whose constant kernel has no
/// counterpart on the cut side.
pub fn massless_instance(seed: u64, index: usize) -> Result<GluingInstance> {
    let mut rng = instance_rng(seed ^ 0x6d61_7373_6c65_7373, index);
    let preset = [WeightPreset::Lumped, WeightPreset::Whitney][(index / 3) % 2];
    let rank = 1 + (index / 6) % 3;
    let (family, setup, eta3, field) = match index % 3 {
        1 => {
            let field = [Field::Real, Field::Complex][(index / 18) % 2];
            let shape = Family::PathsToPath.sample(&mut rng)?;
            let (setup, eta3) = random_setup(shape, preset, rank, field, &mut rng)?;
            (Family::PathsToPath, setup, eta3, field)
        }
        twist => {
            let shape = Family::PathToCycle.sample(&mut rng)?;
            let kf = shape.glued()?;
            let weights = preset.build(&kf, &random_lengths(&kf, &mut rng))?;
            let bundle = Bundle::trivial(&kf, rank, Field::Complex);
            let connection = if twist == 0 {
                let mut u = Mat::identity(rank, rank);
                for a in 0..rank {
                    u[(a, a)] = Complex64::from_polar(1.0, rng.random_range(0.5..2.0 * PI - 0.5));
                }
                Connection::holonomy_twist(&kf, &bundle, &u)?
            } else {
                Connection::trivial(&kf, &bundle)?
            };
            let setup = GluingSetup::from_glued(shape.complex, shape.map, shape.l3, weights, bundle, connection)?;
            (Family::PathToCycle, setup, Vector::zeros(0), Field::Complex)
        }
    };
    Ok(GluingInstance {
        index,
        family,
        preset,
        rank,
        field,
        m2: 0.0,
        setup,
        eta3,
    })
}

pub fn massless_battery(seed: u64, count: usize) -> Result<Vec<GluingInstance>> {
    (0..count).map(|i| massless_instance(seed, i)).collect()
}

/// Two single edges joined at a vertex: the glued path has exactly one
/// interior vertex. Real line bundle.
pub fn single_seam_instance(seed: u64, index: usize) -> Result<GluingInstance> {
    let mut rng = instance_rng(seed ^ 0x7365_616d, index);
    let preset = [WeightPreset::Lumped, WeightPreset::Whitney][index % 2];
    let m2 = MASSES[(index / 2) % 3];
    let (setup, eta3) = random_setup(paths_to_path(1, 1)?, preset, 1, Field::Real, &mut rng)?;
    Ok(GluingInstance {
        index,
        family: Family::PathsToPath,
        preset,
        rank: 1,
        field: Field::Real,
        m2,
        setup,
        eta3,
    })
}

/// A complex with a random flat bundle.
#[derive(Clone, Debug)]
pub struct FlatInstance {
    pub label: String,
    pub complex: SimplicialComplex,
    pub bundle: Bundle,
    pub connection: Connection,
}

/// Instance `index` of the flatness battery: paths, cycles, disks,
/// cylinders and tori with ranks 1 to 3.
pub fn flat_instance(seed: u64, index: usize) -> Result<FlatInstance> {
    let mut rng = instance_rng(seed ^ 0x666c_6174, index);
    let rank = 1 + (index / 5) % 3;
    let field = [Field::Real, Field::Complex][(index / 15) % 2];
    let (label, complex) = match index % 5 {
        0 => {
            let n = rng.random_range(1..=6);
            (format!("path{n}"), path(n))
        }
        1 => {
            let n = rng.random_range(3..=8);
            (format!("cycle{n}"), cycle(n)?)
        }
        2 => {
            let (m, k) = (rng.random_range(1..=3), rng.random_range(1..=3));
            (format!("disk{m}x{k}"), grid(m, k)?)
        }
        3 => {
            let (m, k) = (rng.random_range(3..=4), rng.random_range(1..=3));
            (format!("annulus{m}x{k}"), cylinder(m, k)?)
        }
        _ => {
            let (m, k) = (rng.random_range(3..=4), rng.random_range(3..=4));
            (format!("torus{m}x{k}"), cylinder_to_torus(m, k)?.glued()?)
        }
    };
    let (bundle, connection) = random_flat(&complex, rank, field, index % 2 == 0, &mut rng)?;
    Ok(FlatInstance {
        label: format!("{label}/r{rank}"),
        complex,
        bundle,
        connection,
    })
}

/// Named gluing problems.
pub const GLUING_PRESETS: [&str; 4] = ["c4-massive", "c4-twisted", "random-1d", "random-2d"];

/// The 4-cycle cut at one vertex with unit weights and a trivial line bundle.
pub fn c4(m2: f64, twist: Option<f64>) -> Result<GluingInstance> {
    let shape = path_to_cycle(4)?;
    let kf = shape.glued()?;
    let weights = WeightPreset::DiagonalUnit.build(&kf, &vec![1.0; kf.count(1)])?;
    let bundle = Bundle::trivial(&kf, 1, Field::Complex);
    let connection = match twist {
        Some(theta) => Connection::holonomy_twist(&kf, &bundle, &Mat::from_element(1, 1, Complex64::from_polar(1.0, theta)))?,
        None => Connection::trivial(&kf, &bundle)?,
    };
    let setup = GluingSetup::from_glued(shape.complex, shape.map, shape.l3, weights, bundle, connection)?;
    Ok(GluingInstance {
        index: 0,
        family: Family::PathToCycle,
        preset: WeightPreset::DiagonalUnit,
        rank: 1,
        field: Field::Complex,
        m2,
        setup,
        eta3: Vector::zeros(0),
    })
}

/// Instances for a named preset. `count` applies to the random batteries.
pub fn preset_battery(name: &str, seed: u64, count: usize) -> Result<Vec<GluingInstance>> {
    match name {
        "c4-massive" => Ok(vec![c4(1.0, None)?]),
        "c4-twisted" => Ok(vec![c4(0.0, Some(PI))?]),
        "random-1d" => gluing_battery_dim(seed, count, 1),
        "random-2d" => gluing_battery_dim(seed, count, 2),
        "random" => gluing_battery(seed, count),
        "massless" => massless_battery(seed, count),
        other => Err(Error::InvalidArgument(format!("unknown gluing preset {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{verify_critical_action_gluing, verify_determinant_gluing, verify_partition_gluing};
    use crate::bundle::is_flat;

    #[test]
    fn shapes_have_the_expected_topology() {
        let c = cylinder(4, 2).unwrap();
        assert_eq!(c.counts(), vec![12, 28, 16]);
        assert_eq!(c.euler_characteristic(), 0);
        assert_eq!(c.boundary().components.len(), 2);
        let torus = cylinder_to_torus(3, 3).unwrap().glued().unwrap();
        assert_eq!(torus.counts(), vec![9, 27, 18]);
        assert!(torus.is_closed());
        let long = cylinders_to_cylinder(3, 2, 2).unwrap().glued().unwrap();
        assert_eq!(long.counts(), vec![15, 39, 24]);
        assert_eq!(long.boundary().components.len(), 2);
        assert!(path_to_cycle(4).unwrap().glued().unwrap().is_cycle());
        assert_eq!(paths_to_path(2, 3).unwrap().glued().unwrap().counts(), vec![6, 5]);
        assert_eq!(grid(2, 2).unwrap().euler_characteristic(), 1);
    }

    #[test]
    fn degenerate_shapes_are_rejected() {
        assert!(matches!(path_to_cycle(2), Err(Error::DegenerateGluing(_))));
        assert!(matches!(cylinder_to_torus(3, 2), Err(Error::DegenerateGluing(_))));
        assert!(cylinder(2, 1).is_err());
    }

    #[test]
    fn instances_are_reproducible() {
        let a = gluing_instance(7, 13).unwrap();
        let b = gluing_instance(7, 13).unwrap();
        assert_eq!(a.setup.glued.weights, b.setup.glued.weights);
        assert_eq!(a.eta3, b.eta3);
        let c = gluing_instance(8, 13).unwrap();
        assert_ne!(a.setup.glued.weights, c.setup.glued.weights);
    }

    #[test]
    fn battery_covers_every_axis() {
        let battery = gluing_battery(1, 144).unwrap();
        for family in Family::ALL {
            for rank in 1..=3 {
                for m2 in MASSES {
                    assert!(battery.iter().any(|i| i.family == family && i.rank == rank && i.m2 == m2));
                }
            }
        }
        assert!(battery.iter().all(|i| i.setup.glued.weights.is_local(&i.setup.glued.complex)));
        let two = gluing_battery_dim(1, 6, 2).unwrap();
        assert!(two.iter().all(|i| i.family.dim() == 2));
    }

    #[test]
    fn sampled_instances_glue_correctly() {
        for i in 0..16 {
            let inst = gluing_instance(3, i).unwrap();
            let det = verify_determinant_gluing(&inst.setup, inst.m2).unwrap();
            assert!(det.residual < 1e-8, "{}: {det:?}", inst.label());
            let z = verify_partition_gluing(&inst.setup, inst.m2, &inst.eta3).unwrap();
            assert!(z.residual < 1e-8, "{}: {z:?}", inst.label());
            let s = verify_critical_action_gluing(&inst.setup, inst.m2, &inst.eta3).unwrap();
            assert!(s.residual < 1e-12, "{}: {s:?}", inst.label());
        }
    }

    #[test]
    fn massless_kernels() {
        for i in 0..6 {
            let inst = massless_instance(5, i).unwrap();
            let det = verify_determinant_gluing(&inst.setup, 0.0).unwrap();
            assert_eq!(det.kernel_matched(), i % 3 != 2, "{det:?}");
            if det.kernel_matched() {
                assert!(det.residual < 1e-8, "{det:?}");
            }
        }
    }

    #[test]
    fn single_seam_has_one_interior_vertex() {
        let inst = single_seam_instance(0, 0).unwrap();
        assert_eq!(inst.setup.glued.complex.count(0), 3);
        assert_eq!(inst.setup.seam_vertices().len(), 1);
        let z = verify_partition_gluing(&inst.setup, inst.m2, &inst.eta3).unwrap();
        assert!(z.residual < 1e-12);
    }

    #[test]
    fn flat_instances_are_flat() {
        for i in 0..15 {
            let inst = flat_instance(2, i).unwrap();
            assert!(is_flat(&inst.complex, &inst.connection).unwrap(), "{}", inst.label);
        }
    }

    #[test]
    fn named_presets() {
        assert_eq!(preset_battery("c4-massive", 0, 0).unwrap().len(), 1);
        assert_eq!(preset_battery("random-2d", 7, 5).unwrap().len(), 5);
        assert!(preset_battery("nope", 0, 1).is_err());
    }
}
