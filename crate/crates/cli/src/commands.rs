use std::f64::consts::PI;

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;

use combqft::approx::{determinant_ratio, q_ratio_check};
use combqft::bundle::Field;
use combqft::format::{ComplexFile, ConnectionSpec};
use combqft::gaussian::{
    action_s_kl, assemble_action, dn_glued, harmonic_extension, log_partition_function, verify_critical_action_gluing,
    verify_determinant_gluing, verify_partition_gluing, GluingSetup, Mass, Model,
};
use combqft::hodge::{det_prime, dirichlet_laplacian, laplacian, KERNEL_TOLERANCE};
use combqft::instances::{cycle, instance_rng, path, preset_battery, random_vector};
use combqft::linalg::{c, log_det_hpd, Vector};
use combqft::metric::WeightPreset;
use combqft::simplicial::{SimplicialComplex, Subcomplex};

use crate::report::{float, Cell, Table};
use crate::{Failure, Options};

/// `Err` carries the assertion message; the table is written either way.
pub type Verdict = Result<(), String>;

fn field(options: &Options) -> Field {
    if options.complex_field {
        Field::Complex
    } else {
        Field::Real
    }
}

fn check_tolerance(options: &Options) -> anyhow::Result<()> {
    if !(options.tolerance > 0.0) {
        bail!("tolerance must be positive, got {}", options.tolerance);
    }
    Ok(())
}

struct Case {
    label: String,
    m2: f64,
    setup: GluingSetup,
    eta3: Vector,
}

fn gluing_cases(options: &Options) -> anyhow::Result<Vec<Case>> {
    if let Some(path) = &options.complex {
        let file = ComplexFile::read(path)?;
        let setup = file.gluing_setup()?;
        let n = setup.l3.count(0) * setup.cut.rank();
        let eta3 = random_vector(n, setup.cut.field(), &mut instance_rng(options.seed, 0));
        let masses = options.mass.clone().unwrap_or_else(|| vec![1.0]);
        let name = path.display().to_string();
        return Ok(masses
            .into_iter()
            .map(|m2| Case {
                label: name.clone(),
                m2,
                setup: setup.clone(),
                eta3: eta3.clone(),
            })
            .collect());
    }
    let name = options.preset.as_deref().unwrap_or("random");
    let battery = preset_battery(name, options.seed, options.count)?;
    let mut cases = Vec::new();
    for inst in battery {
        let masses = options.mass.clone().unwrap_or_else(|| vec![inst.m2]);
        for m2 in masses {
            cases.push(Case {
                label: inst.label(),
                m2,
                setup: inst.setup.clone(),
                eta3: inst.eta3.clone(),
            });
        }
    }
    Ok(cases)
}

struct Outcome {
    cells: Vec<Cell>,
    worst: f64,
    failed: bool,
}

fn evaluate(index: usize, case: &Case, tolerance: f64) -> Outcome {
    let mut residuals = Vec::new();
    let mut cells = vec![Cell::Int(index as i64), Cell::text(&case.label), Cell::Float(case.m2)];
    let result = (|| -> combqft::Result<(Vec<Cell>, &'static str)> {
        let det = verify_determinant_gluing(&case.setup, case.m2)?;
        let schur = dn_glued(&case.setup, &Mass::constant(case.m2))?.schur_residual();
        let mut row = vec![
            Cell::Float(det.lhs),
            Cell::Float(det.rhs),
            Cell::Float(det.residual),
            Cell::Float(det.q_residual),
            Cell::Float(schur),
            Cell::Int(det.kernel_glued as i64),
            Cell::Int(det.kernel_cut as i64),
        ];
        if case.m2 == 0.0 && !det.kernel_matched() {
            row.extend([Cell::Empty, Cell::Empty]);
            return Ok((row, "kernel-mismatch"));
        }
        let z = verify_partition_gluing(&case.setup, case.m2, &case.eta3)?;
        let s = verify_critical_action_gluing(&case.setup, case.m2, &case.eta3)?;
        residuals.extend([det.residual, det.q_residual, schur, z.residual, s.residual]);
        row.extend([Cell::Float(z.residual), Cell::Float(s.residual)]);
        Ok((row, "ok"))
    })();
    match result {
        Ok((row, status)) => {
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            let failed = residuals.iter().any(|r| !(*r <= tolerance));
            cells.extend(row);
            cells.push(Cell::text(if failed { "fail" } else { status }));
            Outcome { cells, worst, failed }
        }
        Err(e) => {
            cells.extend(std::iter::repeat_n(Cell::Empty, 9));
            cells.push(Cell::text(format!("error: {e}")));
            Outcome {
                cells,
                worst: f64::INFINITY,
                failed: true,
            }
        }
    }
}

pub fn verify_gluing(options: &Options) -> Result<(Table, Verdict), Failure> {
    check_tolerance(options)?;
    let cases = gluing_cases(options)?;
    let outcomes: Vec<Outcome> = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| evaluate(i, case, options.tolerance))
        .collect();
    let mut table = Table::new(
        vec![
            "index",
            "instance",
            "m2",
            "det_lhs",
            "det_rhs",
            "det_residual",
            "q_residual",
            "schur_residual",
            "kernel_glued",
            "kernel_cut",
            "partition_residual",
            "action_residual",
            "status",
        ],
        3,
    );
    let failures = outcomes.iter().filter(|o| o.failed).count();
    let worst = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.failed)
        .max_by(|a, b| a.1.worst.total_cmp(&b.1.worst))
        .map(|(i, o)| (i, o.worst));
    for o in outcomes {
        table.push(o.cells);
    }
    let verdict = match worst {
        None => Ok(()),
        Some((i, residual)) => Err(format!(
            "{failures} of {} instances exceed tolerance {}; worst is #{i} ({}, m2 = {}) with residual {}",
            cases.len(),
            float(options.tolerance),
            cases[i].label,
            cases[i].m2,
            float(residual)
        )),
    };
    Ok((table, verdict))
}

/// Each error shrinks strictly or is already within tolerance.
pub fn approaches(errors: &[f64], tolerance: f64) -> bool {
    errors.windows(2).all(|w| w[1] < w[0] || w[1] <= tolerance)
}

pub fn converge(options: &Options, lambda: f64, n0: usize, steps: usize) -> Result<(Table, Verdict), Failure> {
    check_tolerance(options)?;
    let preset = match (&options.preset, options.weights) {
        (Some(name), _) => name.parse::<WeightPreset>()?,
        (None, Some(p)) => p,
        (None, None) => WeightPreset::Whitney,
    };
    if preset == WeightPreset::DiagonalUnit {
        return Err(anyhow!("converge needs length-dependent weights: lumped or whitney").into());
    }
    if n0 < 3 {
        return Err(anyhow!("n0 must be at least 3").into());
    }
    let ns: Vec<usize> = (0..=steps)
        .map(|s| n0.checked_shl(s as u32).filter(|n| n >> s == n0))
        .collect::<Option<_>>()
        .ok_or_else(|| anyhow!("too many refinement steps"))?;
    let rows = ns
        .par_iter()
        .map(|&n| Ok((determinant_ratio(preset, lambda, n)?, q_ratio_check(preset, lambda, n)?)))
        .collect::<combqft::Result<Vec<_>>>()?;
    let mut table = Table::new(
        vec![
            "preset",
            "lambda",
            "n",
            "h",
            "log_det_kf",
            "log_det_double",
            "ratio",
            "target",
            "abs_error",
            "q_ratio",
            "q_deviation",
        ],
        3,
    );
    for (r, q) in &rows {
        table.push(vec![
            Cell::text(preset.name()),
            Cell::Float(lambda),
            Cell::Int(r.n as i64),
            Cell::Float(r.h),
            Cell::Float(r.log_det_circle),
            Cell::Float(r.log_det_double),
            Cell::Float(r.ratio),
            Cell::Float(r.target),
            Cell::Float(r.error),
            Cell::Float(q.ratio),
            Cell::Float(q.deviation),
        ]);
    }
    let errors: Vec<f64> = rows.iter().map(|(r, _)| r.error).collect();
    let verdict = if approaches(&errors, options.tolerance) {
        Ok(())
    } else {
        Err(format!(
            "ratio error does not approach the target: {}",
            errors.iter().map(|e| float(*e)).collect::<Vec<_>>().join(", ")
        ))
    };
    Ok((table, verdict))
}

/// A named complex for `spectrum` and `partition` with its Dirichlet boundary.
fn named_complex(name: &str) -> anyhow::Result<(SimplicialComplex, Subcomplex, Option<ConnectionSpec>)> {
    let ends = |k: &SimplicialComplex| k.boundary().simplices;
    let (kind, size) = match name.split_once(':') {
        Some((kind, n)) => (kind, Some(n.parse::<usize>().with_context(|| format!("bad size in {name:?}"))?)),
        None => (name, None),
    };
    Ok(match (kind, size) {
        ("c3", None) => (cycle(3)?, Subcomplex::empty(), None),
        ("c4", None) => (cycle(4)?, Subcomplex::empty(), None),
        ("c4-twisted", None) => (cycle(4)?, Subcomplex::empty(), Some(ConnectionSpec::Holonomy(PI))),
        ("path3", None) => {
            let k = path(2);
            let l = ends(&k);
            (k, l, None)
        }
        ("path5", None) => {
            let k = path(4);
            let l = ends(&k);
            (k, l, None)
        }
        ("cycle", Some(n)) => (cycle(n)?, Subcomplex::empty(), None),
        ("path", Some(n)) if n >= 2 => {
            let k = path(n - 1);
            let l = ends(&k);
            (k, l, None)
        }
        _ => bail!("unknown complex preset {name:?}; expected c3, c4, c4-twisted, path3, path5, cycle:N or path:N"),
    })
}

fn model(options: &Options) -> anyhow::Result<(Model, Subcomplex, Option<ComplexFile>)> {
    if let Some(path) = &options.complex {
        let file = ComplexFile::read(path)?;
        let (m, l) = file.model()?;
        return Ok((m, l, Some(file)));
    }
    let name = options.preset.as_deref().unwrap_or("c3");
    let (k, l, default_connection) = named_complex(name)?;
    let weights = options
        .weights
        .unwrap_or(WeightPreset::DiagonalUnit)
        .build(&k, &vec![1.0; k.count(1)])?;
    let spec = options.connection.clone().or(default_connection).unwrap_or(ConnectionSpec::Trivial);
    let (bundle, connection) = spec.build(&k, options.rank, field(options))?;
    Ok((Model::new(k, weights, bundle, connection), l, None))
}

pub fn spectrum(options: &Options) -> Result<Table, Failure> {
    let (m, l, _) = model(options)?;
    let mut table = Table::new(vec!["operator", "quantity", "index", "value"], 3);
    let emit = |table: &mut Table, operator: String, values: &[f64], det: Option<(f64, usize)>| {
        for (i, v) in values.iter().enumerate() {
            table.push(vec![Cell::text(&operator), Cell::text("eigenvalue"), Cell::Int(i as i64), Cell::Float(*v)]);
        }
        if let Some((log_det, kernel)) = det {
            table.push(vec![Cell::text(&operator), Cell::text("log_det_prime"), Cell::Empty, Cell::Float(log_det)]);
            table.push(vec![Cell::text(&operator), Cell::text("kernel"), Cell::Empty, Cell::Int(kernel as i64)]);
        }
    };
    for q in 0..=m.complex.dim() {
        let values = laplacian(&m.complex, &m.weights, &m.bundle, &m.connection, q)?.spectrum()?;
        let d = det_prime(&values, KERNEL_TOLERANCE)?;
        emit(&mut table, format!("laplacian_{q}"), &values, Some((d.log_det, d.kernel)));
    }
    if !l.is_empty() {
        let dl = dirichlet_laplacian(&m.complex, &l, &m.weights, &m.bundle, &m.connection)?;
        let values = dl.spectrum()?;
        let d = det_prime(&values, KERNEL_TOLERANCE)?;
        emit(&mut table, "dirichlet".into(), &values, Some((d.log_det, d.kernel)));
        for &m2 in options.mass.as_deref().unwrap_or(&[]) {
            let value = dl.log_det_massive(m2)?;
            table.push(vec![
                Cell::text("dirichlet"),
                Cell::text(format!("log_det_massive[m2={m2}]")),
                Cell::Empty,
                Cell::Float(value),
            ]);
        }
    }
    Ok(table)
}

fn boundary_data(options: &Options, eta: Option<&[f64]>, n: usize, field: Field) -> anyhow::Result<Vector> {
    match eta {
        Some(values) if values.len() == n => Ok(Vector::from_iterator(n, values.iter().map(|&x| c(x)))),
        Some(values) => bail!("expected {n} boundary values, got {}", values.len()),
        None => Ok(random_vector(n, field, &mut instance_rng(options.seed, 0))),
    }
}

pub fn partition(options: &Options, eta: Option<&[f64]>) -> Result<(Table, Verdict), Failure> {
    check_tolerance(options)?;
    let (m, l, file) = model(options)?;
    let masses = options.mass.clone().unwrap_or_else(|| vec![0.0]);
    if let Some(file) = file.filter(|f| !f.gluings.is_empty()) {
        let setup = file.gluing_setup()?;
        let n = setup.l3.count(0) * setup.cut.rank();
        let eta3 = boundary_data(options, eta, n, setup.cut.field())?;
        let mut table = Table::new(vec!["m2", "seam_integral", "log_z_glued", "residual"], 1);
        let mut bad = Vec::new();
        for &m2 in &masses {
            let r = verify_partition_gluing(&setup, m2, &eta3)?;
            if !(r.residual <= options.tolerance) {
                bad.push(format!("m2 = {m2}: residual {}", float(r.residual)));
            }
            table.push(vec![Cell::Float(m2), Cell::Float(r.lhs), Cell::Float(r.rhs), Cell::Float(r.residual)]);
        }
        let verdict = if bad.is_empty() { Ok(()) } else { Err(bad.join("\n")) };
        return Ok((table, verdict));
    }
    let n = l.count(0) * m.rank();
    let eta = boundary_data(options, eta, n, m.field())?;
    let mut table = Table::new(
        vec!["m2", "log_z", "critical_action", "log_det_interior", "interior_dimension"],
        1,
    );
    for &m2 in &masses {
        let f = assemble_action(&m, &l, &Mass::constant(m2))?;
        let phi = harmonic_extension(&f, &eta)?;
        table.push(vec![
            Cell::Float(m2),
            Cell::Float(log_partition_function(&f, &eta)?),
            Cell::Float(action_s_kl(&m, &l, m2, &phi)?),
            Cell::Float(log_det_hpd(&f.b_ii, "interior action block")?),
            Cell::Int(f.interior_dimension() as i64),
        ]);
    }
    Ok((table, Ok(())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approach_rule() {
        assert!(approaches(&[1e-3, 1e-5, 1e-9], 1e-12));
        assert!(!approaches(&[1e-3, 1e-5, 1e-4], 1e-8));
        assert!(approaches(&[1e-14, 3e-14, 2e-14], 1e-10));
        assert!(approaches(&[], 1e-10));
    }

    #[test]
    fn named_complexes() {
        let (k, l, _) = named_complex("path5").unwrap();
        assert_eq!(k.count(0), 5);
        assert_eq!(l.count(0), 2);
        assert!(named_complex("cycle:2").is_err());
        assert!(named_complex("torus").is_err());
        assert_eq!(named_complex("path:3").unwrap().0.count(0), 3);
    }
}
