//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use combqft::approx::{determinant_ratio, determinant_ratio_experiment, is_monotone_approach, q_ratio_check};
use combqft::bundle::{covariant_d, is_flat, random_unitary, Bundle, Connection, Field};
use combqft::gaussian::{
    action_s_l, assemble_action, dn_form_from_action, dn_glued, dn_operator, log_partition_function,
    verify_critical_action_gluing, verify_determinant_gluing, verify_partition_gluing, GluingSetup, Mass, Model,
};
use combqft::hodge::{adjointness_residual, det_prime, green_basis_residual, laplacian};
use combqft::instances::{
    cycle, flat_instance, gluing_battery, instance_rng, massless_battery, path, single_seam_instance, GluingInstance,
};
use combqft::linalg::{c, relative_difference, Mat, Vector};
use combqft::metric::{WeightPreset, WeightSystem};
use combqft::simplicial::SimplicialComplex;

const SEED: u64 = 20_240_611;
const BATTERY: usize = 216;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn max_abs<T: Copy + Into<f64>>(it: impl IntoIterator<Item = T>) -> f64 {
    it.into_iter().map(Into::into).fold(0.0, |m: f64, x: f64| m.max(x.abs()))
}

fn battery() -> Vec<GluingInstance> {
    gluing_battery(SEED, BATTERY).expect("gluing battery")
}

fn chain_and_flatness() -> Verdict {
    let start = Instant::now();
    let count = 240;
    let (mut checked_2d, mut bad) = (0, Vec::new());
    for i in 0..count {
        let inst = flat_instance(SEED, i).expect("flat instance");
        let k = &inst.complex;
        for q in 2..=k.dim() {
            let dd = k.boundary_matrix(q - 1).unwrap() * k.boundary_matrix(q).unwrap();
            if dd.iter().any(|&x| x != 0) {
                bad.push(format!("{}: boundary squares to nonzero", inst.label));
            }
        }
        let d_squared = |a: &Connection| -> f64 {
            if k.dim() < 2 {
                return 0.0;
            }
            let dd = covariant_d(k, a, 1).unwrap() * covariant_d(k, a, 0).unwrap();
            max_abs(dd.iter().map(|z| z.norm()))
        };
        let flat = is_flat(k, &inst.connection).unwrap();
        let d2 = d_squared(&inst.connection);
        if !(flat && d2 <= 1e-12) {
            bad.push(format!("{}: flat={flat}, |d_A^2|={d2:e}", inst.label));
        }
        if k.dim() == 2 {
            checked_2d += 1;
            let mut rng = instance_rng(SEED ^ 0x7065_7274, i);
            let r = inst.bundle.rank();
            let field = inst.bundle.field();
            let identity = Mat::identity(r, r);
            let u = (0..16)
                .map(|_| random_unitary(&mut rng, r, field))
                .find(|u| (u - &identity).norm() > 0.5)
                .unwrap_or_else(|| -identity.clone());
            let t = i % k.count(2);
            let perturbed = inst.connection.perturbed(2, t, 0, &u);
            let (flat_p, d2_p) = (is_flat(k, &perturbed).unwrap(), d_squared(&perturbed));
            if flat_p || d2_p <= 1e-12 {
                bad.push(format!("{}: perturbation kept flat={flat_p}, |d_A^2|={d2_p:e}", inst.label));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        bad.is_empty() && within(elapsed, 10.0),
        format!(
            "{count} instances, {checked_2d} perturbed in 2D, {} failures{}, {:.2}s",
            bad.len(),
            bad.first().map(|s| format!(" (first: {s})")).unwrap_or_default(),
            elapsed.as_secs_f64()
        ),
    )
}

fn with_weights(model: &Model, weights: WeightSystem) -> Model {
    Model::new(model.complex.clone(), weights, model.bundle.clone(), model.connection.clone())
}

fn adjointness_and_green() -> Verdict {
    let start = Instant::now();
    let (mut worst_adj, mut worst_green, mut cases) = (0.0f64, 0.0f64, 0);
    let mut presets_seen = [false; 2];
    for inst in battery().iter().take(72) {
        let cut = &inst.setup.cut;
        let l = inst.setup.boundary();
        let k = &cut.complex;
        let unit = with_weights(cut, WeightSystem::unit(k));
        presets_seen[(inst.preset == WeightPreset::Whitney) as usize] = true;
        for model in [cut, &unit] {
            for q in 0..k.dim() {
                let (w, b, a) = (&model.weights, &model.bundle, &model.connection);
                worst_adj = worst_adj.max(adjointness_residual(k, w, b, a, q).unwrap());
                worst_green = worst_green.max(green_basis_residual(k, &l, w, b, a, q).unwrap());
                cases += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst_adj <= 1e-12 && worst_green <= 1e-12 && presets_seen == [true, true] && within(elapsed, 10.0),
        format!(
            "{cases} (instance, weights, degree) cases, adjointness {worst_adj:.2e}, Green {worst_green:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn schur_coherence() -> Verdict {
    let (mut worst_boundary, mut worst_seam) = (0.0f64, 0.0f64);
    for inst in battery() {
        let mass = Mass::constant(inst.m2);
        let setup = &inst.setup;
        let l = setup.boundary();
        let f = assemble_action(&setup.cut, &l, &mass).unwrap();
        let by_action = dn_form_from_action(&setup.cut, &l, &f).unwrap();
        let by_schur = dn_operator(&f).unwrap().local;
        worst_boundary = worst_boundary.max(relative_difference(&by_action, &by_schur, 0.0));
        worst_seam = worst_seam.max(dn_glued(setup, &mass).unwrap().schur_residual());
    }
    verdict(
        worst_boundary <= 1e-12 && worst_seam <= 1e-12,
        format!("{BATTERY} instances, boundary DN {worst_boundary:.2e}, seam DN {worst_seam:.2e}"),
    )
}

fn determinant_gluing() -> Verdict {
    let start = Instant::now();
    let (mut worst, mut worst_q) = (0.0f64, 0.0f64);
    for inst in battery() {
        let report = verify_determinant_gluing(&inst.setup, inst.m2).unwrap();
        worst = worst.max(report.residual);
        worst_q = worst_q.max(report.q_residual);
    }
    let (mut matched, mut worst_massless, mut worst_massless_q) = (0, 0.0f64, 0.0f64);
    let massless = massless_battery(SEED, 48).unwrap();
    for inst in &massless {
        let report = verify_determinant_gluing(&inst.setup, 0.0).unwrap();
        if report.kernel_matched() {
            matched += 1;
            worst_massless = worst_massless.max(report.residual);
            worst_massless_q = worst_massless_q.max(report.q_residual);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-8
            && worst_q <= 1e-8
            && matched > 0
            && worst_massless <= 1e-8
            && worst_massless_q <= 1e-8
            && within(elapsed, 60.0),
        format!(
            "massive {worst:.2e} (Q-factored {worst_q:.2e}) on {BATTERY}; massless {worst_massless:.2e} \
             (Q-factored {worst_massless_q:.2e}) on {matched}/{} kernel-matched; {:.2}s",
            massless.len(),
            elapsed.as_secs_f64()
        ),
    )
}

/// Adaptive Simpson quadrature on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `∫ Z_{K,L}(f*η, η, η₃) e^{−S_{L₂}(η)} dη` over a single real seam vertex.
fn seam_integral_by_quadrature(setup: &GluingSetup, m2: f64, eta3: &Vector) -> f64 {
    let l = setup.boundary();
    let f = assemble_action(&setup.cut, &l, &Mass::constant(m2)).unwrap();
    let seam: Vec<usize> = setup.l1().indices(0).iter().chain(setup.l2().indices(0)).copied().collect();
    let outer = setup.l3.indices(0);
    let integrand = |eta: f64| -> f64 {
        let boundary = Vector::from_iterator(
            f.space.boundary_vertices.len(),
            f.space.boundary_vertices.iter().map(|v| {
                if seam.contains(v) {
                    c(eta)
                } else {
                    eta3[outer.iter().position(|w| w == v).expect("outer vertex")]
                }
            }),
        );
        let s_l2 = action_s_l(&setup.cut, setup.l2(), m2, &Vector::from_element(1, c(eta))).unwrap();
        (log_partition_function(&f, &boundary).unwrap() - s_l2).exp()
    };
    simpson(&integrand, -60.0, 60.0, 1e-14)
}

fn partition_gluing() -> Verdict {
    let mut worst = 0.0f64;
    for inst in battery() {
        worst = worst.max(verify_partition_gluing(&inst.setup, inst.m2, &inst.eta3).unwrap().residual);
    }
    let mut worst_oracle = 0.0f64;
    let seams = 24;
    for i in 0..seams {
        let inst = single_seam_instance(SEED, i).unwrap();
        let report = verify_partition_gluing(&inst.setup, inst.m2, &inst.eta3).unwrap();
        let oracle = seam_integral_by_quadrature(&inst.setup, inst.m2, &inst.eta3);
        worst_oracle = worst_oracle.max((report.lhs.exp() - oracle).abs() / oracle);
    }
    verdict(
        worst <= 1e-8 && worst_oracle <= 1e-8,
        format!("battery {worst:.2e} on {BATTERY}; quadrature {worst_oracle:.2e} on {seams} single-seam instances"),
    )
}

fn critical_action_gluing() -> Verdict {
    let mut worst = 0.0f64;
    for inst in battery() {
        worst = worst.max(verify_critical_action_gluing(&inst.setup, inst.m2, &inst.eta3).unwrap().residual);
    }
    verdict(worst <= 1e-12, format!("{worst:.2e} on {BATTERY} instances"))
}

/// Determinant of an integer matrix by fraction-free elimination.
fn bareiss(mut m: Vec<Vec<i128>>) -> i128 {
    let n = m.len();
    let (mut sign, mut prev) = (1, 1);
    for k in 0..n {
        if m[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&i| m[i][k] != 0) else {
                return 0;
            };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

/// `n · τ(G)`: the pseudodeterminant of a graph Laplacian by the matrix-tree theorem.
fn matrix_tree_det_prime(k: &SimplicialComplex) -> i128 {
    let n = k.count(0);
    let mut lap = vec![vec![0i128; n]; n];
    for e in k.simplices(1) {
        let [a, b] = [0, 1].map(|x| k.vertex(e.vertices()[x]).unwrap());
        lap[a][a] += 1;
        lap[b][b] += 1;
        lap[a][b] -= 1;
        lap[b][a] -= 1;
    }
    let reduced = lap[1..].iter().map(|row| row[1..].to_vec()).collect();
    n as i128 * bareiss(reduced)
}

fn hand_checks() -> Verdict {
    let mut notes = Vec::new();
    let k = path(2);
    let model = Model::trivial(k.clone(), WeightSystem::unit(&k), 1, Field::Real).unwrap();
    let l = k.spanned_by(&[0, 2]).unwrap();
    let f = assemble_action(&model, &l, &Mass::constant(0.0)).unwrap();
    let dn = dn_operator(&f).unwrap().operator;
    let expected = Mat::from_row_slice(2, 2, &[c(0.5), c(-0.5), c(-0.5), c(0.5)]);
    let dn_error = (&dn - &expected).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dn_ok = dn_error <= 1e-12;
    if !dn_ok {
        notes.push(format!("path DN off by {dn_error:e}"));
    }

    let mut cycle_error = 0.0f64;
    let mut cycle_ok = true;
    for n in 3..=12 {
        let k = cycle(n).unwrap();
        let bundle = Bundle::trivial(&k, 1, Field::Real);
        let a = Connection::trivial(&k, &bundle).unwrap();
        let spectrum = laplacian(&k, &WeightSystem::unit(&k), &bundle, &a, 0).unwrap().spectrum().unwrap();
        let dp = det_prime(&spectrum, 1e-10).unwrap();
        let tree = matrix_tree_det_prime(&k);
        cycle_ok &= tree == (n * n) as i128 && dp.kernel == 1;
        cycle_error = cycle_error.max((dp.value() - tree as f64).abs() / tree as f64);
    }
    cycle_ok &= cycle_error <= 1e-12;
    if !cycle_ok {
        notes.push(format!("cycle det' off by {cycle_error:e}"));
    }

    let mut z_error = 0.0f64;
    let grid: Vec<f64> = (-4..=4).map(|i| 0.75 * i as f64).collect();
    for &e0 in &grid {
        for &e2 in &grid {
            let eta = Vector::from_vec(vec![c(e0), c(e2)]);
            let z = log_partition_function(&f, &eta).unwrap().exp();
            let exact = PI.sqrt() * (-(e2 - e0).powi(2) / 4.0).exp();
            z_error = z_error.max((z - exact).abs() / exact);
        }
    }
    let z_ok = z_error <= 1e-12;
    if !z_ok {
        notes.push(format!("path partition function off by {z_error:e}"));
    }
    verdict(
        dn_ok && cycle_ok && z_ok,
        format!("path DN {dn_error:.2e}, cycle det' n=3..12 {cycle_error:.2e}, path Z on 81 points {z_error:.2e}"),
    )
}

fn lumped_exact_branch() -> Verdict {
    let start = Instant::now();
    let mut worst = (0.0f64, 0, 0.0);
    for lambda in [1.0, 2.0] {
        for n in 4..=512 {
            let row = determinant_ratio(WeightPreset::Lumped, lambda, n).unwrap();
            let error = (row.ratio - lambda * lambda / 4.0).abs();
            if error > worst.0 {
                worst = (error, n, lambda);
            }
        }
    }
    let (error, n, lambda) = worst;
    verdict(
        error < 1e-10,
        format!(
            "n=4..512, lambda in {{1,2}}: worst error {error:.2e} at n={n}, lambda={lambda}; {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn whitney_branch() -> Verdict {
    let start = Instant::now();
    let rows = determinant_ratio_experiment(WeightPreset::Whitney, 1.0, 8, 6).unwrap();
    let elapsed = start.elapsed();
    let errors: Vec<f64> = rows.iter().map(|r| (r.ratio - 0.25).abs()).collect();
    let monotone = is_monotone_approach(&rows) && errors.windows(2).all(|w| w[1] < w[0]);
    let last = *errors.last().unwrap();
    let table = rows
        .iter()
        .zip(&errors)
        .map(|(r, e)| format!("{}:{e:.2e}", r.n))
        .collect::<Vec<_>>()
        .join(" ");
    let broken = rows
        .windows(2)
        .zip(errors.windows(2))
        .find(|(_, e)| e[1] >= e[0])
        .map(|(r, _)| format!("; increase at n={}", r[1].n))
        .unwrap_or_default();
    verdict(
        monotone && last < 0.01 && within(elapsed, 120.0),
        format!("errors {table}{broken}; {:.1}s", elapsed.as_secs_f64()),
    )
}

fn collar_q_ratio() -> Verdict {
    let mut failing = Vec::new();
    let mut worst = 0.0f64;
    for n in 6..=32 {
        let row = q_ratio_check(WeightPreset::Whitney, 1.0, n).unwrap();
        worst = worst.max(row.deviation);
        if row.deviation >= 1e-10 {
            failing.push(format!("{n}:{:.1e}", row.deviation));
        }
    }
    let detail = if failing.is_empty() {
        format!("n=6..32, worst deviation {worst:.2e}")
    } else {
        format!("n=6..32, {} sizes above tolerance ({})", failing.len(), failing.join(" "))
    };
    verdict(failing.is_empty(), detail)
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_combqft")).args(args).output().expect("run combqft");
    assert!(out.status.success(), "combqft {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 3] = [
        &["verify-gluing", "--preset", "random-2d", "--seed", "11", "--count", "24"],
        &["verify-gluing", "--preset", "random-1d", "--seed", "5", "--count", "24", "--format", "json"],
        &["converge", "--preset", "whitney", "--n0", "8", "--steps", "3"],
    ];
    let mut same = 0;
    for args in runs {
        let (a, b) = (run_cli(args), run_cli(args));
        same += (!a.is_empty() && a == b) as usize;
    }
    verdict(same == runs.len(), format!("{same}/{} reports byte-identical", runs.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("chain complex and flatness", chain_and_flatness),
        ("adjointness and Green formula", adjointness_and_green),
        ("Schur coherence of DN operators", schur_coherence),
        ("determinant gluing", determinant_gluing),
        ("partition function gluing", partition_gluing),
        ("critical action gluing", critical_action_gluing),
        ("hand-checked anchors", hand_checks),
        ("lumped continuum ratio", lumped_exact_branch),
        ("Whitney continuum ratio", whitney_branch),
        ("Whitney collar Gram ratio", collar_q_ratio),
        ("deterministic CLI reports", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        failed += !v.pass as usize;
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("{status} {:>2} {name}: {} [{:.1}s]", i + 1, v.detail, start.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
