//! Acceptance gate: one test per numbered criterion, each printing a single
//! "criterion NN PASS/FAIL" line with the measured quantities before any
//! assertion fires. Tolerances are pinned here, not imported, so a library
//! regression cannot silently relax the gate.

mod common;

use std::time::Instant;

use common::{
    benchmark, dirichlet_tridiag, fmt_vec, norm_h, norm_l2, profile_distance,
    pseudo_random_field, sturm_eigenvalues, verdict, Instance,
};
use sms_core::critical::{
    estimate_nabla_condition, run_lambda, sup_over_ekh, verify_geometry, BandPlacement,
    GeometryParams, StageControls, StageDepth,
};
use sms_core::grid::{build_mesh, MeshConfig, MetricWeight, ScalarProfile};
use sms_core::nonlinearity::{
    check_hypotheses, default_grid, growth_constants, Nonlinearity, NonlinearityKind,
};
use sms_core::operators::assemble;
use sms_core::spectrum::{
    compute_eigenpairs, group_multiplicities, poincare_margin, rayleigh_minimize_in_complement,
    verify_spectral_axioms, PoincareSide, SpectrumOptions,
};

fn default_controls() -> StageControls {
    StageControls {
        budget: 6,
        seed_count: 8,
        deflation_rounds: 3,
        newton_tol: 1e-9,
        newton_max_iter: 200,
        seed: 42,
    }
}

/// Pinned scan point: lambda_2 minus two percent of the gap to lambda_3.
fn pinned_lambda(ins: &Instance) -> f64 {
    ins.ed.values[1] - 0.02 * (ins.ed.values[2] - ins.ed.values[1])
}

#[test]
fn criterion_01_closed_form_three_node_spectrum() {
    let started = Instant::now();
    let mesh = build_mesh(&MeshConfig {
        dimension: 1,
        half_width: 2.0,
        nodes_per_axis: 3,
        metric_weight: MetricWeight::Constant,
    })
    .unwrap();
    let v = mesh
        .sample_potential(&ScalarProfile::Constant { value: 1.0 })
        .unwrap();
    let fp = assemble(&mesh, &v).unwrap();
    let ed = compute_eigenpairs(&fp, &SpectrumOptions::new(3)).unwrap();

    // Second differences with h = 1 and V = 1: eigenvalues 3 - sqrt(2), 3,
    // 3 + sqrt(2) of tridiag(-1, 3, -1).
    let exact = [3.0 - 2f64.sqrt(), 3.0, 3.0 + 2f64.sqrt()];
    let err = ed
        .values
        .iter()
        .zip(exact.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let secs = started.elapsed().as_secs_f64();
    let pass = err <= 1e-12 && secs < 1.0;
    verdict(
        1,
        pass,
        &format!("closed-form 3-node spectrum, max abs error {err:.3e} (tol 1e-12), {secs:.2} s (budget 1 s)"),
    );
    assert!(pass, "max abs error {err:.3e}, {secs:.2} s");
}

#[test]
fn criterion_02_oscillator_spectrum_matches_oracle() {
    let started = Instant::now();
    let (l, n, m) = (12.0, 2400usize, 6usize);
    let mesh = build_mesh(&MeshConfig {
        dimension: 1,
        half_width: l,
        nodes_per_axis: n,
        metric_weight: MetricWeight::Constant,
    })
    .unwrap();
    let v = mesh
        .sample_potential(&ScalarProfile::HarmonicOffset { offset: 1.0 })
        .unwrap();
    let fp = assemble(&mesh, &v).unwrap();
    let mut opts = SpectrumOptions::new(m);
    opts.tol = 1e-9;
    let ed = compute_eigenpairs(&fp, &opts).unwrap();

    // Independent Sturm-bisection oracle on the same second-difference
    // matrix; the uniform weight h cancels from the generalized problem.
    let (diag, off) = dirichlet_tridiag(l, n, |x| x * x + 1.0);
    let oracle = sturm_eigenvalues(&diag, &off, m);
    let rel_oracle = ed
        .values
        .iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0f64, f64::max);

    let continuum = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
    let rel_continuum = ed
        .values
        .iter()
        .zip(continuum.iter())
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0f64, f64::max);

    let secs = started.elapsed().as_secs_f64();
    let pass = rel_oracle <= 1e-9 && rel_continuum <= 1e-3 && secs < 30.0;
    verdict(
        2,
        pass,
        &format!(
            "oscillator n={n}: vs tridiagonal oracle {rel_oracle:.3e} (tol 1e-9), vs continuum {rel_continuum:.3e} (tol 1e-3), {secs:.1} s (budget 30 s)"
        ),
    );
    assert!(
        pass,
        "oracle rel {rel_oracle:.3e}, continuum rel {rel_continuum:.3e}, {secs:.1} s"
    );
}

#[test]
fn criterion_03_two_d_multiplicity_grouping() {
    let started = Instant::now();
    let mesh = build_mesh(&MeshConfig {
        dimension: 2,
        half_width: 8.0,
        nodes_per_axis: 96,
        metric_weight: MetricWeight::Constant,
    })
    .unwrap();
    let v = mesh
        .sample_potential(&ScalarProfile::HarmonicOffset { offset: 1.0 })
        .unwrap();
    let fp = assemble(&mesh, &v).unwrap();
    let mut opts = SpectrumOptions::new(6);
    opts.tol = 1e-9;
    let ed = compute_eigenpairs(&fp, &opts).unwrap();

    let groups = group_multiplicities(&ed.values, 1e-6);
    let expected = vec![(1usize, 0usize), (2, 1), (4, 2)];
    let splits: Vec<f64> = ed
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs().max(1e-300))
        .collect();
    let secs = started.elapsed().as_secs_f64();
    let pass = groups == expected && secs < 120.0;
    verdict(
        3,
        pass,
        &format!(
            "2-D grouping at cluster tol 1e-6: detected {groups:?}, wanted {expected:?}; adjacent relative gaps {}; {secs:.1} s (budget 120 s)",
            fmt_vec(&splits)
        ),
    );
    assert!(
        pass,
        "groups {groups:?} != {expected:?} at cluster tol 1e-6: the grid operator \
         resolves the continuum triple lambda_4 = lambda_5 = lambda_6 into a \
         symmetry-protected pair plus a singleton separated by a relative gap \
         far above 1e-6, so the exact grouping only emerges as the mesh is \
         refined ({secs:.1} s)"
    );
}

#[test]
fn criterion_04_spectral_axioms() {
    let ins = benchmark();
    let report = verify_spectral_axioms(&ins.ed, &ins.fp);
    let get = |name: &str| -> f64 {
        report
            .checks
            .iter()
            .find(|c| c.name == name)
            .unwrap_or_else(|| panic!("missing spectral check {name}"))
            .value
    };
    let l2_off = get("l2_orthogonality_offdiag");
    let h_off = get("h1v_orthogonality_offdiag");
    let ground_min = get("ground_state_min_value");
    let norm_defect = get("norm_identity_rel_defect");

    // Recompute the first three eigenvalues by deflated Rayleigh
    // minimization, the constructive definition, and compare.
    let mut recompute_rel = 0.0f64;
    for j in 0..3 {
        let (val, _) = rayleigh_minimize_in_complement(&ins.fp, &ins.ed.vectors[..j], 7).unwrap();
        recompute_rel = recompute_rel.max((val - ins.ed.values[j]).abs() / ins.ed.values[j]);
    }

    let pass = l2_off <= 1e-8
        && h_off <= 1e-8
        && ground_min >= -1e-10
        && norm_defect <= 1e-9
        && recompute_rel <= 1e-8;
    verdict(
        4,
        pass,
        &format!(
            "orthogonality off-diagonals {l2_off:.2e}/{h_off:.2e} (tol 1e-8), ground min {ground_min:.2e} (floor -1e-10), norm identity {norm_defect:.2e} (tol 1e-9), deflated recompute {recompute_rel:.2e} (tol 1e-8)"
        ),
    );
    assert!(
        pass,
        "l2 {l2_off:.2e}, h1v {h_off:.2e}, ground {ground_min:.2e}, norm {norm_defect:.2e}, recompute {recompute_rel:.2e}"
    );
}

#[test]
fn criterion_05_poincare_margins() {
    let small = Instance::build(1, 6.0, 80, 5);
    let mut worst = f64::INFINITY;
    for (tag, ins) in [("benchmark", benchmark()), ("small", &small)] {
        let fp = &ins.fp;
        let k = ins.split.k;
        for j in 0..100u64 {
            let raw = pseudo_random_field(fp.dim(), 1000 + j);

            // Inside E_k: the L2 projection onto the first k modes.
            let mut inside = vec![0.0; fp.dim()];
            for e in &ins.ed.vectors[..k] {
                let c = fp.inner_l2(&raw, e).unwrap();
                for (x, y) in inside.iter_mut().zip(e) {
                    *x += c * y;
                }
            }
            let scale = norm_l2(fp, &inside).max(1e-300);
            let inside: Vec<f64> = inside.iter().map(|x| x / scale).collect();
            let upper = poincare_margin(&ins.ed, fp, &inside, k, PoincareSide::Upper).unwrap();

            // Complement of E_k: subtract the same projection.
            let mut outside = raw.clone();
            for e in &ins.ed.vectors[..k] {
                let c = fp.inner_l2(&raw, e).unwrap();
                for (x, y) in outside.iter_mut().zip(e) {
                    *x -= c * y;
                }
            }
            let scale = norm_l2(fp, &outside).max(1e-300);
            let outside: Vec<f64> = outside.iter().map(|x| x / scale).collect();
            let lower = poincare_margin(&ins.ed, fp, &outside, k, PoincareSide::Lower).unwrap();

            worst = worst.min(upper).min(lower);
            assert!(
                upper >= -1e-9 && lower >= -1e-9,
                "{tag} vector {j}: upper {upper:.3e}, lower {lower:.3e}"
            );
        }
    }
    let pass = worst >= -1e-9;
    verdict(
        5,
        pass,
        &format!("two instances, 100 vectors per subspace, worst margin {worst:.3e} (floor -1e-9)"),
    );
    assert!(pass, "worst margin {worst:.3e}");
}

#[test]
fn criterion_06_resolvent_weak_identity() {
    let ins = benchmark();
    let fp = &ins.fp;
    let budget = 10.0 * fp.tol_cg;
    let mut worst = 0.0f64;
    for j in 0..50u64 {
        let h = pseudo_random_field(fp.dim(), 2000 + 2 * j);
        let phi = pseudo_random_field(fp.dim(), 2001 + 2 * j);
        let x = fp.apply_resolvent(&h).unwrap();
        let lhs = fp.inner_h1v(&x, &phi).unwrap();
        let rhs = fp.inner_l2(&h, &phi).unwrap();
        let scale = norm_l2(fp, &h) * norm_l2(fp, &phi);
        let rel = (lhs - rhs).abs() / scale.max(1e-300);
        worst = worst.max(rel);
    }
    let pass = worst <= budget;
    verdict(
        6,
        pass,
        &format!("50 random pairs, worst defect {worst:.3e} (budget 10 cg_tol = {budget:.1e})"),
    );
    assert!(pass, "worst defect {worst:.3e} > {budget:.1e}");
}

#[test]
fn criterion_07_gradient_calculus() {
    let ins = benchmark();
    let fp = &ins.fp;
    let model = ins.model_at(3.0);

    // Duality: the Riesz gradient reproduces the directional derivative.
    let mut worst_duality = 0.0f64;
    for j in 0..5u64 {
        let w = pseudo_random_field(fp.dim(), 3000 + 2 * j);
        let v = pseudo_random_field(fp.dim(), 3001 + 2 * j);
        let dd = model.directional_derivative(&w, &v);
        let g = model.gradient(&w).unwrap();
        let pair = fp.inner_h1v(&g, &v).unwrap();
        let scale = norm_h(fp, &g) * norm_h(fp, &v) + dd.abs();
        worst_duality = worst_duality.max((pair - dd).abs() / scale.max(1e-300));
    }

    // Central differences of the energy converge at second order to the
    // directional derivative; measured order across three halved steps.
    let w = pseudo_random_field(fp.dim(), 3100);
    let v = pseudo_random_field(fp.dim(), 3101);
    let dd = model.directional_derivative(&w, &v);
    let fd_err = |t: f64| -> f64 {
        let plus: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + t * b).collect();
        let minus: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - t * b).collect();
        ((model.energy(&plus) - model.energy(&minus)) / (2.0 * t) - dd).abs()
    };
    let errs = [fd_err(1e-2), fd_err(5e-3), fd_err(2.5e-3)];
    let noise_floor = 1e-12 * dd.abs().max(1.0);
    let orders: Vec<f64> = errs
        .windows(2)
        .map(|e| (e[0] / e[1].max(1e-300)).log2())
        .collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let order_ok = min_order >= 1.8 || errs[2] <= noise_floor;

    let pass = worst_duality <= 1e-8 && order_ok;
    verdict(
        7,
        pass,
        &format!(
            "duality defect {worst_duality:.3e} (tol 1e-8), FD errors {}, measured order {min_order:.2} (floor 1.8)",
            fmt_vec(&errs)
        ),
    );
    assert!(
        pass,
        "duality {worst_duality:.3e}, orders {orders:?}, errs {errs:?}"
    );
}

#[test]
fn criterion_08_hypothesis_checker() {
    let grid = default_grid();

    let power = Nonlinearity::power(2.0, 3.0, 1).unwrap();
    let power_report = check_hypotheses(&power, &grid, 1e-4).unwrap();

    // The identity map has unit slope at zero, so the zero-slope check must
    // reject it while the power kind passes.
    let linear = Nonlinearity {
        kind: NonlinearityKind::Table {
            ts: grid.clone(),
            fs: grid.clone(),
        },
        r: 3.0,
        dimension: 1,
    };
    let linear_report = check_hypotheses(&linear, &grid, 1e-4).unwrap();
    let linear_zero_slope = linear_report
        .checks
        .iter()
        .find(|c| c.name == "zero_slope")
        .expect("zero_slope check")
        .pass;

    let gc = growth_constants(&power, 0.1, &grid).unwrap();
    // Re-verify the four growth inequalities pointwise with the reported
    // constants; slacks are scaled the same way the constructor scales them.
    let (r, eps) = (power.r, 0.1);
    let mut min_slack = f64::INFINITY;
    for &t in &grid {
        let f = power.f(t);
        let big = power.big_f(t);
        let caps = [
            2.0 * eps * t + r * gc.a1_eps * t.powf(r - 1.0) - f,
            eps * t * t + gc.a1_eps * t.powf(r) - big,
            gc.a2 + gc.a2_eps * t.powf(r - 1.0) - f,
            big - (gc.a3 * t.powf(r) - gc.a4),
        ];
        let scales = [
            f.abs().max(1.0),
            big.abs().max(1.0),
            f.abs().max(1.0),
            big.abs().max(1.0),
        ];
        for (c, s) in caps.iter().zip(scales.iter()) {
            min_slack = min_slack.min(c / s);
        }
    }

    let pass = power_report.all_pass
        && !linear_zero_slope
        && !linear_report.all_pass
        && gc.integrated_slack >= -1e-12
        && gc.lower_bound_slack >= -1e-12
        && gc.lower_bound_pass
        && min_slack >= -1e-12;
    verdict(
        8,
        pass,
        &format!(
            "power p=2 r=3 all_pass={}, linear zero_slope pass={} (must be false), growth min slack {min_slack:.3e} (floor -1e-12)",
            power_report.all_pass, linear_zero_slope
        ),
    );
    assert!(pass, "power {power_report:?}, min slack {min_slack:.3e}");
}

#[test]
fn criterion_09_geometry_certificate() {
    // Quadratic regime on a mid-size instance: the optimizer must reproduce
    // the eigen-coordinate closed forms.
    let ins = Instance::build(1, 10.0, 160, 5);
    let (l1, l2) = (ins.ed.values[0], ins.ed.values[1]);
    let lambda = 0.5 * (l1 + l2);
    let model = ins.quadratic_model_at(lambda);
    let (rho, big_r) = (0.7, 2.8);
    let params = GeometryParams {
        rho: Some(rho),
        big_r: Some(big_r),
        budget: 6,
        seed: 42,
    };
    let report = verify_geometry(&model, &ins.split, &params).unwrap();
    let factor = 0.5 * (1.0 - lambda / l2);
    let inf_exact = factor * rho * rho;
    let sphere_exact = factor * big_r * big_r;
    let margin_exact = inf_exact - sphere_exact;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let quad_rel = rel(report.inf_estimate, inf_exact)
        .max(rel(report.sup_sphere, sphere_exact))
        .max((report.margin - margin_exact).abs() / sphere_exact);
    let ball_ok = report.sup_ball.abs() <= 1e-10;

    // Full default instance at the pinned lambda: positive linking margin.
    let bench = benchmark();
    let model = bench.model_at(pinned_lambda(bench));
    let auto = GeometryParams {
        rho: None,
        big_r: None,
        budget: 6,
        seed: 42,
    };
    let full = verify_geometry(&model, &bench.split, &auto).unwrap();

    let pass = quad_rel <= 1e-6 && ball_ok && full.margin > 0.0;
    verdict(
        9,
        pass,
        &format!(
            "quadratic closed forms rel {quad_rel:.3e} (tol 1e-6), ball sup {:.2e} (tol 1e-10), default-instance margin {:.4e} (must be > 0, rho {:.3})",
            report.sup_ball, full.margin, full.rho
        ),
    );
    assert!(
        pass,
        "quad rel {quad_rel:.3e}, ball {:.2e}, margin {:.4e}",
        report.sup_ball, full.margin
    );
}

#[test]
fn criterion_10_projected_gradient_slab_bound() {
    let ins = benchmark();
    let model = ins.model_at(pinned_lambda(ins));
    let ctl = default_controls();

    // The runner's own band [eta', eta''] and inner radius.
    let out = run_lambda(&model, &ins.mesh, &ins.split, &ctl, StageDepth::GradientBound);
    assert_eq!(out.failed_stages, 0, "stage errors: {:?}", out.errors);
    let (lo, hi) = out.eta.expect("band");
    let rho = out.geometry.as_ref().expect("geometry").rho;

    let est = estimate_nabla_condition(&model, &ins.split, lo, hi, 0.25 * rho, 200, 42)
        .unwrap()
        .expect("the band is nonempty so probes must land");
    let positive = est.value > 0.0 && est.feasible_samples > 0;

    // Probe rays are capped at amplitude 1e8 along unit-norm directions, so
    // the quadratic part bounds every reachable energy by 5e15; a slab above
    // that is empty at probe resolution and must come back absent, not zero.
    let empty = estimate_nabla_condition(&model, &ins.split, 1e16, 2e16, 0.25 * rho, 40, 42).unwrap();

    let pass = positive && empty.is_none();
    verdict(
        10,
        pass,
        &format!(
            "inf over slab [{lo:.3e}, {hi:.3e}] = {:.4e} from {} feasible probes of 200 (must be > 0); empty slab absent = {}",
            est.value,
            est.feasible_samples,
            empty.is_none()
        ),
    );
    assert!(pass, "value {:.4e}, feasible {}, empty {:?}", est.value, est.feasible_samples, empty.map(|e| e.value));
}

#[test]
fn criterion_11_vanishing_sup_limit() {
    let ins = benchmark();
    let (l2, l3) = (ins.ed.values[1], ins.ed.values[2]);
    let gap = l3 - l2;
    let fractions = [0.25, 0.1, 0.04, 0.015, 0.005];
    let mut sups = Vec::new();
    for t in fractions {
        let model = ins.model_at(l2 - t * gap);
        let (value, _) = sup_over_ekh(&model, &ins.split).unwrap();
        sups.push(value);
    }
    let all_positive = sups.iter().all(|s| *s > 0.0);
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let final_small = *sups.last().unwrap() < 1e-3;
    let pass = all_positive && decreasing && final_small;
    verdict(
        11,
        pass,
        &format!(
            "sup over the group span at 5 lambdas rising to lambda_2: {}, positive={all_positive}, decreasing={decreasing}, final < 1e-3 = {final_small}",
            fmt_vec(&sups)
        ),
    );
    assert!(pass, "sups {sups:?}");
}

#[test]
fn criterion_12_multiple_solutions_search() {
    let started = Instant::now();
    let ins = benchmark();
    let lambda = pinned_lambda(ins);
    let model = ins.model_at(lambda);
    let ctl = default_controls();
    let out = run_lambda(&model, &ins.mesh, &ins.split, &ctl, StageDepth::Full);

    assert!(out.applicable, "pinned lambda must sit inside the window");
    assert_eq!(out.failed_stages, 0, "stage errors: {:?}", out.errors);

    let nontrivial: Vec<_> = out.classes.iter().filter(|c| c.nontrivial).collect();
    let distinct_ok = out.n_distinct >= 3;
    let worst_residual = nontrivial.iter().map(|c| c.residual).fold(0.0f64, f64::max);
    let residual_ok = !nontrivial.is_empty() && worst_residual <= 1e-8;

    let mut min_pairwise = f64::INFINITY;
    for i in 0..nontrivial.len() {
        for j in (i + 1)..nontrivial.len() {
            min_pairwise = min_pairwise.min(profile_distance(
                &ins.fp,
                &nontrivial[i].representative,
                &nontrivial[j].representative,
            ));
        }
    }
    let pairwise_ok = min_pairwise >= 1e-3;

    let inside = nontrivial
        .iter()
        .filter(|c| c.band == BandPlacement::Inside)
        .count();
    let above = nontrivial
        .iter()
        .filter(|c| c.band == BandPlacement::Above)
        .count();
    let band_ok = inside >= 2 && above >= 1;

    let worst_shell = nontrivial.iter().map(|c| c.shell_ratio).fold(0.0f64, f64::max);
    let decay_ok = !nontrivial.is_empty() && nontrivial.iter().all(|c| c.decay_ok);

    let nonneg = nontrivial.iter().filter(|c| c.nonnegative).count();
    let nonneg_ok = nonneg >= 1;

    let secs = started.elapsed().as_secs_f64();
    let time_ok = secs < 300.0;

    let mut levels: Vec<f64> = nontrivial.iter().map(|c| c.energy).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let pass = distinct_ok && residual_ok && pairwise_ok && band_ok && decay_ok && nonneg_ok && time_ok;
    verdict(
        12,
        pass,
        &format!(
            "search at lambda {lambda:.6}: {} distinct (need >= 3), worst residual {worst_residual:.2e} (tol 1e-8), min pairwise distance {min_pairwise:.3e} (floor 1e-3), levels {} with {inside} in band and {above} above (need 2 + 1), worst shell ratio {worst_shell:.2e} (tol 1e-4), nonnegative classes {nonneg} (need >= 1), {secs:.1} s (budget 300 s)",
            out.n_distinct,
            fmt_vec(&levels)
        ),
    );
    assert!(distinct_ok, "{} distinct", out.n_distinct);
    assert!(residual_ok, "worst residual {worst_residual:.2e}");
    assert!(pairwise_ok, "min pairwise {min_pairwise:.3e}");
    assert!(band_ok, "{inside} in band, {above} above");
    assert!(decay_ok, "worst shell ratio {worst_shell:.2e}");
    assert!(time_ok, "{secs:.1} s");
    assert!(
        nonneg_ok,
        "no nonnegative class among {} found: every located solution changes \
         sign, which is forced at this lambda because testing the stationarity \
         identity against the positive ground mode gives (lambda_1 - lambda) \
         times a positive pairing on one side and a nonnegative term on the \
         other, impossible for a one-signed nontrivial profile above lambda_1",
        nontrivial.len()
    );
}
