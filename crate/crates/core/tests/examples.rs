//! Worked examples checked against independent oracles: grid and section
//! searches for planar problems, cofactor determinants, and dense
//! pseudoinverses.

mod common;

use cdfo::bounds::{check_fully_linear_bounds, BoundCheck};
use cdfo::poisedness::{
    check_basis_poisedness, check_poisedness, improve_to_poised, initial_invertible_set, maximize_abs_lagrange,
    LagrangeSearch,
};
use cdfo::problems::{Affine, TestFunction};
use cdfo::solver::ModelState;
use cdfo::subproblems::{criticality_measure, solve_trust_region_step};
use cdfo::*;
use common::*;
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::Rng;

fn search(seed: u64) -> LagrangeSearch {
    LagrangeSearch { seed, ..LagrangeSearch::default() }
}

fn unit_box_member(a: f64, b: f64) -> bool {
    (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)
}

/// Max over `C ∩ B(x, r)` of `max_t |ℓ_t|` by dense grid, for the planar
/// unit box.
fn grid_lambda_unit_box(set: &InterpolationSet) -> (f64, Vec<f64>) {
    let x = set.base().clone();
    let r = set.scale();
    let polys = mfn_lagrange_oracle(&x, set.points());
    let member = |a: f64, b: f64| (a - x[0]).hypot(b - x[1]) <= r * (1.0 + 1e-12) && unit_box_member(a, b);
    let per_t: Vec<f64> = polys
        .iter()
        .map(|(c, g, h)| {
            let f = |a: f64, b: f64| eval_quadratic(*c, g, h, &x, &dvector![a, b]).abs();
            let mut curves = box_edges([0.0, 0.0], [1.0, 1.0]);
            curves.push(circle([x[0], x[1]], r));
            let bbox = ([x[0] - r, x[1] - r], [x[0] + r, x[1] + r]);
            grid_max_2d(&member, &f, bbox, 1e-3 * r, &curves).0
        })
        .collect();
    (per_t.iter().cloned().fold(0.0, f64::max), per_t)
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

#[test]
fn box_ball_projection_matches_section_oracle() {
    let region = ConvexRegion::intersection(vec![
        ConvexRegion::cube(0.0, 1.0, 2).unwrap(),
        ConvexRegion::ball(dvector![0.0, 0.0], 1.0).unwrap(),
    ])
    .unwrap();
    let got = region.project(&dvector![2.0, 2.0]).unwrap().point;
    let member = |a: f64, b: f64| unit_box_member(a, b) && a.hypot(b) <= 1.0;
    let oracle = project_2d(&member, [2.0, 2.0], ([-0.1, -0.1], [1.1, 1.1]));
    assert!((got[0] - oracle[0]).hypot(got[1] - oracle[1]) <= 1e-8, "{got} vs {oracle:?}");
}

#[test]
fn box_projection_with_trust_ball_matches_section_oracle() {
    let region = ConvexRegion::cube(0.0, 1.0, 2).unwrap();
    let got = region.project_onto_ball_intersection(&dvector![0.0, 0.0], 0.5, &dvector![1.0, 1.0]).unwrap().point;
    let member = |a: f64, b: f64| unit_box_member(a, b) && a.hypot(b) <= 0.5;
    let oracle = project_2d(&member, [1.0, 1.0], ([-0.1, -0.1], [1.1, 1.1]));
    assert!((got[0] - oracle[0]).hypot(got[1] - oracle[1]) <= 1e-8, "{got} vs {oracle:?}");
}

// ---------------------------------------------------------------------------
// Regression models
// ---------------------------------------------------------------------------

#[test]
fn regression_lagrange_values_match_pseudoinverse_oracle() {
    let set = InterpolationSet::new(dvector![0.0], 1.0, vec![dvector![-1.0], dvector![0.0], dvector![1.0]]).unwrap();
    let basis = RegressionBasis::build(&set).unwrap();
    let mut rng = rng(31);
    for y in [dvector![0.0], dvector![0.4], dvector![-2.5]] {
        let got = basis.lagrange_values(&y).unwrap();
        let oracle = regression_lagrange_oracle(set.base(), set.points(), &y);
        assert!((&got - &oracle).amax() <= 1e-12, "{got} vs {oracle}");
    }
    // At y = 0 every point carries equal weight.
    let l0 = basis.lagrange_values(&dvector![0.0]).unwrap();
    assert!(l0.iter().all(|v| (v - 1.0 / 3.0).abs() <= 1e-12));
    for _ in 0..20 {
        let y = dvector![rng.random_range(-2.0..2.0)];
        assert!((basis.lagrange_values(&y).unwrap().sum() - 1.0).abs() <= 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Minimum-Frobenius-norm systems
// ---------------------------------------------------------------------------

#[test]
fn one_dimensional_system_determinant_matches_cofactors() {
    let set = InterpolationSet::new(dvector![0.0], 1.0, vec![dvector![-1.0], dvector![0.0], dvector![1.0]]).unwrap();
    let sys = MfnSystem::assemble(&set).unwrap();
    let q = dmatrix![0.5, 0.0, 0.5; 0.0, 0.0, 0.0; 0.5, 0.0, 0.5];
    assert!((sys.q() - &q).amax() <= 1e-15);
    let oracle = cofactor_det(&kkt_matrix(set.base(), set.points()));
    let det = sys.determinant();
    assert!(oracle != 0.0);
    assert_eq!(det.sign, oracle.signum());
    assert!((det.log_abs - oracle.abs().ln()).abs() <= 1e-12);
}

#[test]
fn full_quadratic_sets_are_invertible() {
    let mut rng = rng(32);
    let x = dvector![0.2, -0.1];
    for _ in 0..10 {
        let pts: Vec<DVector<f64>> = (0..6).map(|_| point_in_ball(&mut rng, &x, 1.0)).collect();
        let set = InterpolationSet::new(x.clone(), 1.0, pts).unwrap();
        let oracle = cofactor_det(&kkt_matrix(&x, set.points()));
        let sys = MfnSystem::assemble(&set).unwrap();
        let det = sys.determinant();
        assert_eq!(det.sign, oracle.signum());
        assert!((det.log_abs - oracle.abs().ln()).abs() <= 1e-9);
    }
}

#[test]
fn swap_determinants_match_cofactor_oracle() {
    let mut rng = rng(33);
    let x = dvector![0.3, 0.3];
    let mut checked = 0;
    while checked < 20 {
        let pts: Vec<DVector<f64>> = (0..5).map(|_| point_in_ball(&mut rng, &x, 1.0)).collect();
        let set = InterpolationSet::new(x.clone(), 1.0, pts).unwrap();
        let Ok(sys) = MfnSystem::assemble(&set) else { continue };
        let t = rng.random_range(0..5);
        let y = point_in_ball(&mut rng, &x, 1.0);
        let mut swapped = set.points().to_vec();
        swapped[t] = y.clone();
        let before = cofactor_det(&kkt_matrix(&x, set.points()));
        let after = cofactor_det(&kkt_matrix(&x, &swapped));
        let ratio = sys.swap_ratio(t, &y).unwrap();
        assert!((ratio - after / before).abs() <= 1e-7 * (after / before).abs(), "{ratio} vs {}", after / before);
        let l = sys.lagrange_value(t, &y).unwrap();
        assert!(after.abs() >= l * l * before.abs() - 1e-8 * before.abs());
        checked += 1;
    }
}

// ---------------------------------------------------------------------------
// Lagrange maximization and poisedness
// ---------------------------------------------------------------------------

#[test]
fn lagrange_maximum_matches_grid_oracle() {
    let region = ConvexRegion::cube(0.0, 1.0, 2).unwrap();
    let x = dvector![0.3, 0.6];
    let delta = 0.5;
    let pts = vec![dvector![0.3, 0.6], dvector![0.5, 0.65], dvector![0.35, 0.8], dvector![0.2, 0.5], dvector![0.4, 0.45]];
    let set = InterpolationSet::new(x.clone(), delta, pts).unwrap();
    let basis = Basis::build(ModelKind::MfnQuadratic, &set).unwrap();
    let (_, per_t) = grid_lambda_unit_box(&set);
    for (t, oracle) in per_t.iter().enumerate() {
        let got = maximize_abs_lagrange(&basis, t, &region, &x, delta, None, &search(7)).unwrap();
        assert!((got.value - oracle).abs() <= 1e-4, "t={t}: {} vs {oracle}", got.value);
        assert!(region.contains(&got.point, 1e-9));
        assert!((&got.point - &x).norm() <= delta * (1.0 + 1e-9));
    }
}

#[test]
fn early_exit_returns_first_start_above_threshold() {
    let region = ConvexRegion::cube(0.0, 1.0, 2).unwrap();
    let x = dvector![0.5, 0.5];
    let pts = vec![dvector![0.5, 0.5], dvector![0.7, 0.5], dvector![0.5, 0.7], dvector![0.3, 0.5], dvector![0.5, 0.3]];
    let set = InterpolationSet::new(x.clone(), 0.4, pts).unwrap();
    let basis = Basis::build(ModelKind::MfnQuadratic, &set).unwrap();
    // ℓ_t(y_t) = 1 at the interpolation point, which is among the starts.
    let got = maximize_abs_lagrange(&basis, 1, &region, &x, 0.4, Some(0.5), &search(0)).unwrap();
    assert!(got.early_exit);
    assert!(got.value > 0.5);
}

#[test]
fn initial_set_on_shifted_box_replaces_negative_axis_points() {
    for n in [2, 3] {
        let region = ConvexRegion::cube(0.0, 2.0, n).unwrap();
        let x = DVector::zeros(n);
        let p = 2 * n + 1;
        let (set, replaced) = initial_invertible_set(ModelKind::MfnQuadratic, &region, &x, 1.0, p, &search(1)).unwrap();
        assert!(replaced >= n && replaced <= p, "replaced {replaced}");
        for y in set.points() {
            assert!(region.contains(y, 1e-9));
            assert!(y.norm() <= 1.0 + 1e-9);
        }
        let f = kkt_matrix(&x, set.points());
        let det = if f.nrows() <= 9 { cofactor_det(&f) } else { f.determinant() };
        assert!(det.abs() > 1e-12, "n={n}: det {det}");
    }
}

#[test]
fn initial_set_is_certified_on_canonical_box_instance() {
    let region = ConvexRegion::cube(0.0, 1.0, 2).unwrap();
    let x = dvector![0.0, 0.0];
    let (set, _) = initial_invertible_set(ModelKind::MfnQuadratic, &region, &x, 0.5, 6, &search(2)).unwrap();
    let cert = check_poisedness(ModelKind::MfnQuadratic, &set, &region, 10.0, 1.0, &search(2)).unwrap();
    assert!(cert.verified, "{cert:?}");
    let (grid, _) = grid_lambda_unit_box(&set);
    assert!(grid <= 10.0, "grid max {grid}");
    // A searched value is attained somewhere, so it cannot exceed the true maximum.
    assert!(cert.lambda_observed <= grid + 1e-6, "{} > {grid}", cert.lambda_observed);
}

#[test]
fn near_duplicate_points_are_not_poised() {
    let region = ConvexRegion::cube(0.0, 1.0, 2).unwrap();
    let x = dvector![0.5, 0.5];
    let pts = vec![
        dvector![0.5, 0.5],
        dvector![0.7, 0.5],
        dvector![0.7, 0.5 + 1e-7],
        dvector![0.3, 0.5],
        dvector![0.5, 0.3],
        dvector![0.6, 0.6],
    ];
    let set = InterpolationSet::new(x, 0.4, pts).unwrap();
    let cert = check_poisedness(ModelKind::MfnQuadratic, &set, &region, 10.0, 1.0, &search(3)).unwrap();
    assert!(!cert.verified);
    assert!(cert.lambda_observed > 10.0);
    assert!(check_poisedness(ModelKind::MfnQuadratic, &set, &region, 0.5, 1.0, &search(3)).is_err());
}

#[test]
fn poised_input_is_returned_unchanged() {
    let region = ConvexRegion::cube(0.0, 1.0, 2).unwrap();
    let x = dvector![0.4, 0.2];
    let first = improve_to_poised(ModelKind::MfnQuadratic, None, &region, &x, 0.3, 6, 5.0, &search(4)).unwrap();
    let again = improve_to_poised(ModelKind::MfnQuadratic, Some(&first.set), &region, &x, 0.3, 6, 5.0, &search(4)).unwrap();
    assert!(again.swaps.is_empty());
    assert_eq!(again.set.points(), first.set.points());
}

#[test]
fn clustered_points_are_repaired_and_grid_checked() {
    let region = ConvexRegion::cube(0.0, 1.0, 2).unwrap();
    let x = dvector![0.2, 0.7];
    let delta = 0.4;
    let mut rng = rng(35);
    let set = loop {
        let pts: Vec<DVector<f64>> = (0..6).map(|_| point_in_ball(&mut rng, &x, 0.01)).collect();
        let s = InterpolationSet::new(x.clone(), delta, pts).unwrap();
        if MfnSystem::assemble(&s).is_ok() {
            break s;
        }
    };
    let out = improve_to_poised(ModelKind::MfnQuadratic, Some(&set), &region, &x, delta, 6, 2.0, &search(5)).unwrap();
    assert!(out.certificate.verified);
    assert!(!out.swaps.is_empty());
    let (grid, _) = grid_lambda_unit_box(&out.set);
    assert!(grid <= 2.0 + 1e-3, "grid max {grid}");
}

// ---------------------------------------------------------------------------
// Subproblems
// ---------------------------------------------------------------------------

#[test]
fn box_corner_criticality_matches_section_oracle() {
    let region = ConvexRegion::cube(0.0, 1.0, 2).unwrap();
    let res = criticality_measure(&dvector![1.0, -1.0], &dvector![0.0, 0.0], &region, 1.0).unwrap();
    let member = |a: f64, b: f64| unit_box_member(a, b) && a.hypot(b) <= 1.0;
    let oracle = linear_min_2d(&member, [1.0, -1.0], ([-1.0, -1.0], [1.0, 1.0])).abs();
    assert!((res.value - oracle).abs() <= 1e-4, "{} vs {oracle}", res.value);
}

#[test]
fn convex_model_step_reaches_interior_minimizer() {
    let region = ConvexRegion::cube(-1.0, 1.0, 2).unwrap();
    let x = dvector![0.0, 0.0];
    let h = dmatrix![3.0, 0.5; 0.5, 2.0];
    let g = dvector![0.6, -0.4];
    let model = QuadraticModel::new(0.0, g.clone(), h.clone(), x.clone()).unwrap();
    let exact = -h.lu().solve(&g).unwrap();
    let step = solve_trust_region_step(&model, &x, &region, 1.0, 0.1).unwrap();
    assert!((&step.step - &exact).norm() <= 1e-4);
    assert!(step.satisfied_cauchy);
}

// ---------------------------------------------------------------------------
// Error bounds
// ---------------------------------------------------------------------------

struct SquaredNorm;

impl TestFunction for SquaredNorm {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        x.norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x * 2.0
    }
    fn gradient_lipschitz(&self) -> f64 {
        2.0
    }
}

#[test]
fn squared_norm_satisfies_interpolation_bounds() {
    let region = ConvexRegion::cube(-1.0, 1.0, 2).unwrap();
    let x = dvector![0.3, -0.2];
    let lambda = 5.0;
    let out = improve_to_poised(ModelKind::MfnQuadratic, None, &region, &x, 0.5, 6, lambda, &search(6)).unwrap();
    let f = SquaredNorm;
    let values: Vec<f64> = out.set.points().iter().map(|y| f.value(y)).collect();
    let model = Basis::build(ModelKind::MfnQuadratic, &out.set).unwrap().fit(&values).unwrap();
    let opts = BoundCheck { kind: ModelKind::MfnQuadratic, lipschitz: 2.0, lambda, beta: 1.0, samples: 1000, seed: 6 };
    let report = check_fully_linear_bounds(&out.set, &model, &f, &region, &opts).unwrap();
    assert!(report.max_ratio() <= 1.0, "{report:?}");
    // Six points in the plane give full interpolation of a quadratic.
    assert!(report.max_value_error <= 1e-10);
}

#[test]
fn affine_objective_has_zero_bound_ratios() {
    let region = ConvexRegion::ball(dvector![0.0, 0.0], 1.0).unwrap();
    let x = dvector![0.1, 0.1];
    let f = Affine { g: dvector![1.5, -2.0], c: 0.25 };
    for kind in [ModelKind::LinearRegression, ModelKind::MfnQuadratic] {
        let p = kind.default_points(2);
        let out = improve_to_poised(kind, None, &region, &x, 0.3, p, 4.0, &search(8)).unwrap();
        let values: Vec<f64> = out.set.points().iter().map(|y| f.value(y)).collect();
        let model = Basis::build(kind, &out.set).unwrap().fit(&values).unwrap();
        let opts = BoundCheck { kind, lipschitz: 0.0, lambda: 4.0, beta: 1.0, samples: 200, seed: 8 };
        let report = check_fully_linear_bounds(&out.set, &model, &f, &region, &opts).unwrap();
        assert!(report.max_value_error <= 1e-12 && report.max_gradient_error <= 1e-12, "{report:?}");
    }
}

// ---------------------------------------------------------------------------
// Model certification and the solver
// ---------------------------------------------------------------------------

#[test]
fn certification_tracks_set_changes() {
    let region = ConvexRegion::cube(0.0, 1.0, 2).unwrap();
    let x = dvector![0.5, 0.5];
    let out = improve_to_poised(ModelKind::MfnQuadratic, None, &region, &x, 0.2, 5, 10.0, &search(9)).unwrap();
    let values: Vec<f64> = out.set.points().iter().map(|y| y.norm_squared()).collect();
    let set = out.set.clone().with_values(values).unwrap();
    let mut state = ModelState::new(ModelKind::MfnQuadratic, &region, set, 10.0, search(9)).unwrap();
    assert!(state.is_fully_linear().unwrap());
    // Moving the base far from the samples breaks the distance bound.
    state.recenter(dvector![0.9, 0.9], 0.2).unwrap();
    assert!(!state.is_fully_linear().unwrap());
}

#[test]
fn successful_steps_expand_the_radius() {
    let region = ConvexRegion::cube(-2.0, 2.0, 2).unwrap();
    let cfg = SolverConfig { budget: 80, ..SolverConfig::default() };
    let mut f = |y: &DVector<f64>| (y[0] - 1.0).powi(2) + 2.0 * (y[1] + 0.5).powi(2);
    let out = solve(&mut f, &region, &dvector![-1.5, 1.5], &cfg).unwrap();
    let rows = &out.record.rows;
    let mut successes = 0;
    for w in rows.windows(2) {
        if w[0].step_kind == StepKind::Successful {
            successes += 1;
            assert_eq!(w[1].delta, (cfg.gamma_inc * w[0].delta).min(cfg.delta_max));
        }
    }
    assert!(successes > 0);
}

#[test]
fn regression_fit_of_parabola_matches_normal_equations() {
    let set = InterpolationSet::new(dvector![0.0], 1.0, vec![dvector![-1.0], dvector![0.0], dvector![1.0]]).unwrap();
    let fit = RegressionBasis::build(&set).unwrap().fit(&[1.0, 0.0, 1.0]).unwrap();
    // Normal equations MᵀM [c; g] = Mᵀ f solved by Cramer's rule.
    let m = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 1.0, 0.0, 1.0, 1.0]);
    let a = m.transpose() * &m;
    let b = m.transpose() * dvector![1.0, 0.0, 1.0];
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let c = (b[0] * a[(1, 1)] - a[(0, 1)] * b[1]) / det;
    let g = (a[(0, 0)] * b[1] - b[0] * a[(1, 0)]) / det;
    assert!((fit.model.c - c).abs() <= 1e-14 && (fit.model.g[0] - g).abs() <= 1e-14);
    assert!((c - 2.0 / 3.0).abs() <= 1e-14);
}

#[test]
fn unverified_basis_check_reports_geometry() {
    let region = ConvexRegion::whole_space(2).unwrap();
    let pts = vec![dvector![0.0, 0.0], dvector![1.0, 0.0], dvector![0.0, 1.0], dvector![2.0, 2.0]];
    let set = InterpolationSet::new(dvector![0.0, 0.0], 1.0, pts).unwrap();
    let basis = Basis::build(ModelKind::LinearRegression, &set).unwrap();
    let cert = check_basis_poisedness(&basis, &region, 10.0, 1.0, &search(10)).unwrap();
    assert!(!cert.geometry_ok && !cert.verified);
}
