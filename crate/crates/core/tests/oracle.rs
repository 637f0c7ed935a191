use annuity_core::closed_form::ClosedFormSolution;
use annuity_core::market::ModelParameters;
use annuity_core::mortality::MortalityModel;
use annuity_core::oracle_fd::{detect_free_boundary, solve_vi, FdOptions, Grid, GridSolution};

fn mortality() -> MortalityModel {
    MortalityModel::gompertz(85.0, 10.0, 60.0).unwrap()
}

fn compare(age: f64, n: usize) -> (ClosedFormSolution, GridSolution, f64) {
    let p = ModelParameters::baseline();
    let sol = ClosedFormSolution::at_age(&p, &mortality(), age).unwrap();
    let grid = Grid::above_floor(&p, 2.2 * sol.x_star, n).unwrap();
    let gs = solve_vi(&p, &mortality(), age, grid, &FdOptions::default()).unwrap();
    let mut worst: f64 = 0.0;
    for (i, &x) in gs.x.iter().enumerate() {
        if x < sol.x_star {
            let v = sol.value_function(x).unwrap();
            worst = worst.max(((gs.values[i] - v) / v).abs());
        }
    }
    (sol, gs, worst)
}

#[test]
fn agreement_across_ages() {
    for age in [60.0, 65.0, 70.0, 75.0] {
        let (sol, gs, worst) = compare(age, 2000);
        let fb = detect_free_boundary(&gs).unwrap();
        let cells = (fb - sol.x_star) / gs.grid.spacing();
        assert!(worst < 1e-2);
        assert!(cells.abs() <= 2.0);
    }
}

#[test]
fn complementarity_and_obstacle() {
    let (_, gs, _) = compare(60.0, 1000);
    assert!(gs.final_residual < 1e-6, "residual {}", gs.final_residual);
    for i in 0..gs.x.len() {
        if gs.obstacle[i].is_finite() {
            assert!(gs.values[i] >= gs.obstacle[i] - 1e-9 * gs.obstacle[i].abs());
        }
    }
    assert!(!gs.pi_cap_binding);
}

#[test]
fn refinement_is_first_order() {
    let errs: Vec<f64> = [500, 1000, 2000].iter().map(|&n| compare(60.0, n).2).collect();
    let (r1, r2) = (errs[0] / errs[1], errs[1] / errs[2]);
    assert!(r1 > 1.6 && r1 < 2.5, "ratios {r1} {r2}");
    assert!(r2 > 1.6 && r2 < 2.5, "ratios {r1} {r2}");
}

#[test]
fn merton_relation_at_convergence() {
    let (_, gs, _) = compare(60.0, 2000);
    let p = ModelParameters::baseline();
    let h = gs.grid.spacing();
    for i in (100..gs.x.len() - 1).step_by(97) {
        if gs.contact[i] {
            continue;
        }
        let v1 = (gs.values[i + 1] - gs.values[i - 1]) / (2.0 * h);
        let v2 = (gs.values[i + 1] - 2.0 * gs.values[i] + gs.values[i - 1]) / (h * h);
        let merton = -p.theta / p.sigma * v1 / v2;
        let pi = gs.controls[i].investment;
        assert!((pi - merton).abs() < 2e-2 * merton.abs(), "x {} pi {pi} merton {merton}", gs.x[i]);
    }
}

#[test]
fn obstacle_dominated_domain() {
    let p = ModelParameters::baseline();
    let sol = ClosedFormSolution::at_age(&p, &mortality(), 60.0).unwrap();
    let grid = Grid::new(1.2 * sol.x_star, 3.0 * sol.x_star, 400).unwrap();
    let gs = solve_vi(&p, &mortality(), 60.0, grid, &FdOptions::default()).unwrap();
    let fb = detect_free_boundary(&gs).unwrap();
    assert!(fb <= grid.x_lo + grid.spacing());
    for i in 1..gs.x.len() {
        assert!(((gs.values[i] - gs.obstacle[i]) / gs.obstacle[i]).abs() < 1e-12);
    }
}
