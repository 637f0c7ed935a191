//! Finite-difference solver for the stationary HJB variational inequality
//!
//! ```text
//! max{ sup_{c,b,π} [u1(c,b) + (rx + σθπ - c + w(b̄ - b))V' + ½σ²π²V''] - ρV,  G - V } = 0
//! ```
//!
//! on a uniform wealth grid. Nothing here uses the closed form, so the two
//! can be compared.
//!
//! Near the solvency floor V behaves like (x - floor)^(1-γ), which no
//! polynomial stencil resolves. The unknown is therefore W = V·y^(γ-1) with
//! y = x - floor, which tends to a constant at the floor and takes a
//! homogeneous Neumann condition there. The top node carries V = G.
//!
//! Each outer step improves the controls from the current iterate (upwind
//! V' by drift sign, closed-form π from the quadratic), then takes an
//! implicit pseudo-time step whose linear complementarity problem against
//! the obstacle is solved exactly by active-set (Howard) iteration. The
//! pseudo-time step grows geometrically so early iterates stay bounded.

use crate::closed_form::{retired_value, rho_at_age, Regime};
use crate::market::{conversion_factors, derive_gamma1, MarketError, ModelParameters};
use crate::mortality::MortalityModel;
use crate::policy::PolicyPoint;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no convergence after {iterations} iterations (last update {update:e})")]
    NonConvergence { iterations: usize, update: f64 },
    #[error("value lost concavity on {nodes} continuation nodes")]
    IllPosed { nodes: usize },
    #[error("the obstacle never binds below the top of the grid")]
    NoContact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, n_points: usize) -> Result<Self, OracleError> {
        if n_points < 200 {
            return Err(OracleError::InvalidGrid(format!("need at least 200 points, got {n_points}")));
        }
        if !(x_hi > x_lo) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(OracleError::InvalidGrid(format!("empty range [{x_lo}, {x_hi}]")));
        }
        Ok(Self { x_lo, x_hi, n_points })
    }

    /// Grid from 1% of the floor's magnitude above it up to `x_hi`.
    pub fn above_floor(params: &ModelParameters, x_hi: f64, n_points: usize) -> Result<Self, OracleError> {
        let floor = params.solvency_floor();
        Self::new(floor + 0.01 * floor.abs().max(1.0), x_hi, n_points)
    }

    pub fn spacing(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_lo + self.spacing() * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Relative sup-norm update at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Investment is kept within [0, pi_cap (x - floor)].
    pub pi_cap: f64,
    pub dt_initial: f64,
    pub dt_max: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 500, pi_cap: 3.0, dt_initial: 0.5, dt_max: 1e6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub grid: Grid,
    pub rho_eff: f64,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    /// G(x), -inf where x <= 0.
    pub obstacle: Vec<f64>,
    pub contact: Vec<bool>,
    pub controls: Vec<PolicyPoint>,
    pub free_boundary_index: Option<usize>,
    pub iterations: usize,
    /// Largest complementarity residual min(|HJB residual|, V - G), scaled.
    pub final_residual: f64,
    /// Whether the investment cap was active anywhere at convergence.
    pub pi_cap_binding: bool,
}

impl GridSolution {
    /// Dumps x, V, G, c, b, pi as CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,V,G,c,b,pi")?;
        for i in 0..self.x.len() {
            let p = &self.controls[i];
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.x[i], self.values[i], self.obstacle[i], p.consumption, p.labor, p.investment
            )?;
        }
        Ok(())
    }
}

struct Model {
    p: ModelParameters,
    gamma1: f64,
    kappa: f64,
    k_v: f64,
    k_post: f64,
}

impl Model {
    fn utility(&self, c: f64, b: f64) -> f64 {
        crate::closed_form::utility_u1(self.gamma1, self.p.gamma, c, b)
    }

    /// Consumption and labor maximising u1(c, b) - (c - w(b̄ - b))·v1.
    fn controls(&self, v1: f64) -> (f64, f64) {
        let c = (v1 / self.k_v).powf(-1.0 / self.p.gamma);
        let b = self.kappa * c;
        if b > self.p.b_post {
            ((v1 / self.k_post).powf(-1.0 / self.gamma1), self.p.b_post)
        } else {
            (c, b)
        }
    }
}

/// Solves the variational inequality with δ frozen at `eval_age`.
pub fn solve_vi(
    params: &ModelParameters,
    mortality: &MortalityModel,
    eval_age: f64,
    grid: Grid,
    opts: &FdOptions,
) -> Result<GridSolution, OracleError> {
    solve_vi_at_rate(params, rho_at_age(params, mortality, eval_age), grid, opts)
}

pub fn solve_vi_at_rate(
    params: &ModelParameters,
    rho: f64,
    grid: Grid,
    opts: &FdOptions,
) -> Result<GridSolution, OracleError> {
    params.validate()?;
    let floor = params.solvency_floor();
    if !(grid.x_lo > floor) {
        return Err(OracleError::InvalidGrid(format!("x_lo = {} is not above the floor {floor}", grid.x_lo)));
    }
    let gamma1 = derive_gamma1(params)?;
    let (k, _) = conversion_factors(params, rho)?;
    let kappa = (1.0 - params.alpha) / (params.wage * params.alpha);
    let m = Model {
        p: *params,
        gamma1,
        kappa,
        k_v: kappa.powf(gamma1 - params.gamma),
        k_post: params.b_post.powf(gamma1 - params.gamma),
    };
    let (r, sig, th, gm, w) = (params.r, params.sigma, params.theta, params.gamma, params.wage);
    let (b_bar, b_post) = (params.b_bar, params.b_post);

    let n = grid.n_points;
    let h = grid.spacing();
    let x = grid.nodes();
    let y: Vec<f64> = x.iter().map(|&xi| xi - floor).collect();
    let sc: Vec<f64> = y.iter().map(|&yi| yi.powf(gm - 1.0)).collect();
    let obstacle: Vec<f64> =
        x.iter().map(|&xi| if xi > 0.0 { retired_value(k, gamma1, rho, xi) } else { f64::NEG_INFINITY }).collect();
    let w_ob: Vec<f64> = (0..n).map(|i| obstacle[i] * sc[i]).collect();

    // Start from consuming 2% of distance to the floor forever.
    let mut c: Vec<f64> = y.iter().map(|&yi| 0.02 * yi).collect();
    let mut b: Vec<f64> = c.iter().map(|&ci| kappa * ci).collect();
    let mut wv: Vec<f64> = (0..n).map(|i| (m.utility(c[i], b[i]) / rho * sc[i]).max(w_ob[i])).collect();
    let mut pi = vec![0.0; n];

    let mut diag = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut dn = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut kill = vec![0.0; n];
    let mut flow = vec![0.0; n];
    let mut stop = vec![false; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut update = f64::INFINITY;

    for it in 0..opts.max_iter {
        iterations = it + 1;
        let dv = |i: usize, wp: f64, wv: &[f64]| (wp + (1.0 - gm) * wv[i] / y[i]) / sc[i];
        for i in 0..n {
            let wf = if i + 1 < n { (wv[i + 1] - wv[i]) / h } else { (wv[i] - wv[i - 1]) / h };
            let wb = if i > 0 { (wv[i] - wv[i - 1]) / h } else { 0.0 };
            let wpp = {
                let j = i.clamp(1, n - 2);
                (wv[j + 1] - 2.0 * wv[j] + wv[j - 1]) / (h * h)
            };
            let (vf, vb) = (dv(i, wf, &wv), dv(i, wb, &wv));
            let wc = 0.5 * (wf + wb);
            let vc = if i == 0 { vb } else { dv(i, wc, &wv) };
            let vpp = (wpp + 2.0 * (1.0 - gm) * wc / y[i] - gm * (1.0 - gm) * wv[i] / (y[i] * y[i])) / sc[i];
            let cap = opts.pi_cap * y[i];
            pi[i] = if vpp < 0.0 { (-th / sig * vc / vpp).clamp(0.0, cap) } else { cap };

            let base = r * x[i] + pi[i] * sig * th;
            let held = (c[i], b[i]);
            let pick = |v1: f64| if v1 > 0.0 { m.controls(v1) } else { held };
            let (cf, bf) = pick(vf);
            let (cb, bb) = pick(vb);
            let mu_f = base - cf + w * (b_bar - bf);
            let mu_b = base - cb + w * (b_bar - bb);
            let (ci, bi, mu) = if mu_f > 0.0 {
                (cf, bf, mu_f)
            } else if mu_b < 0.0 {
                (cb, bb, mu_b)
            } else {
                // Zero-drift consumption.
                let cz = (base + w * b_bar) / (1.0 + w * kappa);
                if kappa * cz > b_post {
                    (base + w * (b_bar - b_post), b_post, 0.0)
                } else {
                    (cz, kappa * cz, 0.0)
                }
            };
            c[i] = ci.max(1e-300);
            b[i] = bi.max(1e-300);

            let diff = 0.5 * sig * sig * pi[i] * pi[i];
            let a = mu + 2.0 * (1.0 - gm) * diff / y[i];
            kill[i] = rho - mu * (1.0 - gm) / y[i] + diff * gm * (1.0 - gm) / (y[i] * y[i]);
            up[i] = a.max(0.0) / h + diff / (h * h);
            dn[i] = (-a).max(0.0) / h + diff / (h * h);
            debug_assert!(up[i] >= 0.0 && dn[i] >= 0.0, "upwind coefficients must be nonnegative");
            flow[i] = m.utility(c[i], b[i]) * sc[i];
        }
        let dt = opts.dt_max.min(opts.dt_initial * 1.5f64.powi(it as i32));
        for i in 0..n {
            diag[i] = 1.0 / dt + kill[i] + up[i] + dn[i];
            rhs[i] = flow[i] + wv[i] / dt;
        }
        // Neumann row at the floor end, obstacle row at the top.
        diag[0] = 1.0;
        up[0] = 1.0;
        dn[0] = 0.0;
        rhs[0] = 0.0;
        diag[n - 1] = 1.0;
        dn[n - 1] = 0.0;
        up[n - 1] = 0.0;
        rhs[n - 1] = w_ob[n - 1];

        let next = solve_lcp(&diag, &up, &dn, &rhs, &w_ob, &mut stop);
        update = next.iter().zip(&wv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = next.iter().map(|v| v.abs()).fold(0.0, f64::max);
        wv = next;
        if !wv.iter().all(|v| v.is_finite()) {
            return Err(OracleError::NonConvergence { iterations, update: f64::NAN });
        }
        if update < opts.tol * scale && dt >= opts.dt_max {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(OracleError::NonConvergence { iterations, update });
    }

    let values: Vec<f64> = (0..n).map(|i| wv[i] / sc[i]).collect();
    // Steady HJB row residual, scaled by the flow term.
    let flow_scale = flow.iter().map(|f| f.abs()).fold(0.0, f64::max);
    let mut final_residual: f64 = 0.0;
    let mut concavity_losses = 0;
    for i in 1..n - 1 {
        let row = (kill[i] + up[i] + dn[i]) * wv[i] - dn[i] * wv[i - 1] - up[i] * wv[i + 1] - flow[i];
        let gap = (wv[i] - w_ob[i]) / flow_scale;
        final_residual = final_residual.max((row.abs() / flow_scale).min(gap.max(0.0)));
        if !stop[i] {
            let vpp = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
            if vpp >= 0.0 {
                concavity_losses += 1;
            }
        }
    }
    if concavity_losses > n / 100 {
        return Err(OracleError::IllPosed { nodes: concavity_losses });
    }

    let mut pi_cap_binding = false;
    let controls: Vec<PolicyPoint> = (0..n)
        .map(|i| {
            if stop[i] {
                PolicyPoint {
                    consumption: rho.powf(1.0 / gamma1) * k.powf((gamma1 - 1.0) / gamma1) * x[i],
                    labor: 0.0,
                    investment: th / (sig * gamma1) * x[i],
                    regime: Regime::Retired,
                    clamped: false,
                }
            } else {
                pi_cap_binding |= pi[i] >= opts.pi_cap * y[i];
                PolicyPoint {
                    consumption: c[i],
                    labor: b[i],
                    investment: pi[i],
                    regime: if b[i] >= b_post { Regime::Corner } else { Regime::Interior },
                    clamped: false,
                }
            }
        })
        .collect();

    let mut gs = GridSolution {
        grid,
        rho_eff: rho,
        x,
        values,
        obstacle,
        contact: stop,
        controls,
        free_boundary_index: None,
        iterations,
        final_residual,
        pi_cap_binding,
    };
    gs.free_boundary_index = boundary_index(&gs);
    Ok(gs)
}

/// Solves min(A W - f, W - W_ob) = 0 for a tridiagonal A by active-set
/// iteration; `stop` carries the active set in and out. Node 0 never stops
/// and the last node always does.
fn solve_lcp(diag: &[f64], up: &[f64], dn: &[f64], rhs: &[f64], w_ob: &[f64], stop: &mut [bool]) -> Vec<f64> {
    let n = diag.len();
    stop[n - 1] = true;
    let mut sol = vec![0.0; n];
    let (mut d, mut u, mut l, mut f) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..500 {
        for i in 0..n {
            if stop[i] {
                (d[i], u[i], l[i], f[i]) = (1.0, 0.0, 0.0, w_ob[i]);
            } else {
                (d[i], u[i], l[i], f[i]) = (diag[i], up[i], dn[i], rhs[i]);
            }
        }
        thomas(&l, &d, &u, &f, &mut sol);
        let mut changed = false;
        for i in 1..n - 1 {
            let row = diag[i] * sol[i] - dn[i] * sol[i - 1] - up[i] * sol[i + 1] - rhs[i];
            let s = sol[i] - w_ob[i] < row;
            changed |= s != stop[i];
            stop[i] = s;
        }
        if !changed {
            break;
        }
    }
    sol
}

/// Row i reads -l[i] W[i-1] + d[i] W[i] - u[i] W[i+1] = f[i].
fn thomas(l: &[f64], d: &[f64], u: &[f64], f: &[f64], out: &mut [f64]) {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = -u[0] / d[0];
    dp[0] = f[0] / d[0];
    for i in 1..n {
        let m = d[i] + l[i] * cp[i - 1];
        cp[i] = -u[i] / m;
        dp[i] = (f[i] + l[i] * dp[i - 1]) / m;
    }
    out[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = dp[i] - cp[i] * out[i + 1];
    }
}

fn boundary_index(gs: &GridSolution) -> Option<usize> {
    let n = gs.x.len();
    // The top node is pinned to G, so it does not count as contact.
    let last_free = (0..n - 1).rev().find(|&i| !gs.contact[i]);
    match last_free {
        None => Some(0),
        Some(j) if j + 1 < n - 1 => Some(j + 1),
        Some(_) => None,
    }
}

/// Smallest grid wealth from which the obstacle binds all the way up.
pub fn detect_free_boundary(gs: &GridSolution) -> Result<f64, OracleError> {
    gs.free_boundary_index.map(|i| gs.x[i]).ok_or(OracleError::NoContact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::ClosedFormSolution;

    fn mortality() -> MortalityModel {
        MortalityModel::gompertz(85.0, 10.0, 60.0).unwrap()
    }

    #[test]
    fn thomas_solves_small_system() {
        let (l, d, u) = ([0.0, 1.0, 1.0], [4.0, 4.0, 4.0], [1.0, 1.0, 0.0]);
        let f = [3.0, 2.0, 3.0];
        let mut out = [0.0; 3];
        thomas(&l, &d, &u, &f, &mut out);
        for i in 0..3 {
            let mut row = d[i] * out[i];
            if i > 0 {
                row -= l[i] * out[i - 1];
            }
            if i < 2 {
                row -= u[i] * out[i + 1];
            }
            assert!((row - f[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0.0, 1.0, 199).is_err());
        assert!(Grid::new(1.0, 1.0, 500).is_err());
        let p = ModelParameters::baseline();
        let g = Grid::new(-600.0, 100.0, 500).unwrap();
        assert!(matches!(solve_vi(&p, &mortality(), 60.0, g, &FdOptions::default()), Err(OracleError::InvalidGrid(_))));
    }

    #[test]
    fn baseline_agrees_with_closed_form() {
        let p = ModelParameters::baseline();
        let sol = ClosedFormSolution::at_age(&p, &mortality(), 60.0).unwrap();
        let grid = Grid::above_floor(&p, 2.2 * sol.x_star, 1000).unwrap();
        let gs = solve_vi(&p, &mortality(), 60.0, grid, &FdOptions::default()).unwrap();
        let fb = detect_free_boundary(&gs).unwrap();
        assert!((fb - sol.x_star).abs() <= 2.0 * grid.spacing(), "fb {fb} vs {}", sol.x_star);
        let mut worst: f64 = 0.0;
        for (i, &xi) in gs.x.iter().enumerate() {
            if xi < sol.x_star {
                let v = sol.value_function(xi).unwrap();
                worst = worst.max(((gs.values[i] - v) / v).abs());
            }
        }
        assert!(worst < 1e-3, "max relative error {worst}");
    }

    #[test]
    fn truncated_domain_has_no_contact() {
        let p = ModelParameters::baseline();
        let grid = Grid::above_floor(&p, 100.0, 400).unwrap();
        let gs = solve_vi(&p, &mortality(), 60.0, grid, &FdOptions::default()).unwrap();
        assert!(matches!(detect_free_boundary(&gs), Err(OracleError::NoContact)));
    }
}
