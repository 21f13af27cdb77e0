//! Acceptance suite: one test per criterion, each printing a pass line with
//! the measured numbers. Tolerances are pinned in the asserts.

use mhd_shock::background::{
    admissible_exit_range, background_rh_residual, branch_regimes, coefficients_at,
    solve_background, verify_super_alfvenic, Background,
};
use mhd_shock::cal::bg_profile;
use mhd_shock::config::RunConfig;
use mhd_shock::driver::{solve_problem_s, Workbench};
use mhd_shock::elliptic::{solve_divcurl, solve_phi, solve_pi, Sources};
use mhd_shock::field::{Grid, Modal2, Modal3, Parity};
use mhd_shock::jump::solve_normal_shock;
use mhd_shock::state::{derived_quantities, FlowState, Regime, ThermoParams};
use mhd_shock::transport::trace_single;
use mhd_shock::upstream::march_supersonic;
use std::time::Instant;

/// Deterministic pseudo-random stream for the randomized criteria.
struct Lcg(u64);

impl Lcg {
    fn next_f(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 33) as f64 / (1u64 << 31) as f64
    }
    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f()
    }
}

fn random_background(rng: &mut Lcg, gamma: f64) -> (Background, FlowState) {
    let th = ThermoParams::new(gamma).unwrap();
    let rho = rng.range(0.6, 1.6);
    let p = rng.range(0.6, 1.6);
    let mach = rng.range(1.6, 2.8);
    let s = p / rho.powf(gamma);
    let c = (gamma * p / rho).sqrt();
    // build once without a field to locate the density maximum, then pick a
    // field strength safely inside the super-Alfvenic bound
    let inflow0 = FlowState::radial(mach * c, p, s, 0.0);
    let (p1, p2, _) = admissible_exit_range(&inflow0, 1.0, 2.0, th).unwrap();
    let pe = p1 + rng.range(0.25, 0.75) * (p2 - p1);
    let bg0 = solve_background(&inflow0, pe, 1.0, 2.0, th).unwrap();
    let mut rho_max: f64 = 0.0;
    for i in 0..=100 {
        let rm = 1.0 + (bg0.rs - 1.0) * i as f64 / 100.0;
        let rp = bg0.rs + (2.0 - bg0.rs) * i as f64 / 100.0;
        rho_max = rho_max
            .max(bg0.state_minus(rm).unwrap().rho(th))
            .max(bg0.state_plus(rp).unwrap().rho(th));
    }
    let kappa = (rng.range(0.1, 0.7) / rho_max).sqrt();
    let inflow = FlowState::radial(mach * c, p, s, kappa);
    let bg = solve_background(&inflow, pe, 1.0, 2.0, th).unwrap();
    (bg, inflow)
}

fn base_toml(eps: f64, n1: usize, n2: usize, n3: usize) -> String {
    format!(
        r#"
[geometry]
r1 = 1.0
r2 = 2.0
theta0 = 0.5

[gas]
gamma = 1.4

[background]
inflow_u1 = 2.6
inflow_rho = 1.0
inflow_p = 1.0
kappa = 0.25
exit_fraction = 0.5

[solver]
epsilon = {eps}
n1 = {n1}
n2 = {n2}
n3 = {n3}
upstream_stations = 129
"#
    )
}

struct Run {
    report: mhd_shock::driver::RunReport,
    v7: Modal2,
    final_norm: f64,
}

fn solve(cfg: &RunConfig, with_residuals: bool) -> Run {
    let bg = cfg.build_background().unwrap();
    let grid = cfg.grid(&bg);
    let ugrid = cfg.upstream_grid();
    let inlet = cfg.inlet_data(&ugrid).unwrap();
    let upstream = march_supersonic(&bg, &inlet, &ugrid, cfg.march_options()).unwrap();
    let wb = Workbench::new(&grid, &bg, &upstream).unwrap();
    let opts = cfg.solver_options(&grid);
    let (it, report) = solve_problem_s(&wb, &opts, with_residuals).unwrap();
    let final_norm = report.final_norm;
    Run { report, v7: it.v7, final_norm }
}

#[test]
fn criterion_01_background_exactness() {
    let mut rng = Lcg(0x5eed_0001);
    for gamma in [1.4, 5.0 / 3.0, 2.0] {
        let t0 = Instant::now();
        let (bg, _) = random_background(&mut rng, gamma);
        let elapsed = t0.elapsed();
        let th = bg.thermo;
        // mass flux constant on both branches
        for i in 0..=50 {
            let rm = 1.0 + (bg.rs - 1.0) * i as f64 / 50.0;
            let rp = bg.rs + (2.0 - bg.rs) * i as f64 / 50.0;
            let sm = bg.state_minus(rm).unwrap();
            let sp = bg.state_plus(rp).unwrap();
            assert!((rm * sm.rho(th) * sm.u1 - bg.m).abs() <= 1e-12 * bg.m);
            assert!((rp * sp.rho(th) * sp.u1 - bg.m).abs() <= 1e-12 * bg.m);
        }
        assert!(background_rh_residual(&bg).unwrap() <= 1e-12);
        assert!(bg.s_plus > bg.s_minus);
        let exit = bg.state_plus(2.0).unwrap();
        assert!((exit.p - bg.p_exit).abs() <= 1e-8 * bg.p_exit);
        assert!(elapsed.as_secs_f64() < 1.0, "background solve took {elapsed:?}");
        println!(
            "criterion 1 (gamma = {gamma:.4}): PASS  rs = {:.6}, rh residual {:.2e}, {} ms",
            bg.rs,
            background_rh_residual(&bg).unwrap(),
            elapsed.as_millis()
        );
    }
}

#[test]
fn criterion_02_normal_shock_oracle() {
    let th = ThermoParams::new(1.4).unwrap();
    let p = 1.0 / 1.4;
    for kappa in [0.0, 0.3] {
        let up = FlowState::radial(2.0, p, p, kappa);
        let down = solve_normal_shock(&up, th).unwrap();
        let du = derived_quantities(&up, th).unwrap();
        let dd = derived_quantities(&down, th).unwrap();
        assert!((dd.rho / du.rho - 8.0 / 3.0).abs() <= 1e-10);
        assert!((down.p / up.p - 4.5).abs() <= 1e-10);
        assert!((dd.mach2 - 1.0 / 3.0).abs() <= 1e-10);
    }
    println!("criterion 2: PASS  rho ratio 8/3, pressure ratio 4.5, M2^2 = 1/3 (field-independent)");
}

#[test]
fn criterion_03_coefficient_positivity() {
    let mut rng = Lcg(0x5eed_0003);
    let gammas = [1.4, 5.0 / 3.0, 2.0];
    let mut checked = 0;
    for k in 0..12 {
        let (bg, _) = random_background(&mut rng, gammas[k % 3]);
        let (ok, _) = verify_super_alfvenic(&bg, bg.kappa).unwrap();
        assert!(ok, "background {k} not super-Alfvenic");
        let co = coefficients_at(&bg).unwrap();
        for (name, v) in [
            ("a0", co.a0), ("a1", co.a1), ("a2", co.a2), ("a3", co.a3), ("a4", co.a4),
        ] {
            assert!(v > 0.0, "{name} = {v} on background {k}");
        }
        for i in 0..100 {
            let r = bg.rs + (bg.r2 - bg.rs) * i as f64 / 99.0;
            let pt = bg.point_plus(r).unwrap();
            assert!(
                pt.d0 > 0.0 && pt.d1 > 0.0 && pt.d > 0.0 && pt.d4 > 0.0,
                "coefficient positivity violated at r = {r} on background {k}"
            );
        }
        checked += 1;
    }
    println!("criterion 3: PASS  {checked} random super-Alfvenic backgrounds, all coefficients positive");
}

#[test]
fn criterion_04_regime_classification() {
    let mut rng = Lcg(0x5eed_0004);
    for _ in 0..6 {
        let (bg, _) = random_background(&mut rng, 1.4);
        let (ok, _) = verify_super_alfvenic(&bg, bg.kappa).unwrap();
        assert!(ok);
        let (up, dn) = branch_regimes(&bg, 100).unwrap();
        assert!(up.iter().all(|r| *r == Regime::PurelyHyperbolic));
        assert!(dn.iter().all(|r| *r == Regime::EllipticHyperbolicMixed));
    }
    println!("criterion 4: PASS  upstream purely hyperbolic, downstream elliptic-hyperbolic mixed");
}

#[test]
fn criterion_05_exact_fixed_point() {
    let t0 = Instant::now();
    let cfg = RunConfig::from_toml(&base_toml(0.0, 64, 8, 8)).unwrap();
    let run = solve(&cfg, true);
    let elapsed = t0.elapsed();
    assert_eq!(run.report.iterations.len(), 1, "converged in one application");
    assert!(run.final_norm <= 1e-12, "norm {}", run.final_norm);
    let res = run.report.residuals.as_ref().unwrap();
    let mut worst = res.pi_norm;
    for v in res.mhd.iter().chain(res.rh.iter()) {
        worst = worst.max(*v);
    }
    worst = worst
        .max(res.front_f2)
        .max(res.front_f3)
        .max(res.deformation)
        .max(res.curl1_minus_j1)
        .max(res.j2_relation)
        .max(res.j3_relation)
        .max(res.scalar_transport);
    assert!(worst <= 1e-12, "residuals {res:?}");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 5: PASS  1 iteration, norm {:.2e}, worst residual {:.2e}, {} ms",
        run.final_norm,
        worst,
        elapsed.as_millis()
    );
}

#[test]
fn criterion_06_one_dimensional_consistency() {
    // uniform total-pressure perturbation against the shifted 1D family
    let mut discrepancy = Vec::new();
    let eps0 = 1e-3;
    for eps in [eps0, 0.5 * eps0] {
        let mut cfg = RunConfig::from_toml(&base_toml(eps, 64, 8, 8)).unwrap();
        cfg.exit.te_modes.push(mhd_shock::config::TeEntry { k2: 0, k3: 0, amp: 1.0 });
        let bg = cfg.build_background().unwrap();
        let run = solve(&cfg, false);
        // the converged front is uniform
        let mut off_mode: f64 = 0.0;
        for (k, c) in run.v7.c.iter().enumerate() {
            if k != 0 {
                off_mode = off_mode.max(c.abs());
            }
        }
        assert!(off_mode <= 1e-12, "front not uniform: {off_mode}");
        // 1D family re-solve with the exit total pressure raised by eps
        let th = bg.thermo;
        let exitpt = bg.point_plus(bg.r2).unwrap();
        let flux = bg.m / bg.r2;
        let tp_bg = exitpt.p + 0.5 * bg.kappa * bg.kappa * flux * flux;
        let pe_new = tp_bg + eps - 0.5 * bg.kappa * bg.kappa * flux * flux;
        let inflow = bg.state_minus(bg.r1).unwrap();
        let bg2 = solve_background(&inflow, pe_new, bg.r1, bg.r2, th).unwrap();
        let shift_1d = bg2.rs - bg.rs;
        let d = (run.v7.at(0, 0) - shift_1d).abs();
        assert!(d <= 5.0 * eps * eps, "discrepancy {d} at eps = {eps}");
        discrepancy.push(d);
    }
    let drop = discrepancy[0] / discrepancy[1];
    println!(
        "criterion 6: PASS  |V7 - shift| = {:.3e} / {:.3e} (eps, eps/2), drop {:.2}",
        discrepancy[0], discrepancy[1], drop
    );
}

#[test]
fn criterion_07_empirical_contraction() {
    let t0 = Instant::now();
    let mut cfg = RunConfig::from_toml(&base_toml(1e-3, 64, 8, 8)).unwrap();
    cfg.inlet.modes.push(mhd_shock::config::ModeEntry { field: "u1".into(), k2: 1, k3: 1, amp: 1.0 });
    cfg.inlet.modes.push(mhd_shock::config::ModeEntry { field: "u2".into(), k2: 1, k3: 0, amp: 0.6 });
    cfg.inlet.modes.push(mhd_shock::config::ModeEntry { field: "s".into(), k2: 2, k3: 0, amp: 0.4 });
    cfg.exit.te_modes.push(mhd_shock::config::TeEntry { k2: 1, k3: 0, amp: 0.5 });
    cfg.exit.te_modes.push(mhd_shock::config::TeEntry { k2: 0, k3: 0, amp: 0.3 });
    let run = solve(&cfg, false);
    let elapsed = t0.elapsed();
    assert!(run.report.converged);
    assert!(run.report.iterations.len() <= 20, "{} iterations", run.report.iterations.len());
    let last = run.report.iterations.last().unwrap();
    assert!(last.update_norm <= 1e-10, "final update {}", last.update_norm);
    // contraction ratios after the second iteration, above the float floor
    let mut worst_ratio: f64 = 0.0;
    for s in run.report.iterations.iter().skip(2) {
        if s.update_norm > 1e-8 {
            if let Some(r) = s.ratio {
                worst_ratio = worst_ratio.max(r);
                assert!(r <= 0.5, "ratio {r} above 0.5: {:?}", run.report.iterations);
            }
        }
    }
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    // entropy margin sits within O(eps) of the background entropy jump
    let bg = cfg.build_background().unwrap();
    let jump_s = bg.s_plus - bg.s_minus;
    assert!(run.report.entropy_margin > 0.0);
    assert!(
        (run.report.entropy_margin - jump_s).abs() <= 50.0 * 1e-3,
        "margin {} vs background jump {}",
        run.report.entropy_margin,
        jump_s
    );
    println!(
        "criterion 7: PASS  {} iterations to {:.2e}, worst contraction ratio {:.3}, {:.1} s",
        run.report.iterations.len(),
        last.update_norm,
        worst_ratio,
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_08_equivalence_refinement() {
    // converged runs at two resolutions, every formulation's residual either
    // drops by a second-order factor or sits at the solver-precision floor
    let make = |k: u32| -> mhd_shock::driver::ResidualReport {
        let mut cfg = RunConfig::from_toml(&base_toml(1e-3, 33, 4, 4)).unwrap();
        cfg.solver.upstream_stations = 65;
        cfg.inlet.modes.push(mhd_shock::config::ModeEntry { field: "u1".into(), k2: 1, k3: 1, amp: 1.0 });
        cfg.inlet.modes.push(mhd_shock::config::ModeEntry { field: "u2".into(), k2: 1, k3: 0, amp: 0.6 });
        cfg.exit.te_modes.push(mhd_shock::config::TeEntry { k2: 1, k3: 0, amp: 0.5 });
        cfg.refine(k);
        solve(&cfg, true).report.residuals.unwrap()
    };
    let coarse = make(0);
    let fine = make(1);
    let m6 = |v: &[f64; 6]| v.iter().cloned().fold(0.0f64, f64::max);
    const FLOOR: f64 = 1e-11;
    let check = |name: &str, a: f64, b: f64| {
        let ratio = a / b;
        let at_floor = a <= FLOOR && b <= FLOOR;
        assert!(
            at_floor || (3.0 <= ratio && ratio <= 5.0),
            "{name}: {a:.3e} -> {b:.3e} (ratio {ratio:.2}) outside [3,5] and above floor"
        );
        println!(
            "  {name:24} {a:10.3e} -> {b:10.3e}  {}",
            if at_floor { "at solver floor".to_string() } else { format!("ratio {ratio:.2}") }
        );
    };
    check("governing equations", m6(&coarse.mhd), m6(&fine.mhd));
    check("jump rows on front", m6(&coarse.rh), m6(&fine.rh));
    check(
        "front gradient F2,F3",
        coarse.front_f2.max(coarse.front_f3),
        fine.front_f2.max(fine.front_f3),
    );
    check(
        "deformation-curl",
        coarse
            .deformation
            .max(coarse.j2_relation)
            .max(coarse.j3_relation)
            .max(coarse.scalar_transport)
            .max(coarse.curl1_minus_j1),
        fine.deformation
            .max(fine.j2_relation)
            .max(fine.j3_relation)
            .max(fine.scalar_transport)
            .max(fine.curl1_minus_j1),
    );
    check("auxiliary potential", coarse.pi_norm, fine.pi_norm);
    println!("criterion 8: PASS");
}

#[test]
fn criterion_09_manufactured_orders() {
    let th = ThermoParams::new(1.4).unwrap();
    let inflow = FlowState::radial(2.2 * 1.4f64.sqrt(), 1.0, 1.0, 0.25);
    let (p1, p2, _) = admissible_exit_range(&inflow, 1.0, 2.0, th).unwrap();
    let bg = solve_background(&inflow, 0.5 * (p1 + p2), 1.0, 2.0, th).unwrap();
    let co = coefficients_at(&bg).unwrap();

    // auxiliary Poisson solve, driven through its public interface with an
    // algebraic source (no numerical differentiation enters the image)
    let mut errs_pi = Vec::new();
    for n1 in [17usize, 33, 65] {
        let grid = Grid::new(bg.rs, bg.r2, n1, 6, 6, 0.5);
        let (k2m, k3m) = (1usize, 2usize);
        let kk = k2m * grid.n3() + k3m;
        let kap2 = grid.theta.kfac[k2m];
        let kap3 = grid.x3.kfac[k3m];
        let ell = grid.r2() - grid.rs();
        let f = |y: f64| (std::f64::consts::PI * (y - grid.rs()) / ell).sin();
        let fp = |y: f64| std::f64::consts::PI / ell * (std::f64::consts::PI * (y - grid.rs()) / ell).cos();
        let fpp = |y: f64| -(std::f64::consts::PI / ell).powi(2) * f(y);
        let mut g2 = Modal3::zeros(&grid, Parity::CS);
        for i in 0..n1 {
            let y = grid.y1[i];
            let image = fpp(y) + fp(y) / y - (kap2 * kap2 / (y * y) + kap3 * kap3) * f(y);
            g2.c[i * grid.npt() + kk] = -y / kap2 * image;
        }
        let src = Sources {
            g0: Modal3::zeros(&grid, Parity::CC),
            g1: Modal3::zeros(&grid, Parity::SS),
            g2,
            g3: Modal3::zeros(&grid, Parity::SC),
            defect: 0.0,
        };
        let pi = solve_pi(&grid, &src).unwrap();
        let mut e = 0.0f64;
        for i in 0..n1 {
            e = e.max((pi.c[i * grid.npt() + kk] - f(grid.y1[i])).abs());
        }
        errs_pi.push(e);
    }
    let o_pi = (errs_pi[0] / errs_pi[1]).log2().min((errs_pi[1] / errs_pi[2]).log2());

    // weighted div-curl system
    let mut errs_dc = Vec::new();
    for n1 in [17usize, 33, 65] {
        let grid = Grid::new(bg.rs, bg.r2, n1, 6, 6, 0.5);
        let profs = bg_profile(&bg, &grid).unwrap();
        let (k2m, k3m) = (1usize, 1usize);
        let kk = k2m * grid.n3() + k3m;
        let kap2 = grid.theta.kfac[k2m];
        let kap3 = grid.x3.kfac[k3m];
        let (rs, r2) = (grid.rs(), grid.r2());
        let ell = r2 - rs;
        let wf = |y: f64| (std::f64::consts::PI * (y - rs) / ell).sin();
        let zf = |y: f64| 0.3 * (std::f64::consts::PI * (y - rs) / ell).cos() + 0.1;
        let sf = |y: f64| {
            let dw = std::f64::consts::PI / ell * (std::f64::consts::PI * (y - rs) / ell).cos();
            -dw - wf(y) / y
        };
        let lam = |y: f64| kap3 * kap3 + kap2 * kap2 / (y * y);
        let pf = |y: f64| (kap3 * zf(y) + kap2 / y * sf(y)) / lam(y);
        let qf = |y: f64| (kap3 * sf(y) - kap2 / y * zf(y)) / lam(y);
        let num_d = |f: &dyn Fn(f64) -> f64, y: f64| {
            let hh = 1e-5;
            (f(y + hh) - f(y - hh)) / (2.0 * hh)
        };
        let mut gt1 = Modal3::zeros(&grid, Parity::SS);
        let mut gt2 = Modal3::zeros(&grid, Parity::CS);
        let mut gt3 = Modal3::zeros(&grid, Parity::SC);
        for i in 0..n1 {
            let y = grid.y1[i];
            gt1.c[i * grid.npt() + kk] = zf(y);
            gt2.c[i * grid.npt() + kk] = -kap3 * wf(y) - num_d(&qf, y);
            gt3.c[i * grid.npt() + kk] = num_d(&pf, y) + pf(y) / y + kap2 / y * wf(y);
        }
        let out = solve_divcurl(&grid, &profs, &gt1, &gt2, &gt3).unwrap();
        let mut e = 0.0f64;
        for i in 0..n1 {
            let pt = &profs.at[i];
            let y = grid.y1[i];
            e = e.max((out.v1.c[i * grid.npt() + kk] - wf(y) / pt.d).abs());
            e = e.max((out.v2.c[i * grid.npt() + kk] - pf(y) / pt.d0).abs());
            e = e.max((out.v3.c[i * grid.npt() + kk] - qf(y) / pt.d0).abs());
        }
        errs_dc.push(e);
    }
    let o_dc = (errs_dc[0] / errs_dc[1]).log2().min((errs_dc[1] / errs_dc[2]).log2());

    // nonlocal potential solve
    let mut errs_phi = Vec::new();
    for n1 in [17usize, 33, 65] {
        let grid = Grid::new(bg.rs, bg.r2, n1, 6, 6, 0.5);
        let profs = bg_profile(&bg, &grid).unwrap();
        let (k2m, k3m) = (1usize, 0usize);
        let kk = k2m * grid.n3() + k3m;
        let lam2 = grid.theta.kfac[k2m].powi(2);
        let lam3 = grid.x3.kfac[k3m].powi(2);
        let (rs, r2) = (grid.rs(), grid.r2());
        let ell = r2 - rs;
        let f = |y: f64| 1.0 + 0.3 * (std::f64::consts::PI * (y - rs) / ell).sin() + 0.2 * (y - rs);
        let fp = |y: f64| 0.3 * std::f64::consts::PI / ell * (std::f64::consts::PI * (y - rs) / ell).cos() + 0.2;
        let cnl = co.a2 / (co.a1 * co.a3) * co.a4;
        let mut g5 = Modal3::zeros(&grid, Parity::CC);
        for i in 1..n1 - 1 {
            let y = grid.y1[i];
            let pt = bg.point_plus(y).unwrap();
            let hh = 1e-5;
            let dratio = {
                let a = fp(y + hh) / bg.point_plus(y + hh).unwrap().d;
                let b = fp(y - hh) / bg.point_plus(y - hh).unwrap().d;
                (a - b) / (2.0 * hh)
            };
            let l0 = pt.d1 * dratio + (1.0 / y + pt.d2) * fp(y) / pt.d
                - (lam2 / (y * y) + lam3) / pt.d0 * f(y);
            g5.c[i * grid.npt() + kk] = l0 - cnl * pt.d4 * f(rs);
        }
        let mut m1 = Modal2::zeros(&grid, Parity::CC);
        let mut m2 = Modal2::zeros(&grid, Parity::CC);
        m1.c[kk] = fp(rs) - co.a4 * f(rs);
        m2.c[kk] = fp(r2);
        let phi = solve_phi(&grid, &profs, &co, &g5, &m1, &m2).unwrap();
        let mut e = 0.0f64;
        for i in 0..n1 {
            e = e.max((phi.c[i * grid.npt() + kk] - f(grid.y1[i])).abs());
        }
        errs_phi.push(e);
    }
    let o_phi = (errs_phi[0] / errs_phi[1]).log2().min((errs_phi[1] / errs_phi[2]).log2());

    // characteristic tracer with a fine-reference oracle
    let grid = Grid::new(bg.rs, bg.r2, 33, 6, 6, 0.5);
    let ch = {
        let sample = |f: &dyn Fn(f64, f64, f64) -> f64| -> Modal3 {
            let mut vals = vec![0.0; grid.n1 * grid.npt()];
            for (i1, &y1) in grid.y1.iter().enumerate() {
                for (j2, &y2) in grid.theta.nodes.iter().enumerate() {
                    for (j3, &y3) in grid.x3.nodes.iter().enumerate() {
                        vals[i1 * grid.npt() + j2 * grid.n3() + j3] = f(y1, y2, y3);
                    }
                }
            }
            Modal3::analyze(&grid, Parity::CC, &vals).0
        };
        let mut one = Modal3::zeros(&grid, Parity::CC);
        for i1 in 0..grid.n1 {
            one.station_mut(i1)[0] = 1.0;
        }
        mhd_shock::cal::CharFields {
            k2: sample(&|y1, y2, y3| {
                0.12 * (y1 - 1.0) * (std::f64::consts::PI * (y2 + 0.5)).sin() * (1.0 + 0.3 * y3)
            }),
            k3: sample(&|y1, y2, _| -0.09 * (1.3 * y1).cos() * (1.0 + 0.2 * y2)),
            mu: sample(&|y1, _, y3| 0.5 + 0.2 * y1 * y3),
            h0: sample(&|_, y2, _| 0.4 * y2),
            sigma: one,
            defect: 0.0,
        }
    };
    let reference = trace_single(&grid, &ch, grid.r2(), 0.11, 0.21, 64).unwrap();
    let mut errs_tr = Vec::new();
    for n_sub in [1usize, 2, 4] {
        let got = trace_single(&grid, &ch, grid.r2(), 0.11, 0.21, n_sub).unwrap();
        errs_tr.push(
            (got.0 - reference.0)
                .abs()
                .max((got.1 - reference.1).abs())
                .max((got.2 - reference.2).abs())
                .max((got.3 - reference.3).abs()),
        );
    }
    let o_tr = (errs_tr[0] / errs_tr[1]).log2().min((errs_tr[1] / errs_tr[2]).log2());

    assert!(o_pi >= 1.9, "auxiliary Poisson order {o_pi:.2}: {errs_pi:?}");
    assert!(o_dc >= 1.9, "div-curl order {o_dc:.2}: {errs_dc:?}");
    assert!(o_phi >= 1.9, "nonlocal potential order {o_phi:.2}: {errs_phi:?}");
    assert!(o_tr >= 3.8, "characteristic tracer order {o_tr:.2}: {errs_tr:?}");
    println!(
        "criterion 9: PASS  orders: Poisson {o_pi:.2}, div-curl {o_dc:.2}, potential {o_phi:.2}, tracer {o_tr:.2}"
    );
}

#[test]
fn criterion_10_parity_compatibility() {
    let mut cfg = RunConfig::from_toml(&base_toml(1e-3, 33, 6, 6)).unwrap();
    cfg.solver.upstream_stations = 65;
    cfg.inlet.modes.push(mhd_shock::config::ModeEntry { field: "u1".into(), k2: 1, k3: 1, amp: 1.0 });
    cfg.inlet.modes.push(mhd_shock::config::ModeEntry { field: "u2".into(), k2: 1, k3: 0, amp: 0.6 });
    cfg.exit.te_modes.push(mhd_shock::config::TeEntry { k2: 1, k3: 0, amp: 0.5 });

    let bg = cfg.build_background().unwrap();
    let grid = cfg.grid(&bg);
    let ugrid = cfg.upstream_grid();
    let inlet = cfg.inlet_data(&ugrid).unwrap();
    let upstream = march_supersonic(&bg, &inlet, &ugrid, cfg.march_options()).unwrap();
    assert!(upstream.projection_defect <= 1e-10, "march defect {}", upstream.projection_defect);
    let wb = Workbench::new(&grid, &bg, &upstream).unwrap();
    let opts = cfg.solver_options(&grid);
    let (it, report) = solve_problem_s(&wb, &opts, false).unwrap();
    assert!(
        report.max_parity_defect <= 1e-10,
        "projection defect {}",
        report.max_parity_defect
    );

    // wall behavior of the solution classes, checked pointwise
    let th0 = grid.theta.half;
    let mut worst: f64 = 0.0;
    for k in 0..=8 {
        let y3 = -1.0 + 0.25 * k as f64;
        let y2 = -th0 + 0.25 * th0 * k as f64;
        for i1 in [0, grid.n1 / 2, grid.n1 - 1] {
            let v2 = it.v[1].station_modal2(i1);
            let v3 = it.v[2].station_modal2(i1);
            let v1 = it.v[0].station_modal2(i1);
            let j1 = it.j1.station_modal2(i1);
            worst = worst
                .max(v2.eval(&grid, th0, y3).abs())
                .max(v2.eval(&grid, -th0, y3).abs())
                .max(v3.eval(&grid, y2, 1.0).abs())
                .max(v3.eval(&grid, y2, -1.0).abs())
                .max(v1.d_theta(&grid).eval(&grid, th0, y3).abs())
                .max(v1.d_x3(&grid).eval(&grid, y2, 1.0).abs())
                .max(j1.eval(&grid, th0, y3).abs())
                .max(j1.eval(&grid, y2, 1.0).abs());
        }
    }
    // front offset wall conditions: first and third normal derivatives
    let dv7 = it.v7.d_theta(&grid);
    let dv7_3 = dv7.d_theta(&grid).d_theta(&grid);
    let d3v7 = it.v7.d_x3(&grid);
    let d3v7_3 = d3v7.d_x3(&grid).d_x3(&grid);
    for k in 0..=8 {
        let y3 = -1.0 + 0.25 * k as f64;
        let y2 = -th0 + 0.25 * th0 * k as f64;
        worst = worst
            .max(dv7.eval(&grid, th0, y3).abs())
            .max(dv7_3.eval(&grid, -th0, y3).abs())
            .max(d3v7.eval(&grid, y2, 1.0).abs())
            .max(d3v7_3.eval(&grid, y2, -1.0).abs());
    }
    assert!(worst <= 1e-10, "wall compatibility defect {worst}");
    println!(
        "criterion 10: PASS  projection defect {:.2e}, wall compatibility {:.2e}",
        report.max_parity_defect, worst
    );
}
