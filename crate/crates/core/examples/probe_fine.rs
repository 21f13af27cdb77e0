// robustness probe: refinement pair one level up from the acceptance pair
use mhd_shock::config::RunConfig;
use mhd_shock::driver::{solve_problem_s, Workbench};
use mhd_shock::upstream::march_supersonic;

fn main() {
    let toml = r#"
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
epsilon = 1e-3
n1 = 65
n2 = 8
n3 = 8
upstream_stations = 129
[[inlet.modes]]
field = "u1"
k2 = 1
k3 = 1
amp = 1.0
[[inlet.modes]]
field = "u2"
k2 = 1
k3 = 0
amp = 0.6
[[exit.te_modes]]
k2 = 1
k3 = 0
amp = 0.5
"#;
    let mut reports = Vec::new();
    for k in 0..2u32 {
        let mut c = RunConfig::from_toml(toml).unwrap();
        c.refine(k);
        if k == 1 {
            c.solver.tol = 3e-9;
            c.solver.max_iters = 30;
        }
        let bg = c.build_background().unwrap();
        let grid = c.grid(&bg);
        let ugrid = c.upstream_grid();
        let inlet = c.inlet_data(&ugrid).unwrap();
        let upstream = march_supersonic(&bg, &inlet, &ugrid, c.march_options()).unwrap();
        let wb = Workbench::new(&grid, &bg, &upstream).unwrap();
        let opts = c.solver_options(&grid);
        let t0 = std::time::Instant::now();
        let (_, report) = solve_problem_s(&wb, &opts, true).unwrap();
        eprintln!("level {k}: {} iterations in {:?}", report.iterations.len(), t0.elapsed());
        reports.push(report.residuals.unwrap());
    }
    let m = |v: &[f64; 6]| v.iter().cloned().fold(0.0f64, f64::max);
    let (a, b) = (&reports[0], &reports[1]);
    println!("mhd      {:10.3e} -> {:10.3e} ratio {:5.2}", m(&a.mhd), m(&b.mhd), m(&a.mhd) / m(&b.mhd));
    println!("rh       {:10.3e} -> {:10.3e}", m(&a.rh), m(&b.rh));
    println!("F2F3     {:10.3e} -> {:10.3e}", a.front_f2.max(a.front_f3), b.front_f2.max(b.front_f3));
    let dfa = a.deformation.max(a.j2_relation).max(a.j3_relation);
    let dfb = b.deformation.max(b.j2_relation).max(b.j3_relation);
    println!("defcurl  {dfa:10.3e} -> {dfb:10.3e} ratio {:5.2}", dfa / dfb);
    println!("pi       {:10.3e} -> {:10.3e} ratio {:5.2}", a.pi_norm, b.pi_norm, a.pi_norm / b.pi_norm);
}
