//! Command line front end: background construction, state classification,
//! the upstream march, the full front solve, parameter sweeps, and residual
//! re-evaluation on stored fields.

mod dump;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mhd_shock::background::{
    admissible_exit_range, background_rh_residual, coefficients_at, verify_super_alfvenic,
};
use mhd_shock::config::RunConfig;
use mhd_shock::driver::{residual_report, solve_problem_s, Iterate, Workbench};
use mhd_shock::jump::{
    classify_discontinuity, rh_residual, shock_adiabat_residual, FrontGeometry,
};
use mhd_shock::state::{derived_quantities, FlowState, ThermoParams};
use mhd_shock::upstream::march_supersonic;
use serde::Deserialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "mhd-shock", about = "steady MHD transonic shock workbench")]
struct Cli {
    /// run configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// multiply all resolutions by 2^k
    #[arg(long, global = true, default_value_t = 0)]
    refine: u32,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the symmetric background and dump profiles plus coefficients
    Background,
    /// Classify regime and discontinuity type from a state file
    Classify {
        #[arg(long)]
        state: PathBuf,
    },
    /// March the perturbed supersonic inflow and dump the deviation fields
    March,
    /// Solve the full front problem and write the run report
    Solve,
    /// Sweep the exit pressure or the perturbation amplitude
    Sweep {
        #[arg(long, value_parser = ["pe", "eps"])]
        what: String,
        #[arg(long, default_value_t = 9)]
        points: usize,
    },
    /// Re-evaluate all residuals on stored solution fields
    Report {
        #[arg(long)]
        fields: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .context("--config is required for this subcommand")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = RunConfig::from_toml(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    cfg.refine(cli.refine);
    if let Some(n) = cli.max_iters {
        cfg.solver.max_iters = n;
    }
    if let Some(t) = cli.tol {
        cfg.solver.tol = t;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    fs::create_dir_all(&cli.out)?;
    match &cli.cmd {
        Cmd::Background => background_cmd(&cli),
        Cmd::Classify { state } => classify_cmd(state),
        Cmd::March => march_cmd(&cli),
        Cmd::Solve => solve_cmd(&cli),
        Cmd::Sweep { what, points } => sweep_cmd(&cli, what, *points),
        Cmd::Report { fields } => report_cmd(&cli, fields),
    }
}

fn background_cmd(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let bg = cfg.build_background()?;
    let co = coefficients_at(&bg)?;
    let (super_alf, margin) = verify_super_alfvenic(&bg, bg.kappa)?;
    let th = bg.thermo;

    let mut csv = String::from(
        "r,branch,rho,u,p,mach2,alfven2,d0,d1,d2,d,d3,d4,d5\n",
    );
    let n = 200;
    for i in 0..=n {
        let r = bg.r1 + (bg.rs - bg.r1) * i as f64 / n as f64;
        let st = bg.state_minus(r)?;
        let d = derived_quantities(&st, th)?;
        writeln!(
            csv,
            "{r},minus,{},{},{},{},{:e},,,,,,,",
            d.rho,
            st.u1,
            st.p,
            d.mach2,
            d.alfven2.unwrap_or(f64::INFINITY)
        )?;
    }
    for i in 0..=n {
        let r = bg.rs + (bg.r2 - bg.rs) * i as f64 / n as f64;
        let pt = bg.point_plus(r)?;
        let a2 = if bg.kappa == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (bg.kappa * bg.kappa * pt.rho)
        };
        writeln!(
            csv,
            "{r},plus,{},{},{},{},{:e},{},{},{},{},{},{},{}",
            pt.rho, pt.u, pt.p, pt.mach2, a2, pt.d0, pt.d1, pt.d2, pt.d, pt.d3, pt.d4, pt.d5
        )?;
    }
    fs::write(cli.out.join("background.csv"), csv)?;

    let mut positivity = Vec::new();
    for i in 0..100 {
        let r = bg.rs + (bg.r2 - bg.rs) * i as f64 / 99.0;
        let pt = bg.point_plus(r)?;
        positivity.push(pt.d0 > 0.0 && pt.d1 > 0.0 && pt.d > 0.0 && pt.d4 > 0.0);
    }
    let all_green = positivity.iter().all(|b| *b);

    let meta = serde_json::json!({
        "rs": bg.rs,
        "mass_flux": bg.m,
        "bernoulli": bg.bernoulli,
        "s_minus": bg.s_minus,
        "s_plus": bg.s_plus,
        "exit_pressure": bg.p_exit,
        "exit_pressure_increases_with_rs": bg.exit_pressure_increases_with_rs,
        "super_alfvenic": super_alf,
        "alfven_margin": margin,
        "rh_residual": background_rh_residual(&bg)?,
        "coefficients": co,
        "d_positivity_all_green": all_green,
    });
    fs::write(cli.out.join("coefficients.json"), serde_json::to_string_pretty(&meta)?)?;

    println!("shock radius rs = {:.12}", bg.rs);
    println!("exit pressure   = {:.12}", bg.p_exit);
    println!(
        "d-coefficient positivity: {}",
        if all_green { "all green" } else { "VIOLATION" }
    );
    println!(
        "exit pressure {} with the shock radius",
        if bg.exit_pressure_increases_with_rs { "increases" } else { "decreases" }
    );
    if !all_green {
        bail!("coefficient positivity violated");
    }
    Ok(())
}

#[derive(Deserialize)]
struct StateFile {
    gamma: f64,
    i_n: Option<f64>,
    h_n: Option<f64>,
    up: StateEntry,
    down: StateEntry,
    front: Option<FrontEntry>,
    h_tau_up: Option<f64>,
    h_tau_down: Option<f64>,
}

#[derive(Deserialize)]
struct StateEntry {
    u1: f64,
    #[serde(default)]
    u2: f64,
    #[serde(default)]
    u3: f64,
    p: f64,
    s: f64,
    #[serde(default)]
    kappa: f64,
}

#[derive(Deserialize)]
struct FrontEntry {
    xi: f64,
    #[serde(default)]
    dtheta_xi: f64,
    #[serde(default)]
    dx3_xi: f64,
}

impl StateEntry {
    fn state(&self) -> FlowState {
        FlowState { u1: self.u1, u2: self.u2, u3: self.u3, p: self.p, s: self.s, kappa: self.kappa }
    }
}

fn classify_cmd(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let sf: StateFile = toml::from_str(&text).context("parsing state file")?;
    let th = ThermoParams::new(sf.gamma)?;
    let up = sf.up.state();
    let down = sf.down.state();
    let du = derived_quantities(&up, th)?;
    let dd = derived_quantities(&down, th)?;
    let mut out = serde_json::json!({
        "up_regime": mhd_shock::state::classify_regime(du.mach2, du.alfven2.unwrap_or(f64::INFINITY)),
        "down_regime": mhd_shock::state::classify_regime(dd.mach2, dd.alfven2.unwrap_or(f64::INFINITY)),
        "up_mach2": du.mach2,
        "down_mach2": dd.mach2,
    });
    if let (Some(i_n), Some(h_n)) = (sf.i_n, sf.h_n) {
        let kind = classify_discontinuity(&up, &down, i_n, h_n, th)?;
        out["discontinuity"] = serde_json::json!(format!("{kind:?}"));
        let adiabat = shock_adiabat_residual(
            &up,
            &down,
            sf.h_tau_up.unwrap_or(0.0),
            sf.h_tau_down.unwrap_or(0.0),
            th,
        )?;
        out["adiabat_residual"] = serde_json::json!(adiabat);
    }
    if let Some(front) = &sf.front {
        let fg = FrontGeometry { xi: front.xi, dtheta_xi: front.dtheta_xi, dx3_xi: front.dx3_xi };
        let r = rh_residual(&up, &down, &fg, th)?;
        out["rh_residual"] = serde_json::json!({
            "mass": r.mass, "momentum": r.momentum,
            "bernoulli": r.bernoulli, "kappa": r.kappa,
        });
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn march_cmd(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let bg = cfg.build_background()?;
    let ugrid = cfg.upstream_grid();
    let inlet = cfg.inlet_data(&ugrid)?;
    let field = march_supersonic(&bg, &inlet, &ugrid, cfg.march_options())?;
    let dir = cli.out.join("upstream");
    fs::create_dir_all(&dir)?;
    for (i, name) in ["u1", "u2", "u3", "p", "s", "kappa"].iter().enumerate() {
        dump::dump_modal3(&dir, &format!("dev_{name}"), &ugrid, &field.dev[i])?;
    }
    println!("deviation sup      = {:.6e}", field.deviation_linf());
    println!("interior residual  = {:.6e}", field.interior_residual()?);
    println!("projection defect  = {:.6e}", field.projection_defect);
    Ok(())
}

fn solve_cmd(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let bg = cfg.build_background()?;
    let grid = cfg.grid(&bg);
    let ugrid = cfg.upstream_grid();
    let inlet = cfg.inlet_data(&ugrid)?;
    let upstream = march_supersonic(&bg, &inlet, &ugrid, cfg.march_options())?;
    let wb = Workbench::new(&grid, &bg, &upstream)?;
    let opts = cfg.solver_options(&grid);
    let (it, report) = solve_problem_s(&wb, &opts, true)?;

    let dir = cli.out.join("fields");
    fs::create_dir_all(&dir)?;
    for (i, name) in ["v1", "v2", "v3", "v4", "v5", "v6"].iter().enumerate() {
        dump::dump_modal3(&dir, name, &grid, &it.v[i])?;
    }
    dump::dump_modal2(&dir, "v7", &grid, &it.v7)?;
    dump::dump_modal3(&dir, "j1", &grid, &it.j1)?;
    dump::dump_modal3(&dir, "pi", &grid, &it.pi)?;
    dump::dump_modal3(&dir, "phi", &grid, &it.phi)?;
    for (i, name) in ["vdot1", "vdot2", "vdot3"].iter().enumerate() {
        dump::dump_modal3(&dir, name, &grid, &it.vdot[i])?;
    }
    fs::write(cli.out.join("report.json"), serde_json::to_string_pretty(&report)?)?;

    for (k, s) in report.iterations.iter().enumerate() {
        match s.ratio {
            Some(r) => println!("iter {:2}: update {:.6e}  ratio {:.3}", k + 1, s.update_norm, r),
            None => println!("iter {:2}: update {:.6e}", k + 1, s.update_norm),
        }
    }
    println!("converged       = {}", report.converged);
    println!("front offset    = {:.6e}", it.v7.linf_coeff());
    println!("entropy margin  = {:.6e}", report.entropy_margin);
    if let Some(res) = &report.residuals {
        println!("mhd residuals   = {:.3e} (max of six rows)",
            res.mhd.iter().cloned().fold(0.0f64, f64::max));
        println!("rh residuals    = {:.3e} (max of six rows)",
            res.rh.iter().cloned().fold(0.0f64, f64::max));
        println!("front relation  = {:.3e}", res.front_f2.max(res.front_f3));
        println!("pi norm         = {:.3e}", res.pi_norm);
    }
    Ok(())
}

fn sweep_cmd(cli: &Cli, what: &str, points: usize) -> Result<()> {
    let cfg = load_config(cli)?;
    match what {
        "pe" => {
            let th = cfg.thermo()?;
            let inflow = cfg.inflow();
            let (p1, p2, _) =
                admissible_exit_range(&inflow, cfg.geometry.r1, cfg.geometry.r2, th)?;
            let mut csv = String::from("pe,rs\n");
            let mut last_rs: Option<f64> = None;
            let mut dir: Option<bool> = None;
            for k in 0..points {
                let pe = p1 + (p2 - p1) * (k as f64 + 1.0) / (points as f64 + 1.0);
                let bg = mhd_shock::background::solve_background(
                    &inflow, pe, cfg.geometry.r1, cfg.geometry.r2, th,
                )?;
                if let Some(prev) = last_rs {
                    let up = bg.rs > prev;
                    if bg.rs == prev || dir.map_or(false, |d| d != up) {
                        bail!("shock position not strictly monotone across the sweep");
                    }
                    dir = Some(up);
                }
                last_rs = Some(bg.rs);
                writeln!(csv, "{pe},{}", bg.rs)?;
            }
            fs::write(cli.out.join("sweep_pe.csv"), &csv)?;
            println!("{csv}");
        }
        "eps" => {
            let mut csv = String::from("eps,v7_sup,iterations,max_ratio_after_two\n");
            for k in 0..points {
                let mut c = cfg.clone();
                c.solver.epsilon = cfg.solver.epsilon / (1u32 << k) as f64;
                let bg = c.build_background()?;
                let grid = c.grid(&bg);
                let ugrid = c.upstream_grid();
                let inlet = c.inlet_data(&ugrid)?;
                let upstream = march_supersonic(&bg, &inlet, &ugrid, c.march_options())?;
                let wb = Workbench::new(&grid, &bg, &upstream)?;
                let opts = c.solver_options(&grid);
                let (it, report) = solve_problem_s(&wb, &opts, false)?;
                let worst_ratio = report
                    .iterations
                    .iter()
                    .skip(2)
                    .filter(|s| s.update_norm > 100.0 * opts.tol)
                    .filter_map(|s| s.ratio)
                    .fold(0.0f64, f64::max);
                writeln!(
                    csv,
                    "{},{:.6e},{},{:.4}",
                    c.solver.epsilon,
                    it.v7.linf_coeff(),
                    report.iterations.len(),
                    worst_ratio
                )?;
            }
            fs::write(cli.out.join("sweep_eps.csv"), &csv)?;
            println!("{csv}");
        }
        other => bail!("unknown sweep target '{other}'"),
    }
    Ok(())
}

fn report_cmd(cli: &Cli, fields: &Path) -> Result<()> {
    let cfg = load_config(cli)?;
    let bg = cfg.build_background()?;
    let grid = cfg.grid(&bg);
    let ugrid = cfg.upstream_grid();
    let inlet = cfg.inlet_data(&ugrid)?;
    let upstream = march_supersonic(&bg, &inlet, &ugrid, cfg.march_options())?;
    let wb = Workbench::new(&grid, &bg, &upstream)?;
    let opts = cfg.solver_options(&grid);

    let v: [mhd_shock::field::Modal3; 6] = [
        dump::load_modal3(fields, "v1", &grid)?,
        dump::load_modal3(fields, "v2", &grid)?,
        dump::load_modal3(fields, "v3", &grid)?,
        dump::load_modal3(fields, "v4", &grid)?,
        dump::load_modal3(fields, "v5", &grid)?,
        dump::load_modal3(fields, "v6", &grid)?,
    ];
    let it = Iterate {
        v,
        v7: dump::load_modal2(fields, "v7", &grid)?,
        j1: dump::load_modal3(fields, "j1", &grid)?,
        pi: dump::load_modal3(fields, "pi", &grid)?,
        phi: dump::load_modal3(fields, "phi", &grid)?,
        vdot: [
            dump::load_modal3(fields, "vdot1", &grid)?,
            dump::load_modal3(fields, "vdot2", &grid)?,
            dump::load_modal3(fields, "vdot3", &grid)?,
        ],
    };
    let res = residual_report(&wb, &it, &opts)?;
    let text = serde_json::to_string_pretty(&res)?;
    fs::write(cli.out.join("residuals.json"), &text)?;
    println!("{text}");
    Ok(())
}
