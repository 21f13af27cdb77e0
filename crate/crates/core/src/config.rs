//! Run configuration: TOML schema, validation, and assembly of the solver
//! ingredients (background, grids, inlet tables, exit forcing).

use crate::background::{admissible_exit_range, solve_background, Background};
use crate::driver::SolverOptions;
use crate::error::{Error, Result};
use crate::field::{Grid, Modal2, Parity};
use crate::state::{FlowState, ThermoParams};
use crate::upstream::{InletData, MarchOptions, UPSTREAM_PARITIES};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometrySection {
    pub r1: f64,
    pub r2: f64,
    pub theta0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GasSection {
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundSection {
    pub inflow_u1: f64,
    pub inflow_rho: f64,
    pub inflow_p: f64,
    pub kappa: f64,
    /// exact exit pressure; if absent, `exit_fraction` picks a point inside
    /// the admissible range
    pub exit_pressure: Option<f64>,
    pub exit_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSection {
    pub epsilon: f64,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_trust")]
    pub trust_factor: f64,
    #[serde(default = "default_substeps")]
    pub trace_substeps: usize,
    #[serde(default = "default_upstream_stations")]
    pub upstream_stations: usize,
    #[serde(default = "default_upstream_err")]
    pub upstream_local_err: f64,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iters() -> usize {
    20
}
fn default_trust() -> f64 {
    10.0
}
fn default_substeps() -> usize {
    1
}
fn default_upstream_stations() -> usize {
    129
}
fn default_upstream_err() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeEntry {
    pub field: String,
    pub k2: usize,
    pub k3: usize,
    pub amp: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InletSection {
    #[serde(default)]
    pub modes: Vec<ModeEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeEntry {
    pub k2: usize,
    pub k3: usize,
    pub amp: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExitSection {
    #[serde(default)]
    pub te_modes: Vec<TeEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub gas: GasSection,
    pub background: BackgroundSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub inlet: InletSection,
    #[serde(default)]
    pub exit: ExitSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gas.gamma > 1.0) {
            return Err(Error::Config(format!("gamma must exceed 1, got {}", self.gas.gamma)));
        }
        if !(self.geometry.r1 > 0.0 && self.geometry.r2 > self.geometry.r1) {
            return Err(Error::Config("need 0 < r1 < r2".into()));
        }
        if !(self.geometry.theta0 > 0.0 && self.geometry.theta0 < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("theta0 must lie in (0, pi/2)".into()));
        }
        if self.solver.epsilon < 0.0 {
            return Err(Error::Config("epsilon must be nonnegative".into()));
        }
        if self.solver.n1 < 8 || self.solver.n2 < 2 || self.solver.n3 < 2 {
            return Err(Error::Config("grid too coarse (need n1 >= 8, n2, n3 >= 2)".into()));
        }
        for m in &self.inlet.modes {
            if component_index(&m.field).is_none() {
                return Err(Error::Config(format!("unknown inlet field '{}'", m.field)));
            }
            if m.k2 >= self.solver.n2 || m.k3 >= self.solver.n3 {
                return Err(Error::Config(format!(
                    "inlet mode ({}, {}) outside the retained range",
                    m.k2, m.k3
                )));
            }
        }
        for m in &self.exit.te_modes {
            if m.k2 >= self.solver.n2 || m.k3 >= self.solver.n3 {
                return Err(Error::Config(format!(
                    "exit mode ({}, {}) outside the retained range",
                    m.k2, m.k3
                )));
            }
        }
        Ok(())
    }

    /// Double all resolutions k times.
    pub fn refine(&mut self, k: u32) {
        let f = 1usize << k;
        self.solver.n1 = (self.solver.n1 - 1) * f + 1;
        self.solver.n2 *= f;
        self.solver.n3 *= f;
        self.solver.upstream_stations = (self.solver.upstream_stations - 1) * f + 1;
    }

    pub fn thermo(&self) -> Result<ThermoParams> {
        ThermoParams::new(self.gas.gamma)
    }

    pub fn inflow(&self) -> FlowState {
        let b = &self.background;
        let s = b.inflow_p / b.inflow_rho.powf(self.gas.gamma);
        FlowState::radial(b.inflow_u1, b.inflow_p, s, b.kappa)
    }

    /// Solve for the background shock, resolving the exit pressure choice.
    pub fn build_background(&self) -> Result<Background> {
        let th = self.thermo()?;
        let inflow = self.inflow();
        let pe = match self.background.exit_pressure {
            Some(pe) => pe,
            None => {
                let frac = self.background.exit_fraction.unwrap_or(0.5);
                let (p1, p2, _) =
                    admissible_exit_range(&inflow, self.geometry.r1, self.geometry.r2, th)?;
                p1 + frac * (p2 - p1)
            }
        };
        solve_background(&inflow, pe, self.geometry.r1, self.geometry.r2, th)
    }

    /// Downstream box grid [rs, r2] x E.
    pub fn grid(&self, bg: &Background) -> Grid {
        Grid::new(
            bg.rs,
            self.geometry.r2,
            self.solver.n1,
            self.solver.n2,
            self.solver.n3,
            self.geometry.theta0,
        )
    }

    /// Upstream march grid [r1, r2] x E.
    pub fn upstream_grid(&self) -> Grid {
        Grid::new(
            self.geometry.r1,
            self.geometry.r2,
            self.solver.upstream_stations,
            self.solver.n2,
            self.solver.n3,
            self.geometry.theta0,
        )
    }

    pub fn inlet_data(&self, ugrid: &Grid) -> Result<InletData> {
        let mut modes: [Modal2; 6] = UPSTREAM_PARITIES.map(|p| Modal2::zeros(ugrid, p));
        for m in &self.inlet.modes {
            let i = component_index(&m.field)
                .ok_or_else(|| Error::Config(format!("unknown inlet field '{}'", m.field)))?;
            // sine-family slots with a zero index are structural zeros
            let parity = UPSTREAM_PARITIES[i];
            if (parity.theta == crate::field::Family::Sin && m.k2 == 0)
                || (parity.x3 == crate::field::Family::Sin && m.k3 == 0)
            {
                return Err(Error::Config(format!(
                    "inlet mode ({}, {}) of '{}' lies in a structurally zero slot",
                    m.k2, m.k3, m.field
                )));
            }
            modes[i].c[m.k2 * ugrid.n3() + m.k3] += m.amp;
        }
        Ok(InletData { epsilon: self.solver.epsilon, modes })
    }

    pub fn te(&self, grid: &Grid) -> Modal2 {
        let mut te = Modal2::zeros(grid, Parity::CC);
        for m in &self.exit.te_modes {
            te.c[m.k2 * grid.n3() + m.k3] += m.amp;
        }
        te
    }

    pub fn solver_options(&self, grid: &Grid) -> SolverOptions {
        let mut o = SolverOptions::new(grid, self.solver.epsilon);
        o.te = self.te(grid);
        o.tol = self.solver.tol;
        o.max_iters = self.solver.max_iters;
        o.trust_factor = self.solver.trust_factor;
        o.trace_substeps = self.solver.trace_substeps;
        o
    }

    pub fn march_options(&self) -> MarchOptions {
        MarchOptions {
            local_err: self.solver.upstream_local_err,
            fixed_substeps: None,
            eps_cap: 1e-2,
            cond_cap: 1e8,
        }
    }
}

fn component_index(name: &str) -> Option<usize> {
    match name {
        "u1" => Some(0),
        "u2" => Some(1),
        "u3" => Some(2),
        "p" => Some(3),
        "s" => Some(4),
        "kappa" => Some(5),
        _ => None,
    }
}

/// A reasonable complete configuration used by tests and examples.
pub fn example_toml() -> &'static str {
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
epsilon = 1e-3
n1 = 64
n2 = 8
n3 = 8

[[inlet.modes]]
field = "u1"
k2 = 1
k3 = 1
amp = 1.0

[[exit.te_modes]]
k2 = 1
k3 = 0
amp = 0.5
"#
}
