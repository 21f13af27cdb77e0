//! Polytropic-gas state algebra with an aligned magnetic field.
//!
//! The gas satisfies P = S rho^gamma with internal energy e = P/((gamma-1) rho).
//! The magnetic field is everywhere parallel to the velocity, h = kappa * rho * u,
//! so a state is fully described by (U1, U2, U3, P, S, kappa).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Adiabatic exponent, gamma > 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThermoParams {
    pub gamma: f64,
}

impl ThermoParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::Domain(format!("gamma must exceed 1, got {gamma}")));
        }
        Ok(Self { gamma })
    }
}

/// One fluid/magnetic state in the cylindrical frame (radial, azimuthal, axial).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlowState {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub p: f64,
    pub s: f64,
    pub kappa: f64,
}

impl FlowState {
    pub fn radial(u1: f64, p: f64, s: f64, kappa: f64) -> Self {
        Self { u1, u2: 0.0, u3: 0.0, p, s, kappa }
    }

    pub fn speed2(&self) -> f64 {
        self.u1 * self.u1 + self.u2 * self.u2 + self.u3 * self.u3
    }

    /// rho = (P/S)^(1/gamma).
    pub fn rho(&self, th: ThermoParams) -> f64 {
        (self.p / self.s).powf(1.0 / th.gamma)
    }
}

/// Everything derivable from a single state.
#[derive(Debug, Clone, Copy)]
pub struct Derived {
    pub rho: f64,
    /// Internal energy e = P/((gamma-1) rho).
    pub e: f64,
    /// Squared sound speed c^2 = gamma S rho^(gamma-1) = gamma P / rho.
    pub c2: f64,
    pub mach2: f64,
    /// Squared Alfven number |u|^2 rho / |h|^2 = 1/(kappa^2 rho); None when kappa = 0.
    pub alfven2: Option<f64>,
    /// B = |u|^2/2 + gamma P / ((gamma-1) rho).
    pub bernoulli: f64,
    /// P + |h|^2/2.
    pub total_pressure: f64,
    pub h: [f64; 3],
}

pub fn derived_quantities(state: &FlowState, th: ThermoParams) -> Result<Derived> {
    if !(state.p > 0.0) || !(state.s > 0.0) {
        return Err(Error::Domain(format!(
            "state requires P > 0 and S > 0, got P = {}, S = {}",
            state.p, state.s
        )));
    }
    let g = th.gamma;
    let rho = state.rho(th);
    let c2 = g * state.p / rho;
    let speed2 = state.speed2();
    let w = state.kappa * rho;
    let h = [w * state.u1, w * state.u2, w * state.u3];
    let alfven2 = if state.kappa == 0.0 {
        None
    } else {
        Some(1.0 / (state.kappa * state.kappa * rho))
    };
    Ok(Derived {
        rho,
        e: state.p / ((g - 1.0) * rho),
        c2,
        mach2: speed2 / c2,
        alfven2,
        bernoulli: 0.5 * speed2 + g * state.p / ((g - 1.0) * rho),
        total_pressure: state.p + 0.5 * w * w * speed2,
        h,
    })
}

/// Density as a function of the Bernoulli quantity, entropy and speed:
/// rho = ((gamma-1)/(gamma S))^(1/(gamma-1)) (B - |u|^2/2)^(1/(gamma-1)).
pub fn density_from_bernoulli(b: f64, s: f64, speed2: f64, th: ThermoParams) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("entropy must be positive, got {s}")));
    }
    let g = th.gamma;
    let head = b - 0.5 * speed2;
    if !(head > 0.0) {
        return Err(Error::Cavitation(head));
    }
    Ok(((g - 1.0) / (g * s) * head).powf(1.0 / (g - 1.0)))
}

/// PDE type of the steady system at a given (Mach, Alfven) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    PurelyHyperbolic,
    EllipticHyperbolicMixed,
    Degenerate,
}

/// Sign of (A^2-1)(M^2-1)(A^2+M^2-1) decides the type; a vanishing product
/// (within 1e-12) is reported as degenerate rather than silently classified.
pub fn classify_regime(mach2: f64, alfven2: f64) -> Regime {
    const TOL: f64 = 1e-12;
    let factors = [alfven2 - 1.0, mach2 - 1.0, alfven2 + mach2 - 1.0];
    if factors.iter().any(|f| f.abs() <= TOL) {
        return Regime::Degenerate;
    }
    // With an infinite Alfven number (kappa = 0) the sign is carried by the
    // finite factors alone.
    let mut sign = 1.0f64;
    for f in factors {
        if f.is_infinite() {
            if f < 0.0 {
                sign = -sign;
            }
        } else {
            sign *= f.signum();
        }
    }
    if sign > 0.0 {
        Regime::PurelyHyperbolic
    } else {
        Regime::EllipticHyperbolicMixed
    }
}

/// Residuals of the six steady equations in cylindrical coordinates at one point.
///
/// `d_r`, `d_th`, `d_x3` are the raw partial derivatives of (U1,U2,U3,P,S,kappa);
/// the 1/r factors are applied here. The system is quasilinear, so this
/// evaluator is affine in each derivative slot, which the radial march exploits
/// to recover the coefficient matrices exactly.
pub fn mhd_cyl_residual(
    q: &FlowState,
    d_r: &[f64; 6],
    d_th: &[f64; 6],
    d_x3: &[f64; 6],
    r: f64,
    th: ThermoParams,
) -> [f64; 6] {
    let g = th.gamma;
    let rho = q.rho(th);
    let rho_p = rho / (g * q.p);
    let rho_s = -rho / (g * q.s);

    let drho = [
        rho_p * d_r[3] + rho_s * d_r[4],
        rho_p * d_th[3] + rho_s * d_th[4],
        rho_p * d_x3[3] + rho_s * d_x3[4],
    ];

    // kappa*rho and its derivatives
    let w = q.kappa * rho;
    let dw = [
        q.kappa * drho[0] + rho * d_r[5],
        q.kappa * drho[1] + rho * d_th[5],
        q.kappa * drho[2] + rho * d_x3[5],
    ];

    let inv_r = 1.0 / r;
    // directional derivative along the flow applied to component i
    let conv = |i: usize| q.u1 * d_r[i] + q.u2 * inv_r * d_th[i] + q.u3 * d_x3[i];

    // curl components of kappa*rho*u
    let a_th_r = q.u2 * dw[0] + w * d_r[1] + w * q.u2 * inv_r - inv_r * (q.u1 * dw[1] + w * d_th[0]);
    let a_3_r = q.u1 * dw[2] + w * d_x3[0] - (q.u3 * dw[0] + w * d_r[2]);
    let a_th_3 = inv_r * (q.u3 * dw[1] + w * d_th[2]) - (q.u2 * dw[2] + w * d_x3[1]);

    let continuity = q.u1 * drho[0] + rho * d_r[0] + rho * q.u1 * inv_r
        + inv_r * (q.u2 * drho[1] + rho * d_th[1])
        + q.u3 * drho[2]
        + rho * d_x3[2];

    let mom_r = conv(0) + d_r[3] / rho - q.u2 * q.u2 * inv_r + q.kappa * q.u2 * a_th_r
        - q.kappa * q.u3 * a_3_r;
    let mom_th = conv(1) + inv_r * d_th[3] / rho + q.u1 * q.u2 * inv_r - q.kappa * q.u1 * a_th_r
        + q.kappa * q.u3 * a_th_3;
    let mom_3 = conv(2) + d_x3[3] / rho - q.kappa * q.u2 * a_th_3 + q.kappa * q.u1 * a_3_r;

    // B = |u|^2/2 + gamma P/((gamma-1) rho)
    let gg = g / (g - 1.0);
    let db = |du: &[f64; 6], drho_d: f64| {
        q.u1 * du[0] + q.u2 * du[1] + q.u3 * du[2] + gg * (du[3] * rho - q.p * drho_d) / (rho * rho)
    };
    let bern = q.u1 * db(d_r, drho[0]) + q.u2 * inv_r * db(d_th, drho[1]) + q.u3 * db(d_x3, drho[2]);

    let kap = conv(5);

    [continuity, mom_r, mom_th, mom_3, bern, kap]
}
