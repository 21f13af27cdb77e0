//! Cylindrically symmetric transonic shock background and the linearization
//! coefficients evaluated on its subsonic branch.
//!
//! Both branches conserve r rho U = m, B and S, so a branch is the root of
//!   U^2/2 + gamma S (j/U)^(gamma-1) / (gamma-1) = B,   j = m/r,
//! on the supersonic or subsonic side of the sonic speed. Branches are
//! represented algebraically (a root solve per query radius) rather than as
//! integrated tables, which keeps the conservation identities at machine
//! precision and gives smooth evaluators for the coefficient formulas. All
//! radial derivatives come from implicit differentiation of the branch
//! relation, not finite differences.

use crate::error::{Error, Result};
use crate::jump::{rh_residual, solve_normal_shock, FrontGeometry};
use crate::state::{classify_regime, derived_quantities, FlowState, Regime, ThermoParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Supersonic,
    Subsonic,
}

/// Sonic values for given (B, S): the flux density j = rho U is maximal there.
fn sonic(b: f64, s: f64, th: ThermoParams) -> (f64, f64, f64) {
    let g = th.gamma;
    let c2 = 2.0 * (g - 1.0) * b / (g + 1.0);
    let u = c2.sqrt();
    let rho = (c2 / (g * s)).powf(1.0 / (g - 1.0));
    (u, rho, rho * u)
}

/// Speed root of the branch relation at flux density j.
fn speed_root(j: f64, b: f64, s: f64, th: ThermoParams, branch: Branch) -> Result<f64> {
    if !(j > 0.0) {
        return Err(Error::Domain(format!("flux density must be positive, got {j}")));
    }
    let g = th.gamma;
    let (u_star, _, j_max) = sonic(b, s, th);
    if j > j_max * (1.0 + 1e-13) {
        return Err(Error::Choked { flux: j, max: j_max });
    }
    if j >= j_max * (1.0 - 1e-13) {
        return Ok(u_star); // branches coincide at the sonic point
    }
    let coef = g * s * j.powf(g - 1.0) / (g - 1.0);
    let phi = |u: f64| 0.5 * u * u + coef * u.powf(1.0 - g) - b;
    let (mut lo, mut hi) = match branch {
        Branch::Supersonic => (u_star, (2.0 * b).sqrt()),
        Branch::Subsonic => {
            let mut lo = u_star * 1e-3;
            let mut n = 0;
            while phi(lo) <= 0.0 && n < 200 {
                lo *= 0.5;
                n += 1;
            }
            (lo, u_star)
        }
    };
    // phi has one sign change on the chosen side of the sonic minimum
    let mut flo = phi(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = phi(mid);
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let mut u = 0.5 * (lo + hi);
    // two Newton polish steps; phi'(u) = u (1 - c^2/u^2)
    for _ in 0..2 {
        let dphi = u - (g - 1.0) * coef * u.powf(-g);
        if dphi.abs() > 1e-300 {
            let step = phi(u) / dphi;
            let un = u - step;
            if un > lo && un < hi || (branch == Branch::Supersonic && un > u_star) {
                u = un;
            }
        }
    }
    Ok(u)
}

/// Radial state at radius r with mass flux m = r rho U, Bernoulli constant B
/// and entropy S, on the requested branch.
pub fn branch_state(
    r: f64,
    m: f64,
    b: f64,
    s: f64,
    branch: Branch,
    kappa: f64,
    th: ThermoParams,
) -> Result<FlowState> {
    let j = m / r;
    let u = speed_root(j, b, s, th, branch)?;
    let rho = j / u;
    Ok(FlowState::radial(u, s * rho.powf(th.gamma), s, kappa))
}

/// The background transonic shock: supersonic branch on [r1, rs], a normal
/// shock at rs, subsonic branch on [rs, r2] matching the exit pressure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Background {
    pub thermo: ThermoParams,
    pub r1: f64,
    pub r2: f64,
    pub rs: f64,
    /// mass flux r rho U, common to both branches
    pub m: f64,
    pub bernoulli: f64,
    pub s_minus: f64,
    pub s_plus: f64,
    pub kappa: f64,
    pub p_exit: f64,
    /// discovered orientation of the shock-position/exit-pressure map
    pub exit_pressure_increases_with_rs: bool,
}

/// Per-radius background data on a branch, with analytic radial derivatives.
#[derive(Debug, Clone, Copy)]
pub struct BgPoint {
    pub r: f64,
    pub u: f64,
    pub du: f64,
    pub rho: f64,
    pub drho: f64,
    pub p: f64,
    pub c2: f64,
    pub mach2: f64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d: f64,
    pub dd: f64,
    pub d3: f64,
    pub dd3: f64,
    pub d4: f64,
    pub d5: f64,
}

impl Background {
    pub fn state_minus(&self, r: f64) -> Result<FlowState> {
        branch_state(r, self.m, self.bernoulli, self.s_minus, Branch::Supersonic, self.kappa, self.thermo)
    }

    pub fn state_plus(&self, r: f64) -> Result<FlowState> {
        branch_state(r, self.m, self.bernoulli, self.s_plus, Branch::Subsonic, self.kappa, self.thermo)
    }

    pub fn jump_p(&self) -> f64 {
        let up = self.state_minus(self.rs).expect("background branch");
        let dn = self.state_plus(self.rs).expect("background branch");
        dn.p - up.p
    }

    fn point_on(&self, r: f64, branch: Branch, s: f64) -> Result<BgPoint> {
        let g = self.thermo.gamma;
        let st = branch_state(r, self.m, self.bernoulli, s, branch, self.kappa, self.thermo)?;
        let u = st.u1;
        let rho = st.rho(self.thermo);
        let c2 = g * st.p / rho;
        let mach2 = u * u / c2;
        let d1 = 1.0 - mach2;
        // implicit differentiation of r rho U = m, B = const:
        let du = -u / (r * d1);
        let drho = -rho * (du / u + 1.0 / r);
        let dc2 = -(g - 1.0) * u * du;
        let dmach2 = 2.0 * u * du / c2 - u * u * dc2 / (c2 * c2);
        let k2 = self.kappa * self.kappa;
        let d0 = 1.0 - k2 * rho;
        let d2 = mach2 * (2.0 + (g - 1.0) * mach2) / (r * d1);
        let d = 1.0 - k2 * rho * (1.0 - mach2);
        let dd = -k2 * (drho * (1.0 - mach2) - rho * dmach2);
        let d3 = (self.bernoulli - 0.5 * u * u) / (g * s * u) + k2 * rho * u / ((g - 1.0) * s);
        let dd3 = -du * (self.bernoulli + 0.5 * u * u) / (g * s * u * u)
            - k2 * rho * u / (r * (g - 1.0) * s);
        let d5 = -(g - 1.0) * (du + u / r) / c2;
        let d4 = d1 * (dd3 * d - d3 * dd) / (d * d) + (1.0 / r + d2) * d3 / d;
        Ok(BgPoint {
            r, u, du, rho, drho, p: st.p, c2, mach2, d0, d1, d2, d, dd, d3, dd3, d4, d5,
        })
    }

    /// Subsonic-branch data with analytic derivatives; the coefficient
    /// formulas downstream all read from here.
    pub fn point_plus(&self, r: f64) -> Result<BgPoint> {
        self.point_on(r, Branch::Subsonic, self.s_plus)
    }

    pub fn point_minus(&self, r: f64) -> Result<BgPoint> {
        self.point_on(r, Branch::Supersonic, self.s_minus)
    }
}

/// Exit pressure produced by placing the shock at rs.
fn exit_pressure_for(
    inflow: &FlowState,
    r1: f64,
    r2: f64,
    rs: f64,
    th: ThermoParams,
) -> Result<f64> {
    let d = derived_quantities(inflow, th)?;
    let m = r1 * d.rho * inflow.u1;
    let up = branch_state(rs, m, d.bernoulli, inflow.s, Branch::Supersonic, inflow.kappa, th)?;
    let down = solve_normal_shock(&up, th)?;
    let exit = branch_state(r2, m, d.bernoulli, down.s, Branch::Subsonic, inflow.kappa, th)?;
    Ok(exit.p)
}

/// Exit pressures for the two extreme shock placements, ordered low to high.
/// Strict monotonicity of the placement map is asserted by dense sampling and
/// the discovered orientation is returned rather than assumed.
pub fn admissible_exit_range(
    inflow: &FlowState,
    r1: f64,
    r2: f64,
    th: ThermoParams,
) -> Result<(f64, f64, bool)> {
    let d = derived_quantities(inflow, th)?;
    if d.mach2 <= 1.0 {
        return Err(Error::Domain(format!("inflow must be supersonic, Mach^2 = {}", d.mach2)));
    }
    let n = 64;
    let mut prev = exit_pressure_for(inflow, r1, r2, r1, th)?;
    let first = prev;
    let mut increasing: Option<bool> = None;
    for i in 1..=n {
        let rs = r1 + (r2 - r1) * i as f64 / n as f64;
        let pe = exit_pressure_for(inflow, r1, r2, rs, th)?;
        let up = pe > prev;
        match increasing {
            None => increasing = Some(up),
            Some(dir) if dir != up => {
                return Err(Error::Inconsistency(
                    "exit pressure is not monotone in the shock position".into(),
                ))
            }
            _ => {}
        }
        prev = pe;
    }
    let last = prev;
    let inc = increasing.unwrap();
    let (lo, hi) = if inc { (first, last) } else { (last, first) };
    Ok((lo, hi, inc))
}

/// Construct the background shock matching the exit pressure to 1e-8 relative,
/// by bisection on the shock radius.
pub fn solve_background(
    inflow: &FlowState,
    pe: f64,
    r1: f64,
    r2: f64,
    th: ThermoParams,
) -> Result<Background> {
    if inflow.u2 != 0.0 || inflow.u3 != 0.0 {
        return Err(Error::Domain("inflow must be purely radial".into()));
    }
    let d = derived_quantities(inflow, th)?;
    if d.mach2 <= 1.0 {
        return Err(Error::Domain(format!("inflow must be supersonic, Mach^2 = {}", d.mach2)));
    }
    let (p_lo, p_hi, increasing) = admissible_exit_range(inflow, r1, r2, th)?;
    let tol_p = 1e-8 * pe.abs();
    if !(pe > p_lo + tol_p && pe < p_hi - tol_p) {
        return Err(Error::NoShockPosition { pe, p_lo, p_hi });
    }
    let mut lo = r1;
    let mut hi = r2;
    let mut rs = 0.5 * (lo + hi);
    for _ in 0..200 {
        rs = 0.5 * (lo + hi);
        let p = exit_pressure_for(inflow, r1, r2, rs, th)?;
        if (p - pe).abs() <= tol_p {
            break;
        }
        let too_low = p < pe;
        if too_low == increasing {
            lo = rs;
        } else {
            hi = rs;
        }
        if hi - lo <= f64::EPSILON * r2 {
            break;
        }
    }
    let p_final = exit_pressure_for(inflow, r1, r2, rs, th)?;
    if (p_final - pe).abs() > 10.0 * tol_p {
        return Err(Error::NoShockPosition { pe, p_lo, p_hi });
    }
    let m = r1 * d.rho * inflow.u1;
    let up = branch_state(rs, m, d.bernoulli, inflow.s, Branch::Supersonic, inflow.kappa, th)?;
    let down = solve_normal_shock(&up, th)?;
    Ok(Background {
        thermo: th,
        r1,
        r2,
        rs,
        m,
        bernoulli: d.bernoulli,
        s_minus: inflow.s,
        s_plus: down.s,
        kappa: inflow.kappa,
        p_exit: p_final,
        exit_pressure_increases_with_rs: increasing,
    })
}

/// True iff kappa^2 < min over both branches of 1/rho; the margin is
/// min(1/(kappa^2 rho)) - 1 (infinite when kappa = 0).
pub fn verify_super_alfvenic(bg: &Background, kappa: f64) -> Result<(bool, f64)> {
    if kappa == 0.0 {
        return Ok((true, f64::INFINITY));
    }
    let k2 = kappa * kappa;
    let n = 200;
    let mut min_a2 = f64::INFINITY;
    for i in 0..=n {
        let r_minus = bg.r1 + (bg.rs - bg.r1) * i as f64 / n as f64;
        let r_plus = bg.rs + (bg.r2 - bg.rs) * i as f64 / n as f64;
        let rho_m = bg.state_minus(r_minus)?.rho(bg.thermo);
        let rho_p = bg.state_plus(r_plus)?.rho(bg.thermo);
        min_a2 = min_a2.min(1.0 / (k2 * rho_m)).min(1.0 / (k2 * rho_p));
    }
    Ok((min_a2 > 1.0, min_a2 - 1.0))
}

/// Scalars of the linearized jump relations and the boundary reductions,
/// evaluated once per background at the shock radius.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Coefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub b11: f64,
    pub b12: f64,
    pub b21: f64,
    pub b22: f64,
    /// [P] across the shock, positive
    pub jump_p: f64,
}

/// Evaluate the coefficient scalars and check every positivity requirement.
/// The background must be super-Alfvenic; otherwise d0 or d changes sign.
pub fn coefficients_at(bg: &Background) -> Result<Coefficients> {
    let g = bg.thermo.gamma;
    let rs = bg.rs;
    let pt = bg.point_plus(rs)?;
    let jump_p = bg.jump_p();
    if !(jump_p > 0.0) {
        return Err(Error::Inconsistency(format!("pressure jump {jump_p} not positive")));
    }
    let (rho, u, c2, m2, s) = (pt.rho, pt.u, pt.c2, pt.mach2, bg.s_plus);
    let a0 = pt.d0 * rho * u / jump_p;
    let a1 = g * u * jump_p / (rs * rho * (c2 - u * u));
    let a2 = (g - 1.0) * jump_p / (rs * rho.powf(g));
    let a3 = ((g - 1.0) * m2 + 1.0) / (g * m2);
    let a4 = a0 * a1 * a3 / pt.d0;
    let a11 = rho * pt.d1;
    let a12 = -rho * u / ((g - 1.0) * s);
    let a21 = rho * u * pt.d1;
    let a22 = -(rho * u * u / ((g - 1.0) * s) + rho.powf(g) / (g - 1.0));
    let det = a11 * a22 - a12 * a21;
    let b11 = a22 / det;
    let b12 = -a12 / det;
    let b21 = -a21 / det;
    let b22 = a11 / det;
    let co = Coefficients { a0, a1, a2, a3, a4, a11, a12, a21, a22, b11, b12, b21, b22, jump_p };
    for (name, v) in [("a0", a0), ("a1", a1), ("a2", a2), ("a3", a3), ("a4", a4)] {
        if !(v > 0.0) {
            return Err(Error::Inconsistency(format!("{name} = {v} not positive")));
        }
    }
    // sanity on the profile positivity near both ends
    for r in [rs, 0.5 * (rs + bg.r2), bg.r2] {
        let p = bg.point_plus(r)?;
        for (name, v) in [("d0", p.d0), ("d1", p.d1), ("d", p.d), ("d4", p.d4)] {
            if !(v > 0.0) {
                return Err(Error::Inconsistency(format!("{name}({r}) = {v} not positive")));
            }
        }
    }
    Ok(co)
}

/// Regime along both branches; the upstream is purely hyperbolic and the
/// downstream elliptic-hyperbolic mixed whenever the flow is super-Alfvenic.
pub fn branch_regimes(bg: &Background, samples: usize) -> Result<(Vec<Regime>, Vec<Regime>)> {
    let th = bg.thermo;
    let mut up = Vec::with_capacity(samples);
    let mut dn = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        let rm = bg.r1 + (bg.rs - bg.r1) * t;
        let rp = bg.rs + (bg.r2 - bg.rs) * t;
        let dm = derived_quantities(&bg.state_minus(rm)?, th)?;
        let dp = derived_quantities(&bg.state_plus(rp)?, th)?;
        up.push(classify_regime(dm.mach2, dm.alfven2.unwrap_or(f64::INFINITY)));
        dn.push(classify_regime(dp.mach2, dp.alfven2.unwrap_or(f64::INFINITY)));
    }
    Ok((up, dn))
}

/// RH residual of the constructed background at its own shock with a flat front.
pub fn background_rh_residual(bg: &Background) -> Result<f64> {
    let up = bg.state_minus(bg.rs)?;
    let dn = bg.state_plus(bg.rs)?;
    Ok(rh_residual(&up, &dn, &FrontGeometry::flat(bg.rs), bg.thermo)?.max_abs())
}
