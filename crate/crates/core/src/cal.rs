//! Pointwise calculus on the fixed box under the front-fitting coordinate map.
//!
//! With the front offset V7(y') the physical radius is
//!   rad(y) = y1 + (r2 - y1) V7(y') / (r2 - rs),
//! and the physical derivatives become
//!   D1 = c1 d/dy1,   D2 = (1/rad)(d/dy2 + e2 d/dy1),   D3 = d/dy3 + e3 d/dy1,
//! with c1 = (r2-rs)/(r2-rs-V7) and e_j = (y1-r2) d_j V7 / (r2-rs-V7).
//! `CalCtx` precomputes this map, the background values at rad, and the value
//! plus raw partials of the six iterate components, so that the full nonlinear
//! deformation/curl expressions and their linear principal parts can be formed
//! pointwise. Transverse partials are exact in mode space; the radial partial
//! is a second-order difference of the stored stations.

use crate::background::{BgPoint, Background};
use crate::error::{Error, Result};
use crate::field::{Grid, Modal2, Modal3, Parity};
use crate::state::ThermoParams;

/// Collocation values plus the three raw partial derivatives of one field.
#[derive(Debug, Clone)]
pub struct Fields3 {
    pub vals: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

/// Analyze grid values into the declared class and differentiate; returns the
/// partials and the projection defect.
pub fn partials(grid: &Grid, parity: Parity, vals: Vec<f64>) -> (Fields3, f64) {
    let (m, defect) = Modal3::analyze(grid, parity, &vals);
    let d1 = m.d_y1(grid).synth(grid);
    let d2 = m.d_theta(grid).synth(grid);
    let d3 = m.d_x3(grid).synth(grid);
    (Fields3 { vals: m.synth(grid), d1, d2, d3 }, defect)
}

pub fn partials_of_modal(grid: &Grid, m: &Modal3) -> Fields3 {
    Fields3 {
        vals: m.synth(grid),
        d1: m.d_y1(grid).synth(grid),
        d2: m.d_theta(grid).synth(grid),
        d3: m.d_x3(grid).synth(grid),
    }
}

/// Background subsonic-branch samples at the stations and half stations.
#[derive(Debug, Clone)]
pub struct BgProfile {
    pub at: Vec<BgPoint>,
    pub at_half: Vec<BgPoint>,
}

pub fn bg_profile(bg: &Background, grid: &Grid) -> Result<BgProfile> {
    let mut at = Vec::with_capacity(grid.n1);
    for &r in &grid.y1 {
        at.push(bg.point_plus(r)?);
    }
    let mut at_half = Vec::with_capacity(grid.n1 - 1);
    for i in 0..grid.n1 - 1 {
        at_half.push(bg.point_plus(0.5 * (grid.y1[i] + grid.y1[i + 1]))?);
    }
    Ok(BgProfile { at, at_half })
}

/// Everything pointwise that the source assembly and residual evaluation need.
pub struct CalCtx {
    pub n1: usize,
    pub npt: usize,
    pub gamma: f64,
    pub kappa_bar: f64,
    pub s_plus: f64,
    pub b_bar: f64,
    /// front offset and its transverse gradients on E
    pub v7: Vec<f64>,
    pub dv7_2: Vec<f64>,
    pub dv7_3: Vec<f64>,
    /// physical radius and map factors per grid point
    pub rad: Vec<f64>,
    pub c1: Vec<f64>,
    pub e2: Vec<f64>,
    pub e3: Vec<f64>,
    /// background at rad (subsonic branch)
    pub u_bar: Vec<f64>,
    pub du_bar: Vec<f64>,
    pub c2_bar: Vec<f64>,
    /// iterate components with raw partials
    pub v: [Fields3; 6],
    /// derived pointwise quantities of the iterate
    pub u1_full: Vec<f64>,
    pub rho_t: Vec<f64>,
    pub c2_t: Vec<f64>,
    pub defect: f64,
}

pub const V_PARITIES: [Parity; 6] =
    [Parity::CC, Parity::SC, Parity::CS, Parity::CC, Parity::CC, Parity::CC];

impl CalCtx {
    pub fn new(
        grid: &Grid,
        bg: &Background,
        v: &[Modal3; 6],
        v7: &Modal2,
        min_u: f64,
    ) -> Result<Self> {
        let th: ThermoParams = bg.thermo;
        let g = th.gamma;
        let n1 = grid.n1;
        let npt = grid.npt();
        let rs = grid.rs();
        let r2 = grid.r2();
        let len = r2 - rs;

        let v7_vals = v7.synth(grid);
        let dv7_2 = v7.d_theta(grid).synth(grid);
        let dv7_3 = v7.d_x3(grid).synth(grid);

        let mut rad = vec![0.0; n1 * npt];
        let mut c1 = vec![0.0; npt];
        let mut e2 = vec![0.0; n1 * npt];
        let mut e3 = vec![0.0; n1 * npt];
        for p in 0..npt {
            let den = len - v7_vals[p];
            if den <= 0.5 * len {
                return Err(Error::TrustRegion(format!(
                    "front offset {} comparable to the domain depth",
                    v7_vals[p]
                )));
            }
            c1[p] = len / den;
            for i1 in 0..n1 {
                let y1 = grid.y1[i1];
                let idx = i1 * npt + p;
                rad[idx] = y1 + (r2 - y1) * v7_vals[p] / len;
                e2[idx] = (y1 - r2) * dv7_2[p] / den;
                e3[idx] = (y1 - r2) * dv7_3[p] / den;
            }
        }

        let mut u_bar = vec![0.0; n1 * npt];
        let mut du_bar = vec![0.0; n1 * npt];
        let mut c2_bar = vec![0.0; n1 * npt];
        for idx in 0..n1 * npt {
            let pt = bg.point_plus(rad[idx])?;
            u_bar[idx] = pt.u;
            du_bar[idx] = pt.du;
            c2_bar[idx] = pt.c2;
        }

        // the iterate is stored modally, so no projection defect arises here;
        // defects accumulate in the later pointwise-product analyses
        let defect = 0.0f64;
        let vf: [Fields3; 6] = std::array::from_fn(|i| {
            let f = partials_of_modal(grid, &v[i]);
            debug_assert_eq!(v[i].parity, V_PARITIES[i]);
            f
        });

        let mut u1_full = vec![0.0; n1 * npt];
        let mut rho_t = vec![0.0; n1 * npt];
        let mut c2_t = vec![0.0; n1 * npt];
        for idx in 0..n1 * npt {
            let u1 = u_bar[idx] + vf[0].vals[idx];
            if u1.abs() < 0.5 * min_u {
                return Err(Error::Stagnation(u1.abs()));
            }
            let spd2 = u1 * u1 + vf[1].vals[idx] * vf[1].vals[idx] + vf[2].vals[idx] * vf[2].vals[idx];
            let s = bg.s_plus + vf[3].vals[idx];
            let b = bg.bernoulli + vf[4].vals[idx];
            let head = b - 0.5 * spd2;
            if !(head > 0.0) || !(s > 0.0) {
                return Err(Error::Cavitation(head));
            }
            let rho = ((g - 1.0) / (g * s) * head).powf(1.0 / (g - 1.0));
            u1_full[idx] = u1;
            rho_t[idx] = rho;
            c2_t[idx] = (g - 1.0) * head;
        }

        Ok(Self {
            n1,
            npt,
            gamma: g,
            kappa_bar: bg.kappa,
            s_plus: bg.s_plus,
            b_bar: bg.bernoulli,
            v7: v7_vals,
            dv7_2,
            dv7_3,
            rad,
            c1,
            e2,
            e3,
            u_bar,
            du_bar,
            c2_bar,
            v: vf,
            u1_full,
            rho_t,
            c2_t,
            defect,
        })
    }

    #[inline]
    pub fn d1(&self, f: &Fields3, idx: usize) -> f64 {
        self.c1[idx % self.npt] * f.d1[idx]
    }
    #[inline]
    pub fn d2(&self, f: &Fields3, idx: usize) -> f64 {
        (f.d2[idx] + self.e2[idx] * f.d1[idx]) / self.rad[idx]
    }
    #[inline]
    pub fn d3(&self, f: &Fields3, idx: usize) -> f64 {
        f.d3[idx] + self.e3[idx] * f.d1[idx]
    }

    /// kappa + V6 pointwise.
    #[inline]
    pub fn kap(&self, idx: usize) -> f64 {
        self.kappa_bar + self.v[5].vals[idx]
    }

    /// (1 - (kappa+V6)^2 rho) V_j and kappa^2 rho as gridded products with
    /// their partials, for the exact curl expressions.
    pub fn curl_products(&self, grid: &Grid) -> ([Fields3; 3], Fields3, f64) {
        let n = self.n1 * self.npt;
        let mut w1 = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        let mut w3 = vec![0.0; n];
        let mut k2r = vec![0.0; n];
        for idx in 0..n {
            let k = self.kap(idx);
            let a = 1.0 - k * k * self.rho_t[idx];
            w1[idx] = a * self.v[0].vals[idx];
            w2[idx] = a * self.v[1].vals[idx];
            w3[idx] = a * self.v[2].vals[idx];
            k2r[idx] = k * k * self.rho_t[idx];
        }
        let mut defect = 0.0f64;
        let (f1, d1) = partials(grid, Parity::CC, w1);
        let (f2, d2) = partials(grid, Parity::SC, w2);
        let (f3, d3) = partials(grid, Parity::CS, w3);
        let (fk, dk) = partials(grid, Parity::CC, k2r);
        for d in [d1, d2, d3, dk] {
            defect = defect.max(d);
        }
        ([f1, f2, f3], fk, defect)
    }

    /// Exact curl of (1-kappa^2 rho) u in the mapped coordinates:
    ///   C1 = D2 w3 - D3 w2,
    ///   C2 = D3 w1 - D1 w3 - U(rad) D3 (kappa^2 rho),
    ///   C3 = D1 w2 + w2/rad - D2 w1 + U(rad) D2 (kappa^2 rho).
    pub fn full_curl(&self, prods: &([Fields3; 3], Fields3, f64)) -> [Vec<f64>; 3] {
        let ([w1, w2, w3], k2r, _) = prods;
        let n = self.n1 * self.npt;
        let mut c1v = vec![0.0; n];
        let mut c2v = vec![0.0; n];
        let mut c3v = vec![0.0; n];
        for idx in 0..n {
            c1v[idx] = self.d2(w3, idx) - self.d3(w2, idx);
            c2v[idx] = self.d3(w1, idx) - self.d1(w3, idx) - self.u_bar[idx] * self.d3(k2r, idx);
            c3v[idx] = self.d1(w2, idx) + w2.vals[idx] / self.rad[idx] - self.d2(w1, idx)
                + self.u_bar[idx] * self.d2(k2r, idx);
        }
        [c1v, c2v, c3v]
    }

    /// Full nonlinear deformation (density) expression, scaled by the
    /// background sound speed at rad so its linearization is the d-coefficient
    /// row. Vanishes identically on the background.
    pub fn full_den_scaled(&self, idx: usize) -> f64 {
        let u1 = self.u1_full[idx];
        let v2 = self.v[1].vals[idx];
        let v3 = self.v[2].vals[idx];
        let c2 = self.c2_t[idx];
        let d1u1 = self.du_bar[idx] + self.d1(&self.v[0], idx);
        let d2u1 = self.d2(&self.v[0], idx);
        let d3u1 = self.d3(&self.v[0], idx);
        let d1v2 = self.d1(&self.v[1], idx);
        let d2v2 = self.d2(&self.v[1], idx);
        let d3v2 = self.d3(&self.v[1], idx);
        let d1v3 = self.d1(&self.v[2], idx);
        let d2v3 = self.d2(&self.v[2], idx);
        let d3v3 = self.d3(&self.v[2], idx);
        let full = (c2 - u1 * u1) * d1u1 + (c2 - v2 * v2) * d2v2 + (c2 - v3 * v3) * d3v3
            + c2 * u1 / self.rad[idx]
            - u1 * (v2 * d1v2 + v3 * d1v3)
            - v2 * (u1 * d2u1 + v3 * d2v3)
            - v3 * (u1 * d3u1 + v2 * d3v2);
        full / self.c2_bar[idx]
    }

    /// Temperature-like factor (B + V5 - |u|^2/2)/(gamma (S+V4)(U+V1)).
    #[inline]
    pub fn theta_fac(&self, idx: usize) -> f64 {
        self.c2_t[idx]
            / ((self.gamma - 1.0)
                * self.gamma
                * (self.s_plus + self.v[3].vals[idx])
                * self.u1_full[idx])
    }

    /// (kappa+V6) rho (|u|^2)/(U+V1) factor of the vorticity couplings.
    #[inline]
    pub fn xi_fac(&self, idx: usize) -> f64 {
        let u1 = self.u1_full[idx];
        let spd2 = u1 * u1
            + self.v[1].vals[idx] * self.v[1].vals[idx]
            + self.v[2].vals[idx] * self.v[2].vals[idx];
        self.kap(idx) * self.rho_t[idx] * spd2 / u1
    }

    /// Algebraic second and third curl components implied by the momentum
    /// equations, given the transported first component.
    pub fn j23_from(&self, j1: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n1 * self.npt;
        let mut j2 = vec![0.0; n];
        let mut j3 = vec![0.0; n];
        for idx in 0..n {
            let u1 = self.u1_full[idx];
            let th = self.theta_fac(idx);
            let xi = self.xi_fac(idx);
            j2[idx] = (self.v[1].vals[idx] * j1[idx] + self.d3(&self.v[4], idx)
                - xi * self.d3(&self.v[5], idx))
                / u1
                - th * self.d3(&self.v[3], idx);
            j3[idx] = (self.v[2].vals[idx] * j1[idx] - self.d2(&self.v[4], idx)
                + xi * self.d2(&self.v[5], idx))
                / u1
                + th * self.d2(&self.v[3], idx);
        }
        (j2, j3)
    }
}

/// Characteristic slope, damping and source fields of the transport stage,
/// stored modally for interpolation along trajectories.
pub struct CharFields {
    pub k2: Modal3,
    pub k3: Modal3,
    pub mu: Modal3,
    pub h0: Modal3,
    pub sigma: Modal3,
    pub defect: f64,
}

/// Assemble the characteristic fields from the hat iterate.
pub fn char_fields(grid: &Grid, cal: &CalCtx) -> Result<CharFields> {
    let n = cal.n1 * cal.npt;
    let npt = cal.npt;
    let rs = grid.rs();
    let r2 = grid.r2();
    let len = r2 - rs;

    // velocity ratios as product fields
    let mut w2v = vec![0.0; n];
    let mut w3v = vec![0.0; n];
    let mut inv_u = vec![0.0; n];
    for idx in 0..n {
        w2v[idx] = cal.v[1].vals[idx] / cal.u1_full[idx];
        w3v[idx] = cal.v[2].vals[idx] / cal.u1_full[idx];
        inv_u[idx] = 1.0 / cal.u1_full[idx];
    }
    let mut defect = 0.0f64;
    let (w2, d_a) = partials(grid, Parity::SC, w2v);
    let (w3, d_b) = partials(grid, Parity::CS, w3v);
    let (ainv, d_c) = partials(grid, Parity::CC, inv_u);
    defect = defect.max(d_a).max(d_b).max(d_c);

    // theta and xi factor fields for the vorticity source
    let mut thv = vec![0.0; n];
    let mut xiv = vec![0.0; n];
    for idx in 0..n {
        thv[idx] = cal.theta_fac(idx);
        xiv[idx] = cal.xi_fac(idx);
    }
    let (thf, d_d) = partials(grid, Parity::CC, thv);
    let (xif, d_e) = partials(grid, Parity::CC, xiv);
    defect = defect.max(d_d).max(d_e);

    let mut k2v = vec![0.0; n];
    let mut k3v = vec![0.0; n];
    let mut muv = vec![0.0; n];
    let mut h0v = vec![0.0; n];
    let mut sgv = vec![0.0; n];
    for i1 in 0..cal.n1 {
        let y1 = grid.y1[i1];
        for p in 0..npt {
            let idx = i1 * npt + p;
            let u1 = cal.u1_full[idx];
            let v2 = cal.v[1].vals[idx];
            let v3 = cal.v[2].vals[idx];
            let rad = cal.rad[idx];
            let corr = (y1 - r2) / len * (v2 * cal.dv7_2[p] + rad * v3 * cal.dv7_3[p]);
            let den = rad * u1 + corr;
            if den.abs() < 0.25 * rs * u1.abs() {
                return Err(Error::Stagnation(den.abs()));
            }
            let pref = (len - cal.v7[p]) / len;
            k2v[idx] = pref * v2 / den;
            k3v[idx] = pref * rad * v3 / den;
            sgv[idx] = cal.c1[p] + (v2 / u1) * cal.e2[idx] / rad + (v3 / u1) * cal.e3[idx];
            muv[idx] = cal.d2(&w2, idx) + cal.d3(&w3, idx) + 1.0 / rad;
            h0v[idx] = cal.d3(&ainv, idx) * cal.d2(&cal.v[4], idx)
                - cal.d2(&ainv, idx) * cal.d3(&cal.v[4], idx)
                + cal.d2(&thf, idx) * cal.d3(&cal.v[3], idx)
                - cal.d3(&thf, idx) * cal.d2(&cal.v[3], idx)
                + cal.d2(&xif, idx) * cal.d3(&cal.v[5], idx)
                - cal.d3(&xif, idx) * cal.d2(&cal.v[5], idx);
        }
    }
    let (k2, d1) = Modal3::analyze(grid, Parity::SC, &k2v);
    let (k3, d2) = Modal3::analyze(grid, Parity::CS, &k3v);
    let (mu, d3) = Modal3::analyze(grid, Parity::CC, &muv);
    let (h0, d4) = Modal3::analyze(grid, Parity::SS, &h0v);
    let (sigma, d5) = Modal3::analyze(grid, Parity::CC, &sgv);
    for d in [d1, d2, d3, d4, d5] {
        defect = defect.max(d);
    }
    Ok(CharFields { k2, k3, mu, h0, sigma, defect })
}
