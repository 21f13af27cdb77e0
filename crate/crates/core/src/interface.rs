//! Shock-interface algebra: front-gradient functions, linearized jump solves,
//! exit-condition data, and the gradient-relation equivalence residuals.
//!
//! Every nonlinear remainder here is computed as an exact difference between
//! the full bracket expression and its declared linear principal part, never
//! by transcribing expanded forms. At the background all outputs vanish
//! identically, and on exact one-parameter shock families the remainders are
//! quadratic in the shift, which the tests assert.

use crate::background::{Background, Coefficients};
use crate::error::{Error, Result};
use crate::field::{linf, Grid, Modal2, Parity};
use crate::jump::flux;
use crate::state::{density_from_bernoulli, FlowState};
use crate::upstream::UpstreamField;

pub struct Interface<'a> {
    pub grid: &'a Grid,
    pub bg: &'a Background,
    pub co: &'a Coefficients,
    pub upstream: &'a UpstreamField,
}

/// All 2D interface fields produced from one (hat) iterate.
pub struct InterfaceEval {
    pub g2: Modal2,
    pub g3: Modal2,
    pub g4: Modal2,
    pub r01: Modal2,
    pub r02: Modal2,
    pub r1: Modal2,
    pub r2: Modal2,
    pub r3: Modal2,
    /// boundary value of the transported curl component
    pub r6: Modal2,
    /// second-order shock boundary datum for the velocity system
    pub q1: Modal2,
    pub f_min: f64,
    pub up_traces: Vec<FlowState>,
    pub down_traces: Vec<FlowState>,
    pub defect: f64,
}

impl<'a> Interface<'a> {
    /// Downstream state at the front built from iterate values at y1 = rs.
    pub fn down_state(&self, v: [f64; 6], xi: f64) -> Result<FlowState> {
        let g = self.bg.thermo.gamma;
        let u1 = self.bg.point_plus(xi)?.u + v[0];
        let s = self.bg.s_plus + v[3];
        let b = self.bg.bernoulli + v[4];
        let kappa = self.bg.kappa + v[5];
        let spd2 = u1 * u1 + v[1] * v[1] + v[2] * v[2];
        let rho = density_from_bernoulli(b, s, spd2, self.bg.thermo)?;
        Ok(FlowState { u1, u2: v[1], u3: v[2], p: s * rho.powf(g), s, kappa })
    }

    /// Evaluate the front functions and jump remainders at the hat iterate.
    ///
    /// `v_rs` holds collocation values of (V1..V6) at y1 = rs, `curl1_rs` the
    /// exact curl component of the weighted velocity there (for the boundary
    /// remainder g4).
    pub fn eval(
        &self,
        v_rs: &[Vec<f64>; 6],
        v7: &Modal2,
        curl1_rs: &[f64],
    ) -> Result<InterfaceEval> {
        let g = self.grid;
        let th = self.bg.thermo;
        let co = self.co;
        let rs = self.bg.rs;
        let npt = g.npt();
        let f_bg = co.jump_p * co.jump_p;

        let v7v = v7.synth(g);
        let mut g2v = vec![0.0; npt];
        let mut g3v = vec![0.0; npt];
        let mut r01v = vec![0.0; npt];
        let mut r02v = vec![0.0; npt];
        let mut up_traces = Vec::with_capacity(npt);
        let mut down_traces = Vec::with_capacity(npt);
        let mut f_min = f64::INFINITY;

        for (j2, &y2) in g.theta.nodes.iter().enumerate() {
            for (j3, &y3) in g.x3.nodes.iter().enumerate() {
                let p = j2 * g.n3() + j3;
                let xi = rs + v7v[p];
                let (up, _) = self.upstream.sample(xi, y2, y3)?;
                let vv: [f64; 6] = std::array::from_fn(|i| v_rs[i][p]);
                let down = self.down_state(vv, xi)?;
                let fu = flux(&up, th)?;
                let fd = flux(&down, th)?;

                let b_thth = fd.m_thth - fu.m_thth;
                let b_33 = fd.m_33 - fu.m_33;
                let b_th3 = fd.m_th3 - fu.m_th3;
                let b_rth = fd.m_rth - fu.m_rth;
                let b_r3 = fd.m_r3 - fu.m_r3;
                let fdet = b_thth * b_33 - b_th3 * b_th3;
                let f2 = b_33 * b_rth - b_r3 * b_th3;
                let f3 = b_thth * b_r3 - b_rth * b_th3;
                f_min = f_min.min(fdet.abs());
                if fdet.abs() < 0.25 * f_bg {
                    return Err(Error::FrontDegeneracy(fdet));
                }

                g2v[p] = xi * f2 / fdet / rs - co.a0 * vv[1];
                g3v[p] = f3 / fdet - co.a0 * vv[2];

                // mass row solved for the front gradients
                let b_mth = fd.mass_th - fu.mass_th;
                let b_m3 = fd.mass_3 - fu.mass_3;
                let row1 = (b_mth * f2 + b_m3 * f3) / fdet;
                let n1 = (fd.mass_r - fu.mass_r) - row1;

                // radial momentum row with the magnetic closure of the mass row
                let k2d = down.kappa * down.kappa;
                let sumflx = fd.mass_r + fu.mass_r;
                let row2 = ((b_rth + 0.5 * k2d * sumflx * b_mth) * f2
                    + (b_r3 + 0.5 * k2d * sumflx * b_m3) * f3)
                    / fdet
                    - 0.5
                        * (down.kappa * down.kappa
                            * fd.rho
                            * fd.rho
                            * (down.u2 * down.u2 + down.u3 * down.u3)
                            - up.kappa * up.kappa * fu.rho * fu.rho * (up.u2 * up.u2 + up.u3 * up.u3));
                let plain =
                    (fd.mass_r * down.u1 + down.p) - (fu.mass_r * up.u1 + up.p);
                let n2 = plain - row2;

                r01v[p] = co.a11 * vv[0] + co.a12 * vv[3] - n1;
                r02v[p] = co.a21 * vv[0] + co.a22 * vv[3] + co.jump_p / rs * v7v[p] - n2;

                up_traces.push(up);
                down_traces.push(down);
            }
        }

        let mut defect = 0.0f64;
        let (g2m, d1) = Modal2::analyze(g, Parity::SC, &g2v);
        let (g3m, d2) = Modal2::analyze(g, Parity::CS, &g3v);
        let (r01m, d3) = Modal2::analyze(g, Parity::CC, &r01v);
        let (r02m, d4) = Modal2::analyze(g, Parity::CC, &r02v);
        for d in [d1, d2, d3, d4] {
            defect = defect.max(d);
        }

        let mut r1m = Modal2::zeros(g, Parity::CC);
        let mut r2m = Modal2::zeros(g, Parity::CC);
        let mut r3m = Modal2::zeros(g, Parity::CC);
        for k in 0..npt {
            r1m.c[k] = co.b11 * r01m.c[k] + co.b12 * r02m.c[k];
            r2m.c[k] = co.b21 * r01m.c[k] + co.b22 * r02m.c[k];
            r3m.c[k] = r2m.c[k] - co.a2 / co.a1 * r1m.c[k];
        }

        // boundary remainder of the curl component: exact curl minus the
        // plain transverse curl that the front-gradient relation supplies
        let mut g4v = vec![0.0; npt];
        let dv2_3 = modal_from_vals(g, Parity::SC, &v_rs[1]).d_x3(g).synth(g);
        let dv3_2 = modal_from_vals(g, Parity::CS, &v_rs[2]).d_theta(g).synth(g);
        for p in 0..npt {
            g4v[p] = curl1_rs[p] - (dv3_2[p] / rs - dv2_3[p]);
        }
        let (g4m, d5) = Modal2::analyze(g, Parity::SS, &g4v);
        defect = defect.max(d5);

        // transported-curl boundary value
        let mut r6 = g4m.clone();
        let t1 = g2m.d_x3(g);
        let t2 = g3m.d_theta(g);
        for k in 0..npt {
            r6.c[k] += (t1.c[k] - t2.c[k] / rs) / co.a0;
        }

        // second-order shock condition datum
        let mut q1 = Modal2::zeros(g, Parity::CC);
        let a = g2m.d_theta(g);
        let b = g3m.d_x3(g);
        let lap_r1 = laplace_e(g, &r1m, rs);
        for k in 0..npt {
            q1.c[k] = co.a1 * (a.c[k] / rs + b.c[k]) + lap_r1.c[k];
        }

        Ok(InterfaceEval {
            g2: g2m,
            g3: g3m,
            g4: g4m,
            r01: r01m,
            r02: r02m,
            r1: r1m,
            r2: r2m,
            r3: r3m,
            r6,
            q1,
            f_min,
            up_traces,
            down_traces,
            defect,
        })
    }

    /// Exit Robin datum q4 (also the Neumann datum m2 of the potential solve)
    /// and the exit-condition remainder, from hat values at y1 = r2 and the
    /// transported jump remainder evaluated at the exit feet.
    pub fn exit_terms(
        &self,
        v_r2: &[Vec<f64>; 6],
        r4_r2: &[f64],
        te: &Modal2,
        epsilon: f64,
    ) -> Result<(Modal2, f64, f64)> {
        let g = self.grid;
        let gam = self.bg.thermo.gamma;
        let co = self.co;
        let npt = g.npt();
        let pt = self.bg.point_plus(self.bg.r2)?;
        let kb = self.bg.kappa;
        let ru = pt.rho * pt.u;
        let tp_bg = pt.p + 0.5 * kb * kb * ru * ru;
        let c_v5 = pt.rho * (1.0 + kb * kb * pt.rho * pt.mach2);
        let c_v6 = kb * ru * ru;
        let tev = te.synth(g);
        let mut q4v = vec![0.0; npt];
        let mut e_max = 0.0f64;
        for p in 0..npt {
            let u1 = pt.u + v_r2[0][p];
            let s = self.bg.s_plus + v_r2[3][p];
            let b = self.bg.bernoulli + v_r2[4][p];
            let kap = kb + v_r2[5][p];
            let spd2 = u1 * u1 + v_r2[1][p] * v_r2[1][p] + v_r2[2][p] * v_r2[2][p];
            let rho = density_from_bernoulli(b, s, spd2, self.bg.thermo)?;
            let tp = s * rho.powf(gam) + 0.5 * kap * kap * rho * rho * spd2;
            let e = tp - tp_bg + ru * (pt.d * v_r2[0][p] + pt.d3 * v_r2[3][p])
                - c_v5 * v_r2[4][p]
                - c_v6 * v_r2[5][p];
            e_max = e_max.max(e.abs());
            q4v[p] = -co.a2 / co.a1 * pt.d3 * r4_r2[p] - epsilon * tev[p] / ru
                + (1.0 + kb * kb * pt.rho * pt.mach2) * v_r2[4][p] / pt.u
                + kb * ru * v_r2[5][p]
                + e / ru;
        }
        let (q4, defect) = Modal2::analyze(g, Parity::CC, &q4v);
        Ok((q4, e_max, defect))
    }

    /// New front offset from the new V1 trace and the hat jump remainder.
    pub fn front_update(&self, v1_rs_new: &Modal2, r1_hat: &Modal2) -> Modal2 {
        let mut v7 = Modal2::zeros(self.grid, Parity::CC);
        for k in 0..v7.c.len() {
            v7.c[k] = (v1_rs_new.c[k] - r1_hat.c[k]) / self.co.a1;
        }
        v7
    }

    /// Wall diagnostics of the tangential shock conditions; both vanish
    /// structurally for class-compatible fields.
    pub fn wall_conditions(&self, r1: &Modal2, g2: &Modal2, g3: &Modal2) -> (f64, f64) {
        let g = self.grid;
        let rs = self.bg.rs;
        let dr1_2 = r1.d_theta(g);
        let dr1_3 = r1.d_x3(g);
        let mut q2 = 0.0f64;
        let mut q3 = 0.0f64;
        let m = 9;
        for k in 0..=m {
            let y3 = -1.0 + 2.0 * k as f64 / m as f64;
            for y2 in [-g.theta.half, g.theta.half] {
                q2 = q2.max((dr1_2.eval(g, y2, y3) / rs + g2.eval(g, y2, y3)).abs());
            }
            let y2s = -g.theta.half + 2.0 * g.theta.half * k as f64 / m as f64;
            for y3w in [-1.0, 1.0] {
                q3 = q3.max((dr1_3.eval(g, y2s, y3w) + g3.eval(g, y2s, y3w)).abs());
            }
        }
        (q2, q3)
    }
}

/// Transverse Laplacian (1/rs^2) d22 + d33 in mode space.
pub fn laplace_e(grid: &Grid, f: &Modal2, rs: f64) -> Modal2 {
    let d22 = f.d_theta(grid).d_theta(grid);
    let d33 = f.d_x3(grid).d_x3(grid);
    let mut out = Modal2::zeros(grid, f.parity);
    for k in 0..out.c.len() {
        out.c[k] = d22.c[k] / (rs * rs) + d33.c[k];
    }
    out
}

fn modal_from_vals(grid: &Grid, parity: Parity, vals: &[f64]) -> Modal2 {
    Modal2::analyze(grid, parity, vals).0
}

/// Sup norms of the front-gradient relation residuals and of their
/// curl/divergence reformulation.
pub fn lemma_equivalence_residual(
    grid: &Grid,
    rs: f64,
    a0: f64,
    v7: &Modal2,
    v2_rs: &Modal2,
    v3_rs: &Modal2,
    g2: &Modal2,
    g3: &Modal2,
) -> (f64, f64, f64, f64) {
    let dv7_2 = v7.d_theta(grid);
    let dv7_3 = v7.d_x3(grid);
    let mut f2 = Modal2::zeros(grid, Parity::SC);
    let mut f3 = Modal2::zeros(grid, Parity::CS);
    for k in 0..f2.c.len() {
        f2.c[k] = dv7_2.c[k] / rs - a0 * v2_rs.c[k] - g2.c[k];
        f3.c[k] = dv7_3.c[k] / rs.powi(0) - a0 * v3_rs.c[k] - g3.c[k];
    }
    let curl = {
        let a = f3.d_theta(grid);
        let b = f2.d_x3(grid);
        let mut c = Modal2::zeros(grid, Parity::SS);
        for k in 0..c.c.len() {
            c.c[k] = a.c[k] / rs - b.c[k];
        }
        c
    };
    let div = {
        let a = f2.d_theta(grid);
        let b = f3.d_x3(grid);
        let mut c = Modal2::zeros(grid, Parity::CC);
        for k in 0..c.c.len() {
            c.c[k] = a.c[k] / rs + b.c[k];
        }
        c
    };
    (
        linf(&f2.synth(grid)),
        linf(&f3.synth(grid)),
        linf(&curl.synth(grid)),
        linf(&div.synth(grid)),
    )
}
