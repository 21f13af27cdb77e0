//! Characteristic machinery on the fixed box: backward foot-point tracing,
//! transport of the conserved scalars, and the damped transport of the first
//! curl component with its integrating factor.
//!
//! Trajectories run backward from each grid node to the shock face with a
//! fourth-order scheme; the damping integral A and the source quadrature Q are
//! integrated along the same trajectory as an augmented system, so one pass
//! yields the foot map and everything the transported fields need.

use crate::background::Coefficients;
use crate::cal::CharFields;
use crate::error::{Error, Result};
use crate::field::{cubic_weights, Family, Grid, Modal2, Modal3, Parity};
use crate::state::derived_quantities;
use crate::upstream::UpstreamField;

/// Foot points and trajectory integrals for every grid node.
#[derive(Debug, Clone)]
pub struct FootMap {
    pub beta2: Vec<f64>,
    pub beta3: Vec<f64>,
    /// exp(-A) with A the damping integral from the face to the node
    pub exp_ma: Vec<f64>,
    /// source quadrature along the trajectory
    pub qint: Vec<f64>,
    pub max_drift: f64,
}

struct Scratch {
    b2c: Vec<f64>,
    b2s: Vec<f64>,
    b3c: Vec<f64>,
    b3s: Vec<f64>,
    coef: Vec<f64>,
}

impl Scratch {
    fn new(grid: &Grid) -> Self {
        Self {
            b2c: vec![0.0; grid.n2()],
            b2s: vec![0.0; grid.n2()],
            b3c: vec![0.0; grid.n3()],
            b3s: vec![0.0; grid.n3()],
            coef: vec![0.0; grid.npt()],
        }
    }
}

fn eval_field(f: &Modal3, i0: usize, w: &[f64; 4], sc: &mut Scratch) -> f64 {
    for v in sc.coef.iter_mut() {
        *v = 0.0;
    }
    for k in 0..4 {
        let st = f.station(i0 + k);
        for (c, s) in sc.coef.iter_mut().zip(st) {
            *c += w[k] * s;
        }
    }
    let b2 = match f.parity.theta {
        Family::Cos => &sc.b2c,
        Family::Sin => &sc.b2s,
    };
    let b3 = match f.parity.x3 {
        Family::Cos => &sc.b3c,
        Family::Sin => &sc.b3s,
    };
    let mut acc = 0.0;
    for k2 in 0..f.n2 {
        let mut inner = 0.0;
        for k3 in 0..f.n3 {
            inner += sc.coef[k2 * f.n3 + k3] * b3[k3];
        }
        acc += b2[k2] * inner;
    }
    acc
}

/// (K2, K3, mu/sigma, H0/sigma) at an arbitrary point.
fn rhs_at(
    grid: &Grid,
    ch: &CharFields,
    tau: f64,
    y2: f64,
    y3: f64,
    sc: &mut Scratch,
) -> Result<(f64, f64, f64, f64)> {
    let (i0, w) = cubic_weights(grid, tau);
    grid.theta.eval_modes(Family::Cos, y2, &mut sc.b2c);
    grid.theta.eval_modes(Family::Sin, y2, &mut sc.b2s);
    grid.x3.eval_modes(Family::Cos, y3, &mut sc.b3c);
    grid.x3.eval_modes(Family::Sin, y3, &mut sc.b3s);
    let k2 = eval_field(&ch.k2, i0, &w, sc);
    let k3 = eval_field(&ch.k3, i0, &w, sc);
    let mu = eval_field(&ch.mu, i0, &w, sc);
    let h0 = eval_field(&ch.h0, i0, &w, sc);
    let sg = eval_field(&ch.sigma, i0, &w, sc);
    if sg.abs() < 0.25 {
        return Err(Error::Stagnation(sg.abs()));
    }
    Ok((k2, k3, mu / sg, h0 / sg))
}

/// Backward trace from (y1, y2, y3) to the shock face; returns the foot
/// coordinates and the damping/source integrals.
pub fn trace_single(
    grid: &Grid,
    ch: &CharFields,
    y1: f64,
    y2: f64,
    y3: f64,
    n_sub: usize,
) -> Result<(f64, f64, f64, f64)> {
    let mut sc = Scratch::new(grid);
    trace_inner(grid, ch, y1, y2, y3, n_sub, &mut sc)
}

fn trace_inner(
    grid: &Grid,
    ch: &CharFields,
    y1: f64,
    y2: f64,
    y3: f64,
    n_sub: usize,
    sc: &mut Scratch,
) -> Result<(f64, f64, f64, f64)> {
    let rs = grid.rs();
    let total = ((y1 - rs) / grid.h * n_sub as f64).round().max(1.0) as usize;
    let h = -(y1 - rs) / total as f64;
    let mut st = [y2, y3, 0.0, 0.0]; // (y2, y3, A, Q)
    let mut tau = y1;
    if (y1 - rs).abs() < 1e-15 {
        return Ok((y2, y3, 1.0, 0.0));
    }
    for _ in 0..total {
        let f = |t: f64, s: &[f64; 4], sc: &mut Scratch| -> Result<[f64; 4]> {
            let (k2, k3, mus, h0s) = rhs_at(grid, ch, t, s[0], s[1], sc)?;
            Ok([k2, k3, -mus, -h0s * (-s[2]).exp()])
        };
        let k1 = f(tau, &st, sc)?;
        let s2: [f64; 4] = std::array::from_fn(|i| st[i] + 0.5 * h * k1[i]);
        let k2 = f(tau + 0.5 * h, &s2, sc)?;
        let s3: [f64; 4] = std::array::from_fn(|i| st[i] + 0.5 * h * k2[i]);
        let k3 = f(tau + 0.5 * h, &s3, sc)?;
        let s4: [f64; 4] = std::array::from_fn(|i| st[i] + h * k3[i]);
        let k4 = f(tau + h, &s4, sc)?;
        for i in 0..4 {
            st[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        tau += h;
    }
    Ok((st[0], st[1], (-st[2]).exp(), st[3]))
}

/// Trace all grid nodes backward to the face.
pub fn trace_characteristics(grid: &Grid, ch: &CharFields, n_sub: usize) -> Result<FootMap> {
    let npt = grid.npt();
    let n = grid.n1 * npt;
    let mut beta2 = vec![0.0; n];
    let mut beta3 = vec![0.0; n];
    let mut exp_ma = vec![1.0; n];
    let mut qint = vec![0.0; n];
    let mut max_drift = 0.0f64;
    let mut sc = Scratch::new(grid);
    let th0 = grid.theta.half;
    for i1 in 0..grid.n1 {
        let y1 = grid.y1[i1];
        for (j2, &y2) in grid.theta.nodes.iter().enumerate() {
            for (j3, &y3) in grid.x3.nodes.iter().enumerate() {
                let idx = i1 * npt + j2 * grid.n3() + j3;
                let (b2, b3, em, q) = trace_inner(grid, ch, y1, y2, y3, n_sub, &mut sc)?;
                let drift = (b2.abs() - th0).max(b3.abs() - 1.0).max(0.0);
                if drift > 1e-9 {
                    return Err(Error::Geometry(drift));
                }
                max_drift = max_drift.max(drift);
                beta2[idx] = b2.clamp(-th0, th0);
                beta3[idx] = b3.clamp(-1.0, 1.0);
                exp_ma[idx] = em;
                qint[idx] = q;
            }
        }
    }
    Ok(FootMap { beta2, beta3, exp_ma, qint, max_drift })
}

/// Transported fields produced in one pass over the foot map.
pub struct TransportOut {
    /// Bernoulli deviation, constant along trajectories
    pub v5: Modal3,
    /// alignment-scalar deviation
    pub v6: Modal3,
    /// transported jump remainder entering the entropy composition
    pub r4: Modal3,
    /// provisional entropy deviation composed with the hat trace
    pub v4: Modal3,
    pub defect: f64,
}

/// Transport the conserved scalars from the face: V5 and V6 carry the
/// upstream Bernoulli/alignment deviations at the (shifted) foot points, and
/// R4 records the foot-displacement and jump-remainder contributions that the
/// entropy composition needs. The entropy remainder combines the second jump
/// remainder at the feet with the first one at the target point, so that the
/// composed entropy equals its face trace along every trajectory exactly.
pub fn transport_scalars(
    grid: &Grid,
    foot: &FootMap,
    upstream: &UpstreamField,
    hat_v7: &Modal2,
    v1_rs_hat: &Modal2,
    r1: &Modal2,
    r2: &Modal2,
    co: &Coefficients,
) -> Result<TransportOut> {
    let npt = grid.npt();
    let rs = grid.rs();
    let bg = &upstream.bg;
    let b_bar = bg.bernoulli;
    let kappa_bar = bg.kappa;
    let v7_here = hat_v7.synth(grid);
    let r1_here = r1.synth(grid);
    let mut v5v = vec![0.0; grid.n1 * npt];
    let mut v6v = vec![0.0; grid.n1 * npt];
    let mut r4v = vec![0.0; grid.n1 * npt];
    for i1 in 0..grid.n1 {
        for p in 0..npt {
            let idx = i1 * npt + p;
            let (b2, b3) = (foot.beta2[idx], foot.beta3[idx]);
            let v7b = hat_v7.eval(grid, b2, b3);
            let (up, _) = upstream.sample(rs + v7b, b2, b3)?;
            let d = derived_quantities(&up, bg.thermo)?;
            v5v[idx] = d.bernoulli - b_bar;
            v6v[idx] = up.kappa - kappa_bar;
            r4v[idx] = co.a2 * (v7b - v7_here[p]) + r2.eval(grid, b2, b3)
                - co.a2 / co.a1 * r1_here[p];
        }
    }
    let (v5, d1) = Modal3::analyze(grid, Parity::CC, &v5v);
    let (v6, d2) = Modal3::analyze(grid, Parity::CC, &v6v);
    let (r4, d3) = Modal3::analyze(grid, Parity::CC, &r4v);
    let v4 = compose_v4(grid, v1_rs_hat, &r4, co);
    Ok(TransportOut { v5, v6, r4, v4, defect: d1.max(d2).max(d3) })
}

/// Entropy deviation V4 = (a2/a1) V1(rs, .) + R4.
pub fn compose_v4(grid: &Grid, v1_rs: &Modal2, r4: &Modal3, co: &Coefficients) -> Modal3 {
    let mut v4 = r4.clone();
    let fac = co.a2 / co.a1;
    for i1 in 0..grid.n1 {
        let st = v4.station_mut(i1);
        for (k, c) in v1_rs.c.iter().enumerate() {
            st[k] += fac * c;
        }
    }
    v4
}

/// Transported first curl component: boundary value damped by the
/// accumulated factor plus the source quadrature along the trajectory.
pub fn solve_j1(grid: &Grid, foot: &FootMap, r6: &Modal2) -> (Modal3, f64) {
    let npt = grid.npt();
    let mut j1v = vec![0.0; grid.n1 * npt];
    for i1 in 0..grid.n1 {
        for p in 0..npt {
            let idx = i1 * npt + p;
            let bv = r6.eval(grid, foot.beta2[idx], foot.beta3[idx]);
            j1v[idx] = bv * foot.exp_ma[idx] + foot.qint[idx];
        }
    }
    let (j1, defect) = Modal3::analyze(grid, Parity::SS, &j1v);
    (j1, defect)
}
