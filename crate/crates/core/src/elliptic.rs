//! Elliptic stage on the fixed box: source assembly as exact nonlinear
//! remainders, the auxiliary Poisson solve that restores divergence
//! compatibility, the weighted div-curl system reduced per transverse mode to
//! a single second-order two-point problem, the Neumann problem on the shock
//! face, and the nonlocal potential problem closed by a rank-one correction.
//!
//! All solves decouple exactly across transverse modes; radial operators are
//! discretized with second-order central differences and second-order
//! one-sided closures at Robin/Neumann ends.

use crate::background::Coefficients;
use crate::cal::{partials_of_modal, BgProfile, CalCtx};
use crate::error::{Error, Result};
use crate::field::{linf, Grid, Modal2, Modal3, Parity};

/// Banded linear solver with partial pivoting (LAPACK-style band storage).
pub struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>, // (2kl+ku+1) x n, ab[kl+ku+i-j + j*ld]
}

impl Band {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, ab: vec![0.0; (2 * kl + ku + 1) * n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let ld = 2 * self.kl + self.ku + 1;
        (self.kl + self.ku + i - j) + j * ld
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && i + self.ku + self.kl >= j);
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    /// Solve in place for several right-hand sides.
    pub fn solve(mut self, rhs: &mut [Vec<f64>]) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for j in 0..n {
            // pivot among rows j..j+kl
            let hi = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.ab[self.idx(j, j)].abs();
            for r in j + 1..=hi {
                let v = self.ab[self.idx(r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-300 {
                return Err(Error::Consistency(format!("singular banded system at column {j}")));
            }
            if p != j {
                let chi = (j + kl + ku).min(n - 1);
                for c in j..=chi {
                    let a = self.idx(j, c);
                    let b = self.idx(p, c);
                    self.ab.swap(a, b);
                }
                for r in rhs.iter_mut() {
                    r.swap(j, p);
                }
            }
            let piv = self.ab[self.idx(j, j)];
            let hi_r = (j + kl).min(n - 1);
            let chi = (j + kl + ku).min(n - 1);
            for i in j + 1..=hi_r {
                let l = self.ab[self.idx(i, j)] / piv;
                if l == 0.0 {
                    continue;
                }
                for c in j..=chi {
                    let a = self.idx(j, c);
                    let b = self.idx(i, c);
                    self.ab[b] -= l * self.ab[a];
                }
                for r in rhs.iter_mut() {
                    r[i] -= l * r[j];
                }
            }
        }
        for r in rhs.iter_mut() {
            for i in (0..n).rev() {
                let chi = (i + kl + ku).min(n - 1);
                let mut acc = r[i];
                for c in i + 1..=chi {
                    acc -= self.ab[self.idx(i, c)] * r[c];
                }
                r[i] = acc / self.ab[self.idx(i, i)];
            }
        }
        Ok(())
    }
}

/// Gridded source fields of the velocity system (exact remainders) plus the
/// transported curl component on the right-hand side of the curl rows.
pub struct Sources {
    pub g0: Modal3,
    pub g1: Modal3,
    pub g2: Modal3,
    pub g3: Modal3,
    pub defect: f64,
}

/// Assemble G0..G3 from the hat context and the freshly transported fields.
///
/// Each G is (linear principal rows of the hat iterate) minus (full nonlinear
/// expression of the hat iterate) plus the new-field couplings, so that the
/// fixed point of the outer iteration solves the exact equations.
pub fn assemble_sources(
    grid: &Grid,
    cal: &CalCtx,
    profs: &BgProfile,
    j1_new: &Modal3,
    v5_new: &Modal3,
    v6_new: &Modal3,
    r4: &Modal3,
) -> Result<Sources> {
    let npt = grid.npt();
    let n = grid.n1 * npt;
    let kb = cal.kappa_bar;

    let prods = cal.curl_products(grid);
    let fc = cal.full_curl(&prods);
    let j1v = j1_new.synth(grid);
    let f5 = partials_of_modal(grid, v5_new);
    let f6 = partials_of_modal(grid, v6_new);
    let dr4_3 = r4.d_x3(grid).synth(grid);
    let dr4_2 = r4.d_theta(grid).synth(grid);

    let mut g0v = vec![0.0; n];
    let mut g1v = vec![0.0; n];
    let mut g2v = vec![0.0; n];
    let mut g3v = vec![0.0; n];

    for i1 in 0..grid.n1 {
        let y = grid.y1[i1];
        let pt = &profs.at[i1];
        for p in 0..npt {
            let idx = i1 * npt + p;
            let v = &cal.v;
            // deformation row
            let lin_den = pt.d1 * v[0].d1[idx] + v[1].d2[idx] / y + v[2].d3[idx]
                + (1.0 / y + pt.d2) * v[0].vals[idx]
                - pt.d5 * v[4].vals[idx];
            g0v[idx] = lin_den - cal.full_den_scaled(idx);

            // first curl row
            let lin1 = pt.d0 * (v[2].d2[idx] / y - v[1].d3[idx]);
            g1v[idx] = j1v[idx] + lin1 - fc[0][idx];

            // common factors
            let u1 = cal.u1_full[idx];
            let th = cal.theta_fac(idx);
            let rho = cal.rho_t[idx];
            let c2t = cal.c2_t[idx];
            let kap_hat = cal.kap(idx);
            let kap_new = kb + f6.vals[idx];
            let spd2 = u1 * u1 + v[1].vals[idx] * v[1].vals[idx] + v[2].vals[idx] * v[2].vals[idx];
            let ub = cal.u_bar[idx];

            // second curl row
            let lin2 = pt.d * v[0].d3[idx] + pt.d3 * v[3].d3[idx]
                - pt.d0 * v[2].d1[idx]
                - pt.dd0() * v[2].vals[idx];
            let h2 = lin2 - fc[1][idx] - th * cal.d3(&v[3], idx)
                - ub * (2.0 * kap_hat * rho * cal.d3(&v[5], idx)
                    + kap_hat * kap_hat * rho / c2t * cal.d3(&v[4], idx));
            let expl2 = ub
                * (2.0 * kap_new * rho * cal.d3(&f6, idx)
                    + kap_new * kap_new * rho / c2t * cal.d3(&f5, idx))
                + (v[1].vals[idx] * j1v[idx] + cal.d3(&f5, idx)
                    - kap_new * rho * spd2 * cal.d3(&f6, idx))
                    / u1;
            g2v[idx] = h2 + expl2 - pt.d3 * dr4_3[idx];

            // third curl row
            let lin3 = pt.d0 * v[1].d1[idx] + pt.dd0() * v[1].vals[idx]
                + pt.d0 * v[1].vals[idx] / y
                - pt.d / y * v[0].d2[idx]
                - pt.d3 / y * v[3].d2[idx];
            let h3 = lin3 - fc[2][idx] + th * cal.d2(&v[3], idx)
                + ub * (2.0 * kap_hat * rho * cal.d2(&v[5], idx)
                    + kap_hat * kap_hat * rho / c2t * cal.d2(&v[4], idx));
            let expl3 = -ub
                * (2.0 * kap_new * rho * cal.d2(&f6, idx)
                    + kap_new * kap_new * rho / c2t * cal.d2(&f5, idx))
                + (v[2].vals[idx] * j1v[idx] - cal.d2(&f5, idx)
                    + kap_new * rho * spd2 * cal.d2(&f6, idx))
                    / u1;
            g3v[idx] = h3 + expl3 + pt.d3 / y * dr4_2[idx];
        }
    }

    let mut defect = prods.2;
    let (g0, d0) = Modal3::analyze(grid, Parity::CC, &g0v);
    let (g1, d1) = Modal3::analyze(grid, Parity::SS, &g1v);
    let (g2, d2) = Modal3::analyze(grid, Parity::CS, &g2v);
    let (g3, d3) = Modal3::analyze(grid, Parity::SC, &g3v);
    for d in [d0, d1, d2, d3] {
        defect = defect.max(d);
    }
    Ok(Sources { g0, g1, g2, g3, defect })
}

impl crate::background::BgPoint {
    /// d0'(r) = -kappa^2 rho'
    pub fn dd0(&self) -> f64 {
        // kappa enters only through d0 = 1 - kappa^2 rho; recover kappa^2 rho'
        // from the stored values to avoid carrying kappa separately
        if self.rho == 0.0 {
            0.0
        } else {
            -(1.0 - self.d0) / self.rho * self.drho
        }
    }
}

/// Auxiliary Poisson solve restoring the divergence compatibility of the curl
/// sources; homogeneous Dirichlet data on every face.
pub fn solve_pi(grid: &Grid, src: &Sources) -> Result<Modal3> {
    let npt = grid.npt();
    let n1 = grid.n1;
    let h = grid.h;
    let dg1 = src.g1.d_y1(grid);
    let mut pi = Modal3::zeros(grid, Parity::SS);
    for k2 in 1..grid.n2() {
        for k3 in 1..grid.n3() {
            let lam2 = grid.theta.kfac[k2] * grid.theta.kfac[k2];
            let lam3 = grid.x3.kfac[k3] * grid.x3.kfac[k3];
            let mut band = Band::new(n1, 1, 1);
            let mut rhs = vec![0.0; n1];
            band.set(0, 0, 1.0);
            band.set(n1 - 1, n1 - 1, 1.0);
            for i in 1..n1 - 1 {
                let y = grid.y1[i];
                band.set(i, i - 1, 1.0 / (h * h) - 1.0 / (2.0 * h * y));
                band.set(i, i, -2.0 / (h * h) - lam2 / (y * y) - lam3);
                band.set(i, i + 1, 1.0 / (h * h) + 1.0 / (2.0 * h * y));
                let kk = k2 * grid.n3() + k3;
                rhs[i] = dg1.c[i * npt + kk] + src.g1.c[i * npt + kk] / y
                    - grid.theta.kfac[k2] * src.g2.c[i * npt + kk] / y
                    - grid.x3.kfac[k3] * src.g3.c[i * npt + kk];
            }
            let mut rhss = [rhs];
            band.solve(&mut rhss)?;
            for i in 0..n1 {
                pi.c[i * npt + k2 * grid.n3() + k3] = rhss[0][i];
            }
        }
    }
    Ok(pi)
}

/// Corrected curl sources Gt = (G1 - d1 Pi, G2 - d2 Pi / y, G3 - d3 Pi) and
/// the sup norm of their divergence defect.
pub fn corrected_sources(
    grid: &Grid,
    src: &Sources,
    pi: &Modal3,
) -> (Modal3, Modal3, Modal3, f64) {
    let npt = grid.npt();
    let dpi1 = pi.d_y1(grid);
    let dpi2 = pi.d_theta(grid);
    let dpi3 = pi.d_x3(grid);
    let mut gt1 = src.g1.clone();
    let mut gt2 = src.g2.clone();
    let mut gt3 = src.g3.clone();
    for i1 in 0..grid.n1 {
        let y = grid.y1[i1];
        for k in 0..npt {
            gt1.c[i1 * npt + k] -= dpi1.c[i1 * npt + k];
            gt2.c[i1 * npt + k] -= dpi2.c[i1 * npt + k] / y;
            gt3.c[i1 * npt + k] -= dpi3.c[i1 * npt + k];
        }
    }
    // divergence defect of the corrected sources
    let d1 = gt1.d_y1(grid);
    let d2 = gt2.d_theta(grid);
    let d3 = gt3.d_x3(grid);
    let mut worst = 0.0f64;
    let vals1 = gt1.synth(grid);
    let vd1 = d1.synth(grid);
    let vd2 = d2.synth(grid);
    let vd3 = d3.synth(grid);
    for i1 in 1..grid.n1 - 1 {
        let y = grid.y1[i1];
        for k in 0..npt {
            let idx = i1 * npt + k;
            worst = worst.max((vd1[idx] + vals1[idx] / y + vd2[idx] / y + vd3[idx]).abs());
        }
    }
    (gt1, gt2, gt3, worst)
}

/// Weighted div-curl system with homogeneous normal boundary conditions,
/// reduced per mode to one Dirichlet two-point problem for w = d V1.
pub struct DivCurlOut {
    pub v1: Modal3,
    pub v2: Modal3,
    pub v3: Modal3,
    /// worst residual of the four first-order mode equations
    pub residual: f64,
}

pub fn solve_divcurl(
    grid: &Grid,
    profs: &BgProfile,
    gt1: &Modal3,
    gt2: &Modal3,
    gt3: &Modal3,
) -> Result<DivCurlOut> {
    let npt = grid.npt();
    let n1 = grid.n1;
    let h = grid.h;
    let mut v1 = Modal3::zeros(grid, Parity::CC);
    let mut v2 = Modal3::zeros(grid, Parity::SC);
    let mut v3 = Modal3::zeros(grid, Parity::CS);
    let mut residual = 0.0f64;

    for k2 in 0..grid.n2() {
        for k3 in 0..grid.n3() {
            if k2 == 0 && k3 == 0 {
                continue; // zero mode: w = 0 forced by the Dirichlet data
            }
            let kk = k2 * grid.n3() + k3;
            let kap2 = grid.theta.kfac[k2];
            let kap3 = grid.x3.kfac[k3];
            let g1: Vec<f64> = (0..n1).map(|i| gt1.c[i * npt + kk]).collect();
            let g2: Vec<f64> = (0..n1).map(|i| gt2.c[i * npt + kk]).collect();
            let g3: Vec<f64> = (0..n1).map(|i| gt3.c[i * npt + kk]).collect();

            let lam = |y: f64| kap3 * kap3 + kap2 * kap2 / (y * y);
            let mut band = Band::new(n1, 1, 1);
            let mut rhs = vec![0.0; n1];
            band.set(0, 0, 1.0);
            band.set(n1 - 1, n1 - 1, 1.0);
            for i in 1..n1 - 1 {
                let y = grid.y1[i];
                let l = lam(y);
                let bcoef = 1.0 / y + 2.0 * kap2 * kap2 / (y * y * y * l);
                let ccoef = -1.0 / (y * y) + 2.0 * kap2 * kap2 / (y * y * y * y * l) - l;
                band.set(i, i - 1, 1.0 / (h * h) - bcoef / (2.0 * h));
                band.set(i, i, -2.0 / (h * h) + ccoef);
                band.set(i, i + 1, 1.0 / (h * h) + bcoef / (2.0 * h));
                rhs[i] = kap3 * g2[i] - kap2 / y * g3[i]
                    + 2.0 * kap2 * kap3 / (y * y * l) * g1[i];
            }
            let mut rhss = [rhs];
            band.solve(&mut rhss)?;
            rhss[0][0] = 0.0;
            rhss[0][n1 - 1] = 0.0;
            let w = &rhss[0];

            // recover the transverse pair from s = -w' - w/y and z = g1
            let mut pvec = vec![0.0; n1];
            let mut qvec = vec![0.0; n1];
            for i in 0..n1 {
                let y = grid.y1[i];
                let dw = if i == 0 {
                    (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h)
                } else if i == n1 - 1 {
                    (3.0 * w[n1 - 1] - 4.0 * w[n1 - 2] + w[n1 - 3]) / (2.0 * h)
                } else {
                    (w[i + 1] - w[i - 1]) / (2.0 * h)
                };
                let s = -dw - w[i] / y;
                let l = lam(y);
                pvec[i] = (kap3 * g1[i] + kap2 / y * s) / l;
                qvec[i] = (kap3 * s - kap2 / y * g1[i]) / l;
            }
            for i in 0..n1 {
                let pt = &profs.at[i];
                v1.c[i * npt + kk] = w[i] / pt.d;
                v2.c[i * npt + kk] = pvec[i] / pt.d0;
                v3.c[i * npt + kk] = qvec[i] / pt.d0;
            }

            // verify the four first-order equations on this mode; rows next
            // to the ends are skipped because the recovered pair there mixes
            // one-sided and central stencils, which degrades the composed
            // difference by one order without affecting the solution itself
            let scale = 1.0 + linf(&g1).max(linf(&g2)).max(linf(&g3));
            for i in 2..n1 - 2 {
                let y = grid.y1[i];
                let dw = (w[i + 1] - w[i - 1]) / (2.0 * h);
                let dq = (qvec[i + 1] - qvec[i - 1]) / (2.0 * h);
                let dp = (pvec[i + 1] - pvec[i - 1]) / (2.0 * h);
                let r_div = dw + w[i] / y + kap2 / y * pvec[i] + kap3 * qvec[i];
                let r_c1 = -kap2 / y * qvec[i] + kap3 * pvec[i] - g1[i];
                let r_c2 = -kap3 * w[i] - dq - g2[i];
                let r_c3 = dp + pvec[i] / y + kap2 / y * w[i] - g3[i];
                residual = residual
                    .max(r_div.abs() / scale)
                    .max(r_c1.abs() / scale)
                    .max(r_c2.abs() / scale)
                    .max(r_c3.abs() / scale);
            }
        }
    }
    Ok(DivCurlOut { v1, v2, v3, residual })
}

/// Zero-mean Neumann solve on the shock face: mode-wise inversion of the
/// transverse Laplacian, zero mode dropped with its defect reported.
pub fn solve_m1(grid: &Grid, q5: &Modal2, a3: f64, rs: f64) -> (Modal2, f64) {
    let mut m1 = Modal2::zeros(grid, Parity::CC);
    for k2 in 0..grid.n2() {
        for k3 in 0..grid.n3() {
            if k2 == 0 && k3 == 0 {
                continue;
            }
            let lam = grid.theta.kfac[k2].powi(2) / (rs * rs) + grid.x3.kfac[k3].powi(2);
            m1.c[k2 * grid.n3() + k3] = -a3 * q5.at(k2, k3) / lam;
        }
    }
    (m1, q5.at(0, 0).abs())
}

/// Nonlocal potential problem: Robin data on the face, Neumann at the exit,
/// an extra zeroth-order coupling to the face trace handled by two auxiliary
/// solves per mode and a scalar closure.
pub fn solve_phi(
    grid: &Grid,
    profs: &BgProfile,
    co: &Coefficients,
    g5: &Modal3,
    m1: &Modal2,
    m2: &Modal2,
) -> Result<Modal3> {
    let npt = grid.npt();
    let n1 = grid.n1;
    let h = grid.h;
    let cnl = co.a2 / (co.a1 * co.a3) * co.a4;
    let mut phi = Modal3::zeros(grid, Parity::CC);
    for k2 in 0..grid.n2() {
        for k3 in 0..grid.n3() {
            let kk = k2 * grid.n3() + k3;
            let lam = grid.theta.kfac[k2].powi(2) * 1.0;
            let lam3 = grid.x3.kfac[k3].powi(2);
            let mut band = Band::new(n1, 2, 2);
            // Robin row at the face and Neumann row at the exit
            band.set(0, 0, -3.0 / (2.0 * h) - co.a4);
            band.set(0, 1, 4.0 / (2.0 * h));
            band.set(0, 2, -1.0 / (2.0 * h));
            band.set(n1 - 1, n1 - 1, 3.0 / (2.0 * h));
            band.set(n1 - 1, n1 - 2, -4.0 / (2.0 * h));
            band.set(n1 - 1, n1 - 3, 1.0 / (2.0 * h));
            let mut rhs_a = vec![0.0; n1];
            let mut rhs_b = vec![0.0; n1];
            rhs_a[0] = m1.at(k2, k3);
            rhs_a[n1 - 1] = m2.at(k2, k3);
            for i in 1..n1 - 1 {
                let y = grid.y1[i];
                let pt = &profs.at[i];
                let d_ph = profs.at_half[i].d; // d at y + h/2
                let d_mh = profs.at_half[i - 1].d;
                let a = pt.d1;
                band.set(i, i - 1, a / (h * h * d_mh) - (1.0 / y + pt.d2) / (2.0 * h * pt.d));
                band.set(i, i, -a / (h * h) * (1.0 / d_ph + 1.0 / d_mh)
                    - (lam / (y * y) + lam3) / pt.d0);
                band.set(i, i + 1, a / (h * h * d_ph) + (1.0 / y + pt.d2) / (2.0 * h * pt.d));
                rhs_a[i] = g5.c[i * npt + kk];
                rhs_b[i] = cnl * pt.d4;
            }
            let mut rhss = [rhs_a, rhs_b];
            band.solve(&mut rhss)?;
            let (pa, pb) = (&rhss[0], &rhss[1]);
            let closure = 1.0 - pb[0];
            if closure.abs() < 1e-12 {
                return Err(Error::NonlocalResonance(closure));
            }
            let s = pa[0] / closure;
            for i in 0..n1 {
                phi.c[i * npt + kk] = pa[i] + s * pb[i];
            }
        }
    }
    Ok(phi)
}

/// Velocity reconstruction from the potential and the div-curl part.
pub fn reconstruct_velocity(
    grid: &Grid,
    profs: &BgProfile,
    co: &Coefficients,
    phi: &Modal3,
    dc: &DivCurlOut,
) -> (Modal3, Modal3, Modal3) {
    let npt = grid.npt();
    let dphi1 = phi.d_y1(grid);
    let dphi2 = phi.d_theta(grid);
    let dphi3 = phi.d_x3(grid);
    let mut v1 = dc.v1.clone();
    let mut v2 = dc.v2.clone();
    let mut v3 = dc.v3.clone();
    let fac = co.a2 / (co.a1 * co.a3);
    for i1 in 0..grid.n1 {
        let pt = &profs.at[i1];
        let y = grid.y1[i1];
        for k in 0..npt {
            let idx = i1 * npt + k;
            v1.c[idx] += dphi1.c[idx] / pt.d - fac * pt.d3 / pt.d * dphi1.c[k];
            v2.c[idx] += dphi2.c[idx] / (pt.d0 * y);
            v3.c[idx] += dphi3.c[idx] / pt.d0;
        }
    }
    (v1, v2, v3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{admissible_exit_range, coefficients_at, solve_background, Background};
    use crate::cal::bg_profile;
    use crate::state::{FlowState, ThermoParams};

    fn background() -> (Background, Coefficients) {
        let th = ThermoParams { gamma: 1.4 };
        let inflow = FlowState::radial(2.2 * 1.4f64.sqrt(), 1.0, 1.0, 0.25);
        let (p1, p2, _) = admissible_exit_range(&inflow, 1.0, 2.0, th).unwrap();
        let bg = solve_background(&inflow, 0.5 * (p1 + p2), 1.0, 2.0, th).unwrap();
        let co = coefficients_at(&bg).unwrap();
        (bg, co)
    }

    #[test]
    fn banded_matches_dense_small_system() {
        // random-ish banded system vs direct dense elimination
        let n = 12;
        let (kl, ku) = (2, 2);
        let mut dense = vec![vec![0.0; n]; n];
        let mut band = Band::new(n, kl, ku);
        let mut seed = 12345u64;
        let mut rng = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as f64 / (1u64 << 31) as f64 - 1.0
        };
        for i in 0..n {
            for j in 0..n {
                if j + kl >= i && i + ku >= j {
                    let v = rng() + if i == j { 4.0 } else { 0.0 };
                    dense[i][j] = v;
                    band.set(i, j, v);
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng()).collect();
        // dense gaussian elimination
        let mut a = dense.clone();
        let mut x = b.clone();
        for c in 0..n {
            let mut p = c;
            for r in c + 1..n {
                if a[r][c].abs() > a[p][c].abs() {
                    p = r;
                }
            }
            a.swap(c, p);
            x.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                x[r] -= f * x[c];
            }
        }
        for c in (0..n).rev() {
            for k in c + 1..n {
                let t = a[c][k] * x[k];
                x[c] -= t;
            }
            x[c] /= a[c][c];
        }
        let mut rhs = [b];
        band.solve(&mut rhs).unwrap();
        for i in 0..n {
            assert!((rhs[0][i] - x[i]).abs() < 1e-11, "row {i}");
        }
    }

    #[test]
    fn poisson_manufactured_second_order() {
        let (bg, _) = background();
        let mut errs = Vec::new();
        for n1 in [17usize, 33, 65] {
            let grid = Grid::new(bg.rs, bg.r2, n1, 6, 6, 0.5);
            let (k2, k3) = (1usize, 2usize);
            let lam2 = grid.theta.kfac[k2].powi(2);
            let lam3 = grid.x3.kfac[k3].powi(2);
            let ell = grid.r2() - grid.rs();
            let f = |y: f64| (std::f64::consts::PI * (y - grid.rs()) / ell).sin();
            let fp = |y: f64| {
                std::f64::consts::PI / ell * (std::f64::consts::PI * (y - grid.rs()) / ell).cos()
            };
            let fpp = |y: f64| -(std::f64::consts::PI / ell).powi(2) * f(y);
            // exercise the mode operator directly; the public path is driven
            // with an algebraic source by the acceptance suite
            let h = grid.h;
            let mut band = Band::new(n1, 1, 1);
            let mut rhs = vec![0.0; n1];
            band.set(0, 0, 1.0);
            band.set(n1 - 1, n1 - 1, 1.0);
            for i in 1..n1 - 1 {
                let y = grid.y1[i];
                band.set(i, i - 1, 1.0 / (h * h) - 1.0 / (2.0 * h * y));
                band.set(i, i, -2.0 / (h * h) - lam2 / (y * y) - lam3);
                band.set(i, i + 1, 1.0 / (h * h) + 1.0 / (2.0 * h * y));
                rhs[i] = fpp(y) + fp(y) / y - (lam2 / (y * y) + lam3) * f(y);
            }
            let mut rhss = [rhs];
            band.solve(&mut rhss).unwrap();
            let mut e = 0.0f64;
            for i in 0..n1 {
                e = e.max((rhss[0][i] - f(grid.y1[i])).abs());
            }
            errs.push(e);
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 > 1.9 && o2 > 1.9, "errors {errs:?}");
    }

    #[test]
    fn divcurl_manufactured_second_order() {
        let (bg, _) = background();
        let mut errs = Vec::new();
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
            errs.push(e);
            assert!(out.residual < 10.0 / (n1 as f64 * n1 as f64));
            // boundary contract
            assert_eq!(out.v1.c[kk], 0.0);
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 > 1.85 && o2 > 1.85, "errors {errs:?}");
    }

    #[test]
    fn zero_sources_give_zero_fields() {
        let (bg, co) = background();
        let grid = Grid::new(bg.rs, bg.r2, 17, 4, 4, 0.5);
        let profs = bg_profile(&bg, &grid).unwrap();
        let z1 = Modal3::zeros(&grid, Parity::SS);
        let z2 = Modal3::zeros(&grid, Parity::CS);
        let z3 = Modal3::zeros(&grid, Parity::SC);
        let out = solve_divcurl(&grid, &profs, &z1, &z2, &z3).unwrap();
        assert_eq!(out.v1.linf_coeff(), 0.0);
        let g5 = Modal3::zeros(&grid, Parity::CC);
        let m1 = Modal2::zeros(&grid, Parity::CC);
        let m2 = Modal2::zeros(&grid, Parity::CC);
        let phi = solve_phi(&grid, &profs, &co, &g5, &m1, &m2).unwrap();
        assert_eq!(phi.linf_coeff(), 0.0);
    }

    #[test]
    fn face_neumann_solve_inverts_single_modes() {
        let (bg, co) = background();
        let grid = Grid::new(bg.rs, bg.r2, 9, 6, 6, 0.5);
        let z = Modal2::zeros(&grid, Parity::CC);
        let (m1, defect) = solve_m1(&grid, &z, co.a3, bg.rs);
        assert_eq!(m1.linf_coeff(), 0.0);
        assert_eq!(defect, 0.0);
        let q5 = Modal2::single_mode(&grid, Parity::CC, 2, 1, 1.0);
        let (m1, _) = solve_m1(&grid, &q5, co.a3, bg.rs);
        let lam = grid.theta.kfac[2].powi(2) / (bg.rs * bg.rs) + grid.x3.kfac[1].powi(2);
        assert!((m1.at(2, 1) + co.a3 / lam).abs() < 1e-14);
        // nonzero mean is dropped and reported
        let mut q5m = q5.clone();
        q5m.c[0] = 0.37;
        let (m1m, defect) = solve_m1(&grid, &q5m, co.a3, bg.rs);
        assert_eq!(m1m.at(0, 0), 0.0);
        assert!((defect - 0.37).abs() < 1e-15);
    }

    #[test]
    fn potential_manufactured_second_order_with_nonlocal_term() {
        let (bg, co) = background();
        let mut errs = Vec::new();
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
            let fp = |y: f64| {
                0.3 * std::f64::consts::PI / ell * (std::f64::consts::PI * (y - rs) / ell).cos() + 0.2
            };
            let cnl = co.a2 / (co.a1 * co.a3) * co.a4;
            let mut g5 = Modal3::zeros(&grid, Parity::CC);
            for i in 1..n1 - 1 {
                let y = grid.y1[i];
                let pt = bg.point_plus(y).unwrap();
                // L0 f with exact derivatives: d1 (f'/d)' + (1/y+d2) f'/d - lam/d0 f
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
            errs.push(e);
            // single-mode rhs produces a single-mode solution
            for k in 0..grid.npt() {
                if k != kk {
                    for i in 0..n1 {
                        assert_eq!(phi.c[i * grid.npt() + k], 0.0);
                    }
                }
            }
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 > 1.9 && o2 > 1.9, "errors {errs:?}");
    }

    #[test]
    fn nonlocal_off_matches_plain_robin_neumann() {
        // with the nonlocal column suppressed the rank-one closure returns the
        // plain two-point solution
        let (bg, co) = background();
        let grid = Grid::new(bg.rs, bg.r2, 33, 4, 4, 0.5);
        let profs = bg_profile(&bg, &grid).unwrap();
        let mut co_off = co;
        // solve with the nonlocal coefficient scaled away through a2
        co_off.a2 = 0.0;
        let mut g5 = Modal3::zeros(&grid, Parity::CC);
        for i in 1..grid.n1 - 1 {
            g5.c[i * grid.npt()] = (grid.y1[i] - bg.rs).sin();
        }
        let m1 = Modal2::zeros(&grid, Parity::CC);
        let m2 = Modal2::zeros(&grid, Parity::CC);
        let a = solve_phi(&grid, &profs, &co, &g5, &m1, &m2).unwrap();
        let b = solve_phi(&grid, &profs, &co_off, &g5, &m1, &m2).unwrap();
        // both are valid solves; with the nonlocal term they differ
        let mut diff = 0.0f64;
        for (x, y) in a.c.iter().zip(&b.c) {
            diff = diff.max((x - y).abs());
        }
        assert!(diff > 1e-12, "nonlocal term had no effect");
        // and the plain solve satisfies its finite-difference equation rows
        let h = grid.h;
        let mut worst = 0.0f64;
        for i in 1..grid.n1 - 1 {
            let y = grid.y1[i];
            let pt = &profs.at[i];
            let d_ph = profs.at_half[i].d;
            let d_mh = profs.at_half[i - 1].d;
            let val = pt.d1
                * ((b.c[(i + 1) * grid.npt()] - b.c[i * grid.npt()]) / (h * h * d_ph)
                    - (b.c[i * grid.npt()] - b.c[(i - 1) * grid.npt()]) / (h * h * d_mh))
                + (1.0 / y + pt.d2) * (b.c[(i + 1) * grid.npt()] - b.c[(i - 1) * grid.npt()])
                    / (2.0 * h * pt.d)
                - g5.c[i * grid.npt()];
            worst = worst.max(val.abs());
        }
        assert!(worst < 1e-11, "plain solve residual {worst}");
    }

    #[test]
    fn reconstruction_of_radial_potential_has_no_transverse_velocity() {
        let (bg, co) = background();
        let grid = Grid::new(bg.rs, bg.r2, 17, 4, 4, 0.5);
        let profs = bg_profile(&bg, &grid).unwrap();
        let mut phi = Modal3::zeros(&grid, Parity::CC);
        for i in 0..grid.n1 {
            phi.c[i * grid.npt()] = (grid.y1[i] - bg.rs).powi(2);
        }
        let dc = DivCurlOut {
            v1: Modal3::zeros(&grid, Parity::CC),
            v2: Modal3::zeros(&grid, Parity::SC),
            v3: Modal3::zeros(&grid, Parity::CS),
            residual: 0.0,
        };
        let (v1, v2, v3) = reconstruct_velocity(&grid, &profs, &co, &phi, &dc);
        assert!(v1.linf_coeff() > 0.0);
        assert_eq!(v2.linf_coeff(), 0.0);
        assert_eq!(v3.linf_coeff(), 0.0);
    }
}
