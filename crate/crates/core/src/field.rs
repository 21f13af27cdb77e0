//! Spectral toolbox on the fixed box [rs, r2] x [-theta0, theta0] x [-1, 1].
//!
//! Transverse directions use cosine/sine families in the stretched coordinate
//! zeta = (x + L)/(2L) on midpoint collocation nodes. The cosine family has
//! vanishing odd derivatives at the walls, the sine family vanishes there
//! together with its second derivative, so the four tensor classes cc, sc,
//! cs, ss encode the wall compatibility conditions of every solver field
//! structurally. Analysis/synthesis are explicit orthogonal transforms that
//! round-trip retained modes to machine precision; differentiation acts mode
//! by mode and swaps the family.

use serde::{Deserialize, Serialize};

/// One-direction family of a tensor-product class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parity {
    pub theta: Family,
    pub x3: Family,
}

impl Parity {
    pub const CC: Parity = Parity { theta: Family::Cos, x3: Family::Cos };
    pub const SC: Parity = Parity { theta: Family::Sin, x3: Family::Cos };
    pub const CS: Parity = Parity { theta: Family::Cos, x3: Family::Sin };
    pub const SS: Parity = Parity { theta: Family::Sin, x3: Family::Sin };

    pub fn d_theta(self) -> Parity {
        Parity { theta: flip(self.theta), x3: self.x3 }
    }
    pub fn d_x3(self) -> Parity {
        Parity { theta: self.theta, x3: flip(self.x3) }
    }

    pub fn tag(self) -> &'static str {
        match (self.theta, self.x3) {
            (Family::Cos, Family::Cos) => "cc",
            (Family::Sin, Family::Cos) => "sc",
            (Family::Cos, Family::Sin) => "cs",
            (Family::Sin, Family::Sin) => "ss",
        }
    }
}

fn flip(f: Family) -> Family {
    match f {
        Family::Cos => Family::Sin,
        Family::Sin => Family::Cos,
    }
}

/// Midpoint-collocation basis for one transverse direction on [-half, half].
#[derive(Debug, Clone)]
pub struct DirBasis {
    pub n: usize,
    pub half: f64,
    /// collocation nodes in the native coordinate
    pub nodes: Vec<f64>,
    /// derivative factor k pi / (2 half) per mode slot
    pub kfac: Vec<f64>,
    cos_tab: Vec<f64>, // [j*n + k] = cos(k pi zeta_j)
    sin_tab: Vec<f64>, // [j*n + k] = sin(k pi zeta_j)
}

impl DirBasis {
    pub fn new(n: usize, half: f64) -> Self {
        assert!(n >= 2, "need at least two collocation nodes");
        let mut nodes = Vec::with_capacity(n);
        let mut cos_tab = vec![0.0; n * n];
        let mut sin_tab = vec![0.0; n * n];
        for j in 0..n {
            let zeta = (j as f64 + 0.5) / n as f64;
            nodes.push(-half + 2.0 * half * zeta);
            for k in 0..n {
                let arg = k as f64 * std::f64::consts::PI * zeta;
                cos_tab[j * n + k] = arg.cos();
                sin_tab[j * n + k] = arg.sin();
            }
        }
        let kfac = (0..n)
            .map(|k| k as f64 * std::f64::consts::PI / (2.0 * half))
            .collect();
        Self { n, half, nodes, kfac, cos_tab, sin_tab }
    }

    fn tab(&self, fam: Family) -> &[f64] {
        match fam {
            Family::Cos => &self.cos_tab,
            Family::Sin => &self.sin_tab,
        }
    }

    /// Basis values at an arbitrary native coordinate.
    pub fn eval_modes(&self, fam: Family, x: f64, out: &mut [f64]) {
        let zeta = (x + self.half) / (2.0 * self.half);
        let t = std::f64::consts::PI * zeta;
        // Chebyshev-style recurrence over the mode index
        let (c1, s1) = (t.cos(), t.sin());
        let (mut ckm1, mut skm1) = (1.0f64, 0.0f64);
        for k in 0..self.n {
            out[k] = match fam {
                Family::Cos => ckm1,
                Family::Sin => skm1,
            };
            let c = ckm1 * c1 - skm1 * s1;
            let s = skm1 * c1 + ckm1 * s1;
            ckm1 = c;
            skm1 = s;
        }
    }
}

/// Spectral grid: radial stations plus the two transverse bases.
#[derive(Debug, Clone)]
pub struct Grid {
    pub n1: usize,
    pub y1: Vec<f64>,
    pub h: f64,
    pub theta: DirBasis,
    pub x3: DirBasis,
}

impl Grid {
    pub fn new(rs: f64, r2: f64, n1: usize, n2: usize, n3: usize, theta0: f64) -> Self {
        assert!(n1 >= 4);
        let h = (r2 - rs) / (n1 - 1) as f64;
        let y1 = (0..n1).map(|i| rs + h * i as f64).collect();
        Self { n1, y1, h, theta: DirBasis::new(n2, theta0), x3: DirBasis::new(n3, 1.0) }
    }

    pub fn n2(&self) -> usize {
        self.theta.n
    }
    pub fn n3(&self) -> usize {
        self.x3.n
    }
    pub fn rs(&self) -> f64 {
        self.y1[0]
    }
    pub fn r2(&self) -> f64 {
        self.y1[self.n1 - 1]
    }
    /// transverse point count
    pub fn npt(&self) -> usize {
        self.theta.n * self.x3.n
    }
}

/// 2D field on the cross-section E, stored as mode amplitudes.
#[derive(Debug, Clone)]
pub struct Modal2 {
    pub parity: Parity,
    pub n2: usize,
    pub n3: usize,
    pub c: Vec<f64>,
}

/// 3D field on the box, transverse modes x radial stations.
#[derive(Debug, Clone)]
pub struct Modal3 {
    pub parity: Parity,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub c: Vec<f64>, // [i1][k2][k3]
}

impl Modal2 {
    pub fn zeros(grid: &Grid, parity: Parity) -> Self {
        Self { parity, n2: grid.n2(), n3: grid.n3(), c: vec![0.0; grid.npt()] }
    }

    pub fn single_mode(grid: &Grid, parity: Parity, k2: usize, k3: usize, amp: f64) -> Self {
        let mut f = Self::zeros(grid, parity);
        f.c[k2 * f.n3 + k3] = amp;
        f
    }

    pub fn at(&self, k2: usize, k3: usize) -> f64 {
        self.c[k2 * self.n3 + k3]
    }

    /// Synthesize onto the collocation grid of E.
    pub fn synth(&self, grid: &Grid) -> Vec<f64> {
        let (n2, n3) = (self.n2, self.n3);
        let t2 = grid.theta.tab(self.parity.theta);
        let t3 = grid.x3.tab(self.parity.x3);
        let mut out = vec![0.0; n2 * n3];
        // contract theta first
        let mut tmp = vec![0.0; n2 * n3]; // [j2][k3]
        for j2 in 0..n2 {
            for k3 in 0..n3 {
                let mut acc = 0.0;
                for k2 in 0..n2 {
                    acc += t2[j2 * n2 + k2] * self.c[k2 * n3 + k3];
                }
                tmp[j2 * n3 + k3] = acc;
            }
        }
        for j2 in 0..n2 {
            for j3 in 0..n3 {
                let mut acc = 0.0;
                for k3 in 0..n3 {
                    acc += t3[j3 * n3 + k3] * tmp[j2 * n3 + k3];
                }
                out[j2 * n3 + j3] = acc;
            }
        }
        out
    }

    /// Project collocation values onto the class; returns the field and the
    /// sup-norm projection defect.
    pub fn analyze(grid: &Grid, parity: Parity, vals: &[f64]) -> (Self, f64) {
        let (n2, n3) = (grid.n2(), grid.n3());
        assert_eq!(vals.len(), n2 * n3);
        let c = analyze_2d(grid, parity, vals);
        let f = Self { parity, n2, n3, c };
        let back = f.synth(grid);
        let defect = vals
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        (f, defect)
    }

    /// Value at an arbitrary transverse point.
    pub fn eval(&self, grid: &Grid, y2: f64, y3: f64) -> f64 {
        let mut b2 = vec![0.0; self.n2];
        let mut b3 = vec![0.0; self.n3];
        grid.theta.eval_modes(self.parity.theta, y2, &mut b2);
        grid.x3.eval_modes(self.parity.x3, y3, &mut b3);
        let mut acc = 0.0;
        for k2 in 0..self.n2 {
            let mut inner = 0.0;
            for k3 in 0..self.n3 {
                inner += self.c[k2 * self.n3 + k3] * b3[k3];
            }
            acc += b2[k2] * inner;
        }
        acc
    }

    /// Exact mode-wise derivative in theta (family swaps).
    pub fn d_theta(&self, grid: &Grid) -> Self {
        let mut out = Self {
            parity: self.parity.d_theta(),
            n2: self.n2,
            n3: self.n3,
            c: vec![0.0; self.c.len()],
        };
        for k2 in 0..self.n2 {
            let fac = match self.parity.theta {
                Family::Cos => -grid.theta.kfac[k2],
                Family::Sin => grid.theta.kfac[k2],
            };
            for k3 in 0..self.n3 {
                out.c[k2 * self.n3 + k3] = fac * self.c[k2 * self.n3 + k3];
            }
        }
        out
    }

    pub fn d_x3(&self, grid: &Grid) -> Self {
        let mut out = Self {
            parity: self.parity.d_x3(),
            n2: self.n2,
            n3: self.n3,
            c: vec![0.0; self.c.len()],
        };
        for k2 in 0..self.n2 {
            for k3 in 0..self.n3 {
                let fac = match self.parity.x3 {
                    Family::Cos => -grid.x3.kfac[k3],
                    Family::Sin => grid.x3.kfac[k3],
                };
                out.c[k2 * self.n3 + k3] = fac * self.c[k2 * self.n3 + k3];
            }
        }
        out
    }

    pub fn linf_coeff(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.c {
            *v *= a;
        }
        out
    }
}

fn analyze_1d(basis: &DirBasis, fam: Family, stride_in: usize, vals: &[f64], k: usize) -> f64 {
    // inner product of column k with the samples along the direction
    let n = basis.n;
    let tab = basis.tab(fam);
    let mut acc = 0.0;
    for j in 0..n {
        acc += tab[j * n + k] * vals[j * stride_in];
    }
    let w = match fam {
        Family::Cos => {
            if k == 0 {
                1.0 / n as f64
            } else {
                2.0 / n as f64
            }
        }
        Family::Sin => {
            if k == 0 {
                0.0
            } else {
                2.0 / n as f64
            }
        }
    };
    acc * w
}

fn analyze_2d(grid: &Grid, parity: Parity, vals: &[f64]) -> Vec<f64> {
    let (n2, n3) = (grid.n2(), grid.n3());
    // theta direction first: tmp[k2][j3]
    let mut tmp = vec![0.0; n2 * n3];
    for j3 in 0..n3 {
        for k2 in 0..n2 {
            tmp[k2 * n3 + j3] = analyze_1d(&grid.theta, parity.theta, n3, &vals[j3..], k2);
        }
    }
    let mut c = vec![0.0; n2 * n3];
    for k2 in 0..n2 {
        for k3 in 0..n3 {
            c[k2 * n3 + k3] = analyze_1d(&grid.x3, parity.x3, 1, &tmp[k2 * n3..(k2 + 1) * n3], k3);
        }
    }
    c
}

impl Modal3 {
    pub fn zeros(grid: &Grid, parity: Parity) -> Self {
        Self {
            parity,
            n1: grid.n1,
            n2: grid.n2(),
            n3: grid.n3(),
            c: vec![0.0; grid.n1 * grid.npt()],
        }
    }

    pub fn npt(&self) -> usize {
        self.n2 * self.n3
    }

    pub fn station(&self, i1: usize) -> &[f64] {
        &self.c[i1 * self.npt()..(i1 + 1) * self.npt()]
    }

    pub fn station_mut(&mut self, i1: usize) -> &mut [f64] {
        let npt = self.npt();
        &mut self.c[i1 * npt..(i1 + 1) * npt]
    }

    pub fn station_modal2(&self, i1: usize) -> Modal2 {
        Modal2 { parity: self.parity, n2: self.n2, n3: self.n3, c: self.station(i1).to_vec() }
    }

    pub fn set_station(&mut self, i1: usize, m: &Modal2) {
        assert_eq!(m.parity, self.parity);
        self.station_mut(i1).copy_from_slice(&m.c);
    }

    /// Synthesize every station onto the collocation grid.
    pub fn synth(&self, grid: &Grid) -> Vec<f64> {
        let npt = self.npt();
        let mut out = vec![0.0; self.n1 * npt];
        for i1 in 0..self.n1 {
            let m = self.station_modal2(i1);
            out[i1 * npt..(i1 + 1) * npt].copy_from_slice(&m.synth(grid));
        }
        out
    }

    pub fn analyze(grid: &Grid, parity: Parity, vals: &[f64]) -> (Self, f64) {
        let npt = grid.npt();
        assert_eq!(vals.len(), grid.n1 * npt);
        let mut f = Self::zeros(grid, parity);
        let mut defect = 0.0f64;
        for i1 in 0..grid.n1 {
            let (m, d) = Modal2::analyze(grid, parity, &vals[i1 * npt..(i1 + 1) * npt]);
            f.set_station(i1, &m);
            defect = defect.max(d);
        }
        (f, defect)
    }

    /// Mode-wise transverse derivatives (exact).
    pub fn d_theta(&self, grid: &Grid) -> Self {
        let mut out = Self { parity: self.parity.d_theta(), ..self.clone() };
        for i1 in 0..self.n1 {
            let m = self.station_modal2(i1).d_theta(grid);
            out.station_mut(i1).copy_from_slice(&m.c);
        }
        out
    }

    pub fn d_x3(&self, grid: &Grid) -> Self {
        let mut out = Self { parity: self.parity.d_x3(), ..self.clone() };
        for i1 in 0..self.n1 {
            let m = self.station_modal2(i1).d_x3(grid);
            out.station_mut(i1).copy_from_slice(&m.c);
        }
        out
    }

    /// Second-order radial derivative of the coefficient profiles.
    pub fn d_y1(&self, grid: &Grid) -> Self {
        let mut out = self.clone();
        let npt = self.npt();
        let h = grid.h;
        let n1 = self.n1;
        for p in 0..npt {
            for i in 0..n1 {
                let v = if i == 0 {
                    (-3.0 * self.c[p] + 4.0 * self.c[npt + p] - self.c[2 * npt + p]) / (2.0 * h)
                } else if i == n1 - 1 {
                    (3.0 * self.c[i * npt + p] - 4.0 * self.c[(i - 1) * npt + p]
                        + self.c[(i - 2) * npt + p])
                        / (2.0 * h)
                } else {
                    (self.c[(i + 1) * npt + p] - self.c[(i - 1) * npt + p]) / (2.0 * h)
                };
                out.c[i * npt + p] = v;
            }
        }
        out
    }

    /// Cubic interpolation of the mode coefficients at radius tau.
    pub fn interp_station(&self, grid: &Grid, tau: f64, out: &mut [f64]) {
        let npt = self.npt();
        assert_eq!(out.len(), npt);
        let (i0, w) = cubic_weights(grid, tau);
        for p in 0..npt {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                acc += wk * self.c[(i0 + k) * npt + p];
            }
            out[p] = acc;
        }
    }

    pub fn linf_coeff(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Drop transverse modes above the 2/3 cutoff in either direction.
    pub fn filter_two_thirds(&mut self) {
        let cut2 = 2 * (self.n2 - 1) / 3;
        let cut3 = 2 * (self.n3 - 1) / 3;
        for i1 in 0..self.n1 {
            for k2 in 0..self.n2 {
                for k3 in 0..self.n3 {
                    if k2 > cut2 || k3 > cut3 {
                        let npt = self.n2 * self.n3;
                        self.c[i1 * npt + k2 * self.n3 + k3] = 0.0;
                    }
                }
            }
        }
    }
}

/// 4-point Lagrange weights for radius tau on the uniform station grid.
pub fn cubic_weights(grid: &Grid, tau: f64) -> (usize, [f64; 4]) {
    let n1 = grid.n1;
    let h = grid.h;
    let t = (tau - grid.y1[0]) / h;
    let cell = (t.floor() as isize).clamp(0, n1 as isize - 2) as usize;
    let i0 = cell.saturating_sub(1).min(n1 - 4);
    let mut w = [0.0; 4];
    for k in 0..4 {
        let xk = (i0 + k) as f64;
        let mut prod = 1.0;
        for l in 0..4 {
            if l != k {
                let xl = (i0 + l) as f64;
                prod *= (t - xl) / (xk - xl);
            }
        }
        w[k] = prod;
    }
    (i0, w)
}

/// Pointwise product helper on collocation values.
pub fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn linf(vals: &[f64]) -> f64 {
    vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
