//! Discrete covariant calculus on the round 2-sphere.
//!
//! Nodes sit on a latitude-offset grid `theta_j = (j + 1/2) pi / J`,
//! `phi_i = 2 pi i / I`, so no node lies on a pole. Rows beyond either pole
//! are continued antipodally: `(i, -1) -> (i + I/2, 0)`.
//!
//! Derivatives are taken in geodesic normal coordinates centred at each
//! node, along the orthonormal frame `e1 = d/dtheta`, `e2 = d/dphi / sin(theta)`.
//! Stencil points at distance `h = dtheta` along `e1` are grid nodes; the
//! remaining points are read from a 6x6 tensor Lagrange interpolant. In
//! normal coordinates the Christoffel symbols vanish at the centre, so plain
//! centred differences give the covariant gradient and Hessian with an
//! `O(h^2)` error that stays uniform up to the poles.

mod field_io;
mod interp;

pub use field_io::{read_field_binary, read_field_csv, write_field_binary, write_field_csv, FIELD_MAGIC};
pub use interp::InterpDerivs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IcfError, Result};
use interp::{lagrange6, STENCIL};

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn scalar(v: f64) -> Self {
        Self::new(v, 0.0, v)
    }

    /// Closed-form eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let rad = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        (mean - rad, mean + rad)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn add_scalar(&self, v: f64) -> Self {
        Self::new(self.xx + v, self.xy, self.yy + v)
    }

    pub fn scale(&self, v: f64) -> Self {
        Self::new(self.xx * v, self.xy * v, self.yy * v)
    }

    /// `M A M` for symmetric `M`.
    pub fn congruence(&self, m: &Sym2) -> Self {
        // A M
        let am = [
            [self.xx * m.xx + self.xy * m.xy, self.xx * m.xy + self.xy * m.yy],
            [self.xy * m.xx + self.yy * m.xy, self.xy * m.xy + self.yy * m.yy],
        ];
        Self::new(
            m.xx * am[0][0] + m.xy * am[1][0],
            m.xx * am[0][1] + m.xy * am[1][1],
            m.xy * am[0][1] + m.yy * am[1][1],
        )
    }
}

/// Latitude-longitude grid on the unit sphere with precomputed stencils.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    ni: usize,
    nj: usize,
    dtheta: f64,
    dphi: f64,
    theta: Vec<f64>,
    sin_theta: Vec<f64>,
    cos_theta: Vec<f64>,
    phi: Vec<f64>,
    /// Per latitude row: interpolation stencils for the six off-meridian points.
    rows: Vec<[PointStencil; 6]>,
}

/// Tensor Lagrange stencil for one point, relative to longitude index 0.
#[derive(Clone, Copy, Debug)]
struct PointStencil {
    i0: isize,
    j0: isize,
    wt: [f64; 6],
    wp: [f64; 6],
}

/// Off-meridian normal-coordinate offsets in units of `h`, in storage order.
const OFFSETS: [(f64, f64); 6] = [
    (0.0, 1.0),
    (0.0, -1.0),
    (1.0, 1.0),
    (1.0, -1.0),
    (-1.0, 1.0),
    (-1.0, -1.0),
];

impl SphereGrid {
    /// Builds an `ni x nj` grid (`ni` longitudes, `nj` latitudes).
    pub fn new(ni: usize, nj: usize) -> Result<Self> {
        if ni < 8 || !ni.is_multiple_of(2) {
            return Err(IcfError::Config(format!(
                "longitude count must be even and >= 8, got {ni}"
            )));
        }
        if nj < 4 {
            return Err(IcfError::Config(format!("latitude count must be >= 4, got {nj}")));
        }
        let dtheta = std::f64::consts::PI / nj as f64;
        let dphi = std::f64::consts::TAU / ni as f64;
        let theta: Vec<f64> = (0..nj).map(|j| (j as f64 + 0.5) * dtheta).collect();
        let phi: Vec<f64> = (0..ni).map(|i| i as f64 * dphi).collect();
        let mut grid = Self {
            ni,
            nj,
            dtheta,
            dphi,
            sin_theta: theta.iter().map(|t| t.sin()).collect(),
            cos_theta: theta.iter().map(|t| t.cos()).collect(),
            theta,
            phi,
            rows: Vec::new(),
        };
        grid.rows = (0..nj).map(|j| grid.row_stencils(j)).collect();
        Ok(grid)
    }

    fn row_stencils(&self, j: usize) -> [PointStencil; 6] {
        let h = self.step();
        let z = self.direction(0, j);
        let (e1, e2) = self.frame(0, j);
        OFFSETS.map(|(a, b)| {
            let p = exp_map(&z, &e1, &e2, a * h, b * h);
            let (theta, phi) = angles(&p);
            self.point_stencil(theta, phi)
        })
    }

    fn point_stencil(&self, theta: f64, phi: f64) -> PointStencil {
        let u = theta / self.dtheta - 0.5;
        let j0 = u.floor() as isize - 2;
        let v = phi / self.dphi;
        let i0 = v.floor() as isize - 2;
        PointStencil {
            i0,
            j0,
            wt: lagrange6(u - j0 as f64).0,
            wp: lagrange6(v - i0 as f64).0,
        }
    }

    pub fn ni(&self) -> usize {
        self.ni
    }

    pub fn nj(&self) -> usize {
        self.nj
    }

    pub fn len(&self) -> usize {
        self.ni * self.nj
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    pub fn dphi(&self) -> f64 {
        self.dphi
    }

    /// Finite-difference step of the normal-coordinate stencils.
    pub fn step(&self) -> f64 {
        self.dtheta
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.theta[j]
    }

    pub fn phi(&self, i: usize) -> f64 {
        self.phi[i]
    }

    pub fn sin_theta(&self, j: usize) -> f64 {
        self.sin_theta[j]
    }

    /// Flat storage index of node `(i, j)`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nj + j
    }

    /// Inverse of [`SphereGrid::index`].
    #[inline]
    pub fn node(&self, idx: usize) -> (usize, usize) {
        (idx / self.nj, idx % self.nj)
    }

    /// Resolves an extended index pair: longitudes wrap, latitude rows beyond
    /// a pole continue on the antipodal meridian.
    #[inline]
    pub fn wrap(&self, i: isize, j: isize) -> (usize, usize) {
        let nj = self.nj as isize;
        let (i, j) = if j < 0 {
            (i + self.ni as isize / 2, -1 - j)
        } else if j >= nj {
            (i + self.ni as isize / 2, 2 * nj - 1 - j)
        } else {
            (i, j)
        };
        (i.rem_euclid(self.ni as isize) as usize, j as usize)
    }

    #[inline]
    fn wrapped_index(&self, i: isize, j: isize) -> usize {
        let (i, j) = self.wrap(i, j);
        self.index(i, j)
    }

    /// Unit vector of node `(i, j)`.
    pub fn direction(&self, i: usize, j: usize) -> [f64; 3] {
        let (sp, cp) = self.phi[i].sin_cos();
        let st = self.sin_theta[j];
        [st * cp, st * sp, self.cos_theta[j]]
    }

    /// Orthonormal frame `(e1, e2)` at node `(i, j)`.
    pub fn frame(&self, i: usize, j: usize) -> ([f64; 3], [f64; 3]) {
        frame_at(self.theta[j], self.phi[i])
    }

    /// Eight neighbours of a node, with antipodal continuation at the poles.
    pub fn neighbors8(&self, i: usize, j: usize) -> [(usize, usize); 8] {
        let (i, j) = (i as isize, j as isize);
        [
            self.wrap(i + 1, j),
            self.wrap(i - 1, j),
            self.wrap(i, j + 1),
            self.wrap(i, j - 1),
            self.wrap(i + 1, j + 1),
            self.wrap(i - 1, j + 1),
            self.wrap(i + 1, j - 1),
            self.wrap(i - 1, j - 1),
        ]
    }

    /// Grid node closest in angle to the unit vector `z`.
    pub fn nearest_node(&self, z: &[f64; 3]) -> (usize, usize) {
        let (theta, phi) = angles(z);
        let j = ((theta / self.dtheta - 0.5).round().max(0.0) as usize).min(self.nj - 1);
        let i = ((phi / self.dphi).round() as isize).rem_euclid(self.ni as isize) as usize;
        (i, j)
    }

    /// Tensor Lagrange interpolation of `field` at `(theta, phi)`.
    pub fn interpolate(&self, field: &ScalarField, theta: f64, phi: f64) -> f64 {
        let st = self.point_stencil(theta, phi);
        let mut acc = 0.0;
        for (b, wt) in st.wt.iter().enumerate() {
            let mut row = 0.0;
            for (a, wp) in st.wp.iter().enumerate() {
                row += wp * field.values[self.wrapped_index(st.i0 + a as isize, st.j0 + b as isize)];
            }
            acc += wt * row;
        }
        acc
    }

    /// Interpolated value with first and second coordinate derivatives.
    pub fn interpolate_derivs(&self, field: &ScalarField, theta: f64, phi: f64) -> InterpDerivs {
        let u = theta / self.dtheta - 0.5;
        let j0 = u.floor() as isize - 2;
        let v = phi / self.dphi;
        let i0 = v.floor() as isize - 2;
        let (t0, t1, t2) = lagrange6(u - j0 as f64);
        let (p0, p1, p2) = lagrange6(v - i0 as f64);
        let mut out = InterpDerivs::default();
        for b in 0..STENCIL {
            let (mut r0, mut r1, mut r2) = (0.0, 0.0, 0.0);
            for a in 0..STENCIL {
                let val = field.values[self.wrapped_index(i0 + a as isize, j0 + b as isize)];
                r0 += p0[a] * val;
                r1 += p1[a] * val;
                r2 += p2[a] * val;
            }
            out.value += t0[b] * r0;
            out.d_theta += t1[b] * r0;
            out.d_phi += t0[b] * r1;
            out.d_theta2 += t2[b] * r0;
            out.d_theta_phi += t1[b] * r1;
            out.d_phi2 += t0[b] * r2;
        }
        let (it, ip) = (1.0 / self.dtheta, 1.0 / self.dphi);
        out.d_theta *= it;
        out.d_phi *= ip;
        out.d_theta2 *= it * it;
        out.d_theta_phi *= it * ip;
        out.d_phi2 *= ip * ip;
        out
    }

    /// Covariant gradient and Hessian of `s` at one node, orthonormal frame.
    pub fn node_derivatives(&self, s: &ScalarField, i: usize, j: usize) -> ([f64; 2], Sym2) {
        let h = self.step();
        let s0 = s.values[self.index(i, j)];
        let (ii, jj) = (i as isize, j as isize);
        let north = s.values[self.wrapped_index(ii, jj - 1)] - s0;
        let south = s.values[self.wrapped_index(ii, jj + 1)] - s0;
        let mut pts = [0.0; 6];
        for (slot, st) in pts.iter_mut().zip(self.rows[j].iter()) {
            let mut acc = 0.0;
            for (b, wt) in st.wt.iter().enumerate() {
                let mut row = 0.0;
                for (a, wp) in st.wp.iter().enumerate() {
                    let idx = self.wrapped_index(ii + st.i0 + a as isize, st.j0 + b as isize);
                    row += wp * (s.values[idx] - s0);
                }
                acc += wt * row;
            }
            *slot = acc;
        }
        let [east, west, se, sw, ne, nw] = pts;
        let grad = [(south - north) / (2.0 * h), (east - west) / (2.0 * h)];
        let hess = Sym2::new(
            (south + north) / (h * h),
            (se - sw - ne + nw) / (4.0 * h * h),
            (east + west) / (h * h),
        );
        (grad, hess)
    }
}

/// `exp_z(a e1 + b e2)` on the unit sphere.
pub fn exp_map(z: &[f64; 3], e1: &[f64; 3], e2: &[f64; 3], a: f64, b: f64) -> [f64; 3] {
    let r = a.hypot(b);
    if r == 0.0 {
        return *z;
    }
    let (sr, cr) = r.sin_cos();
    std::array::from_fn(|k| cr * z[k] + sr * (a * e1[k] + b * e2[k]) / r)
}

/// Polar and azimuthal angles of a unit vector, `theta` in `[0, pi]`, `phi` in `[0, 2 pi)`.
pub fn angles(z: &[f64; 3]) -> (f64, f64) {
    let theta = z[0].hypot(z[1]).atan2(z[2]);
    let phi = z[1].atan2(z[0]).rem_euclid(std::f64::consts::TAU);
    (theta, phi)
}

/// Orthonormal frame `(d/dtheta, d/dphi / sin theta)` at `(theta, phi)`.
pub fn frame_at(theta: f64, phi: f64) -> ([f64; 3], [f64; 3]) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    ([ct * cp, ct * sp, -st], [-sp, cp, 0.0])
}

/// Node values of a scalar function on a [`SphereGrid`], stored longitude-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    ni: usize,
    nj: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: &SphereGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(IcfError::Format(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IcfError::Domain("field contains non-finite values".into()));
        }
        Ok(Self {
            ni: grid.ni,
            nj: grid.nj,
            values,
        })
    }

    pub fn constant(grid: &SphereGrid, v: f64) -> Self {
        Self {
            ni: grid.ni,
            nj: grid.nj,
            values: vec![v; grid.len()],
        }
    }

    /// Samples `f(theta, phi)` at every node.
    pub fn from_angles(grid: &SphereGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (i, j) = grid.node(idx);
                f(grid.theta[j], grid.phi[i])
            })
            .collect();
        Self {
            ni: grid.ni,
            nj: grid.nj,
            values,
        }
    }

    /// Samples `f(z)` at every node's unit vector.
    pub fn from_direction(grid: &SphereGrid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let (i, j) = grid.node(idx);
                f(grid.direction(i, j))
            })
            .collect();
        Self {
            ni: grid.ni,
            nj: grid.nj,
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.ni, self.nj)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nj + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            ni: self.ni,
            nj: self.nj,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Shifts the data by `k` longitude steps: `out(i, j) = self(i - k, j)`.
    pub fn shift_longitude(&self, k: isize) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.ni {
            let src = (i as isize - k).rem_euclid(self.ni as isize) as usize;
            values[i * self.nj..(i + 1) * self.nj]
                .copy_from_slice(&self.values[src * self.nj..(src + 1) * self.nj]);
        }
        Self {
            ni: self.ni,
            nj: self.nj,
            values,
        }
    }

    /// The antipodal field `out(z) = self(-z)`.
    pub fn antipodal(&self) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.ni {
            for j in 0..self.nj {
                let src = (i + self.ni / 2) % self.ni;
                values[i * self.nj + j] = self.values[src * self.nj + self.nj - 1 - j];
            }
        }
        Self {
            ni: self.ni,
            nj: self.nj,
            values,
        }
    }
}

/// Per-node covariant derivatives of a scalar field.
#[derive(Clone, Debug)]
pub struct CovariantDerivatives {
    pub grad: Vec<[f64; 2]>,
    pub hess: Vec<Sym2>,
    pub gradnorm2: ScalarField,
}

/// Gradient, Hessian and `|grad s|^2` at every node.
pub fn covariant_hessian(grid: &SphereGrid, s: &ScalarField) -> CovariantDerivatives {
    let (grad, hess): (Vec<[f64; 2]>, Vec<Sym2>) = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.node(idx);
            grid.node_derivatives(s, i, j)
        })
        .unzip();
    let gradnorm2 = ScalarField {
        ni: grid.ni,
        nj: grid.nj,
        values: grad.iter().map(|g| g[0] * g[0] + g[1] * g[1]).collect(),
    };
    CovariantDerivatives {
        grad,
        hess,
        gradnorm2,
    }
}

/// The radii matrix `hess s + s Id` in the orthonormal frame.
pub fn radii_matrix(grid: &SphereGrid, s: &ScalarField) -> Vec<Sym2> {
    covariant_hessian(grid, s)
        .hess
        .into_iter()
        .zip(s.values.iter())
        .map(|(h, v)| h.add_scalar(*v))
        .collect()
}

/// Ordered eigenvalue pairs `(tau1 <= tau2)` of each matrix.
pub fn principal_radii(tau: &[Sym2]) -> Vec<(f64, f64)> {
    tau.iter().map(Sym2::eigenvalues).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Min,
    Max,
    /// Area-weighted mean with weights `sin(theta_j) dtheta dphi`.
    Mean,
}

pub fn reduce(grid: &SphereGrid, field: &ScalarField, kind: Reduction) -> f64 {
    match kind {
        Reduction::Min => field.values.iter().copied().fold(f64::INFINITY, f64::min),
        Reduction::Max => field.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Reduction::Mean => {
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..grid.nj {
                let w = grid.sin_theta[j];
                for i in 0..grid.ni {
                    num += w * field.values[grid.index(i, j)];
                    den += w;
                }
            }
            num / den
        }
    }
}
