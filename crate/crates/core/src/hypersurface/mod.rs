//! Convex surfaces in the three space forms, represented by support functions.
//!
//! Hyperbolic and spherical states live in a chart: the surface is the image
//! of a Euclidean convex body `Y(z) = s z + grad s` under
//! `X = (1, Y) / sqrt(1 -+ |Y|^2)` (hyperboloid or upper hemisphere of `S^3`).
//! The inverse Weingarten map is assembled in the orthonormal frame of the
//! round sphere, in the symmetric congruent form `k S^{1/2} tau S^{1/2}`.

mod polar;
mod state_io;

pub use polar::{polar_dual, polar_dual_with_correspondence};
pub use state_io::{load_state, save_state, StateSidecar, STATE_FORMAT_VERSION};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvfn::CurvatureFunction;
use crate::error::{IcfError, Result};
use crate::sphgrid::{ScalarField, SphereGrid, Sym2};

/// Ambient space form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambient {
    Euclidean,
    Hyperbolic,
    Spherical,
}

impl Ambient {
    pub fn sectional_curvature(self) -> f64 {
        match self {
            Ambient::Euclidean => 0.0,
            Ambient::Hyperbolic => -1.0,
            Ambient::Spherical => 1.0,
        }
    }
}

impl fmt::Display for Ambient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ambient::Euclidean => "euclidean",
            Ambient::Hyperbolic => "hyperbolic",
            Ambient::Spherical => "spherical",
        })
    }
}

impl FromStr for Ambient {
    type Err = IcfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Ambient::Euclidean),
            "hyperbolic" => Ok(Ambient::Hyperbolic),
            "spherical" => Ok(Ambient::Spherical),
            other => Err(IcfError::Config(format!("unknown ambient space `{other}`"))),
        }
    }
}

/// Support function of a convex surface at time `t`.
#[derive(Clone, Debug)]
pub struct SupportState {
    pub ambient: Ambient,
    pub s: ScalarField,
    pub t: f64,
    grid: Arc<SphereGrid>,
}

impl SupportState {
    pub fn new(ambient: Ambient, grid: Arc<SphereGrid>, s: ScalarField, t: f64) -> Result<Self> {
        if s.dims() != (grid.ni(), grid.nj()) {
            return Err(IcfError::Config(format!(
                "field is {:?} but grid is {}x{}",
                s.dims(),
                grid.ni(),
                grid.nj()
            )));
        }
        Ok(Self { ambient, s, t, grid })
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    /// Same ambient and grid, new values and time.
    pub fn with_field(&self, s: ScalarField, t: f64) -> Self {
        Self {
            ambient: self.ambient,
            s,
            t,
            grid: Arc::clone(&self.grid),
        }
    }
}

/// Everything the flow and diagnostics need at one node.
#[derive(Clone, Copy, Debug)]
pub struct NodeGeometry {
    pub s: f64,
    pub grad: [f64; 2],
    pub gradnorm2: f64,
    /// `hess s + s Id`.
    pub tau: Sym2,
    /// Inverse Weingarten map in the orthonormal frame.
    pub winv: Sym2,
    /// Factor multiplying `F_*^alpha` in the flow equation.
    pub prefactor: f64,
    /// `prefactor * k * lambda_max(S)`: how strongly `tau` drives the right-hand side.
    pub stiffness: f64,
}

impl NodeGeometry {
    /// `|Y|^2 = s^2 + |grad s|^2`.
    pub fn chart_norm2(&self) -> f64 {
        self.s * self.s + self.gradnorm2
    }
}

enum Violation {
    Ball(f64),
    Convexity(f64),
}

fn node_geometry(ambient: Ambient, s: f64, grad: [f64; 2], hess: Sym2, scale: f64) -> std::result::Result<NodeGeometry, Violation> {
    let gradnorm2 = grad[0] * grad[0] + grad[1] * grad[1];
    let tau = hess.add_scalar(s);
    let tau_min = tau.eigenvalues().0;
    if !(tau_min > CONVEXITY_REL_TOL * scale) {
        return Err(Violation::Convexity(tau_min));
    }
    let (winv, prefactor, stiffness) = match ambient {
        Ambient::Euclidean => (tau, 1.0, 1.0),
        Ambient::Hyperbolic => {
            let d = 1.0 - s * s - gradnorm2;
            if !(d > BALL_MARGIN_MIN) {
                return Err(Violation::Ball(d));
            }
            let one = 1.0 - s * s;
            let k = (one / d).sqrt();
            let root = rank_one_sqrt(grad, 1.0 / d);
            let winv = tau.congruence(&root).scale(k);
            let prefactor = (d * one).sqrt();
            (winv, prefactor, prefactor * k * (1.0 + gradnorm2 / d))
        }
        Ambient::Spherical => {
            let e = 1.0 + s * s + gradnorm2;
            let one = 1.0 + s * s;
            let k = (one / e).sqrt();
            let root = rank_one_sqrt(grad, -1.0 / e);
            let winv = tau.congruence(&root).scale(k);
            let prefactor = (e * one).sqrt();
            (winv, prefactor, prefactor * k)
        }
    };
    Ok(NodeGeometry {
        s,
        grad,
        gradnorm2,
        tau,
        winv,
        prefactor,
        stiffness,
    })
}

/// `(Id + c g g^T)^{1/2}`, assuming `1 + c |g|^2 > 0`.
fn rank_one_sqrt(g: [f64; 2], c: f64) -> Sym2 {
    let x = c * (g[0] * g[0] + g[1] * g[1]);
    let coef = c / ((1.0 + x).sqrt() + 1.0);
    Sym2::new(1.0 + coef * g[0] * g[0], coef * g[0] * g[1], 1.0 + coef * g[1] * g[1])
}

/// Convexity needs `min eig(tau) > CONVEXITY_REL_TOL * mean(s)`.
pub const CONVEXITY_REL_TOL: f64 = 1e-10;
/// Hyperbolic states need `1 - s^2 - |grad s|^2` above this.
pub const BALL_MARGIN_MIN: f64 = 1e-6;
/// Validation flags ball margins below this as near-degenerate.
pub const NEAR_DEGENERATE_MARGIN: f64 = 1e-2;

fn violation_error(state: &SupportState, idx: usize, v: Violation) -> IcfError {
    let (i, j) = state.grid().node(idx);
    match v {
        Violation::Convexity(min_radius) => IcfError::ConvexityLost {
            i,
            j,
            t: state.t,
            min_radius,
        },
        Violation::Ball(d) => IcfError::StateInvalid {
            i,
            j,
            t: state.t,
            reason: format!("hyperbolic image leaves the unit ball (1 - |Y|^2 = {d:e})"),
        },
    }
}

fn convexity_scale(state: &SupportState) -> f64 {
    let v = state.s.values();
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
}

/// Per-node geometry of the whole state; fails at the first offending node.
pub fn geometry(state: &SupportState) -> Result<Vec<NodeGeometry>> {
    let grid = state.grid();
    let scale = convexity_scale(state);
    let raw: Vec<std::result::Result<NodeGeometry, Violation>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.node(idx);
            let (grad, hess) = grid.node_derivatives(&state.s, i, j);
            node_geometry(state.ambient, state.s.values()[idx], grad, hess, scale)
        })
        .collect();
    raw.into_iter()
        .enumerate()
        .map(|(idx, r)| r.map_err(|v| violation_error(state, idx, v)))
        .collect()
}

/// Inverse Weingarten map at one node, orthonormal frame.
pub fn weingarten_inverse(state: &SupportState, i: usize, j: usize) -> Result<Sym2> {
    let grid = state.grid();
    let (grad, hess) = grid.node_derivatives(&state.s, i, j);
    let s = state.s.get(i, j);
    node_geometry(state.ambient, s, grad, hess, s.abs())
        .map(|g| g.winv)
        .map_err(|v| violation_error(state, grid.index(i, j), v))
}

/// Ordered principal curvatures and the speed `F = f(kappa)` at every node.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub kappa: Vec<[f64; 2]>,
    pub speed: Vec<f64>,
}

impl CurvatureField {
    pub fn from_geometry(geo: &[NodeGeometry], f: &CurvatureFunction) -> Self {
        let kappa: Vec<[f64; 2]> = geo
            .iter()
            .map(|g| {
                let (w1, w2) = g.winv.eigenvalues();
                [1.0 / w2, 1.0 / w1]
            })
            .collect();
        let speed = kappa.iter().map(|k| f.value_unchecked(k)).collect();
        Self { kappa, speed }
    }
}

pub fn principal_curvatures(state: &SupportState, f: &CurvatureFunction) -> Result<CurvatureField> {
    if f.dim() != 2 {
        return Err(IcfError::Config(format!(
            "surfaces need a curvature function of 2 variables, got {}",
            f.dim()
        )));
    }
    Ok(CurvatureField::from_geometry(&geometry(state)?, f))
}

/// Node positions in the ambient model.
///
/// Euclidean points are `Y` in the first three slots (the fourth is zero);
/// hyperbolic points lie on the hyperboloid in Minkowski space `R^{1,3}`;
/// spherical points lie on `S^3` in `R^4`. The leading slot is `x_0`.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub ambient: Ambient,
    pub points: Vec<[f64; 4]>,
}

/// Chart image `Y(z) = s z + grad s` at every node.
pub fn chart_points(state: &SupportState) -> Vec<[f64; 3]> {
    let grid = state.grid();
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.node(idx);
            let (grad, _) = grid.node_derivatives(&state.s, i, j);
            let z = grid.direction(i, j);
            let (e1, e2) = grid.frame(i, j);
            let s = state.s.values()[idx];
            std::array::from_fn(|k| s * z[k] + grad[0] * e1[k] + grad[1] * e2[k])
        })
        .collect()
}

pub fn embed(state: &SupportState) -> Result<Embedding> {
    let ys = chart_points(state);
    let mut points = Vec::with_capacity(ys.len());
    for (idx, y) in ys.iter().enumerate() {
        let y2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        let p = match state.ambient {
            Ambient::Euclidean => [y[0], y[1], y[2], 0.0],
            Ambient::Hyperbolic => {
                if !(y2 < 1.0) {
                    return Err(violation_error(state, idx, Violation::Ball(1.0 - y2)));
                }
                let c = 1.0 / (1.0 - y2).sqrt();
                [c, c * y[0], c * y[1], c * y[2]]
            }
            Ambient::Spherical => {
                let c = 1.0 / (1.0 + y2).sqrt();
                [c, c * y[0], c * y[1], c * y[2]]
            }
        };
        points.push(p);
    }
    Ok(Embedding {
        ambient: state.ambient,
        points,
    })
}

/// Margins of the state invariants; never fails.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub min_tau_eig: f64,
    pub mean_s: f64,
    pub min_s: f64,
    /// `1 - max(s^2 + |grad s|^2)`, hyperbolic only.
    pub ball_margin: Option<f64>,
    pub convexity_lost: bool,
    pub domain_violation: bool,
    pub near_degenerate: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        !self.convexity_lost && !self.domain_violation
    }
}

pub fn validate(state: &SupportState) -> ValidationReport {
    let grid = state.grid();
    let (min_tau_eig, max_y2) = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.node(idx);
            let (grad, hess) = grid.node_derivatives(&state.s, i, j);
            let s = state.s.values()[idx];
            (hess.add_scalar(s).eigenvalues().0, s * s + grad[0] * grad[0] + grad[1] * grad[1])
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    let values = state.s.values();
    let mean_s = values.iter().sum::<f64>() / values.len() as f64;
    let min_s = values.iter().copied().fold(f64::INFINITY, f64::min);
    let ball_margin = (state.ambient == Ambient::Hyperbolic).then_some(1.0 - max_y2);
    let domain_violation = match state.ambient {
        Ambient::Hyperbolic => ball_margin.is_some_and(|m| !(m > BALL_MARGIN_MIN)),
        _ => !(min_s > 0.0),
    };
    ValidationReport {
        min_tau_eig,
        mean_s,
        min_s,
        ball_margin,
        convexity_lost: !(min_tau_eig > CONVEXITY_REL_TOL * convexity_scale(state)),
        domain_violation,
        near_degenerate: ball_margin.is_some_and(|m| m < NEAR_DEGENERATE_MARGIN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(ambient: Ambient, ni: usize, nj: usize, f: impl Fn([f64; 3]) -> f64) -> SupportState {
        let grid = Arc::new(SphereGrid::new(ni, nj).unwrap());
        let s = ScalarField::from_direction(&grid, f);
        SupportState::new(ambient, grid, s, 0.0).unwrap()
    }

    fn pm1() -> CurvatureFunction {
        CurvatureFunction::parse("power-mean:1", 2).unwrap()
    }

    #[test]
    fn round_spheres_in_every_ambient() {
        let cases = [
            (Ambient::Euclidean, 2.0, 0.5),
            (Ambient::Hyperbolic, 1f64.tanh(), 1.0 / 1f64.tanh()),
            (Ambient::Spherical, 0.4f64.tan(), 1.0 / 0.4f64.tan()),
        ];
        for (amb, r, kappa) in cases {
            let st = state(amb, 16, 8, |_| r);
            let w = weingarten_inverse(&st, 3, 2).unwrap();
            assert!((w.xx - r).abs() < 1e-14 && w.xy == 0.0 && (w.yy - r).abs() < 1e-14);
            let cf = principal_curvatures(&st, &pm1()).unwrap();
            for (k, sp) in cf.kappa.iter().zip(&cf.speed) {
                assert!((k[0] - kappa).abs() < 1e-10 && (k[1] - kappa).abs() < 1e-10);
                assert!((sp - 2.0 * kappa).abs() < 1e-10);
            }
        }
        let st = state(Ambient::Hyperbolic, 16, 8, |_| 1f64.tanh());
        let k = principal_curvatures(&st, &pm1()).unwrap().kappa[0][0];
        assert!((k - 1.31304).abs() < 1e-5);
    }

    #[test]
    fn spheroid_pole_curvature() {
        let st = state(Ambient::Euclidean, 128, 64, |z| (z[0] * z[0] + z[1] * z[1] + 4.0 * z[2] * z[2]).sqrt());
        let cf = principal_curvatures(&st, &pm1()).unwrap();
        let k = cf.kappa[st.grid().index(0, 0)];
        assert!((k[0] - 2.0).abs() < 2e-2 && (k[1] - 2.0).abs() < 2e-2, "{k:?}");
    }

    #[test]
    fn reciprocity_and_ordering() {
        let st = state(Ambient::Spherical, 32, 16, |z| 0.8 + 0.1 * z[0] + 0.05 * z[2] * z[2]);
        let geo = geometry(&st).unwrap();
        let cf = CurvatureField::from_geometry(&geo, &pm1());
        for (g, k) in geo.iter().zip(&cf.kappa) {
            let (w1, w2) = g.winv.eigenvalues();
            assert!(k[0] <= k[1]);
            assert!((k[0] * w2 - 1.0).abs() < 1e-12 && (k[1] * w1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn longitude_shift_commutes_exactly() {
        let st = state(Ambient::Hyperbolic, 32, 16, |z| 0.5 + 0.1 * z[0] + 0.05 * z[1] * z[2]);
        let shifted = st.with_field(st.s.shift_longitude(5), 0.0);
        let a = principal_curvatures(&st, &pm1()).unwrap();
        let b = principal_curvatures(&shifted, &pm1()).unwrap();
        let g = st.grid();
        for i in 0..g.ni() {
            for j in 0..g.nj() {
                assert_eq!(a.kappa[g.index(i, j)], b.kappa[g.index((i + 5) % g.ni(), j)]);
            }
        }
    }

    #[test]
    fn small_bodies_look_euclidean() {
        let gap = |amb: Ambient, eps: f64| {
            let e = principal_curvatures(&state(Ambient::Euclidean, 32, 16, |z| eps * (1.0 + 0.1 * z[2])), &pm1()).unwrap();
            let a = principal_curvatures(&state(amb, 32, 16, |z| eps * (1.0 + 0.1 * z[2])), &pm1()).unwrap();
            e.kappa
                .iter()
                .zip(&a.kappa)
                .map(|(x, y)| ((x[0] - y[0]) / x[0]).abs().max(((x[1] - y[1]) / x[1]).abs()))
                .fold(0.0, f64::max)
        };
        for amb in [Ambient::Hyperbolic, Ambient::Spherical] {
            let (g1, g2, g3) = (gap(amb, 0.1), gap(amb, 0.05), gap(amb, 0.025));
            assert!(g1 / g2 >= 2.0 && g2 / g3 >= 2.0, "{amb}: {g1} {g2} {g3}");
        }
    }

    #[test]
    fn embedding_identities() {
        let st = state(Ambient::Euclidean, 16, 8, |_| 1.5);
        let e = embed(&st).unwrap();
        let z = st.grid().direction(2, 3);
        let p = e.points[st.grid().index(2, 3)];
        for k in 0..3 {
            assert!((p[k] - 1.5 * z[k]).abs() < 1e-14);
        }
        let rho = 0.7f64;
        let e = embed(&state(Ambient::Hyperbolic, 16, 8, |_| rho.tanh())).unwrap();
        for p in &e.points {
            assert!((p[0] - rho.cosh()).abs() < 1e-12);
            assert!((-p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3] + 1.0).abs() < 1e-12);
        }
        let e = embed(&state(Ambient::Spherical, 16, 8, |_| rho.tan())).unwrap();
        for p in &e.points {
            assert!((p[0] - rho.cos()).abs() < 1e-12);
            assert!((p.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hyperbolic_outside_ball_is_invalid() {
        let st = state(Ambient::Hyperbolic, 16, 8, |_| 1.2);
        assert!(matches!(weingarten_inverse(&st, 0, 0), Err(IcfError::StateInvalid { .. })));
        assert!(matches!(embed(&st), Err(IcfError::StateInvalid { .. })));
    }

    #[test]
    fn validation_examples() {
        let r = validate(&state(Ambient::Euclidean, 16, 8, |_| 1.0));
        assert_eq!(r.min_tau_eig, 1.0);
        assert!(r.is_valid() && !r.near_degenerate);

        let r = validate(&state(Ambient::Hyperbolic, 16, 8, |_| 0.999));
        let m = r.ball_margin.unwrap();
        assert!((m - 0.001999).abs() < 1e-12);
        assert!(r.near_degenerate && r.is_valid());

        // a strong quadrupole makes tau indefinite near the equator
        let st = state(Ambient::Euclidean, 32, 16, |z| 1.0 + 2.0 * (3.0 * z[2] * z[2] - 1.0));
        let r = validate(&st);
        assert!(r.convexity_lost && !r.is_valid());
        assert!(matches!(geometry(&st), Err(IcfError::ConvexityLost { .. })));
    }

    #[test]
    fn ambient_parsing() {
        for a in [Ambient::Euclidean, Ambient::Hyperbolic, Ambient::Spherical] {
            assert_eq!(a.to_string().parse::<Ambient>().unwrap(), a);
        }
        assert!("lorentzian".parse::<Ambient>().is_err());
    }
}
