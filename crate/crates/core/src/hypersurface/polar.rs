//! Polar duality in `S^3`.
//!
//! In the gnomonic chart the polar of the surface bounding a body `K` (which
//! contains the chart origin) is the boundary of `-K°`, whose support
//! function is the gauge of `K` at `-u`:
//!
//! `s~(u) = max_z <-u, z> / s(z)`.
//!
//! The maximum is located by hill-climbing over grid nodes and then polished
//! by Newton iteration in normal coordinates, on the high-order interpolant
//! of `s`.

use rayon::prelude::*;

use super::{geometry, Ambient, SupportState};
use crate::error::{IcfError, Result};
use crate::sphgrid::{angles, exp_map, frame_at, ScalarField, SphereGrid};

const FD_STEP: f64 = 1e-3;
const NEWTON_TOL: f64 = 1e-11;
const NEWTON_MAX_ITER: usize = 40;

/// Support state of the polar surface.
pub fn polar_dual(state: &SupportState) -> Result<SupportState> {
    polar_dual_with_correspondence(state).map(|(dual, _)| dual)
}

/// Polar state together with, for every node `w`, the point `z*(w)` of the
/// original surface whose normal it is.
pub fn polar_dual_with_correspondence(state: &SupportState) -> Result<(SupportState, Vec<[f64; 3]>)> {
    if state.ambient != Ambient::Spherical {
        return Err(IcfError::Unsupported(format!(
            "polar duality is defined for spherical states, got {}",
            state.ambient
        )));
    }
    geometry(state)?;
    if let Some(idx) = state.s.values().iter().position(|v| !(*v > 0.0)) {
        let (i, j) = state.grid().node(idx);
        return Err(IcfError::StateInvalid {
            i,
            j,
            t: state.t,
            reason: "spherical support function must be positive".into(),
        });
    }
    let grid = state.grid();
    let s = &state.s;
    let solved: Vec<(f64, [f64; 3])> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.node(idx);
            let u = grid.direction(i, j);
            maximize_ratio(grid, s, &u)
        })
        .collect();
    let (values, points): (Vec<f64>, Vec<[f64; 3]>) = solved.into_iter().unzip();
    let field = ScalarField::from_values(grid, values)?;
    Ok((state.with_field(field, state.t), points))
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `max_z <-u, z> / s(z)` and its maximizer.
fn maximize_ratio(grid: &SphereGrid, s: &ScalarField, u: &[f64; 3]) -> (f64, [f64; 3]) {
    let neg_u = [-u[0], -u[1], -u[2]];
    let node_ratio = |(i, j): (usize, usize)| dot(&neg_u, &grid.direction(i, j)) / s.get(i, j);

    let mut best = grid.nearest_node(&neg_u);
    let mut best_val = node_ratio(best);
    loop {
        let next = grid
            .neighbors8(best.0, best.1)
            .into_iter()
            .map(|n| (n, node_ratio(n)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("eight neighbours");
        if next.1 > best_val {
            best = next.0;
            best_val = next.1;
        } else {
            break;
        }
    }

    let ratio_at = |p: &[f64; 3]| {
        let (theta, phi) = angles(p);
        dot(&neg_u, p) / grid.interpolate(s, theta, phi)
    };
    let mut z = grid.direction(best.0, best.1);
    let max_move = grid.step();
    for _ in 0..NEWTON_MAX_ITER {
        let (theta, phi) = angles(&z);
        let (e1, e2) = frame_at(theta, phi);
        let at = |a: f64, b: f64| ratio_at(&exp_map(&z, &e1, &e2, a, b));
        let d = FD_STEP;
        let g0 = at(0.0, 0.0);
        let (ap, am, bp, bm) = (at(d, 0.0), at(-d, 0.0), at(0.0, d), at(0.0, -d));
        let grad = [(ap - am) / (2.0 * d), (bp - bm) / (2.0 * d)];
        let haa = (ap - 2.0 * g0 + am) / (d * d);
        let hbb = (bp - 2.0 * g0 + bm) / (d * d);
        let hab = (at(d, d) - at(d, -d) - at(-d, d) + at(-d, -d)) / (4.0 * d * d);
        let det = haa * hbb - hab * hab;
        let mut step = if haa < 0.0 && det > 0.0 {
            [(-hbb * grad[0] + hab * grad[1]) / det, (hab * grad[0] - haa * grad[1]) / det]
        } else {
            [grad[0] * max_move, grad[1] * max_move]
        };
        let len = step[0].hypot(step[1]);
        if len > max_move {
            step = [step[0] * max_move / len, step[1] * max_move / len];
        }
        z = exp_map(&z, &e1, &e2, step[0], step[1]);
        if len < NEWTON_TOL {
            break;
        }
    }
    (ratio_at(&z), z)
}
