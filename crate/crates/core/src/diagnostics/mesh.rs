//! Principal curvatures recomputed from the embedded node positions alone.
//!
//! This is a deliberately independent path: no support-function formulas,
//! only finite differences of `X(theta, phi)` in the ambient model, the first
//! and second fundamental forms, and a normal built from the mesh itself.

use serde::Serialize;

use crate::curvfn::CurvatureFunction;
use crate::error::Result;
use crate::hypersurface::{embed, principal_curvatures, Ambient, SupportState};

/// Rows closer to a pole than this are skipped: coordinate differences degenerate there.
pub const MESH_MIN_SIN_THETA: f64 = 0.2;

/// Per node `Some([kappa_1, kappa_2])`, or `None` near the poles.
pub fn mesh_curvatures(state: &SupportState) -> Result<Vec<Option<[f64; 2]>>> {
    let grid = state.grid();
    let emb = embed(state)?;
    let (dt, dp) = (grid.dtheta(), grid.dphi());
    let at = |i: isize, j: usize| emb.points[grid.index(i.rem_euclid(grid.ni() as isize) as usize, j)];
    let mut out = vec![None; grid.len()];
    for j in 1..grid.nj() - 1 {
        if grid.sin_theta(j) < MESH_MIN_SIN_THETA {
            continue;
        }
        for i in 0..grid.ni() {
            let ii = i as isize;
            let x = at(ii, j);
            let (n, s) = (at(ii, j - 1), at(ii, j + 1));
            let (e, w) = (at(ii + 1, j), at(ii - 1, j));
            let (se, sw, ne, nw) = (at(ii + 1, j + 1), at(ii - 1, j + 1), at(ii + 1, j - 1), at(ii - 1, j - 1));
            let comb = |f: &dyn Fn(usize) -> f64| -> [f64; 4] { std::array::from_fn(f) };
            let xt = comb(&|k| (s[k] - n[k]) / (2.0 * dt));
            let xp = comb(&|k| (e[k] - w[k]) / (2.0 * dp));
            let xtt = comb(&|k| (s[k] - 2.0 * x[k] + n[k]) / (dt * dt));
            let xpp = comb(&|k| (e[k] - 2.0 * x[k] + w[k]) / (dp * dp));
            let xtp = comb(&|k| (se[k] - sw[k] - ne[k] + nw[k]) / (4.0 * dt * dp));
            out[grid.index(i, j)] = Some(surface_curvatures(state.ambient, &x, &xt, &xp, &xtt, &xtp, &xpp));
        }
    }
    Ok(out)
}

fn surface_curvatures(
    ambient: Ambient,
    x: &[f64; 4],
    xt: &[f64; 4],
    xp: &[f64; 4],
    xtt: &[f64; 4],
    xtp: &[f64; 4],
    xpp: &[f64; 4],
) -> [f64; 2] {
    // inner product of the ambient model and a unit normal
    let sig: [f64; 4] = match ambient {
        Ambient::Euclidean => [1.0, 1.0, 1.0, 0.0],
        Ambient::Hyperbolic => [-1.0, 1.0, 1.0, 1.0],
        Ambient::Spherical => [1.0, 1.0, 1.0, 1.0],
    };
    let ip = |a: &[f64; 4], b: &[f64; 4]| (0..4).map(|k| sig[k] * a[k] * b[k]).sum::<f64>();
    let raw = match ambient {
        Ambient::Euclidean => {
            let c = cross3(xt, xp);
            [c[0], c[1], c[2], 0.0]
        }
        _ => {
            // Euclidean-orthogonal to x, xt, xp; flipping the time sign makes it
            // orthogonal for the model's own inner product
            let c = cross4(x, xt, xp);
            [sig[0] * c[0], c[1], c[2], c[3]]
        }
    };
    let norm = ip(&raw, &raw).sqrt();
    let nu: [f64; 4] = std::array::from_fn(|k| raw[k] / norm);

    let (g11, g12, g22) = (ip(xt, xt), ip(xt, xp), ip(xp, xp));
    let (h11, h12, h22) = (ip(xtt, &nu), ip(xtp, &nu), ip(xpp, &nu));
    // det(h - kappa g) = 0
    let a = g11 * g22 - g12 * g12;
    let b = -(g11 * h22 + g22 * h11 - 2.0 * g12 * h12);
    let c = h11 * h22 - h12 * h12;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    let (mut k1, mut k2) = ((-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a));
    if k1 + k2 < 0.0 {
        (k1, k2) = (-k2, -k1);
    }
    [k1, k2]
}

fn cross3(a: &[f64; 4], b: &[f64; 4]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Vector Euclidean-orthogonal to `a`, `b`, `c` in `R^4` (cofactor expansion).
fn cross4(a: &[f64; 4], b: &[f64; 4], c: &[f64; 4]) -> [f64; 4] {
    let det3 = |p: usize, q: usize, r: usize| {
        a[p] * (b[q] * c[r] - b[r] * c[q]) - a[q] * (b[p] * c[r] - b[r] * c[p]) + a[r] * (b[p] * c[q] - b[q] * c[p])
    };
    [det3(1, 2, 3), -det3(0, 2, 3), det3(0, 1, 3), -det3(0, 1, 2)]
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshCheck {
    /// Largest `|kappa_mesh - kappa| / kappa` over compared nodes and both curvatures.
    pub max_relative_deviation: f64,
    pub nodes_compared: usize,
}

/// Compares support-function curvatures with the mesh recomputation.
pub fn mesh_cross_check(state: &SupportState, f: &CurvatureFunction) -> Result<MeshCheck> {
    let cf = principal_curvatures(state, f)?;
    let mesh = mesh_curvatures(state)?;
    let mut worst = 0.0f64;
    let mut count = 0;
    for (k, m) in cf.kappa.iter().zip(&mesh) {
        if let Some(m) = m {
            count += 1;
            for idx in 0..2 {
                worst = worst.max((m[idx] - k[idx]).abs() / k[idx]);
            }
        }
    }
    Ok(MeshCheck {
        max_relative_deviation: worst,
        nodes_compared: count,
    })
}
