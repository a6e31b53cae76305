//! Residual of the dual flow along a spherical run.
//!
//! If `s` solves the expanding flow with speed `1 / F` then its polar `s~`
//! contracts with speed `F`, i.e.
//!
//! `d s~/dt + sqrt((1 + s~^2 + |grad s~|^2)(1 + s~^2)) / f(eig W~^{-1}) = 0`,
//!
//! where `W~^{-1}` is the spherical inverse Weingarten map of `s~`. The time
//! derivative is a three-point difference over consecutive snapshots, so the
//! residual carries both the spatial error and the snapshot spacing.

use rayon::prelude::*;
use serde::Serialize;

use super::FlowRun;
use crate::curvfn::CurvatureFunction;
use crate::error::{IcfError, Result};
use crate::hypersurface::{geometry, polar_dual, Ambient, SupportState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub t: f64,
    /// Maximum of `|R|` over the grid.
    pub max_abs: f64,
}

/// Residual at every interior snapshot of a spherical run.
pub fn verify_polar_duality_residual(run: &FlowRun) -> Result<Vec<ResidualPoint>> {
    if run.config.alpha != 1.0 {
        return Err(IcfError::Unsupported(format!(
            "the dual flow is defined for alpha = 1, got {}",
            run.config.alpha
        )));
    }
    duality_residual_from_states(&run.snapshots, &run.config.f)
}

/// Same as [`verify_polar_duality_residual`] from a sequence of states.
pub fn duality_residual_from_states(states: &[SupportState], f: &CurvatureFunction) -> Result<Vec<ResidualPoint>> {
    if states.len() < 3 {
        return Err(IcfError::InsufficientData(format!(
            "need at least 3 snapshots, got {}",
            states.len()
        )));
    }
    if let Some(st) = states.iter().find(|s| s.ambient != Ambient::Spherical) {
        return Err(IcfError::Unsupported(format!(
            "polar duality needs spherical states, got {}",
            st.ambient
        )));
    }
    if states.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(IcfError::InsufficientData("snapshot times must increase".into()));
    }
    let duals = states.iter().map(polar_dual).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(duals.len() - 2);
    for k in 1..duals.len() - 1 {
        let (a, b, c) = (&duals[k - 1], &duals[k], &duals[k + 1]);
        let (h1, h2) = (b.t - a.t, c.t - b.t);
        // three-point derivative at the middle node of a nonuniform stencil
        let (wa, wb, wc) = (
            -h2 / (h1 * (h1 + h2)),
            (h2 - h1) / (h1 * h2),
            h1 / (h2 * (h1 + h2)),
        );
        let geo = geometry(b)?;
        let worst = geo
            .par_iter()
            .enumerate()
            .map(|(idx, g)| {
                let dsdt = wa * a.s.values()[idx] + wb * b.s.values()[idx] + wc * c.s.values()[idx];
                let (w1, w2) = g.winv.eigenvalues();
                (dsdt + g.prefactor / f.value_unchecked(&[w1, w2])).abs()
            })
            .reduce(|| 0.0, f64::max);
        out.push(ResidualPoint { t: b.t, max_abs: worst });
    }
    Ok(out)
}
