//! Per-snapshot summaries and time-series analyses of a flow.

mod mesh;
mod output;
mod pinching;

pub use mesh::{mesh_cross_check, mesh_curvatures, MeshCheck, MESH_MIN_SIN_THETA};
pub use output::{write_records_csv, RunSummary, Verdicts, CSV_HEADER, SUMMARY_FORMAT_VERSION};
pub use pinching::{pinching_bound_constant, PinchingBound};

use serde::Serialize;

use crate::curvfn::CurvatureFunction;
use crate::error::{IcfError, Result};
use crate::hypersurface::{geometry, Ambient, CurvatureField, NodeGeometry, SupportState};

/// Scalar summary of one state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// `max kappa_2 / kappa_1` over nodes.
    pub pinch: f64,
    /// `min kappa_1 / F` over nodes.
    pub q: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// `max |kappa_i - 1|` over nodes; hyperbolic states only.
    pub dev: Option<f64>,
    /// `(max s - min s) / mean s`.
    pub osc: f64,
    /// Smallest eigenvalue of `hess s + s Id` over nodes.
    pub convexity_margin: f64,
}

/// Builds the record from already computed node geometry.
pub fn record_from_geometry(state: &SupportState, geo: &[NodeGeometry], f: &CurvatureFunction) -> DiagnosticsRecord {
    let cf = CurvatureField::from_geometry(geo, f);
    let mut rec = DiagnosticsRecord {
        t: state.t,
        kappa_min: f64::INFINITY,
        kappa_max: f64::NEG_INFINITY,
        pinch: 1.0,
        q: f64::INFINITY,
        f_min: f64::INFINITY,
        f_max: f64::NEG_INFINITY,
        dev: None,
        osc: 0.0,
        convexity_margin: f64::INFINITY,
    };
    let mut dev = 0.0f64;
    for ((k, sp), g) in cf.kappa.iter().zip(&cf.speed).zip(geo) {
        rec.kappa_min = rec.kappa_min.min(k[0]);
        rec.kappa_max = rec.kappa_max.max(k[1]);
        rec.pinch = rec.pinch.max(k[1] / k[0]);
        rec.q = rec.q.min(k[0] / sp);
        rec.f_min = rec.f_min.min(*sp);
        rec.f_max = rec.f_max.max(*sp);
        dev = dev.max((k[0] - 1.0).abs()).max((k[1] - 1.0).abs());
        rec.convexity_margin = rec.convexity_margin.min(g.tau.eigenvalues().0);
    }
    if state.ambient == Ambient::Hyperbolic {
        rec.dev = Some(dev);
    }
    let v = state.s.values();
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    rec.osc = (hi - lo) / mean;
    rec
}

pub fn snapshot(state: &SupportState, f: &CurvatureFunction) -> Result<DiagnosticsRecord> {
    if f.dim() != 2 {
        return Err(IcfError::Config(format!(
            "surfaces need a curvature function of 2 variables, got {}",
            f.dim()
        )));
    }
    Ok(record_from_geometry(state, &geometry(state)?, f))
}

/// Outcome of a monotonicity check over a series.
#[derive(Clone, Debug, Serialize)]
pub struct MonotoneVerdict {
    pub pass: bool,
    /// Largest relative drop `(q_k - q_{k+1}) / q_k` seen; negative when `q` only grew.
    pub worst_relative_drop: f64,
    /// Index `k + 1` of the record where the worst drop happened.
    pub worst_index: Option<usize>,
}

/// Passes iff `q(t_{k+1}) >= q(t_k) (1 - tol)` for every `k`.
pub fn check_monotone_q(series: &[DiagnosticsRecord], tol: f64) -> MonotoneVerdict {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_index = None;
    for (k, w) in series.windows(2).enumerate() {
        let drop = (w[0].q - w[1].q) / w[0].q;
        if drop > worst {
            worst = drop;
            worst_index = Some(k + 1);
        }
    }
    MonotoneVerdict {
        pass: !(worst > tol),
        worst_relative_drop: if worst_index.is_some() { worst } else { 0.0 },
        worst_index,
    }
}

/// `pinch(t) <= pinch(0) (1 + tol)` throughout.
pub fn check_pinch_bound(series: &[DiagnosticsRecord], tol: f64) -> bool {
    match series.first() {
        None => true,
        Some(first) => series.iter().all(|r| r.pinch <= first.pinch * (1.0 + tol)),
    }
}

/// `F_max / F_min` never exceeds its initial value by more than `tol`, and `F_min` stays positive.
pub fn check_speed_bounds(series: &[DiagnosticsRecord], tol: f64) -> bool {
    match series.first() {
        None => true,
        Some(first) => {
            let r0 = first.f_max / first.f_min;
            series.iter().all(|r| r.f_min > 0.0 && r.f_max / r.f_min <= r0 * (1.0 + tol))
        }
    }
}

/// Hyperbolic fits start once `dev` falls below this.
pub const DECAY_WINDOW_DEV: f64 = 0.5;
pub const DECAY_MIN_RECORDS: usize = 10;
/// A series whose `osc` never exceeds this is treated as an exact sphere.
pub const ROUND_OSC: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    /// `lambda` in `A e^{-lambda t}`.
    pub rate: f64,
    pub amplitude: f64,
    /// Root-mean-square residual of the fit in `log` space.
    pub residual: f64,
    pub records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayOutcome {
    Fitted(DecayFit),
    AlreadyRound,
}

/// Least-squares fit of `log dev` (hyperbolic) or `log osc` (otherwise) against `t`.
pub fn fit_decay(series: &[DiagnosticsRecord], ambient: Ambient) -> Result<DecayOutcome> {
    if !series.is_empty() && series.iter().all(|r| r.osc <= ROUND_OSC) {
        return Ok(DecayOutcome::AlreadyRound);
    }
    let points: Vec<(f64, f64)> = match ambient {
        Ambient::Hyperbolic => series
            .iter()
            .filter_map(|r| r.dev.map(|d| (r.t, d)))
            .skip_while(|(_, d)| !(*d < DECAY_WINDOW_DEV))
            .filter(|(_, d)| *d > 0.0)
            .map(|(t, d)| (t, d.ln()))
            .collect(),
        _ => series.iter().filter(|r| r.osc > 0.0).map(|r| (r.t, r.osc.ln())).collect(),
    };
    if points.len() < DECAY_MIN_RECORDS {
        return Err(IcfError::InsufficientData(format!(
            "decay fit needs {DECAY_MIN_RECORDS} records in the window, found {}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let tm = points.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = points.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = points.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    if stt == 0.0 {
        return Err(IcfError::InsufficientData("decay window spans no time".into()));
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let residual = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(DecayOutcome::Fitted(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        residual,
        records: points.len(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphgrid::{ScalarField, SphereGrid};
    use std::sync::Arc;

    fn state(ambient: Ambient, ni: usize, nj: usize, f: impl Fn([f64; 3]) -> f64) -> SupportState {
        let grid = Arc::new(SphereGrid::new(ni, nj).unwrap());
        let s = ScalarField::from_direction(&grid, f);
        SupportState::new(ambient, grid, s, 0.0).unwrap()
    }

    fn pm(r: f64) -> CurvatureFunction {
        CurvatureFunction::parse(&format!("power-mean:{r}"), 2).unwrap()
    }

    fn record(t: f64, q: f64, pinch: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            kappa_min: 1.0,
            kappa_max: pinch,
            pinch,
            q,
            f_min: 1.0,
            f_max: 2.0,
            dev: None,
            osc: 0.1,
            convexity_margin: 1.0,
        }
    }

    #[test]
    fn round_sphere_record() {
        for (amb, s) in [(Ambient::Euclidean, 1.3), (Ambient::Hyperbolic, 0.6), (Ambient::Spherical, 0.9)] {
            let r = snapshot(&state(amb, 16, 8, |_| s), &pm(1.0)).unwrap();
            assert!((r.pinch - 1.0).abs() < 1e-12);
            assert!((r.q - 0.5).abs() < 1e-12);
            assert_eq!(r.osc, 0.0);
            assert_eq!(r.dev.is_some(), amb == Ambient::Hyperbolic);
        }
    }

    #[test]
    fn spheroid_pinch_matches_closed_form() {
        // ellipsoid of revolution with semi-axes (1, 1, c); at normal polar angle
        // theta the radii are c^2 / D^{3/2} and 1 / D^{1/2}, D = sin^2 + c^2 cos^2
        let c: f64 = 2.0;
        let st = state(Ambient::Euclidean, 128, 64, |z| (z[0] * z[0] + z[1] * z[1] + c * c * z[2] * z[2]).sqrt());
        let rec = snapshot(&st, &pm(1.0)).unwrap();
        let g = st.grid();
        let mut exact = 1.0f64;
        for j in 0..g.nj() {
            let (sn, cs) = (g.sin_theta(j), g.theta(j).cos());
            let d = sn * sn + c * c * cs * cs;
            let meridian = c * c / d.powf(1.5);
            let parallel = 1.0 / d.sqrt();
            exact = exact.max((meridian / parallel).max(parallel / meridian));
        }
        assert!((rec.pinch - exact).abs() / exact < 1e-2, "{} vs {exact}", rec.pinch);
    }

    #[test]
    fn q_never_exceeds_one_over_n() {
        for spec in ["power-mean:1", "power-mean:2", "power-mean:0.5", "elem-sym:2", "elem-sym:1"] {
            let f = CurvatureFunction::parse(spec, 2).unwrap();
            let st = state(Ambient::Euclidean, 32, 16, |z| (z[0] * z[0] + 1.44 * z[1] * z[1] + 2.25 * z[2] * z[2]).sqrt());
            let r = snapshot(&st, &f).unwrap();
            assert!(r.q <= 0.5 + 1e-12, "{spec}: {}", r.q);
        }
    }

    #[test]
    fn monotone_and_pinch_checks() {
        let ok: Vec<_> = (0..5).map(|k| record(k as f64, 0.4 + 0.01 * k as f64, 2.0 - 0.1 * k as f64)).collect();
        assert!(check_monotone_q(&ok, 1e-6).pass);
        assert!(check_pinch_bound(&ok, 1e-4));
        let mut bad = ok.clone();
        bad[3].q = 0.3;
        bad[2].pinch = 2.5;
        let v = check_monotone_q(&bad, 1e-6);
        assert!(!v.pass && v.worst_index == Some(3));
        assert!(!check_pinch_bound(&bad, 1e-4));
        let flat: Vec<_> = (0..4).map(|k| record(k as f64, 0.5, 1.0)).collect();
        assert!(check_monotone_q(&flat, 1e-6).pass);
    }

    #[test]
    fn fit_recovers_synthetic_rate() {
        let series: Vec<_> = (0..40)
            .map(|k| {
                let t = 0.1 * k as f64;
                let mut r = record(t, 0.5, 1.0);
                r.dev = Some(0.3 * (-1.37 * t).exp());
                r
            })
            .collect();
        match fit_decay(&series, Ambient::Hyperbolic).unwrap() {
            DecayOutcome::Fitted(fit) => {
                assert!((fit.rate - 1.37).abs() < 1e-6);
                assert!((fit.amplitude - 0.3).abs() < 1e-6);
                assert!(fit.residual < 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fit_windows_and_degenerate_inputs() {
        let series: Vec<_> = (0..12)
            .map(|k| {
                let mut r = record(k as f64, 0.5, 1.0);
                r.dev = Some(if k < 5 { 0.9 } else { 0.4 * (-(k as f64)).exp() });
                r
            })
            .collect();
        assert!(matches!(fit_decay(&series, Ambient::Hyperbolic), Err(IcfError::InsufficientData(_))));
        let round: Vec<_> = (0..3)
            .map(|k| {
                let mut r = record(k as f64, 0.5, 1.0);
                r.osc = 1e-12;
                r
            })
            .collect();
        assert_eq!(fit_decay(&round, Ambient::Hyperbolic).unwrap(), DecayOutcome::AlreadyRound);
    }
}
