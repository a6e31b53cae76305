//! Explicit time integration of the support-function flows.
//!
//! Each ambient evolves `s` by `ds/dt = P F_*(W^{-1})^alpha` where `W^{-1}` is
//! the ambient inverse Weingarten map and `P` is `1`, `sqrt(D (1 - s^2))` or
//! `sqrt(E (1 + s^2))` (see [`crate::hypersurface`]). The normalized Euclidean
//! flow subtracts `s / n`, which keeps round spheres fixed when
//! `f(1, ..., 1) = n`.
//!
//! Time stepping is the explicit midpoint rule with a CFL step
//! `dt = cfl h^2 / max(alpha F_*^{alpha - 1} sum_i dF_*/dtau_i c_amb)`,
//! `h = dtheta`, where `c_amb` is the node's stiffness factor.

mod duality;

pub use duality::{duality_residual_from_states, verify_polar_duality_residual, ResidualPoint};

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::curvfn::CurvatureFunction;
use crate::diagnostics::{record_from_geometry, DiagnosticsRecord};
use crate::error::{IcfError, Result};
use crate::hypersurface::{geometry, Ambient, NodeGeometry, SupportState};
use crate::sphgrid::ScalarField;

/// Thresholds that end a run before `t_end`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StopRules {
    /// Stop once `1 - max |Y|^2` drops below this (hyperbolic).
    pub hyperbolic_margin: f64,
    /// Stop once `max |Y|` reaches this (spherical).
    pub spherical_max_y: f64,
    pub step_cap: usize,
}

impl Default for StopRules {
    fn default() -> Self {
        Self {
            hyperbolic_margin: 1e-4,
            spherical_max_y: 50.0,
            step_cap: 2_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub ambient: Ambient,
    pub f: CurvatureFunction,
    pub alpha: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub stop: StopRules,
    /// Snapshot cadence; `None` keeps only the first and last states.
    pub snap_every: Option<f64>,
    /// Record diagnostics after every step instead of only at snapshots.
    pub record_every_step: bool,
    /// Evolve the rescaled Euclidean flow (`alpha = 1` only).
    pub normalized: bool,
    /// Allow exponents outside the range covered by the convergence theory.
    pub unsafe_alpha: bool,
    /// Use this step instead of the CFL step.
    pub fixed_dt: Option<f64>,
    /// Keep snapshot states in memory.
    pub keep_states: bool,
}

impl FlowConfig {
    pub fn new(ambient: Ambient, f: CurvatureFunction, alpha: f64, t_end: f64) -> Self {
        Self {
            ambient,
            f,
            alpha,
            t_end,
            cfl: 0.2,
            stop: StopRules::default(),
            snap_every: None,
            record_every_step: false,
            normalized: false,
            unsafe_alpha: false,
            fixed_dt: None,
            keep_states: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IcfError::Config(m));
        if self.f.dim() != 2 {
            return bad(format!("the curvature function must have 2 variables, got {}", self.f.dim()));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !self.unsafe_alpha {
            match self.ambient {
                Ambient::Euclidean | Ambient::Hyperbolic if self.alpha > 1.0 => {
                    return bad(format!(
                        "alpha = {} is outside (0, 1] for {} space; pass --unsafe-alpha to run anyway",
                        self.alpha, self.ambient
                    ));
                }
                Ambient::Spherical if self.alpha != 1.0 => {
                    return bad(format!(
                        "spherical flows require alpha = 1, got {}; pass --unsafe-alpha to run anyway",
                        self.alpha
                    ));
                }
                _ => {}
            }
        }
        if self.normalized && (self.ambient != Ambient::Euclidean || self.alpha != 1.0) {
            return bad("the normalized flow is Euclidean with alpha = 1".into());
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if let Some(s) = self.snap_every {
            if !(s > 0.0) || !s.is_finite() {
                return bad(format!("snapshot cadence must be positive, got {s}"));
            }
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("fixed dt must be positive, got {dt}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TEnd,
    HyperbolicMargin,
    SphericalEquator,
    ConvexityLost,
    /// A state left the ambient chart (e.g. the hyperbolic ball) mid-step.
    DomainViolation,
    StepCap,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::TEnd => "t_end",
            Termination::HyperbolicMargin => "hyperbolic_margin",
            Termination::SphericalEquator => "spherical_equator",
            Termination::ConvexityLost => "convexity_lost",
            Termination::DomainViolation => "domain_violation",
            Termination::StepCap => "step_cap",
        })
    }
}

#[derive(Clone, Debug)]
pub struct FlowRun {
    pub config: FlowConfig,
    pub snapshots: Vec<SupportState>,
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    /// Error message when the run ended on an invalid state.
    pub failure: Option<String>,
    pub steps: usize,
    /// Extrapolated time at which `|Y|` blows up (spherical equator).
    pub t_star_estimate: Option<f64>,
    pub final_state: SupportState,
}

/// Right-hand side and stability data of one state.
struct Eval {
    rhs: Vec<f64>,
    geo: Vec<NodeGeometry>,
    dt_max: f64,
    max_y2: f64,
}

fn evaluate(state: &SupportState, dual: &CurvatureFunction, alpha: f64, normalized: bool, cfl: f64, want_dt: bool) -> Result<Eval> {
    let geo = geometry(state)?;
    let n = dual.dim() as f64;
    let h = state.grid().step();
    let (rhs, stiff): (Vec<f64>, Vec<f64>) = geo
        .par_iter()
        .map(|g| {
            let (w1, w2) = g.winv.eigenvalues();
            let w = [w1, w2];
            let fstar = dual.value_unchecked(&w);
            let rhs = if normalized {
                fstar - g.s / n
            } else {
                g.prefactor * fstar.powf(alpha)
            };
            let stiff = if want_dt {
                let grad_sum: f64 = dual.evaluate_unchecked(&w).grad.iter().sum();
                alpha * fstar.powf(alpha - 1.0) * grad_sum * g.stiffness
            } else {
                0.0
            };
            (rhs, stiff)
        })
        .unzip();
    let max_stiff = stiff.iter().copied().fold(0.0, f64::max);
    let max_y2 = geo.iter().map(NodeGeometry::chart_norm2).fold(0.0, f64::max);
    Ok(Eval {
        rhs,
        geo,
        dt_max: if max_stiff > 0.0 { cfl * h * h / max_stiff } else { f64::INFINITY },
        max_y2,
    })
}

fn check_state(state: &SupportState) -> Result<()> {
    if state.ambient != Ambient::Hyperbolic {
        if let Some(idx) = state.s.values().iter().position(|v| !(*v > 0.0)) {
            let (i, j) = state.grid().node(idx);
            return Err(IcfError::StateInvalid {
                i,
                j,
                t: state.t,
                reason: format!("support function must be positive in {} space", state.ambient),
            });
        }
    }
    Ok(())
}

/// `ds/dt` of the unnormalized flow.
pub fn compute_rhs(state: &SupportState, f: &CurvatureFunction, alpha: f64) -> Result<ScalarField> {
    check_state(state)?;
    let e = evaluate(state, &f.dual(), alpha, false, 1.0, false)?;
    ScalarField::from_values(state.grid(), e.rhs)
}

/// `ds/dt = F_*(tau) - s / n` for Euclidean states.
pub fn compute_rhs_normalized(state: &SupportState, f: &CurvatureFunction) -> Result<ScalarField> {
    if state.ambient != Ambient::Euclidean {
        return Err(IcfError::Unsupported(format!(
            "the normalized flow is Euclidean, state is {}",
            state.ambient
        )));
    }
    check_state(state)?;
    let e = evaluate(state, &f.dual(), 1.0, true, 1.0, false)?;
    ScalarField::from_values(state.grid(), e.rhs)
}

/// Largest stable explicit step for the state.
pub fn cfl_dt(state: &SupportState, f: &CurvatureFunction, alpha: f64, cfl: f64) -> Result<f64> {
    Ok(evaluate(state, &f.dual(), alpha, false, cfl, true)?.dt_max)
}

fn advance(state: &SupportState, base: &[f64], rate: &[f64], dt: f64, t: f64) -> Result<SupportState> {
    let values = base.iter().zip(rate).map(|(s, r)| s + dt * r).collect();
    let next = state.with_field(ScalarField::from_values(state.grid(), values)?, t);
    check_state(&next)?;
    Ok(next)
}

/// One explicit midpoint step; the result is validated.
pub fn step(state: &SupportState, config: &FlowConfig, dt: f64) -> Result<SupportState> {
    check_state(state)?;
    let dual = config.f.dual();
    let k1 = evaluate(state, &dual, config.alpha, config.normalized, config.cfl, false)?;
    let next = midpoint(state, &k1.rhs, &dual, config, dt)?;
    geometry(&next)?;
    Ok(next)
}

fn midpoint(state: &SupportState, k1: &[f64], dual: &CurvatureFunction, config: &FlowConfig, dt: f64) -> Result<SupportState> {
    let mid = advance(state, state.s.values(), k1, 0.5 * dt, state.t + 0.5 * dt)?;
    let k2 = evaluate(&mid, dual, config.alpha, config.normalized, config.cfl, false)?;
    advance(state, state.s.values(), &k2.rhs, dt, state.t + dt)
}

fn classify(err: &IcfError) -> Termination {
    match err {
        IcfError::ConvexityLost { .. } => Termination::ConvexityLost,
        _ => Termination::DomainViolation,
    }
}

/// Extrapolates the zero of `1 / |Y|^2` from the history `(t, 1/|Y|^2)`.
///
/// Picks the latest sample and two earlier ones at roughly two and four
/// times its value, so the quadratic through them is well conditioned.
fn extrapolate_blowup(history: &[(f64, f64)]) -> Option<f64> {
    let &(t2, y2) = history.last()?;
    let pick = |target: f64| {
        history
            .iter()
            .rev()
            .find(|(_, y)| *y >= target)
            .copied()
    };
    let p1 = pick(2.0 * y2);
    let p0 = pick(4.0 * y2);
    match (p0, p1) {
        (Some((t0, y0)), Some((t1, y1))) if t0 < t1 && t1 < t2 => {
            // Newton form of the quadratic through the three points
            let d01 = (y1 - y0) / (t1 - t0);
            let d12 = (y2 - y1) / (t2 - t1);
            let d012 = (d12 - d01) / (t2 - t0);
            let root = |t: f64| y0 + d01 * (t - t0) + d012 * (t - t0) * (t - t1);
            // slope at t2, then Newton from the linear guess
            let slope = d01 + d012 * ((t2 - t0) + (t2 - t1));
            let mut t = t2 - y2 / slope;
            for _ in 0..50 {
                let dv = d01 + d012 * ((t - t0) + (t - t1));
                let step = root(t) / dv;
                t -= step;
                if step.abs() < 1e-15 * t.abs() {
                    break;
                }
            }
            t.is_finite().then_some(t)
        }
        _ => {
            let (ta, ya) = history.get(history.len().checked_sub(2)?)?;
            let slope = (y2 - ya) / (t2 - ta);
            (slope < 0.0).then(|| t2 - y2 / slope)
        }
    }
}

/// Integrates from `initial` until `t_end` or a stopping rule fires.
pub fn run(config: &FlowConfig, initial: &SupportState) -> Result<FlowRun> {
    config.validate()?;
    if initial.ambient != config.ambient {
        return Err(IcfError::Config(format!(
            "initial state is {} but the flow is {}",
            initial.ambient, config.ambient
        )));
    }
    check_state(initial)?;
    let dual = config.f.dual();
    let eval_at = |s: &SupportState| evaluate(s, &dual, config.alpha, config.normalized, config.cfl, config.fixed_dt.is_none());

    let mut state = initial.clone();
    let mut eval = eval_at(&state)?;
    let mut records = vec![record_from_geometry(&state, &eval.geo, &config.f)];
    let mut snapshots = if config.keep_states { vec![state.clone()] } else { Vec::new() };
    let mut blowup_history = vec![(state.t, 1.0 / eval.max_y2)];
    // cadence times are t0 + k c, computed afresh to avoid drift
    let t0 = state.t;
    let mut snap_count = 1u64;
    let snap_time = |k: u64| config.snap_every.map(|c| (t0 + k as f64 * c).min(config.t_end));
    let mut next_snap = snap_time(snap_count);
    let mut steps = 0usize;
    let mut failure = None;
    let time_eps = 1e-12 * config.t_end.max(1.0);

    let termination = loop {
        match config.ambient {
            Ambient::Hyperbolic if 1.0 - eval.max_y2 < config.stop.hyperbolic_margin => {
                break Termination::HyperbolicMargin;
            }
            Ambient::Spherical if eval.max_y2.sqrt() >= config.stop.spherical_max_y => {
                break Termination::SphericalEquator;
            }
            _ => {}
        }
        if state.t >= config.t_end - time_eps {
            break Termination::TEnd;
        }
        if steps >= config.stop.step_cap {
            break Termination::StepCap;
        }
        let mut dt = config.fixed_dt.unwrap_or(eval.dt_max).min(config.t_end - state.t);
        let mut hits_snap = false;
        if let Some(ns) = next_snap {
            if state.t + dt >= ns - time_eps {
                dt = ns - state.t;
                hits_snap = true;
            }
        }
        let stepped = midpoint(&state, &eval.rhs, &dual, config, dt).and_then(|next| {
            let e = eval_at(&next)?;
            Ok((next, e))
        });
        let (mut next, next_eval) = match stepped {
            Ok(v) => v,
            Err(e) => {
                let kind = classify(&e);
                failure = Some(e.to_string());
                break kind;
            }
        };
        steps += 1;
        if hits_snap {
            // land exactly on the cadence time
            next.t = next_snap.expect("snapshot time");
            snap_count += 1;
            next_snap = snap_time(snap_count);
        } else if (config.t_end - next.t).abs() <= time_eps {
            next.t = config.t_end;
        }
        state = next;
        eval = next_eval;
        blowup_history.push((state.t, 1.0 / eval.max_y2));
        if hits_snap || config.record_every_step {
            records.push(record_from_geometry(&state, &eval.geo, &config.f));
        }
        if hits_snap && config.keep_states {
            snapshots.push(state.clone());
        }
    };

    if records.last().map(|r| r.t) != Some(state.t) {
        records.push(record_from_geometry(&state, &eval.geo, &config.f));
    }
    if config.keep_states && snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(state.clone());
    }
    let t_star_estimate = if termination == Termination::SphericalEquator {
        extrapolate_blowup(&blowup_history)
    } else {
        None
    };
    Ok(FlowRun {
        config: config.clone(),
        snapshots,
        records,
        termination,
        failure,
        steps,
        t_star_estimate,
        final_state: state,
    })
}
