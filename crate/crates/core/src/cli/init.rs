//! Analytically defined initial bodies, given by their chart support function.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{IcfError, Result};
use crate::hypersurface::{validate, Ambient, SupportState};
use crate::sphgrid::{ScalarField, SphereGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialData {
    /// `s = r`.
    Sphere { r: f64 },
    /// Ellipsoid with semi-axes `a, b, c`.
    Spheroid { a: f64, b: f64, c: f64 },
    /// `s = r (1 + eps P_mode(cos theta))`.
    PerturbedSphere { r: f64, eps: f64, mode: u32 },
}

/// Legendre polynomial by the three-term recurrence.
pub fn legendre(l: u32, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let k = k as f64;
        (p0, p1) = (p1, ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0));
    }
    p1
}

impl InitialData {
    pub fn support(&self, z: [f64; 3]) -> f64 {
        match *self {
            InitialData::Sphere { r } => r,
            InitialData::Spheroid { a, b, c } => {
                ((a * z[0]).powi(2) + (b * z[1]).powi(2) + (c * z[2]).powi(2)).sqrt()
            }
            InitialData::PerturbedSphere { r, eps, mode } => r * (1.0 + eps * legendre(mode, z[2])),
        }
    }

    /// Samples the body and checks it is an admissible state.
    pub fn build(&self, ambient: Ambient, grid: Arc<SphereGrid>) -> Result<SupportState> {
        let s = ScalarField::from_direction(&grid, |z| self.support(z));
        let state = SupportState::new(ambient, grid, s, 0.0)?;
        let report = validate(&state);
        if !report.is_valid() {
            return Err(IcfError::Config(format!(
                "initial data {self} is not an admissible {ambient} state (min radius {:.3e}{})",
                report.min_tau_eig,
                report.ball_margin.map(|m| format!(", ball margin {m:.3e}")).unwrap_or_default()
            )));
        }
        if ambient != Ambient::Hyperbolic && !(report.min_s > 0.0) {
            return Err(IcfError::Config(format!(
                "initial data {self} must contain the chart origin"
            )));
        }
        Ok(state)
    }
}

impl fmt::Display for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Sphere { r } => write!(f, "sphere:{r}"),
            InitialData::Spheroid { a, b, c } => write!(f, "spheroid:{a},{b},{c}"),
            InitialData::PerturbedSphere { r, eps, mode } => write!(f, "perturbed-sphere:{r},{eps},{mode}"),
        }
    }
}

impl FromStr for InitialData {
    type Err = IcfError;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || IcfError::Config(format!("cannot parse initial data '{text}'"));
        let (kind, args) = text.trim().split_once(':').ok_or_else(bad)?;
        let nums: Vec<&str> = args.split(',').map(str::trim).collect();
        let real = |k: usize| -> Result<f64> {
            let v: f64 = nums.get(k).ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if v.is_finite() { Ok(v) } else { Err(bad()) }
        };
        let positive = |k: usize| -> Result<f64> {
            let v = real(k)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(IcfError::Config(format!("initial data '{text}': parameters must be positive")))
            }
        };
        let parsed = match (kind.trim(), nums.len()) {
            ("sphere", 1) => InitialData::Sphere { r: positive(0)? },
            ("spheroid", 3) => InitialData::Spheroid {
                a: positive(0)?,
                b: positive(1)?,
                c: positive(2)?,
            },
            ("perturbed-sphere", 3) => InitialData::PerturbedSphere {
                r: positive(0)?,
                eps: real(1)?,
                mode: nums[2].parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        Ok(parsed)
    }
}
