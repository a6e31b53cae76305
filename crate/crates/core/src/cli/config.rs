//! Flat `key = value` experiment configuration.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use super::InitialData;
use crate::curvfn::FunctionSpec;
use crate::error::{IcfError, Result};
use crate::flow::StopRules;
use crate::hypersurface::Ambient;

pub const CONFIG_FORMAT_VERSION: u32 = 1;
/// End time of open-ended spherical runs; the equator rule fires long before.
pub const SPHERICAL_HORIZON: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub space: Ambient,
    pub f: FunctionSpec,
    pub alpha: f64,
    pub init: InitialData,
    pub grid: (usize, usize),
    /// `None` runs Euclidean and hyperbolic flows to 1 and spherical flows until
    /// a stopping rule fires.
    pub t_end: Option<f64>,
    pub cfl: f64,
    pub snap_every: Option<f64>,
    pub record_every_step: bool,
    pub normalized: bool,
    pub unsafe_alpha: bool,
    pub step_cap: usize,
    pub hyperbolic_margin: f64,
    pub spherical_max_y: f64,
    pub out: Option<PathBuf>,
    pub svg: bool,
    pub save_states: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let stop = StopRules::default();
        Self {
            space: Ambient::Euclidean,
            f: FunctionSpec::PowerMean(1.0),
            alpha: 1.0,
            init: InitialData::Sphere { r: 1.0 },
            grid: (64, 32),
            t_end: None,
            cfl: 0.2,
            snap_every: None,
            record_every_step: false,
            normalized: false,
            unsafe_alpha: false,
            step_cap: stop.step_cap,
            hyperbolic_margin: stop.hyperbolic_margin,
            spherical_max_y: stop.spherical_max_y,
            out: None,
            svg: false,
            save_states: false,
        }
    }
}

/// Parses `IxJ`, e.g. `128x64`.
pub fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let bad = || IcfError::Config(format!("grid must look like 128x64, got '{text}'"));
    let (a, b) = text.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| IcfError::Config(format!("bad value '{value}' for key '{key}'")))
}

impl ExperimentConfig {
    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "format_version" => {
                let version: u32 = parse_value(key, v)?;
                if version != CONFIG_FORMAT_VERSION {
                    return Err(IcfError::Config(format!("unsupported config format_version {version}")));
                }
            }
            "space" => self.space = v.parse()?,
            "f" => self.f = v.parse()?,
            "alpha" => self.alpha = parse_value(key, v)?,
            "init" => self.init = v.parse()?,
            "grid" => self.grid = parse_grid(v)?,
            "t_end" => self.t_end = Some(parse_value(key, v)?),
            "cfl" => self.cfl = parse_value(key, v)?,
            "snap_every" => self.snap_every = Some(parse_value(key, v)?),
            "record_every_step" => self.record_every_step = parse_value(key, v)?,
            "normalized" => self.normalized = parse_value(key, v)?,
            "unsafe_alpha" => self.unsafe_alpha = parse_value(key, v)?,
            "step_cap" => self.step_cap = parse_value(key, v)?,
            "hyperbolic_margin" => self.hyperbolic_margin = parse_value(key, v)?,
            "spherical_max_y" => self.spherical_max_y = parse_value(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "svg" => self.svg = parse_value(key, v)?,
            "save_states" => self.save_states = parse_value(key, v)?,
            other => return Err(IcfError::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Reads a config file body on top of the defaults.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                IcfError::Config(format!("line {}: expected key = value, got '{raw}'", lineno + 1))
            })?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn effective_t_end(&self) -> f64 {
        self.t_end.unwrap_or(match self.space {
            Ambient::Spherical => SPHERICAL_HORIZON,
            _ => 1.0,
        })
    }

    /// Defaults to a hundredth of the run, or of unit time for open-ended runs.
    pub fn effective_snap_every(&self) -> f64 {
        self.snap_every.unwrap_or(match (self.space, self.t_end) {
            (Ambient::Spherical, None) => 0.01,
            _ => self.effective_t_end() / 100.0,
        })
    }

    pub fn stop_rules(&self) -> StopRules {
        StopRules {
            hyperbolic_margin: self.hyperbolic_margin,
            spherical_max_y: self.spherical_max_y,
            step_cap: self.step_cap,
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "format_version = {CONFIG_FORMAT_VERSION}");
        let _ = writeln!(out, "space = {}", self.space);
        let _ = writeln!(out, "f = {}", self.f);
        let _ = writeln!(out, "alpha = {}", self.alpha);
        let _ = writeln!(out, "init = {}", self.init);
        let _ = writeln!(out, "grid = {}x{}", self.grid.0, self.grid.1);
        if let Some(t) = self.t_end {
            let _ = writeln!(out, "t_end = {t}");
        }
        let _ = writeln!(out, "cfl = {}", self.cfl);
        if let Some(s) = self.snap_every {
            let _ = writeln!(out, "snap_every = {s}");
        }
        let _ = writeln!(out, "record_every_step = {}", self.record_every_step);
        let _ = writeln!(out, "normalized = {}", self.normalized);
        let _ = writeln!(out, "unsafe_alpha = {}", self.unsafe_alpha);
        let _ = writeln!(out, "step_cap = {}", self.step_cap);
        let _ = writeln!(out, "hyperbolic_margin = {}", self.hyperbolic_margin);
        let _ = writeln!(out, "spherical_max_y = {}", self.spherical_max_y);
        if let Some(p) = &self.out {
            let _ = writeln!(out, "out = {}", p.display());
        }
        let _ = writeln!(out, "svg = {}", self.svg);
        let _ = writeln!(out, "save_states = {}", self.save_states);
        f.write_str(&out)
    }
}
