use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Ambient, SupportState};
use crate::error::{IcfError, Result};
use crate::sphgrid::{read_field_binary, write_field_binary};

pub const STATE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDims {
    #[serde(rename = "I")]
    pub ni: usize,
    #[serde(rename = "J")]
    pub nj: usize,
}

/// JSON written next to the binary field of a saved state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSidecar {
    pub format_version: u32,
    pub ambient: Ambient,
    pub t: f64,
    pub grid: GridDims,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut name = stem.as_os_str().to_owned();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

/// Writes `<stem>.bin` and `<stem>.json`.
pub fn save_state(state: &SupportState, stem: &Path) -> Result<()> {
    let mut bin = BufWriter::new(File::create(with_ext(stem, "bin"))?);
    write_field_binary(&state.s, &mut bin)?;
    bin.flush()?;
    let sidecar = StateSidecar {
        format_version: STATE_FORMAT_VERSION,
        ambient: state.ambient,
        t: state.t,
        grid: GridDims {
            ni: state.grid().ni(),
            nj: state.grid().nj(),
        },
    };
    let json = File::create(with_ext(stem, "json"))?;
    serde_json::to_writer_pretty(json, &sidecar)?;
    Ok(())
}

/// Reads a state written by [`save_state`].
pub fn load_state(stem: &Path) -> Result<SupportState> {
    let sidecar: StateSidecar = serde_json::from_reader(BufReader::new(File::open(with_ext(stem, "json"))?))?;
    if sidecar.format_version != STATE_FORMAT_VERSION {
        return Err(IcfError::Format(format!(
            "unsupported state format_version {}",
            sidecar.format_version
        )));
    }
    let (grid, field) = read_field_binary(BufReader::new(File::open(with_ext(stem, "bin"))?))?;
    if (grid.ni(), grid.nj()) != (sidecar.grid.ni, sidecar.grid.nj) {
        return Err(IcfError::Format("sidecar grid size disagrees with the field".into()));
    }
    SupportState::new(sidecar.ambient, Arc::new(grid), field, sidecar.t)
}
