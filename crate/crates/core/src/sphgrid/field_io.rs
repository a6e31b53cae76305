use std::io::{BufRead, Read, Write};

use super::{ScalarField, SphereGrid};
use crate::error::{IcfError, Result};

/// Leading bytes of the binary field format.
pub const FIELD_MAGIC: &[u8; 8] = b"ICFFLD01";

/// Writes `i,j,theta,phi,value` rows with a header line.
pub fn write_field_csv<W: Write>(grid: &SphereGrid, field: &ScalarField, mut out: W) -> Result<()> {
    writeln!(out, "i,j,theta,phi,value")?;
    for i in 0..grid.ni() {
        for j in 0..grid.nj() {
            writeln!(
                out,
                "{i},{j},{:.17e},{:.17e},{:.17e}",
                grid.theta(j),
                grid.phi(i),
                field.get(i, j)
            )?;
        }
    }
    Ok(())
}

/// Reads a CSV written by [`write_field_csv`]; rows may appear in any order.
pub fn read_field_csv<R: BufRead>(grid: &SphereGrid, input: R) -> Result<ScalarField> {
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    let mut lines = input.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some("i,j,theta,phi,value") {
        return Err(IcfError::Format("missing field CSV header".into()));
    }
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || IcfError::Format(format!("malformed field CSV row {}", lineno + 2));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad());
        }
        let i: usize = cols[0].trim().parse().map_err(|_| bad())?;
        let j: usize = cols[1].trim().parse().map_err(|_| bad())?;
        let v: f64 = cols[4].trim().parse().map_err(|_| bad())?;
        if i >= grid.ni() || j >= grid.nj() {
            return Err(IcfError::Format(format!("node ({i}, {j}) outside the grid")));
        }
        let idx = grid.index(i, j);
        values[idx] = v;
        seen[idx] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let (i, j) = grid.node(missing);
        return Err(IcfError::Format(format!("node ({i}, {j}) missing from field CSV")));
    }
    ScalarField::from_values(grid, values)
}

/// Magic, `I` and `J` as little-endian `u32`, then `f64` values longitude-major.
pub fn write_field_binary<W: Write>(field: &ScalarField, mut out: W) -> Result<()> {
    let (ni, nj) = field.dims();
    out.write_all(FIELD_MAGIC)?;
    out.write_all(&(ni as u32).to_le_bytes())?;
    out.write_all(&(nj as u32).to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a binary field, returning it together with a grid of matching size.
pub fn read_field_binary<R: Read>(mut input: R) -> Result<(SphereGrid, ScalarField)> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..8] != FIELD_MAGIC {
        return Err(IcfError::Format("bad field magic".into()));
    }
    let ni = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let nj = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes")) as usize;
    let grid = SphereGrid::new(ni, nj)?;
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    if buf.len() != 8 * grid.len() {
        return Err(IcfError::Format(format!(
            "expected {} bytes of field data, found {}",
            8 * grid.len(),
            buf.len()
        )));
    }
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let field = ScalarField::from_values(&grid, values)?;
    Ok((grid, field))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (SphereGrid, ScalarField) {
        let g = SphereGrid::new(8, 4).unwrap();
        let s = ScalarField::from_direction(&g, |z| 1.0 + 0.25 * z[0] - 1e-7 * z[2]);
        (g, s)
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let (g, s) = sample();
        let mut buf = Vec::new();
        write_field_csv(&g, &s, &mut buf).unwrap();
        let back = read_field_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let (_, s) = sample();
        let mut buf = Vec::new();
        write_field_binary(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 32);
        let (g2, back) = read_field_binary(buf.as_slice()).unwrap();
        assert_eq!((g2.ni(), g2.nj()), (8, 4));
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_truncated_and_corrupt_input() {
        let (g, s) = sample();
        let mut buf = Vec::new();
        write_field_binary(&s, &mut buf).unwrap();
        assert!(read_field_binary(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_field_binary(bad.as_slice()).is_err());

        let mut csv = Vec::new();
        write_field_csv(&g, &s, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let short: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(read_field_csv(&g, short.as_bytes()).is_err());
    }
}
