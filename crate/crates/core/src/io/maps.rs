use std::io::Write;
use std::path::{Path, PathBuf};

use super::{create, finish, read_all};
use crate::classifier::RangeDopplerStack;
use crate::error::{Error, Result};

/// Min-max normalises a map to `0..=65535`; a constant map becomes all zeros.
pub fn map_to_u16(map: &[f64]) -> Vec<u16> {
    let (lo, hi) = map.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(hi > lo) {
        return vec![0; map.len()];
    }
    map.iter()
        .map(|&v| ((v - lo) / (hi - lo) * 65535.0).round() as u16)
        .collect()
}

/// Binary PGM (P5) with maxval 65535; samples are big-endian as the format requires.
pub fn write_pgm<W: Write>(w: &mut W, width: usize, height: usize, pixels: &[u16]) -> std::io::Result<()> {
    assert_eq!(pixels.len(), width * height, "pixel count");
    write!(w, "P5\n{width} {height}\n65535\n")?;
    let bytes: Vec<u8> = pixels.iter().flat_map(|p| p.to_be_bytes()).collect();
    w.write_all(&bytes)
}

/// Reads a P5 file written by [`write_pgm`]: `(width, height, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = read_all(path)?;
    let bad = || Error::format(format!("{} is not a 16-bit P5 PGM", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?.to_string());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let body = bytes.get(pos..).ok_or_else(bad)?;
    if body.len() != 2 * w * h {
        return Err(bad());
    }
    let px = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((w, h, px))
}

/// Raw magnitudes, one map row per line.
pub fn write_map_csv<W: Write>(w: &mut W, map: &[f64], cols: usize) -> std::io::Result<()> {
    for row in map.chunks(cols) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Writes `<prefix>_f<k>.pgm` and `<prefix>_f<k>.csv` per frame; returns the paths.
pub fn export_maps(stack: &RangeDopplerStack, prefix: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(2 * stack.frames);
    for f in 0..stack.frames {
        let frame = stack.frame(f);
        let base = format!("{}_f{f}", prefix.display());
        let pgm = PathBuf::from(format!("{base}.pgm"));
        let mut w = create(&pgm)?;
        write_pgm(&mut w, stack.range, stack.doppler, &map_to_u16(frame)).map_err(|e| Error::io(&pgm, e))?;
        finish(&pgm, w)?;
        let csv = PathBuf::from(format!("{base}.csv"));
        let mut w = create(&csv)?;
        write_map_csv(&mut w, frame, stack.range).map_err(|e| Error::io(&csv, e))?;
        finish(&csv, w)?;
        written.push(pgm);
        written.push(csv);
    }
    Ok(written)
}
