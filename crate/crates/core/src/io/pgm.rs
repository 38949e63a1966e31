//! Binary 8-bit PGM (P5) frames, the input of the flow estimator.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::motion::GrayFrame;

/// Parse a P5 image with maxval at most 255. Comments are allowed in the
/// header.
pub fn parse_pgm(bytes: &[u8], source: &str) -> Result<GrayFrame> {
    let bad = |m: &str| Error::parse(source, 1, format!("PGM: {m}"));
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?.to_string());
    }
    if fields[0] != "P5" {
        return Err(bad("only binary P5 images are supported"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be in 1..=255"));
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let raster = bytes.get(pos..).ok_or_else(|| bad("missing raster"))?;
    if raster.len() < width * height {
        return Err(bad("raster shorter than width x height"));
    }
    GrayFrame::new(width, height, raster[..width * height].to_vec())
}

pub fn write_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}

pub fn read_pgm(path: &Path) -> Result<GrayFrame> {
    parse_pgm(&super::read_file(path)?, &path.display().to_string())
}

/// All `.pgm` files of a directory in file-name order.
pub fn read_frame_dir(dir: &Path) -> Result<Vec<GrayFrame>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_pgm(p)).collect()
}
