//! File formats: detection and annotation JSONL, TOML run configuration,
//! CSV tables, PGM frames and SVG plots.

pub mod config;
pub mod detections;
pub mod pgm;
pub mod svg;
pub mod tables;

use std::path::{Path, PathBuf};

pub use config::RunConfig;
pub use detections::{
    parse_annotations, parse_detections, read_annotations, read_detections, write_annotations, write_detections,
    Annotation, AnnotationFile, DetectionFile, Header,
};

fn with_path(path: &Path, e: std::io::Error) -> std::io::Error {
    std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

/// Open a file; the error names the path.
pub fn open_file(path: &Path) -> crate::Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| with_path(path, e).into())
}

pub fn read_file(path: &Path) -> crate::Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| with_path(path, e).into())
}

/// Overrides the fixture directory.
pub const FIXTURES_ENV: &str = "CATCHCOMP_FIXTURES";

/// Path prefix resolved against [`fixture_dir`].
pub const FIXTURE_PREFIX: &str = "fixture:";

/// Directory holding the shipped CSV fixtures.
pub fn fixture_dir() -> PathBuf {
    match std::env::var_os(FIXTURES_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures")),
    }
}

pub fn fixture_path(name: &str) -> PathBuf {
    fixture_dir().join(name)
}

/// `fixture:name` becomes a path in the fixture directory; anything else is
/// taken as is.
pub fn resolve_path(arg: &str) -> PathBuf {
    match arg.strip_prefix(FIXTURE_PREFIX) {
        Some(name) => fixture_path(name),
        None => Path::new(arg).to_path_buf(),
    }
}
