//! Artifact writers: binary PGM/PBM rasters, CSV tables, and key=value
//! manifests with content hashes. Identical inputs produce identical bytes;
//! every image carries exactly one comment line with the manifest hash it
//! belongs to.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::basin::{FateGrid, OrbitFate};
use crate::grid::GridSet;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Ordered key=value sections; the unit of reproducibility. The content
/// hash covers the canonical text without the integrity section.
#[derive(Clone, Debug, Default)]
pub struct Manifest {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, section: &str, key: &str, value: impl std::fmt::Display) {
        if let Some((_, entries)) = self.sections.iter_mut().find(|(s, _)| s == section) {
            entries.push((key.to_string(), value.to_string()));
            return;
        }
        self.sections
            .push((section.to_string(), vec![(key.to_string(), value.to_string())]));
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)?
            .1
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Canonical text (sections and keys in insertion order).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (section, entries) in &self.sections {
            let _ = writeln!(out, "[{section}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }

    /// Write the manifest plus its integrity hash.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = self.to_text();
        let _ = writeln!(text, "[integrity]\ncontent_hash = {}", self.content_hash());
        fs::write(path, text)
    }
}

/// Shade for attracted/escaped pixels: 16·⌊log₂(first_n + 1)⌋ capped at 96,
/// integer-only so output bytes never depend on float rounding.
fn shade(first_n: usize) -> u8 {
    let l = (usize::BITS - 1 - (first_n + 1).leading_zeros()) as u8;
    (16 * l).min(96)
}

/// Encode a fate grid: attracted pixels start at 0 and darken with entry
/// time, escaped pixels start at 255 and darken with escape time, undecided
/// pixels sit at 128.
pub fn fate_grid_bytes(g: &FateGrid) -> Vec<u8> {
    let (nx, ny) = (g.window.nx, g.window.ny);
    let mut out = Vec::with_capacity(nx * ny);
    // PGM rows go top-down; the grid's row 0 is at the bottom.
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            out.push(match g.at(ix, iy) {
                OrbitFate::Attracted { first_n } => shade(first_n),
                OrbitFate::Escaped { first_n } => 255 - shade(first_n),
                OrbitFate::Undecided { .. } => 128,
            });
        }
    }
    out
}

/// Binary PGM (P5, maxval 255) with one manifest-hash comment line.
pub fn write_pgm(
    path: &Path,
    width: usize,
    height: usize,
    pixels: &[u8],
    manifest_hash: &str,
) -> std::io::Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n# manifest={manifest_hash}\n{width} {height}\n255\n")?;
    f.write_all(pixels)?;
    Ok(())
}

/// Binary PBM (P4) of a grid set with one manifest-hash comment line.
pub fn write_pbm(path: &Path, g: &GridSet, manifest_hash: &str) -> std::io::Result<()> {
    let (nx, ny) = (g.nx(), g.ny());
    let mut f = fs::File::create(path)?;
    write!(f, "P4\n# manifest={manifest_hash}\n{nx} {ny}\n")?;
    let row_bytes = nx.div_ceil(8);
    let mut buf = vec![0u8; row_bytes];
    for iy in (0..ny).rev() {
        buf.iter_mut().for_each(|b| *b = 0);
        for ix in 0..nx {
            if g.get(ix, iy) {
                buf[ix / 8] |= 0x80 >> (ix % 8);
            }
        }
        f.write_all(&buf)?;
    }
    Ok(())
}

/// CSV with a header row; all values pre-formatted by the caller.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> std::io::Result<()> {
    let mut text = String::new();
    let _ = writeln!(text, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(text, "{}", row.join(","));
    }
    fs::write(path, text)
}

/// Shortest-roundtrip float formatting (deterministic across runs).
pub fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}
