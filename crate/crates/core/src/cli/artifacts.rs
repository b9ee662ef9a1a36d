//! Output directory bookkeeping: CSV tables, PNG rasters with CSV twins, and
//! the per-run manifest with content hashes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::projective::HomogeneousPoint;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A simple CSV table; numbers are written with full round-trip precision.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let line = |cells: &[String]| cells.iter().map(|c| quote(c)).collect::<Vec<_>>().join(",");
        let mut out = line(&self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

pub fn num(x: f64) -> String {
    format!("{x:.17e}")
}

/// Entry of a run manifest.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ArtifactEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything a run writes, plus the resolved config it came from.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, serde_json::Value>,
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<ArtifactEntry>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

pub struct Artifacts {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.path(name), bytes)?;
        self.record(name, bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.entries.retain(|e| e.name != name);
        self.entries.push(ArtifactEntry { name: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write_bytes(name, table.render().as_bytes())
    }

    /// Registers a file some other writer already produced.
    pub fn adopt(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.path(name))?;
        self.record(name, &bytes);
        Ok(())
    }

    /// Raster of weighted points in the chart `z0 = 1`, axes `Re(z1/z0)` and
    /// `Im(z1/z0)` on `[-2, 2]²`, with the plotted triples as CSV twin.
    pub fn write_figure(&mut self, stem: &str, points: &[(HomogeneousPoint, f64)]) -> Result<()> {
        let plotted: Vec<(f64, f64, f64)> = points.iter().filter_map(|(p, w)| chart_xy(p).map(|(x, y)| (x, y, *w))).collect();
        let mut twin = String::from("x,y,value\n");
        for (x, y, w) in &plotted {
            let _ = writeln!(twin, "{},{},{}", num(*x), num(*y), num(*w));
        }
        self.write_bytes(&format!("{stem}.csv"), twin.as_bytes())?;
        let png = render(&plotted)?;
        self.write_bytes(&format!("{stem}.png"), &png)
    }

    pub fn finish(
        mut self,
        command: &str,
        config: BTreeMap<String, serde_json::Value>,
        inputs: BTreeMap<String, String>,
        summary: BTreeMap<String, serde_json::Value>,
    ) -> Result<RunManifest> {
        self.entries.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = RunManifest { command: command.to_string(), config, inputs, artifacts: self.entries, summary };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(self.dir.join(format!("{command}.run.json")), text)?;
        Ok(manifest)
    }
}

const WINDOW: f64 = 2.0;
const SIZE: u32 = 400;

fn chart_xy(p: &HomogeneousPoint) -> Option<(f64, f64)> {
    let c = p.coords();
    if c.len() < 2 || c[0].norm() == 0.0 {
        return None;
    }
    let w = c[1] / c[0];
    (w.re.abs() <= WINDOW && w.im.abs() <= WINDOW).then_some((w.re, w.im))
}

/// Five-stop dark-to-bright colormap.
fn colormap(t: f64) -> Rgb<u8> {
    const STOPS: [[f64; 3]; 5] =
        [[68.0, 1.0, 84.0], [59.0, 82.0, 139.0], [33.0, 145.0, 140.0], [94.0, 201.0, 98.0], [253.0, 231.0, 37.0]];
    let t = t.clamp(0.0, 1.0) * 4.0;
    let i = (t.floor() as usize).min(3);
    let s = t - i as f64;
    let c = |k: usize| (STOPS[i][k] * (1.0 - s) + STOPS[i + 1][k] * s).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Per-pixel sums of |weight|, colour by sum relative to the maximum.
fn render(points: &[(f64, f64, f64)]) -> Result<Vec<u8>> {
    let mut acc = vec![0.0f64; (SIZE * SIZE) as usize];
    for (x, y, w) in points {
        let px = (((x + WINDOW) / (2.0 * WINDOW)) * (SIZE - 1) as f64).round() as usize;
        let py = (((WINDOW - y) / (2.0 * WINDOW)) * (SIZE - 1) as f64).round() as usize;
        acc[py * SIZE as usize + px] += w.abs();
    }
    let max = acc.iter().copied().fold(0.0, f64::max);
    let mut img = RgbImage::from_pixel(SIZE, SIZE, Rgb([255, 255, 255]));
    for (i, v) in acc.iter().enumerate() {
        if *v > 0.0 {
            img.put_pixel(i as u32 % SIZE, i as u32 / SIZE, colormap((v / max).sqrt()));
        }
    }
    let mut out = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut out), image::ImageFormat::Png)
        .map_err(|e| Error::Io(e.to_string()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_twin_holds_plotted_points_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path()).unwrap();
        let pts = vec![
            (HomogeneousPoint::from_real(&[1.0, 0.5, 0.0]).unwrap(), 1.0),
            (HomogeneousPoint::from_real(&[0.0, 1.0, 0.0]).unwrap(), 2.0),
            (HomogeneousPoint::from_real(&[1.0, 5.0, 0.0]).unwrap(), 3.0),
        ];
        a.write_figure("fig", &pts).unwrap();
        let twin = std::fs::read_to_string(dir.path().join("fig.csv")).unwrap();
        assert_eq!(twin.lines().count(), 2);
        let png = image::open(dir.path().join("fig.png")).unwrap();
        assert_eq!(png.width(), SIZE);
        let m = a.finish("demo", BTreeMap::new(), BTreeMap::new(), BTreeMap::new()).unwrap();
        assert_eq!(m.artifacts.len(), 2);
        assert_eq!(m.artifacts[0].sha256, sha256_hex(twin.as_bytes()));
    }

    #[test]
    fn cells_with_commas_are_quoted() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), "say \"hi\"".into()]);
        assert_eq!(t.render(), "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), Rgb([68, 1, 84]));
        assert_eq!(colormap(1.0), Rgb([253, 231, 37]));
    }
}
