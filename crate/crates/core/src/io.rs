//! Sample persistence (an interior and a boundary CSV per sample), dataset
//! manifests, `key = value` configuration files and PNG heatmaps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::dataset::DatasetSpec;
use crate::domain::{Domain, SourceFamily, SourceField};
use crate::error::{BenoError, Result};
use crate::fvm::{BcKind, SolutionSample};

pub const INTERIOR_HEADER: &str = "x,y,f,u";
pub const BOUNDARY_HEADER: &str = "x,y,g";
pub const MANIFEST: &str = "manifest.txt";
pub const PIXELS_PER_CELL: u32 = 16;

/// `<stem>_interior.csv` and `<stem>_boundary.csv`.
pub fn sample_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let s = stem.as_os_str().to_string_lossy();
    (PathBuf::from(format!("{s}_interior.csv")), PathBuf::from(format!("{s}_boundary.csv")))
}

fn num(v: f64) -> String {
    // 17 significant digits round-trip every finite f64; NaN marks an unsolved sample
    format!("{v:.16e}")
}

pub fn write_sample(sample: &SolutionSample, stem: &Path) -> Result<()> {
    let (ip, bp) = sample_paths(stem);
    let d = &sample.domain;
    let mut s = String::with_capacity(d.len() * 96);
    s.push_str(INTERIOR_HEADER);
    s.push('\n');
    for (k, c) in d.centers.iter().enumerate() {
        writeln!(s, "{},{},{},{}", num(c[0]), num(c[1]), num(sample.f.values[k]), num(sample.u[k])).unwrap();
    }
    fs::write(&ip, s)?;
    let mut s = String::with_capacity(d.boundary.len() * 72);
    s.push_str(BOUNDARY_HEADER);
    s.push('\n');
    for (face, g) in d.boundary.interfaces.iter().zip(&d.boundary.g) {
        writeln!(s, "{},{},{}", num(face.mid[0]), num(face.mid[1]), num(*g)).unwrap();
    }
    fs::write(&bp, s)?;
    Ok(())
}

fn read_table(path: &Path, header: &str) -> Result<Vec<Vec<f64>>> {
    if !path.exists() {
        return Err(BenoError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    if first.trim() != header {
        return Err(BenoError::MalformedHeader {
            path: path.to_path_buf(),
            found: first.to_string(),
        });
    }
    let width = header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let row = l
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| BenoError::Parse(format!("{} line {}: {e}", path.display(), k + 2)))?;
            if row.len() != width {
                return Err(BenoError::Parse(format!(
                    "{} line {}: expected {width} fields, found {}",
                    path.display(),
                    k + 2,
                    row.len()
                )));
            }
            Ok(row)
        })
        .collect()
}

/// Per-sample metadata the CSV pair does not carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMeta {
    pub bc: BcKind,
    pub family: SourceFamily,
}

/// Reads a sample written by [`write_sample`]. The grid is inferred from
/// the files: `base_n` from the smallest cell-center `x` (always `h/2`),
/// corner cuts from the boundary faces lying on the outer walls. Metadata
/// comes from the dataset manifest next to the files when present.
pub fn read_sample(stem: &Path) -> Result<SolutionSample> {
    let (ip, bp) = sample_paths(stem);
    let interior = read_table(&ip, INTERIOR_HEADER)?;
    let boundary = read_table(&bp, BOUNDARY_HEADER)?;
    let malformed = |path: &Path, m: String| BenoError::Parse(format!("{}: {m}", path.display()));
    let min_x = interior.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
    if !(min_x.is_finite() && min_x > 0.0) {
        return Err(malformed(&ip, "no usable cell centers".into()));
    }
    let base_n = (1.0 / (2.0 * min_x)).round() as usize;
    if base_n < 2 {
        return Err(malformed(&ip, format!("inferred grid size {base_n}")));
    }
    if boundary.len() != 4 * base_n {
        return Err(BenoError::RowCountMismatch {
            path: bp,
            expected: 4 * base_n,
            found: boundary.len(),
        });
    }
    let h = 1.0 / base_n as f64;
    let cell = |v: f64| (v / h - 0.5).round() as isize;
    // bottom wall faces share the smallest y, top wall faces the largest
    let top = boundary.iter().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
    let wall = |y: f64| -> Option<(isize, isize)> {
        let xs: Vec<isize> = boundary.iter().filter(|r| r[1] == y).map(|r| cell(r[0])).collect();
        Some((*xs.iter().min()?, *xs.iter().max()?))
    };
    let (b0, b1) = wall(0.0).ok_or_else(|| malformed(&bp, "no faces on the bottom wall".into()))?;
    let (t0, t1) = wall(top).ok_or_else(|| malformed(&bp, "no faces on the top wall".into()))?;
    let n = base_n as isize;
    let cuts = [b0, n - 1 - b1, n - 1 - t1, t0].map(|c| c.max(0) as usize);
    let domain = Domain::from_cuts(base_n, cuts).map_err(|e| malformed(&bp, e.to_string()))?;
    for (face, row) in domain.boundary.interfaces.iter().zip(&boundary) {
        if face.mid != [row[0], row[1]] {
            return Err(malformed(&bp, format!("face at ({}, {}) does not match the inferred grid", row[0], row[1])));
        }
    }
    if interior.len() != domain.len() {
        return Err(BenoError::RowCountMismatch {
            path: ip,
            expected: domain.len(),
            found: interior.len(),
        });
    }
    for (c, row) in domain.centers.iter().zip(&interior) {
        if *c != [row[0], row[1]] {
            return Err(malformed(&ip, format!("cell at ({}, {}) does not match the inferred grid", row[0], row[1])));
        }
    }
    let g: Vec<f64> = boundary.iter().map(|r| r[2]).collect();
    let domain = domain.with_boundary_values(g)?;
    let meta = sample_meta(stem)?;
    Ok(SolutionSample {
        f: SourceField {
            values: interior.iter().map(|r| r[2]).collect(),
            family: meta.map_or(SourceFamily::Polynomial, |m| m.family),
        },
        u: interior.iter().map(|r| r[3]).collect(),
        bc: meta.map_or(BcKind::Dirichlet, |m| m.bc),
        domain,
        report: None,
    })
}

fn stem_name(stem: &Path) -> String {
    stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sample_meta(stem: &Path) -> Result<Option<SampleMeta>> {
    let dir = stem.parent().unwrap_or(Path::new("."));
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let cfg = Config::load(&path)?;
    let bc = match cfg.get("bc") {
        Some(v) => BcKind::parse(v)?,
        None => BcKind::Dirichlet,
    };
    let family = match cfg.get(&format!("family.{}", stem_name(stem))) {
        Some(v) => SourceFamily::parse(v)?,
        None => SourceFamily::Polynomial,
    };
    Ok(Some(SampleMeta { bc, family }))
}

/// Writes every sample of a set plus `manifest.txt`; returns the stems.
pub fn write_dataset(dir: &Path, set: &str, spec: &DatasetSpec, samples: &[SolutionSample]) -> Result<Vec<PathBuf>> {
    if set.is_empty() || set.contains(['/', '\\', '=', '#']) || set.contains(char::is_whitespace) {
        return Err(BenoError::InvalidParameter(format!("bad set name {set:?}")));
    }
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    writeln!(manifest, "# beno dataset").unwrap();
    writeln!(manifest, "set = {set}").unwrap();
    writeln!(manifest, "count = {}", samples.len()).unwrap();
    writeln!(manifest, "corners = {}", spec.corners).unwrap();
    writeln!(manifest, "base_n = {}", spec.base_n).unwrap();
    writeln!(manifest, "seed = {}", spec.seed).unwrap();
    writeln!(manifest, "homogeneous = {}", spec.homogeneous).unwrap();
    writeln!(manifest, "bc = {}", spec.bc.name()).unwrap();
    let mut stems = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        let name = format!("{set}_{k}");
        let stem = dir.join(&name);
        write_sample(s, &stem)?;
        writeln!(manifest, "family.{name} = {}", s.f.family.name()).unwrap();
        writeln!(manifest, "solved.{name} = {}", s.is_solved()).unwrap();
        stems.push(stem);
    }
    fs::write(dir.join(MANIFEST), manifest)?;
    Ok(stems)
}

/// Reads a dataset directory in index order. Uses the manifest when present,
/// otherwise every `*_interior.csv` file.
pub fn read_dataset(dir: &Path) -> Result<Vec<SolutionSample>> {
    if !dir.is_dir() {
        return Err(BenoError::MissingFile(dir.to_path_buf()));
    }
    let manifest = dir.join(MANIFEST);
    let stems: Vec<PathBuf> = if manifest.exists() {
        let cfg = Config::load(&manifest)?;
        let set = cfg.require("set")?.to_string();
        let count: usize = cfg.parse("count")?.unwrap_or(0);
        (0..count).map(|k| dir.join(format!("{set}_{k}"))).collect()
    } else {
        let mut found: Vec<(String, usize, PathBuf)> = Vec::new();
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix("_interior.csv") {
                let (set, idx) = stem.rsplit_once('_').unwrap_or((stem, ""));
                let idx = idx.parse().unwrap_or(usize::MAX);
                found.push((set.to_string(), idx, dir.join(stem)));
            }
        }
        found.sort();
        found.into_iter().map(|(_, _, p)| p).collect()
    };
    if stems.is_empty() {
        return Err(BenoError::EmptySplit(format!("no samples in {}", dir.display())));
    }
    stems.iter().map(|s| read_sample(s)).collect()
}

/// Parsed `key = value` text: `#` starts a comment, blank lines are
/// skipped, `-` in keys reads as `_`, repeated keys are an error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse_str(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| BenoError::Config(format!("line {}: expected key = value, found {line:?}", k + 1)))?;
            let key = key.trim().replace('-', "_");
            if key.is_empty() {
                return Err(BenoError::Config(format!("line {}: empty key", k + 1)));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(BenoError::Config(format!("line {}: duplicate key {key:?}", k + 1)));
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Config> {
        if !path.exists() {
            return Err(BenoError::MissingFile(path.to_path_buf()));
        }
        Config::parse_str(&fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| BenoError::Config(format!("missing key {key:?}")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| BenoError::Config(format!("bad value for {key}: {v:?}"))))
            .transpose()
    }

    /// Sets a key, replacing any previous value (command-line flags win).
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.replace('-', "_"), value.into());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Errors on any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(BenoError::Config(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}

/// Colormap: piecewise-linear through dark blue, teal, green, yellow.
pub fn colormap(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let k = (x.floor() as usize).min(STOPS.len() - 2);
    let w = x - k as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (STOPS[k][c] * (1.0 - w) + STOPS[k + 1][c] * w).round() as u8;
    }
    out
}

/// RGBA raster, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub rgba: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Image {
        Image {
            width,
            height,
            rgba: vec![0; (width * height * 4) as usize],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let k = ((y * self.width + x) * 4) as usize;
        [self.rgba[k], self.rgba[k + 1], self.rgba[k + 2], self.rgba[k + 3]]
    }

    fn fill(&mut self, x0: u32, y0: u32, w: u32, h: u32, c: [u8; 4]) {
        for y in y0..(y0 + h).min(self.height) {
            for x in x0..(x0 + w).min(self.width) {
                let k = ((y * self.width + x) * 4) as usize;
                self.rgba[k..k + 4].copy_from_slice(&c);
            }
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path)?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width, self.height);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| BenoError::Io(std::io::Error::other(e.to_string())))?;
        w.write_image_data(&self.rgba)
            .map_err(|e| BenoError::Io(std::io::Error::other(e.to_string())))?;
        Ok(())
    }
}

pub const COLORBAR_GAP: u32 = 8;
pub const COLORBAR_WIDTH: u32 = 16;
pub const PANEL_GAP: u32 = 24;

fn panel_width(base_n: usize, ppc: u32) -> u32 {
    base_n as u32 * ppc + COLORBAR_GAP + COLORBAR_WIDTH
}

/// Draws one heatmap with its own color bar at `x0`. Cells outside the
/// domain stay transparent; a constant field maps to the middle color.
fn draw_panel(img: &mut Image, x0: u32, domain: &Domain, values: &[f64], ppc: u32) {
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
    let n = domain.base_n as u32;
    for (&(i, j), &v) in domain.cells.iter().zip(values) {
        let [r, g, b] = colormap(norm(v));
        // y grows upward in the domain, downward in the image
        img.fill(x0 + i as u32 * ppc, (n - 1 - j as u32) * ppc, ppc, ppc, [r, g, b, 255]);
    }
    let bar_x = x0 + n * ppc + COLORBAR_GAP;
    let height = n * ppc;
    for y in 0..height {
        let t = if height > 1 { 1.0 - y as f64 / (height - 1) as f64 } else { 0.5 };
        let [r, g, b] = colormap(if hi > lo { t } else { 0.5 });
        img.fill(bar_x, y, COLORBAR_WIDTH, 1, [r, g, b, 255]);
    }
}

fn check_len(domain: &Domain, values: &[f64]) -> Result<()> {
    if values.len() != domain.len() {
        return Err(BenoError::ShapeMismatch(format!(
            "{} values for {} interior cells",
            values.len(),
            domain.len()
        )));
    }
    Ok(())
}

/// Side-by-side heatmaps, each with its own color bar.
pub fn render_panels(domain: &Domain, panels: &[&[f64]], ppc: u32) -> Result<Image> {
    for p in panels {
        check_len(domain, p)?;
    }
    let pw = panel_width(domain.base_n, ppc);
    let count = panels.len() as u32;
    let width = count * pw + count.saturating_sub(1) * PANEL_GAP;
    let mut img = Image::new(width.max(1), domain.base_n as u32 * ppc);
    for (k, p) in panels.iter().enumerate() {
        draw_panel(&mut img, k as u32 * (pw + PANEL_GAP), domain, p, ppc);
    }
    Ok(img)
}

pub fn plot_field(domain: &Domain, values: &[f64], out: &Path) -> Result<()> {
    render_panels(domain, &[values], PIXELS_PER_CELL)?.save_png(out)
}

/// Prediction, ground truth and absolute error, left to right.
pub fn plot_comparison(domain: &Domain, prediction: &[f64], truth: &[f64], out: &Path) -> Result<()> {
    check_len(domain, prediction)?;
    check_len(domain, truth)?;
    let err: Vec<f64> = prediction.iter().zip(truth).map(|(a, b)| (a - b).abs()).collect();
    render_panels(domain, &[prediction, truth, &err], PIXELS_PER_CELL)?.save_png(out)
}

/// One value per line, optionally under a single non-numeric header line.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    if !path.exists() {
        return Err(BenoError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let field = line.split(',').next_back().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => {}
            Err(_) => return Err(BenoError::Parse(format!("{} line {}: {field:?}", path.display(), k + 1))),
        }
    }
    Ok(out)
}

pub fn write_values(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(values.len() * 24 + header.len() + 1);
    s.push_str(header);
    s.push('\n');
    for v in values {
        s.push_str(&num(*v));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::generate_domain;

    fn samples(dir: &Path) -> (DatasetSpec, Vec<SolutionSample>, Vec<PathBuf>) {
        let spec = DatasetSpec::new(4, 16, 2, 5);
        let s = spec.generate().unwrap();
        let stems = write_dataset(dir, "t", &spec, &s).unwrap();
        (spec, s, stems)
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (_, s, stems) = samples(dir.path());
        for (orig, stem) in s.iter().zip(&stems) {
            let back = read_sample(stem).unwrap();
            assert_eq!(back.domain, orig.domain);
            assert_eq!(back.f, orig.f);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back.u), bits(&orig.u));
            assert_eq!(back.bc, orig.bc);
        }
        assert_eq!(read_dataset(dir.path()).unwrap().len(), 2);
    }

    #[test]
    fn uncut_32_has_128_boundary_rows() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec::new(0, 32, 1, 1);
        let stems = write_dataset(dir.path(), "sq", &spec, &spec.generate().unwrap()).unwrap();
        let (_, bp) = sample_paths(&stems[0]);
        let text = fs::read_to_string(bp).unwrap();
        assert_eq!(text.lines().count(), 129);
    }

    #[test]
    fn unsolved_sentinel_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate_domain(8, 2, 1).unwrap();
        let f = crate::domain::sample_source(&d, 2);
        let s = SolutionSample::unsolved(d, f, BcKind::Dirichlet);
        let stem = dir.path().join("u_0");
        write_sample(&s, &stem).unwrap();
        let back = read_sample(&stem).unwrap();
        assert!(!back.is_solved() && back.u.iter().all(|v| v.is_nan()));
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (_, _, stems) = samples(dir.path());
        assert!(matches!(read_sample(&dir.path().join("none_0")), Err(BenoError::MissingFile(_))));
        let (ip, bp) = sample_paths(&stems[0]);
        let text = fs::read_to_string(&ip).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        fs::write(&ip, lines[..lines.len() - 3].join("\n")).unwrap();
        let err = read_sample(&stems[0]).unwrap_err();
        assert!(matches!(err, BenoError::RowCountMismatch { .. }), "{err:?}");
        let (ip1, _) = sample_paths(&stems[1]);
        let t = fs::read_to_string(&ip1).unwrap().replacen("x,y,f,u", "x,y,u,f", 1);
        fs::write(&ip1, t).unwrap();
        assert!(matches!(read_sample(&stems[1]), Err(BenoError::MalformedHeader { .. })));
        let b = fs::read_to_string(&bp).unwrap();
        fs::write(&bp, b.lines().take(10).collect::<Vec<_>>().join("\n")).unwrap();
        assert!(matches!(read_sample(&stems[0]), Err(BenoError::RowCountMismatch { .. })));
        let codes: std::collections::BTreeSet<&str> = [
            BenoError::MissingFile(PathBuf::new()).code(),
            BenoError::MalformedHeader { path: PathBuf::new(), found: String::new() }.code(),
            BenoError::RowCountMismatch { path: PathBuf::new(), expected: 0, found: 0 }.code(),
        ]
        .into_iter()
        .collect();
        assert_eq!(codes.len(), 3);
    }

    #[test]
    fn config_grammar() {
        let c = Config::parse_str("# comment\nepochs = 5\n\nlearning-rate=1e-3 # trailing\nvariant = w_M\n").unwrap();
        assert_eq!(c.parse::<usize>("epochs").unwrap(), Some(5));
        assert_eq!(c.parse::<f64>("learning_rate").unwrap(), Some(1e-3));
        assert_eq!(c.get("variant"), Some("w_M"));
        assert!(c.parse::<usize>("variant").is_err());
        assert!(Config::parse_str("a = 1\na = 2").is_err());
        assert!(Config::parse_str("just words").is_err());
        assert!(c.check_keys(&["epochs", "learning_rate"]).is_err());
        let mut c = c;
        c.set("epochs", "9");
        assert_eq!(c.parse::<usize>("epochs").unwrap(), Some(9));
    }

    #[test]
    fn heatmap_layout_and_mask() {
        let d = generate_domain(16, 4, 3).unwrap();
        let img = render_panels(&d, &[&vec![2.5; d.len()]], PIXELS_PER_CELL).unwrap();
        assert_eq!(img.height, 16 * 16);
        assert_eq!(img.width, 16 * 16 + COLORBAR_GAP + COLORBAR_WIDTH);
        let mut colors = std::collections::BTreeSet::new();
        for (&(i, j), _) in d.cells.iter().zip(0..) {
            let p = img.pixel(i as u32 * 16 + 8, (15 - j as u32) * 16 + 8);
            assert_eq!(p[3], 255);
            colors.insert(p);
        }
        assert_eq!(colors.len(), 1);
        // corner pixels of cut corners are transparent
        for (x, y) in [(0, 255), (255, 255), (255, 0), (0, 0)] {
            assert_eq!(img.pixel(x, y)[3], 0);
        }
        let small = render_panels(&Domain::square(8).unwrap(), &[&[0.0; 64], &[1.0; 64], &[2.0; 64]], 16).unwrap();
        assert_eq!(small.width, 3 * (128 + COLORBAR_GAP + COLORBAR_WIDTH) + 2 * PANEL_GAP);
        assert!(render_panels(&d, &[&[1.0]], 16).is_err());
    }

    #[test]
    fn png_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let d = generate_domain(8, 1, 3).unwrap();
        let v: Vec<f64> = (0..d.len()).map(|k| k as f64).collect();
        let out = dir.path().join("p.png");
        plot_comparison(&d, &v, &vec![1.0; d.len()], &out).unwrap();
        let bytes = fs::read(&out).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
        assert!(plot_field(&d, &v, &dir.path().join("missing/dir/x.png")).is_err());
    }

    #[test]
    fn value_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        write_values(&p, "u_pred", &[1.5, -0.25, 1e-300]).unwrap();
        assert_eq!(read_values(&p).unwrap(), vec![1.5, -0.25, 1e-300]);
    }
}
