//! Dataset sources: seeded synthetic tasks, IDX image/label pairs and CSV.
//!
//! Synthetic generators (before the split shuffle, all noise Gaussian):
//!
//! - `two-moons`: `N/2` outer points `(cos t, sin t)` and the rest inner
//!   points `(1 - cos t, 1/2 - sin t)`, `t` evenly spaced on `[0, pi]`;
//!   labels 0 (outer) and 1 (inner); default noise 0.1.
//! - `spiral`: two arms, `r = 0.1 + 0.9 s`, angle `3 pi s + c pi` for arm
//!   `c`, `s` evenly spaced on `[0, 1]`; default noise 0.05.
//! - `xor`: uniform on `[-1, 1]^2`, label 1 when `x y < 0`; default noise 0.
//!
//! Every source is split by one seeded shuffle: the first
//! `round(N * split_fraction)` examples train, the rest evaluate.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::batch::{Batch, Targets};
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    TwoMoons,
    Spiral,
    Xor,
    IdxPair,
    Csv,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.strip_prefix("synthetic:").unwrap_or(s);
        match s {
            "two-moons" | "moons" => Ok(DatasetKind::TwoMoons),
            "spiral" => Ok(DatasetKind::Spiral),
            "xor" => Ok(DatasetKind::Xor),
            "idx" | "idx-pair" => Ok(DatasetKind::IdxPair),
            "csv" => Ok(DatasetKind::Csv),
            other => Err(Error::validation(format!("unknown dataset kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    #[default]
    Classes,
    Values,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    #[default]
    Train,
    Eval,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            other => Err(Error::validation(format!("unknown split `{other}` (train | eval)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub kind: DatasetKind,
    /// IDX: images then labels. CSV: one file.
    #[serde(default)]
    pub paths: Vec<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    /// Synthetic sample count.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Synthetic noise level; `None` picks the generator's default.
    #[serde(default)]
    pub noise: Option<f64>,
    #[serde(default)]
    pub targets: TargetKind,
}

fn default_split() -> f64 {
    0.8
}

fn default_points() -> usize {
    1000
}

impl DatasetSource {
    pub fn synthetic(kind: DatasetKind, points: usize, seed: u64) -> Self {
        DatasetSource {
            kind,
            paths: Vec::new(),
            seed,
            split_fraction: default_split(),
            points,
            noise: None,
            targets: TargetKind::Classes,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Batch,
    pub eval: Batch,
    /// Class count for classification data.
    pub classes: Option<usize>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &Batch {
        match split {
            Split::Train => &self.train,
            Split::Eval => &self.eval,
        }
    }

    /// Per-example input shape.
    pub fn input_shape(&self) -> &[usize] {
        &self.train.inputs.shape()[1..]
    }
}

pub fn load_dataset(src: &DatasetSource) -> Result<Dataset> {
    if !(src.split_fraction > 0.0 && src.split_fraction < 1.0) {
        return Err(Error::validation(format!("split_fraction must lie in (0, 1), got {}", src.split_fraction)));
    }
    let (inputs, targets) = match src.kind {
        DatasetKind::TwoMoons | DatasetKind::Spiral | DatasetKind::Xor => {
            if src.targets == TargetKind::Values {
                return Err(Error::validation("synthetic datasets have class targets"));
            }
            synthetic(src.kind, src.points, src.noise, src.seed)?
        }
        DatasetKind::IdxPair => {
            let [images, labels] = src.paths.as_slice() else {
                return Err(Error::validation("idx-pair needs two paths: images then labels"));
            };
            idx_pair(images, labels)?
        }
        DatasetKind::Csv => {
            let [path] = src.paths.as_slice() else {
                return Err(Error::validation("csv needs exactly one path"));
            };
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text, src.targets)?
        }
    };
    split(inputs, targets, src.split_fraction, src.seed)
}

fn split(inputs: Tensor, targets: Targets, fraction: f64, seed: u64) -> Result<Dataset> {
    let n = inputs.rows();
    let n_train = (n as f64 * fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::validation(format!("{n} examples cannot be split {fraction} into two nonempty parts")));
    }
    let classes = match &targets {
        Targets::Classes(c) => Some(c.iter().max().map_or(0, |m| m + 1)),
        Targets::Values(_) => None,
    };
    let all = Batch::new(inputs, targets)?;
    let mut order: Vec<usize> = (0..n).collect();
    RngState::with_stream(seed, 1).shuffle(&mut order);
    Ok(Dataset { train: all.select(&order[..n_train]), eval: all.select(&order[n_train..]), classes })
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| lo + step * i as f64)
}

fn synthetic(kind: DatasetKind, points: usize, noise: Option<f64>, seed: u64) -> Result<(Tensor, Targets)> {
    if points < 2 {
        return Err(Error::validation("synthetic datasets need at least 2 points"));
    }
    let mut rng = RngState::new(seed);
    let mut xy: Vec<f64> = Vec::with_capacity(2 * points);
    let mut labels = Vec::with_capacity(points);
    let first = points / 2;
    let sigma = match kind {
        DatasetKind::TwoMoons => {
            for t in linspace(0.0, std::f64::consts::PI, first) {
                xy.extend([t.cos(), t.sin()]);
                labels.push(0);
            }
            for t in linspace(0.0, std::f64::consts::PI, points - first) {
                xy.extend([1.0 - t.cos(), 0.5 - t.sin()]);
                labels.push(1);
            }
            noise.unwrap_or(0.1)
        }
        DatasetKind::Spiral => {
            for (arm, m) in [(0usize, first), (1, points - first)] {
                for s in linspace(0.0, 1.0, m) {
                    let r = 0.1 + 0.9 * s;
                    let a = 3.0 * std::f64::consts::PI * s + arm as f64 * std::f64::consts::PI;
                    xy.extend([r * a.cos(), r * a.sin()]);
                    labels.push(arm);
                }
            }
            noise.unwrap_or(0.05)
        }
        DatasetKind::Xor => {
            for _ in 0..points {
                let (x, y) = (2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
                xy.extend([x, y]);
                labels.push(usize::from(x * y < 0.0));
            }
            noise.unwrap_or(0.0)
        }
        DatasetKind::IdxPair | DatasetKind::Csv => unreachable!("file-backed kinds"),
    };
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::validation(format!("noise must be finite and non-negative, got {sigma}")));
    }
    if sigma > 0.0 {
        xy.iter_mut().for_each(|v| *v += sigma * rng.gaussian());
    }
    Ok((Tensor::new(vec![points, 2], xy)?, Targets::Classes(labels)))
}

/// A decoded unsigned-byte IDX array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parses an IDX file whose magic must equal `expected` (`0x0803` images, `0x0801` labels).
pub fn parse_idx(bytes: &[u8], expected: u32) -> Result<IdxArray> {
    let word = |offset: usize| -> Result<u32> {
        bytes
            .get(offset..offset + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::Format { offset: offset as u64, message: "unexpected end of header".into() })
    };
    let magic = word(0)?;
    if magic != expected {
        return Err(Error::Format { offset: 0, message: format!("bad magic {magic:#010x}, expected {expected:#010x}") });
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims).map(|i| word(4 + 4 * i).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    if let Some(i) = dims.iter().position(|&d| d == 0) {
        return Err(Error::Format { offset: (4 + 4 * i) as u64, message: "zero dimension".into() });
    }
    let start = 4 + 4 * ndims;
    let len: usize = dims.iter().product();
    let data = &bytes[start..];
    if data.len() != len {
        return Err(Error::Format {
            offset: (start + data.len().min(len)) as u64,
            message: format!("expected {len} data bytes, found {}", data.len()),
        });
    }
    Ok(IdxArray { dims, data: data.to_vec() })
}

fn idx_pair(images: &Path, labels: &Path) -> Result<(Tensor, Targets)> {
    let img = parse_idx(&fs::read(images).map_err(|e| Error::io(images, e))?, 0x0000_0803)?;
    let lab = parse_idx(&fs::read(labels).map_err(|e| Error::io(labels, e))?, 0x0000_0801)?;
    if img.dims[0] != lab.dims[0] {
        return Err(Error::Format {
            offset: 4,
            message: format!("{} labels for {} images", lab.dims[0], img.dims[0]),
        });
    }
    let shape = vec![img.dims[0], 1, img.dims[1], img.dims[2]];
    let pixels = img.data.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((Tensor::new(shape, pixels)?, Targets::Classes(lab.data.iter().map(|&b| b as usize).collect())))
}

/// Header row, then numeric rows; the last column is the target.
/// Errors cite 1-based file line and column.
pub fn parse_csv(text: &str, targets: TargetKind) -> Result<(Tensor, Targets)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let width = reader
        .headers()
        .map_err(|e| Error::Csv { row: 1, column: 1, message: e.to_string() })?
        .len();
    if width < 2 {
        return Err(Error::Csv { row: 1, column: 1, message: "need at least one feature and one target column".into() });
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            Error::Csv { row, column: 1, message: e.to_string() }
        })?;
        let row = record.position().map_or(rows + 2, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Csv { row, column: record.len().min(width) + 1, message: format!("expected {width} columns") });
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                row,
                column: j + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv { row, column: j + 1, message: "value is not finite".into() });
            }
            if j + 1 < width {
                xs.push(v);
            } else {
                if targets == TargetKind::Classes && (v < 0.0 || v.fract() != 0.0) {
                    return Err(Error::Csv { row, column: j + 1, message: format!("class target `{cell}` is not a non-negative integer") });
                }
                ys.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Csv { row: 2, column: 1, message: "no data rows".into() });
    }
    let inputs = Tensor::new(vec![rows, width - 1], xs)?;
    let targets = match targets {
        TargetKind::Classes => Targets::Classes(ys.iter().map(|&v| v as usize).collect()),
        TargetKind::Values => Targets::Values(Tensor::new(vec![rows, 1], ys)?),
    };
    Ok((inputs, targets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_moons_split_is_reproducible() {
        let src = DatasetSource::synthetic(DatasetKind::TwoMoons, 1000, 0);
        let a = load_dataset(&src).unwrap();
        let b = load_dataset(&src).unwrap();
        assert_eq!(a.train.len(), 800);
        assert_eq!(a.eval.len(), 200);
        assert_eq!(a, b);
        assert_eq!(a.classes, Some(2));
        assert_eq!(a.input_shape(), &[2]);
        let c = load_dataset(&DatasetSource::synthetic(DatasetKind::TwoMoons, 1000, 1)).unwrap();
        assert_ne!(a.train.inputs, c.train.inputs);
    }

    #[test]
    fn synthetic_labels_are_balanced() {
        for kind in [DatasetKind::TwoMoons, DatasetKind::Spiral] {
            let d = load_dataset(&DatasetSource::synthetic(kind, 101, 3)).unwrap();
            let ones: usize = d.train.classes().unwrap().iter().chain(d.eval.classes().unwrap()).sum();
            assert_eq!(ones, 51);
        }
        let x = load_dataset(&DatasetSource::synthetic(DatasetKind::Xor, 50, 3)).unwrap();
        for i in 0..x.train.len() {
            let r = x.train.inputs.row(i);
            assert_eq!(x.train.classes().unwrap()[i], usize::from(r[0] * r[1] < 0.0));
        }
    }

    #[test]
    fn idx_magic_and_truncation() {
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        images.extend([0, 255, 51, 102, 1, 2, 3, 4]);
        let a = parse_idx(&images, 0x803).unwrap();
        assert_eq!(a.dims, vec![2, 2, 2]);
        let mut bad = images.clone();
        bad[3] = 1;
        assert!(matches!(parse_idx(&bad, 0x803), Err(Error::Format { offset: 0, .. })));
        let short = &images[..images.len() - 1];
        assert!(matches!(parse_idx(short, 0x803), Err(Error::Format { offset: 23, .. })));
        assert!(matches!(parse_idx(&images[..6], 0x803), Err(Error::Format { offset: 4, .. })));
    }

    #[test]
    fn idx_pair_loads_scaled_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 4, 0, 0, 0, 1, 0, 0, 0, 1];
        images.extend([0, 255, 51, 102]);
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 4, 0, 1, 1, 0];
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        fs::write(&ip, &images).unwrap();
        fs::write(&lp, &labels).unwrap();
        let src = DatasetSource { kind: DatasetKind::IdxPair, paths: vec![ip, lp], split_fraction: 0.5, ..DatasetSource::synthetic(DatasetKind::IdxPair, 0, 0) };
        let d = load_dataset(&src).unwrap();
        assert_eq!(d.train.inputs.shape(), &[2, 1, 1, 1]);
        let mut all: Vec<f64> = d.train.inputs.data().iter().chain(d.eval.inputs.data()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, vec![0.0, 0.2, 0.4, 1.0]);
    }

    #[test]
    fn csv_parsing_and_errors() {
        let (x, y) = parse_csv("a,b,label\n1,2,0\n3.5,-1,1\n", TargetKind::Classes).unwrap();
        assert_eq!(x.shape(), &[2, 2]);
        assert_eq!(y, Targets::Classes(vec![0, 1]));
        let e = parse_csv("a,b,label\n1,2,0\n3,oops,1\n", TargetKind::Classes).unwrap_err();
        assert!(matches!(e, Error::Csv { row: 3, column: 2, .. }), "{e}");
        let e = parse_csv("a,label\n1,0.5\n", TargetKind::Classes).unwrap_err();
        assert!(matches!(e, Error::Csv { row: 2, column: 2, .. }), "{e}");
        let (_, y) = parse_csv("a,t\n1,0.5\n", TargetKind::Values).unwrap();
        assert!(matches!(y, Targets::Values(_)));
        assert!(parse_csv("a,t\n", TargetKind::Values).is_err());
    }

    #[test]
    fn bad_sources() {
        let mut src = DatasetSource::synthetic(DatasetKind::TwoMoons, 10, 0);
        src.split_fraction = 1.0;
        assert!(load_dataset(&src).is_err());
        let src = DatasetSource { kind: DatasetKind::Csv, ..DatasetSource::synthetic(DatasetKind::Csv, 10, 0) };
        assert!(load_dataset(&src).is_err());
        assert!("nope".parse::<DatasetKind>().is_err());
        assert_eq!("synthetic:spiral".parse::<DatasetKind>().unwrap(), DatasetKind::Spiral);
    }
}
