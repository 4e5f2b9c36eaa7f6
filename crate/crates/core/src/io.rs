//! File formats.
//!
//! # Matrix CSV
//!
//! One line per row (feature dimension), one comma-separated field per
//! column (frame or atom). An optional first line `#<rows>,<cols>` declares
//! the shape and is checked against the data. Values are written in the
//! shortest form that parses back to the same `f64`.
//!
//! # Dictionary file
//!
//! Little-endian binary, in this order:
//!
//! | bytes          | content                                        |
//! |----------------|------------------------------------------------|
//! | 8              | magic `HSLRDICT`                               |
//! | 4              | `u32` format version, currently 1              |
//! | 8              | `u64` d (rows)                                 |
//! | 8              | `u64` n (atoms)                                |
//! | 8              | `u64` K (classes)                              |
//! | 8 K            | `u64` group size per class, in class order     |
//! | per class      | `u32` byte length, then that many UTF-8 bytes  |
//! | 1              | normalization: 0 none, 1 unit-l2-columns       |
//! | 8 d n          | `f64` atom values, column-major                |
//!
//! Groups are contiguous: class `c` owns the atoms following those of
//! classes `0..c`. Nothing may follow the atom values.
//!
//! # Frames
//!
//! One binary PGM (P5) per frame, 8-bit grayscale, flattened row-major and
//! scaled by `1/255`. Frames are ordered by file name unless a manifest
//! lists them explicitly.
//!
//! # Dataset manifest
//!
//! ```json
//! {"classes": [{"label": "happy",
//!               "videos": [{"path": "S010/006"},
//!                          {"path": "S011/002", "frames": ["b.pgm", "a.pgm"]}]}]}
//! ```
//!
//! Video paths are relative to the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use image::DynamicImage;
use serde::{Deserialize, Serialize};

use crate::data::VideoSequence;
use crate::error::{Error, Result};
use crate::model::{Dictionary, Normalization};
use crate::Matrix;

const DICT_MAGIC: &[u8; 8] = b"HSLRDICT";
const DICT_VERSION: u32 = 1;

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, matrix_to_csv(m)).map_err(|e| Error::io(path, e))
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = format!("#{},{}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text).map_err(|msg| Error::parse(path, msg))
}

pub fn parse_matrix_csv(text: &str) -> std::result::Result<Matrix, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut declared: Option<(usize, usize)> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let first = record.get(0).unwrap_or("");
        if line == 0 && first.starts_with('#') {
            let dims: Vec<usize> = std::iter::once(&first[1..])
                .chain(record.iter().skip(1))
                .map(|f| f.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| format!("malformed shape header {:?}", record.as_slice()))?;
            if dims.len() != 2 {
                return Err("shape header must be #rows,cols".into());
            }
            declared = Some((dims[0], dims[1]));
            continue;
        }
        if record.len() == 1 && first.is_empty() {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| format!("line {}: bad number {f:?}", line + 1))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if let Some(prev) = rows.first() {
            if prev.len() != row.len() {
                return Err(format!(
                    "line {}: {} fields, expected {}",
                    line + 1,
                    row.len(),
                    prev.len()
                ));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    let m = Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    if let Some(shape) = declared {
        if shape != m.shape() {
            return Err(format!(
                "header declares {shape:?} but the data is {:?}",
                m.shape()
            ));
        }
    }
    Ok(m)
}

pub fn dictionary_to_bytes(dict: &Dictionary) -> Vec<u8> {
    let (d, n) = dict.atoms().shape();
    let p = dict.partition();
    let mut out = Vec::with_capacity(64 + 8 * d * n);
    out.extend_from_slice(DICT_MAGIC);
    out.extend_from_slice(&DICT_VERSION.to_le_bytes());
    for v in [d, n, p.len()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for size in p.sizes() {
        out.extend_from_slice(&(size as u64).to_le_bytes());
    }
    for label in p.labels() {
        out.extend_from_slice(&(label.len() as u32).to_le_bytes());
        out.extend_from_slice(label.as_bytes());
    }
    out.push(match dict.normalization() {
        Normalization::None => 0,
        Normalization::UnitL2Columns => 1,
    });
    for v in dict.atoms().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<usize, String> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| format!("value {v} too large"))
    }
}

pub fn dictionary_from_bytes(bytes: &[u8]) -> std::result::Result<Dictionary, String> {
    let mut cur = ByteCursor { bytes, pos: 0 };
    if cur.take(8)? != DICT_MAGIC {
        return Err("not a dictionary file (bad magic)".into());
    }
    let version = cur.u32()?;
    if version != DICT_VERSION {
        return Err(format!("unsupported dictionary version {version}"));
    }
    let (d, n, k) = (cur.u64()?, cur.u64()?, cur.u64()?);
    let sizes = (0..k)
        .map(|_| cur.u64())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let labels = (0..k)
        .map(|_| {
            let len = cur.u32()? as usize;
            String::from_utf8(cur.take(len)?.to_vec()).map_err(|e| e.to_string())
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let normalization = match cur.take(1)?[0] {
        0 => Normalization::None,
        1 => Normalization::UnitL2Columns,
        other => return Err(format!("unknown normalization flag {other}")),
    };
    if sizes.iter().sum::<usize>() != n {
        return Err(format!("group sizes do not add up to {n} atoms"));
    }
    let count = d.checked_mul(n).ok_or("dimensions overflow")?;
    let raw = cur.take(count.checked_mul(8).ok_or("dimensions overflow")?)?;
    if cur.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - cur.pos));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let atoms = Matrix::from_iterator(d, n, values);
    Dictionary::from_parts(atoms, &sizes, labels, normalization).map_err(|e| e.to_string())
}

pub fn write_dictionary(path: &Path, dict: &Dictionary) -> Result<()> {
    fs::write(path, dictionary_to_bytes(dict)).map_err(|e| Error::io(path, e))
}

pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    dictionary_from_bytes(&bytes).map_err(|msg| Error::parse(path, msg))
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Reads every `.pgm` file of `dir` in file-name order, or the listed
/// `frames` (relative to `dir`) in the order given.
pub fn load_image_sequence(
    dir: &Path,
    frames: Option<&[String]>,
    label: &str,
    id: &str,
) -> Result<VideoSequence> {
    let paths: Vec<PathBuf> = match frames {
        Some(names) => names.iter().map(|f| dir.join(f)).collect(),
        None => {
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|p| p.is_file() && is_pgm(p))
                .collect();
            paths.sort();
            paths
        }
    };
    if paths.is_empty() {
        return Err(Error::input(format!("{}: no frames found", dir.display())));
    }

    let mut shape: Option<(u32, u32)> = None;
    let mut columns = Vec::with_capacity(paths.len());
    for path in &paths {
        let img = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let gray = match img {
            DynamicImage::ImageLuma8(g) => g,
            other => {
                return Err(Error::parse(
                    path,
                    format!(
                        "unsupported pixel format {:?}, expected 8-bit grayscale",
                        other.color()
                    ),
                ))
            }
        };
        let dims = gray.dimensions();
        match shape {
            None => shape = Some(dims),
            Some(expected) if expected != dims => {
                return Err(Error::input(format!(
                    "{}: frame is {}x{}, earlier frames are {}x{}",
                    path.display(),
                    dims.0,
                    dims.1,
                    expected.0,
                    expected.1
                )))
            }
            Some(_) => {}
        }
        // ImageBuffer stores pixels row-major
        columns.push(nalgebra::DVector::from_iterator(
            gray.as_raw().len(),
            gray.as_raw().iter().map(|&p| p as f64 / 255.0),
        ));
    }
    VideoSequence::new(Matrix::from_columns(&columns), label, id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestVideo {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestClass {
    pub label: String,
    pub videos: Vec<ManifestVideo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub classes: Vec<ManifestClass>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Loads every video, resolving paths against `base`. The outer vector
    /// follows the manifest's class order.
    pub fn load_videos(&self, base: &Path) -> Result<Vec<Vec<VideoSequence>>> {
        self.classes
            .iter()
            .map(|class| {
                class
                    .videos
                    .iter()
                    .map(|v| {
                        let dir = base.join(&v.path);
                        load_image_sequence(
                            &dir,
                            v.frames.as_deref(),
                            &class.label,
                            &v.path.to_string_lossy(),
                        )
                    })
                    .collect()
            })
            .collect()
    }
}
