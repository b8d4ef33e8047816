//! Benchmark ingestion: MNIST IDX files and the WDBC diagnostic CSV.
//!
//! Digit images are reduced from 28×28 to 7×7 and read out column by column
//! into 49-element vectors. WDBC rows are min–max scaled per feature over the
//! whole file. Both paths emit [`Sample`]s with features in `[0, 1]`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MNIST_SIDE: usize = 28;
pub const GRID_SIDE: usize = 7;
pub const DIGITS_PER_CLASS: usize = 500;
pub const WDBC_FEATURES: usize = 30;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// One grayscale image with its digit class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
    label: u8,
}

impl RawImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>, label: u8) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::Dimension {
                expected: format!("{} pixels ({rows}x{cols})", rows * cols),
                actual: format!("{} pixels", pixels.len()),
            });
        }
        if label > 9 {
            return Err(Error::Format(format!("digit label {label} outside 0..=9")));
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            label,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn pixel(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.cols + c]
    }
}

/// Row-major grid of real values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: format!("{} values ({rows}x{cols})", rows * cols),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Benchmark task. Determines the feature length the perceptron expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Digits,
    Cancer,
}

impl Task {
    pub fn n_features(self) -> usize {
        match self {
            Task::Digits => GRID_SIDE * GRID_SIDE,
            Task::Cancer => WDBC_FEATURES,
        }
    }
}

/// Normalized feature vector with a binary label. `id` is the position of the
/// source record in its file and identifies the sample across splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    pub features: Vec<f64>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub seed: u64,
    pub provenance: Task,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated IDX header ({what})")))
}

/// Parses an IDX image file into `(rows, cols, images)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
        )));
    }
    let count = be_u32(bytes, 4, "count")? as usize;
    let rows = be_u32(bytes, 8, "rows")? as usize;
    let cols = be_u32(bytes, 12, "cols")? as usize;
    let body = &bytes[16..];
    let size = rows * cols;
    if body.len() < count * size {
        return Err(Error::Format(format!(
            "truncated image file: header declares {count} images of {size} bytes, body has {} bytes",
            body.len()
        )));
    }
    let images = body[..count * size]
        .chunks_exact(size.max(1))
        .take(count)
        .map(<[u8]>::to_vec)
        .collect();
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
        )));
    }
    let count = be_u32(bytes, 4, "count")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Format(format!(
            "truncated label file: header declares {count} labels, body has {}",
            body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

/// Loads an IDX image/label pair, keeping only images whose label is in
/// `digits_filter`, in file order.
pub fn load_mnist(
    images_file: impl AsRef<Path>,
    labels_file: impl AsRef<Path>,
    digits_filter: &BTreeSet<u8>,
) -> Result<Vec<RawImage>> {
    if digits_filter.is_empty() {
        return Err(Error::EmptySelection(Vec::new()));
    }
    let (rows, cols, images) = parse_idx_images(&read_file(images_file.as_ref())?)?;
    let labels = parse_idx_labels(&read_file(labels_file.as_ref())?)?;
    if images.len() != labels.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let selected = images
        .into_iter()
        .zip(labels)
        .filter(|(_, label)| digits_filter.contains(label))
        .map(|(pixels, label)| RawImage::new(rows, cols, pixels, label))
        .collect::<Result<Vec<_>>>()?;
    if selected.is_empty() {
        return Err(Error::EmptySelection(digits_filter.iter().copied().collect()));
    }
    Ok(selected)
}

/// Keeps at most `cap` images of each digit, preserving file order.
pub fn cap_per_digit(images: Vec<RawImage>, cap: usize) -> Vec<RawImage> {
    let mut seen = [0usize; 10];
    images
        .into_iter()
        .filter(|img| {
            let n = &mut seen[img.label as usize];
            *n += 1;
            *n <= cap
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownsampleMethod {
    /// Mean of each non-overlapping 4×4 block.
    #[default]
    BlockMean,
    /// One pixel per block, taken at offset (2, 2) within the block.
    Stride,
}

pub fn downsample_7x7(image: &RawImage) -> Result<Grid> {
    downsample_7x7_with(image, DownsampleMethod::BlockMean)
}

pub fn downsample_7x7_with(image: &RawImage, method: DownsampleMethod) -> Result<Grid> {
    if image.rows != MNIST_SIDE || image.cols != MNIST_SIDE {
        return Err(Error::Dimension {
            expected: format!("{MNIST_SIDE}x{MNIST_SIDE} image"),
            actual: format!("{}x{}", image.rows, image.cols),
        });
    }
    let block = MNIST_SIDE / GRID_SIDE;
    let mut grid = Grid::zeros(GRID_SIDE, GRID_SIDE);
    for r in 0..GRID_SIDE {
        for c in 0..GRID_SIDE {
            let value = match method {
                DownsampleMethod::BlockMean => {
                    let mut sum = 0u32;
                    for dr in 0..block {
                        for dc in 0..block {
                            sum += u32::from(image.pixel(block * r + dr, block * c + dc));
                        }
                    }
                    f64::from(sum) / (block * block) as f64 / 255.0
                }
                DownsampleMethod::Stride => {
                    f64::from(image.pixel(block * r + block / 2, block * c + block / 2)) / 255.0
                }
            };
            grid.set(r, c, value);
        }
    }
    Ok(grid)
}

/// Reads a 7×7 grid column by column: output index `c * 7 + r` holds `(r, c)`.
pub fn flatten_column_major(grid: &Grid) -> Result<Vec<f64>> {
    if grid.rows != GRID_SIDE || grid.cols != GRID_SIDE {
        return Err(Error::Dimension {
            expected: format!("{GRID_SIDE}x{GRID_SIDE} grid"),
            actual: format!("{}x{}", grid.rows, grid.cols),
        });
    }
    let mut out = Vec::with_capacity(GRID_SIDE * GRID_SIDE);
    for c in 0..grid.cols {
        for r in 0..grid.rows {
            out.push(grid.get(r, c));
        }
    }
    Ok(out)
}

pub fn unflatten_column_major(values: &[f64], rows: usize, cols: usize) -> Result<Grid> {
    if values.len() != rows * cols {
        return Err(Error::Dimension {
            expected: format!("{} values", rows * cols),
            actual: format!("{} values", values.len()),
        });
    }
    let mut grid = Grid::zeros(rows, cols);
    for (k, &v) in values.iter().enumerate() {
        grid.set(k % rows, k / rows, v);
    }
    Ok(grid)
}

/// Turns digit images into binary samples: `positive` maps to label 1,
/// `negative` to label 0. Images of any other digit are rejected.
pub fn digit_samples(
    images: &[RawImage],
    negative: u8,
    positive: u8,
    method: DownsampleMethod,
) -> Result<Vec<Sample>> {
    images
        .iter()
        .enumerate()
        .map(|(id, img)| {
            let label = match img.label {
                d if d == positive => 1,
                d if d == negative => 0,
                d => {
                    return Err(Error::Domain(format!(
                        "digit {d} is neither {negative} nor {positive}"
                    )))
                }
            };
            let features = flatten_column_major(&downsample_7x7_with(img, method)?)?;
            Ok(Sample { id, features, label })
        })
        .collect()
}

/// Loads the WDBC file (`id,diagnosis,f1..f30`, no header). Label 1 is
/// malignant. Features are min–max scaled per column over all rows.
pub fn load_wdbc(csv_file: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = csv_file.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_wdbc(file)
}

pub fn parse_wdbc(reader: impl Read) -> Result<Vec<Sample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != WDBC_FEATURES + 2 {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", WDBC_FEATURES + 2, record.len()),
            });
        }
        let label = match &record[1] {
            "M" => 1,
            "B" => 0,
            other => {
                return Err(Error::Parse {
                    row,
                    message: format!("diagnosis must be M or B, found {other:?}"),
                })
            }
        };
        let features = record
            .iter()
            .skip(2)
            .enumerate()
            .map(|(col, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row,
                        message: format!("feature {col} is not numeric: {field:?}"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        labels.push(label);
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("WDBC file has no rows".into()));
    }

    let mut lo = vec![f64::INFINITY; WDBC_FEATURES];
    let mut hi = vec![f64::NEG_INFINITY; WDBC_FEATURES];
    for row in &rows {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    if let Some(column) = (0..WDBC_FEATURES).find(|&j| hi[j] <= lo[j]) {
        return Err(Error::ScaleDegenerate { column });
    }

    Ok(rows
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(id, (row, label))| Sample {
            id,
            features: row
                .iter()
                .enumerate()
                .map(|(j, &v)| ((v - lo[j]) / (hi[j] - lo[j])).clamp(0.0, 1.0))
                .collect(),
            label,
        })
        .collect())
}

/// Seeded shuffle, then the first `n_train` samples train and the next
/// `n_test` test.
pub fn split(
    samples: &[Sample],
    n_train: usize,
    n_test: usize,
    seed: u64,
    provenance: Task,
) -> Result<DatasetSplit> {
    let requested = n_train + n_test;
    if requested > samples.len() {
        return Err(Error::Size {
            requested,
            available: samples.len(),
        });
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        test: pick(&order[n_train..requested]),
        seed,
        provenance,
    })
}
