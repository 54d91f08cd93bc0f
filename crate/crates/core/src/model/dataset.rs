//! Dataset ingestion: IDX (MNIST-style) images/labels and CSV feature vectors.

use std::path::Path;

use thiserror::Error;

use crate::fxp::Q7_8;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("bad magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic { found: u32, expected: u32 },
    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("parse error on line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("line {line} has {found} fields, expected {expected}")]
    WidthMismatch { line: u64, found: usize, expected: usize },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::BadMagic { .. } => "BadMagic",
            DatasetError::CountMismatch { .. } => "CountMismatch",
            DatasetError::TruncatedFile(_) => "TruncatedFile",
            DatasetError::ParseError { .. } => "ParseError",
            DatasetError::WidthMismatch { .. } => "WidthMismatch",
            DatasetError::IoFailure(_) => "IoFailure",
        }
    }
}

/// Quantized input vectors with optional class labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub samples: Vec<Vec<Q7_8>>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Width shared by every sample, `None` if empty or ragged.
    pub fn width(&self) -> Option<usize> {
        let w = self.samples.first()?.len();
        self.samples.iter().all(|s| s.len() == w).then_some(w)
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32, DatasetError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| DatasetError::TruncatedFile(format!("missing {what} header field")))
}

/// Parses an IDX image tensor (`n × rows × cols` unsigned bytes).
/// Each pixel `p` becomes `from_real(p · scale)`.
pub fn parse_idx_images(bytes: &[u8], scale: f64) -> Result<Vec<Vec<Q7_8>>, DatasetError> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DatasetError::BadMagic {
            found: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let count = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    let width = rows
        .checked_mul(cols)
        .ok_or_else(|| DatasetError::TruncatedFile(format!("{rows}x{cols} images overflow")))?;
    let body = &bytes[16..];
    let needed = width.checked_mul(count);
    if needed.is_none_or(|n| n > body.len()) {
        return Err(DatasetError::TruncatedFile(format!(
            "{count} images of {width} pixels need more than the {} bytes present",
            body.len()
        )));
    }
    // map every byte value once; all pixels share the table
    let table: Vec<Q7_8> = (0..=255u8).map(|p| Q7_8::from_real(p as f64 * scale)).collect();
    if width == 0 {
        return Ok(vec![Vec::new(); count]);
    }
    Ok(body[..width * count]
        .chunks_exact(width)
        .map(|img| img.iter().map(|&p| table[p as usize]).collect())
        .collect())
}

/// Parses an IDX label vector.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>, DatasetError> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DatasetError::BadMagic {
            found: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let count = be_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(DatasetError::TruncatedFile(format!(
            "{count} labels declared, {} present",
            body.len()
        )));
    }
    Ok(body[..count].iter().map(|&l| l as usize).collect())
}

/// Loads IDX images and, optionally, the matching labels.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: Option<&Path>,
    scale: f64,
) -> Result<Dataset, DatasetError> {
    let samples = parse_idx_images(&std::fs::read(images_path)?, scale)?;
    let labels = match labels_path {
        Some(p) => {
            let labels = parse_idx_labels(&std::fs::read(p)?)?;
            if labels.len() != samples.len() {
                return Err(DatasetError::CountMismatch {
                    images: samples.len(),
                    labels: labels.len(),
                });
            }
            Some(labels)
        }
        None => None,
    };
    Ok(Dataset { samples, labels })
}

/// Parses comma-separated feature vectors, one sample per line. A row may
/// carry one extra trailing integer label; the first row decides whether
/// labels are present, and every later row must agree.
pub fn parse_csv_vectors(bytes: &[u8], width: usize) -> Result<Dataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut samples = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut labelled = None;

    for (idx, record) in reader.records().enumerate() {
        let line = idx as u64 + 1;
        let record = record.map_err(|e| DatasetError::ParseError {
            line,
            message: e.to_string(),
        })?;
        let has_label = match (record.len(), labelled) {
            (n, None) if n == width => false,
            (n, None) if n == width + 1 => true,
            (n, Some(false)) if n == width => false,
            (n, Some(true)) if n == width + 1 => true,
            (n, state) => {
                return Err(DatasetError::WidthMismatch {
                    line,
                    found: n,
                    expected: width + usize::from(state == Some(true)),
                })
            }
        };
        labelled = Some(has_label);
        let sample = record
            .iter()
            .take(width)
            .map(|field| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Q7_8::from_real)
                    .ok_or_else(|| DatasetError::ParseError {
                        line,
                        message: format!("not a finite number: {field:?}"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if has_label {
            let field = &record[width];
            let label = field.parse::<usize>().map_err(|_| DatasetError::ParseError {
                line,
                message: format!("label is not a non-negative integer: {field:?}"),
            })?;
            labels.push(label);
        }
        samples.push(sample);
    }
    Ok(Dataset {
        samples,
        labels: (labelled == Some(true)).then_some(labels),
    })
}

pub fn load_csv_vectors(path: impl AsRef<Path>, width: usize) -> Result<Dataset, DatasetError> {
    parse_csv_vectors(&std::fs::read(path)?, width)
}
