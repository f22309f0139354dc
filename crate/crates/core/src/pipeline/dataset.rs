//! Image datasets on disk: a JSON manifest next to one LITF file per image and
//! an optional `source_features.csv` (columns `sample`, the latent parameter
//! names, `y`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::litf::{read_image, write_image};
use super::{csv_reader, csv_writer, fmt_f64};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::lcmp_sim::SourceFeatures;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SOURCE_FEATURES_FILE: &str = "source_features.csv";

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub generator: String,
    /// Generator settings, when known.
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub n: usize,
    pub image_shape: [usize; 3],
    /// Paths relative to the manifest's directory (absolute paths also accepted).
    pub image_files: Vec<String>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_features_file: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<ImageTensor>,
    pub y: Vec<f64>,
    pub source_features: Option<Vec<SourceFeatures>>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Checks uniform image shapes, finite responses and matching lengths.
    pub fn new(
        images: Vec<ImageTensor>,
        y: Vec<f64>,
        source_features: Option<Vec<SourceFeatures>>,
        provenance: Provenance,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Data("dataset has no images".into()));
        }
        if images.len() != y.len() {
            return Err(Error::Data(format!(
                "{} images but {} responses",
                images.len(),
                y.len()
            )));
        }
        let shape = images[0].shape();
        if let Some((i, img)) = images
            .iter()
            .enumerate()
            .find(|(_, im)| im.shape() != shape)
        {
            return Err(Error::Data(format!(
                "image {i} has shape {:?}, expected {shape:?}",
                img.shape()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "response {i} is not finite ({})",
                y[i]
            )));
        }
        if let Some(sf) = &source_features {
            if sf.len() != images.len() {
                return Err(Error::Data(format!(
                    "{} source feature rows for {} images",
                    sf.len(),
                    images.len()
                )));
            }
        }
        Ok(Dataset {
            images,
            y,
            source_features,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn image_shape(&self) -> [usize; 3] {
        self.images[0].shape()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            version: MANIFEST_VERSION,
            n: self.n(),
            image_shape: self.image_shape(),
            image_files: (0..self.n()).map(image_file_name).collect(),
            y: self.y.clone(),
            source_features_file: self
                .source_features
                .as_ref()
                .map(|_| SOURCE_FEATURES_FILE.to_string()),
            seed: self.provenance.seed,
            generator: self.provenance.generator.clone(),
            config: self.provenance.config.clone(),
        }
    }

    /// Writes `manifest.json`, `images/*.litf` and, when present,
    /// `source_features.csv` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let img_dir = dir.join("images");
        fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        let manifest = self.manifest();
        for (img, name) in self.images.iter().zip(&manifest.image_files) {
            write_image(&dir.join(name), img)?;
        }
        if let Some(sf) = &self.source_features {
            write_source_features(&dir.join(SOURCE_FEATURES_FILE), sf)?;
        }
        let path = dir.join(MANIFEST_FILE);
        let text =
            serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Loads a dataset from a manifest file or a directory containing one.
    pub fn load(path: &Path) -> Result<Self> {
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        ingest_external(&manifest_path)
    }

    /// Rows of the source-feature table as an `n × q` matrix with column names.
    pub fn source_matrix(&self) -> Option<(Vec<String>, crate::numerics::Matrix)> {
        let sf = self.source_features.as_ref()?;
        let names = SourceFeatures::names(sf[0].n_classes());
        let rows: Vec<Vec<f64>> = sf.iter().map(SourceFeatures::values).collect();
        crate::numerics::Matrix::from_rows(&rows)
            .ok()
            .map(|m| (names, m))
    }
}

fn image_file_name(i: usize) -> String {
    format!("images/img_{i:06}.litf")
}

/// Reads a manifest and every tensor it references.
pub fn ingest_external(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format(manifest_path, e.to_string()))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::format(
            manifest_path,
            format!("unsupported manifest version {}", m.version),
        ));
    }
    if m.image_files.len() != m.n || m.y.len() != m.n {
        return Err(Error::format(
            manifest_path,
            format!(
                "n = {} but {} image files and {} responses",
                m.n,
                m.image_files.len(),
                m.y.len()
            ),
        ));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut images = Vec::with_capacity(m.n);
    for name in &m.image_files {
        let path = base.join(name);
        if !path.exists() {
            return Err(Error::Data(format!(
                "image file {} is missing",
                path.display()
            )));
        }
        let img = read_image(&path)?;
        if img.shape() != m.image_shape {
            return Err(Error::Data(format!(
                "{} has shape {:?}, manifest declares {:?}",
                path.display(),
                img.shape(),
                m.image_shape
            )));
        }
        images.push(img);
    }
    let source_features = match &m.source_features_file {
        Some(f) => Some(read_source_features(&base.join(f), &m.y)?),
        None => None,
    };
    Dataset::new(
        images,
        m.y,
        source_features,
        Provenance {
            seed: m.seed,
            generator: m.generator,
            config: m.config,
        },
    )
}

pub fn write_source_features(path: &Path, rows: &[SourceFeatures]) -> Result<()> {
    let r = rows.first().map_or(0, SourceFeatures::n_classes);
    let mut w = csv_writer(path)?;
    let mut header = vec!["sample".to_string()];
    header.extend(SourceFeatures::names(r));
    header.push("y".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, f) in rows.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(f.values().into_iter().map(fmt_f64));
        rec.push(fmt_f64(f.y));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `source_features.csv`; the class count is inferred from the width.
pub fn read_source_features(path: &Path, y: &[f64]) -> Result<Vec<SourceFeatures>> {
    let mut rdr = csv_reader(path)?;
    let width = rdr.headers().map_err(|e| csv_err(path, e))?.len();
    if width < 10 || (width - 8) % 2 != 0 {
        return Err(Error::format(
            path,
            format!("{width} columns do not match the source-feature layout"),
        ));
    }
    let r = (width - 8) / 2;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let vals: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, format!("row {row}: {e}")))?;
        let yi = *vals.last().expect("width checked");
        out.push(SourceFeatures::from_values(&vals[..vals.len() - 1], r, yi)?);
    }
    if out.len() != y.len() {
        return Err(Error::format(
            path,
            format!("{} rows for {} samples", out.len(), y.len()),
        ));
    }
    Ok(out)
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}
