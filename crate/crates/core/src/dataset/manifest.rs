use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::DatabaseKind;
use crate::error::{Error, Result};

/// Where the pixels of an image live.
#[derive(Clone)]
pub enum PixelSource {
    File(PathBuf),
    Memory(Arc<RgbImage>),
}

impl PixelSource {
    pub fn load(&self) -> Result<Arc<RgbImage>> {
        match self {
            PixelSource::Memory(img) => Ok(Arc::clone(img)),
            PixelSource::File(path) => {
                if !path.exists() {
                    return Err(Error::io(
                        path,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "image file not found"),
                    ));
                }
                let img = image::open(path).map_err(|source| Error::Image {
                    path: path.clone(),
                    source,
                })?;
                Ok(Arc::new(img.to_rgb8()))
            }
        }
    }

    pub fn dimensions(&self) -> Result<(u32, u32)> {
        match self {
            PixelSource::Memory(img) => Ok(img.dimensions()),
            PixelSource::File(path) => {
                image::image_dimensions(path).map_err(|source| Error::Image {
                    path: path.clone(),
                    source,
                })
            }
        }
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            PixelSource::File(p) => Some(p),
            PixelSource::Memory(_) => None,
        }
    }

    fn describe(&self) -> String {
        match self {
            PixelSource::File(p) => p.display().to_string(),
            PixelSource::Memory(img) => format!("<memory {}x{}>", img.width(), img.height()),
        }
    }
}

impl fmt::Debug for PixelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// One distorted image with its subjective score on both scales.
#[derive(Debug, Clone)]
pub struct ImageRecord {
    pub image_id: String,
    pub reference_id: String,
    pub distortion_type: String,
    pub distortion_level: u8,
    pub raw_score: f64,
    pub dmos: f64,
    pub pixel_source: PixelSource,
}

#[derive(Debug, Clone)]
pub struct DatabaseManifest {
    pub kind: DatabaseKind,
    pub records: Vec<ImageRecord>,
    pub references: BTreeMap<String, PixelSource>,
    /// Score listing the records were read from.
    pub score_file: Option<PathBuf>,
    /// Records dropped by database-specific exclusion rules.
    pub excluded: usize,
}

/// Controls how strictly [`super::load_manifest`] checks the files on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Require every reference image file to exist with the same size as its
    /// distorted versions. No-reference evaluation turns this off.
    pub require_references: bool,
    /// Require every distorted image file to exist.
    pub require_distorted: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            require_references: true,
            require_distorted: true,
        }
    }
}

impl LoadOptions {
    pub fn no_reference() -> Self {
        LoadOptions {
            require_references: false,
            require_distorted: true,
        }
    }
}

/// One line of the `prepare` integrity summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountSummary {
    pub kind: DatabaseKind,
    pub references: usize,
    pub records: usize,
    pub excluded: usize,
    pub expected: Option<(usize, usize)>,
}

impl CountSummary {
    pub fn matches_expected(&self) -> bool {
        self.expected
            .is_none_or(|(r, n)| r == self.references && n == self.records)
    }
}

impl fmt::Display for CountSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} distorted / {} refs", self.records, self.references)?;
        if self.kind == DatabaseKind::Tid2013 {
            write!(f, " (image 25 excluded)")?;
        }
        match self.expected {
            Some((r, n)) if !self.matches_expected() => {
                write!(f, " [expected {n} distorted / {r} refs]")
            }
            _ => Ok(()),
        }
    }
}

impl DatabaseManifest {
    pub fn summary(&self) -> CountSummary {
        let used: BTreeSet<&str> = self.records.iter().map(|r| r.reference_id.as_str()).collect();
        CountSummary {
            kind: self.kind,
            references: used.len(),
            records: self.records.len(),
            excluded: self.excluded,
            expected: self.kind.expected_counts(),
        }
    }

    pub fn reference_ids(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.reference_id.clone()).collect()
    }

    pub fn reference_source(&self, reference_id: &str) -> Result<&PixelSource> {
        self.references.get(reference_id).ok_or_else(|| {
            Error::Alignment(format!("reference `{reference_id}` is not available"))
        })
    }

    /// A copy with every reference removed, for evaluation paths that must
    /// never touch pristine images.
    pub fn without_references(&self) -> DatabaseManifest {
        DatabaseManifest {
            references: BTreeMap::new(),
            ..self.clone()
        }
    }

    /// Points every reference at `dir/<file name>`, keeping the file names.
    pub fn with_reference_dir(&self, dir: &Path) -> DatabaseManifest {
        let references = self
            .references
            .iter()
            .map(|(id, src)| {
                let moved = match src {
                    PixelSource::File(p) => PixelSource::File(
                        dir.join(p.file_name().map(PathBuf::from).unwrap_or_else(|| p.clone())),
                    ),
                    other => other.clone(),
                };
                (id.clone(), moved)
            })
            .collect();
        DatabaseManifest {
            references,
            ..self.clone()
        }
    }

    pub fn records_for<'a>(
        &'a self,
        references: &'a BTreeSet<String>,
    ) -> impl Iterator<Item = (usize, &'a ImageRecord)> + 'a {
        self.records
            .iter()
            .enumerate()
            .filter(move |(_, r)| references.contains(&r.reference_id))
    }

    /// Checks reference resolution and, depending on `opts`, file presence
    /// and matching dimensions.
    pub fn validate(&self, opts: LoadOptions) -> Result<()> {
        let unresolved: Vec<String> = self
            .records
            .iter()
            .filter(|r| !self.references.contains_key(&r.reference_id))
            .map(|r| format!("{} -> {}", r.image_id, r.reference_id))
            .collect();
        if !unresolved.is_empty() {
            return Err(Error::Integrity(format!(
                "{} record(s) reference unknown images: {}",
                unresolved.len(),
                unresolved.join(", ")
            )));
        }
        let out_of_range: Vec<&str> = self
            .records
            .iter()
            .filter(|r| !(0.0..=100.0).contains(&r.dmos))
            .map(|r| r.image_id.as_str())
            .collect();
        if !out_of_range.is_empty() {
            return Err(Error::Integrity(format!(
                "dmos outside [0,100] for: {}",
                out_of_range.join(", ")
            )));
        }
        if opts.require_distorted {
            let missing: Vec<String> = self
                .records
                .iter()
                .filter_map(|r| r.pixel_source.path().filter(|p| !p.exists()))
                .map(|p| p.display().to_string())
                .collect();
            if !missing.is_empty() {
                return Err(Error::Integrity(format!(
                    "{} distorted image file(s) missing, first: {}",
                    missing.len(),
                    missing[0]
                )));
            }
        }
        if opts.require_references {
            let mut ref_dims = BTreeMap::new();
            for (id, src) in &self.references {
                if let Some(p) = src.path() {
                    if !p.exists() {
                        return Err(Error::Integrity(format!(
                            "reference `{id}` missing on disk: {}",
                            p.display()
                        )));
                    }
                }
                ref_dims.insert(id.as_str(), src.dimensions()?);
            }
            let mismatched: Vec<String> = self
                .records
                .iter()
                .filter_map(|r| {
                    let want = ref_dims[r.reference_id.as_str()];
                    match r.pixel_source.dimensions() {
                        Ok(got) if got == want => None,
                        Ok(got) => Some(format!("{} ({}x{} vs {}x{})", r.image_id, got.0, got.1, want.0, want.1)),
                        Err(e) => Some(format!("{} ({e})", r.image_id)),
                    }
                })
                .collect();
            if !mismatched.is_empty() {
                return Err(Error::Integrity(format!(
                    "distorted/reference size mismatch: {}",
                    mismatched.join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Writes the inspection cache. The first line is a comment naming the
    /// database and the score listing used.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let score_file = self
            .score_file
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "-".into());
        writeln!(file, "# database={} score_file={}", self.kind.name(), score_file)
            .map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record([
            "image_id",
            "reference_id",
            "distortion_type",
            "distortion_level",
            "raw_score",
            "dmos",
        ])
        .map_err(|e| csv_err(path, e))?;
        for r in &self.records {
            w.write_record([
                r.image_id.clone(),
                r.reference_id.clone(),
                r.distortion_type.clone(),
                r.distortion_level.to_string(),
                r.raw_score.to_string(),
                r.dmos.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// A row of `manifest.csv`, as read back for inspection.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestRow {
    pub image_id: String,
    pub reference_id: String,
    pub distortion_type: String,
    pub distortion_level: u8,
    pub raw_score: f64,
    pub dmos: f64,
}

pub fn read_manifest_csv(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    rdr.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Ingestion(format!("{}: {e}", path.display()))
}
