//! Per-database readers for the native on-disk layouts.
//!
//! | kind      | score listing                 | distorted images                     | references              |
//! |-----------|-------------------------------|--------------------------------------|-------------------------|
//! | TID2013   | `mos_with_names.txt`          | `distorted_images/iRR_TT_L.bmp`      | `reference_images/IRR.BMP` |
//! | LIVE      | `dmos.csv` + `<type>/info.txt`| `<type>/imgN.bmp`                    | `refimgs/<name>.bmp`    |
//! | CSIQ      | `csiq_dmos.csv`               | `dst_imgs/<type>/<img>.<TAG>.<L>.png`| `src_imgs/<img>.png`    |
//! | KADID-10k | `dmos.csv`                    | `images/IRR_TT_LL.png`               | `images/IRR.png`        |
//! | synthetic | `scores.csv`                  | `distorted/<name>`                   | `reference/<name>`      |
//!
//! LIVE's `dmos.csv` (`folder,image,dmos`) and CSIQ's `csiq_dmos.csv`
//! (`image,dst_type,dst_lev,dmos`) are plain-text exports of the score
//! tables those releases ship as `.mat` / `.xlsx`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::manifest::csv_err;
use super::{normalize_score, DatabaseKind, DatabaseManifest, ImageRecord, LoadOptions, PixelSource};
use crate::error::{Error, Result};

const TID2013_EXCLUDED_REFERENCE: u32 = 25;

/// Reads a database from its native layout with strict file checks.
pub fn load_manifest(root: &Path, kind: DatabaseKind) -> Result<DatabaseManifest> {
    load_manifest_with(root, kind, LoadOptions::default())
}

pub fn load_manifest_with(
    root: &Path,
    kind: DatabaseKind,
    opts: LoadOptions,
) -> Result<DatabaseManifest> {
    let manifest = match kind {
        DatabaseKind::Tid2013 => load_tid2013(root, opts)?,
        DatabaseKind::Live => load_live(root, opts)?,
        DatabaseKind::Csiq => load_csiq(root, opts)?,
        DatabaseKind::Kadid10k => load_kadid(root, opts)?,
        DatabaseKind::Synthetic => load_synthetic(root, opts)?,
    };
    manifest.validate(opts)?;
    Ok(manifest)
}

/// Case-insensitive view of one directory's file names.
struct DirIndex {
    dir: PathBuf,
    files: HashMap<String, PathBuf>,
}

impl DirIndex {
    fn new(dir: PathBuf) -> Self {
        let mut files = HashMap::new();
        if let Ok(entries) = std::fs::read_dir(&dir) {
            for entry in entries.flatten() {
                let name = entry.file_name().to_string_lossy().to_ascii_lowercase();
                files.insert(name, entry.path());
            }
        }
        DirIndex { dir, files }
    }

    fn find(&self, name: &str) -> Option<&PathBuf> {
        self.files.get(&name.to_ascii_lowercase())
    }

    /// Existing file if present, otherwise the expected path.
    fn resolve(&self, name: &str) -> PathBuf {
        self.find(name).cloned().unwrap_or_else(|| self.dir.join(name))
    }
}

fn require_file(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::Ingestion(format!(
            "expected score listing `{}` not found",
            path.display()
        )))
    }
}

/// Builds the reference map: files that exist are always included; missing
/// ones are only recorded (as their expected path) when references are not
/// required, so strict loading surfaces them as unresolved records.
fn resolve_references(
    wanted: impl IntoIterator<Item = (String, String)>,
    index: &DirIndex,
    opts: LoadOptions,
) -> BTreeMap<String, PixelSource> {
    let mut refs = BTreeMap::new();
    for (id, file_name) in wanted {
        match index.find(&file_name) {
            Some(p) => {
                refs.insert(id, PixelSource::File(p.clone()));
            }
            None if !opts.require_references => {
                refs.insert(id, PixelSource::File(index.dir.join(&file_name)));
            }
            None => {}
        }
    }
    refs
}

fn parse_tid_name(name: &str) -> Option<(u32, u32, u8)> {
    let lower = name.to_ascii_lowercase();
    let stem = lower.strip_suffix(".bmp").unwrap_or(&lower);
    let rest = stem.strip_prefix('i')?;
    let mut parts = rest.split('_');
    let r = parts.next()?.parse().ok()?;
    let t = parts.next()?.parse().ok()?;
    let l = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((r, t, l))
}

fn distortion_name(kind: DatabaseKind, one_based: u32, image: &str) -> Result<String> {
    kind.distortion_types()
        .get((one_based as usize).wrapping_sub(1))
        .map(|s| s.to_string())
        .ok_or_else(|| {
            Error::Ingestion(format!("{kind}: unknown distortion index {one_based} in `{image}`"))
        })
}

fn load_tid2013(root: &Path, opts: LoadOptions) -> Result<DatabaseManifest> {
    let kind = DatabaseKind::Tid2013;
    let score_file = require_file(root.join("mos_with_names.txt"))?;
    let text = std::fs::read_to_string(&score_file).map_err(|e| Error::io(&score_file, e))?;
    let dist = DirIndex::new(root.join("distorted_images"));
    let refs = DirIndex::new(root.join("reference_images"));

    let mut records = Vec::new();
    let mut wanted = BTreeMap::new();
    let mut excluded = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || {
            Error::Ingestion(format!(
                "{}:{}: cannot parse `{line}`",
                score_file.display(),
                lineno + 1
            ))
        };
        let mut fields = line.split_whitespace();
        let raw: f64 = fields.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let name = fields.next().ok_or_else(bad)?;
        let (r, t, l) = parse_tid_name(name).ok_or_else(bad)?;
        if r == TID2013_EXCLUDED_REFERENCE {
            excluded += 1;
            continue;
        }
        let reference_id = format!("I{r:02}");
        wanted.insert(reference_id.clone(), format!("{reference_id}.BMP"));
        records.push(ImageRecord {
            image_id: name.to_ascii_lowercase(),
            reference_id,
            distortion_type: distortion_name(kind, t, name)?,
            distortion_level: l,
            raw_score: raw,
            dmos: normalize_score(raw, kind)?,
            pixel_source: PixelSource::File(dist.resolve(name)),
        });
    }
    Ok(DatabaseManifest {
        kind,
        records,
        references: resolve_references(wanted, &refs, opts),
        score_file: Some(score_file),
        excluded,
    })
}

#[derive(Deserialize)]
struct LiveRow {
    folder: String,
    image: String,
    dmos: f64,
}

fn load_live(root: &Path, opts: LoadOptions) -> Result<DatabaseManifest> {
    let kind = DatabaseKind::Live;
    let score_file = require_file(root.join("dmos.csv"))?;
    let rows: Vec<LiveRow> = read_csv(&score_file)?;
    let refs = DirIndex::new(root.join("refimgs"));
    let mut dirs: HashMap<String, DirIndex> = HashMap::new();

    // info.txt per distortion folder: "<reference> <distorted> <parameter>"
    let mut ref_of: HashMap<(String, String), String> = HashMap::new();
    for folder in kind.distortion_types() {
        let info = root.join(folder).join("info.txt");
        if !info.is_file() {
            if rows.iter().any(|r| r.folder == *folder) {
                return Err(Error::Ingestion(format!(
                    "expected reference listing `{}` not found",
                    info.display()
                )));
            }
            continue;
        }
        let text = std::fs::read_to_string(&info).map_err(|e| Error::io(&info, e))?;
        for line in text.lines() {
            let mut f = line.split_whitespace();
            if let (Some(r), Some(d)) = (f.next(), f.next()) {
                ref_of.insert((folder.to_string(), d.to_ascii_lowercase()), r.to_string());
            }
        }
    }

    let mut records = Vec::new();
    let mut wanted = BTreeMap::new();
    for row in rows {
        let folder = row.folder.trim().to_ascii_lowercase();
        if !kind.is_known_distortion(&folder) {
            return Err(Error::Ingestion(format!("LIVE: unknown distortion folder `{folder}`")));
        }
        let image = row.image.trim().to_string();
        let ref_file = ref_of
            .get(&(folder.clone(), image.to_ascii_lowercase()))
            .ok_or_else(|| {
                Error::Integrity(format!("LIVE: `{folder}/{image}` missing from info.txt"))
            })?
            .clone();
        let reference_id = Path::new(&ref_file)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| ref_file.clone());
        wanted.insert(reference_id.clone(), ref_file);
        let dir = dirs
            .entry(folder.clone())
            .or_insert_with(|| DirIndex::new(root.join(&folder)));
        records.push(ImageRecord {
            image_id: format!("{folder}/{image}"),
            reference_id,
            distortion_type: folder.clone(),
            distortion_level: 0,
            raw_score: row.dmos,
            dmos: normalize_score(row.dmos, kind)?,
            pixel_source: PixelSource::File(dir.resolve(&image)),
        });
    }
    Ok(DatabaseManifest {
        kind,
        records,
        references: resolve_references(wanted, &refs, opts),
        score_file: Some(score_file),
        excluded: 0,
    })
}

#[derive(Deserialize)]
struct CsiqRow {
    image: String,
    dst_type: String,
    dst_lev: u8,
    dmos: f64,
}

/// `(canonical type, folder, file tag)` for a CSIQ distortion label.
fn csiq_type(label: &str) -> Option<(&'static str, &'static str, &'static str)> {
    let key: String = label
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    match key.as_str() {
        "awgn" | "noise" => Some(("awgn", "awgn", "AWGN")),
        "jpeg" => Some(("jpeg", "jpeg", "JPEG")),
        "jpeg2000" | "jp2k" => Some(("jpeg2000", "jpeg2000", "jpeg2000")),
        "fnoise" | "pinknoise" => Some(("fnoise", "fnoise", "fnoise")),
        "blur" => Some(("blur", "blur", "BLUR")),
        "contrast" => Some(("contrast", "contrast", "contrast")),
        _ => None,
    }
}

fn load_csiq(root: &Path, opts: LoadOptions) -> Result<DatabaseManifest> {
    let kind = DatabaseKind::Csiq;
    let score_file = require_file(root.join("csiq_dmos.csv"))?;
    let rows: Vec<CsiqRow> = read_csv(&score_file)?;
    let refs = DirIndex::new(root.join("src_imgs"));
    let mut dirs: HashMap<&'static str, DirIndex> = HashMap::new();

    let mut records = Vec::new();
    let mut wanted = BTreeMap::new();
    for row in rows {
        let (canonical, folder, tag) = csiq_type(&row.dst_type).ok_or_else(|| {
            Error::Ingestion(format!("CSIQ: unknown distortion type `{}`", row.dst_type))
        })?;
        let image = row.image.trim().to_string();
        let file = format!("{image}.{tag}.{}.png", row.dst_lev);
        let dir = dirs
            .entry(folder)
            .or_insert_with(|| DirIndex::new(root.join("dst_imgs").join(folder)));
        wanted.insert(image.clone(), format!("{image}.png"));
        records.push(ImageRecord {
            image_id: file.to_ascii_lowercase(),
            reference_id: image,
            distortion_type: canonical.to_string(),
            distortion_level: row.dst_lev,
            raw_score: row.dmos,
            dmos: normalize_score(row.dmos, kind)?,
            pixel_source: PixelSource::File(dir.resolve(&file)),
        });
    }
    Ok(DatabaseManifest {
        kind,
        records,
        references: resolve_references(wanted, &refs, opts),
        score_file: Some(score_file),
        excluded: 0,
    })
}

#[derive(Deserialize)]
struct KadidRow {
    dist_img: String,
    ref_img: String,
    dmos: f64,
}

fn load_kadid(root: &Path, opts: LoadOptions) -> Result<DatabaseManifest> {
    let kind = DatabaseKind::Kadid10k;
    let score_file = require_file(root.join("dmos.csv"))?;
    let rows: Vec<KadidRow> = read_csv(&score_file)?;
    let images = DirIndex::new(root.join("images"));

    let mut records = Vec::new();
    let mut wanted = BTreeMap::new();
    for row in rows {
        let name = row.dist_img.trim().to_string();
        let stem = name.split('.').next().unwrap_or(&name);
        let parts: Vec<&str> = stem.split('_').collect();
        let parsed = match parts.as_slice() {
            [_, t, l] => t.parse::<u32>().ok().zip(l.parse::<u8>().ok()),
            _ => None,
        };
        let (t, l) = parsed
            .ok_or_else(|| Error::Ingestion(format!("KADID-10k: cannot parse image name `{name}`")))?;
        let ref_file = row.ref_img.trim().to_string();
        let reference_id = ref_file.split('.').next().unwrap_or(&ref_file).to_string();
        wanted.insert(reference_id.clone(), ref_file);
        records.push(ImageRecord {
            image_id: name.to_ascii_lowercase(),
            reference_id,
            distortion_type: distortion_name(kind, t, &name)?,
            distortion_level: l,
            raw_score: row.dmos,
            dmos: normalize_score(row.dmos, kind)?,
            pixel_source: PixelSource::File(images.resolve(&name)),
        });
    }
    Ok(DatabaseManifest {
        kind,
        records,
        references: resolve_references(wanted, &images, opts),
        score_file: Some(score_file),
        excluded: 0,
    })
}

#[derive(Deserialize)]
struct SyntheticRow {
    image: String,
    reference: String,
    distortion: String,
    level: u8,
    dmos: f64,
}

fn load_synthetic(root: &Path, opts: LoadOptions) -> Result<DatabaseManifest> {
    let kind = DatabaseKind::Synthetic;
    let score_file = require_file(root.join("scores.csv"))?;
    let rows: Vec<SyntheticRow> = read_csv(&score_file)?;
    let dist = DirIndex::new(root.join("distorted"));
    let refs = DirIndex::new(root.join("reference"));

    let mut records = Vec::new();
    let mut wanted = BTreeMap::new();
    for row in rows {
        if !kind.is_known_distortion(&row.distortion) {
            return Err(Error::Ingestion(format!(
                "synthetic: unknown distortion `{}`",
                row.distortion
            )));
        }
        let reference_id = row.reference.split('.').next().unwrap_or(&row.reference).to_string();
        wanted.insert(reference_id.clone(), row.reference.clone());
        records.push(ImageRecord {
            image_id: row.image.clone(),
            reference_id,
            distortion_type: row.distortion,
            distortion_level: row.level,
            raw_score: row.dmos,
            dmos: normalize_score(row.dmos, kind)?,
            pixel_source: PixelSource::File(dist.resolve(&row.image)),
        });
    }
    Ok(DatabaseManifest {
        kind,
        records,
        references: resolve_references(wanted, &refs, opts),
        score_file: Some(score_file),
        excluded: 0,
    })
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| csv_err(path, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tid_names() {
        assert_eq!(parse_tid_name("i01_08_3.bmp"), Some((1, 8, 3)));
        assert_eq!(parse_tid_name("I25_24_5.BMP"), Some((25, 24, 5)));
        assert_eq!(parse_tid_name("foo.bmp"), None);
    }

    #[test]
    fn csiq_aliases() {
        assert_eq!(csiq_type("noise").unwrap().0, "awgn");
        assert_eq!(csiq_type("jpeg 2000").unwrap().0, "jpeg2000");
        assert_eq!(csiq_type("f.noise").unwrap().0, "fnoise");
        assert!(csiq_type("ringing").is_none());
    }
}
