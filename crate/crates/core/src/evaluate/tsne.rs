//! Joint 3-D t-SNE of the four patch-feature roles over sampled image pairs.

use std::fmt::Write as _;
use std::path::Path;

use bhtsne::tSNE;
use candle_core::Tensor;
use plotters::prelude::*;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::predict::image_patches;
use crate::dataset::{DatabaseManifest, ImageCache};
use crate::error::{Error, Result};
use crate::model::QualityModel;
use crate::seed::{self, Stream};

pub const ROLES: [&str; 4] = ["F_R", "F_PR", "F_D", "F_PD"];

/// Above this many points the Barnes-Hut approximation replaces the exact
/// quadratic gradient.
const EXACT_LIMIT: usize = 2000;
const BARNES_HUT_THETA: f32 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub n_pairs: usize,
    pub perplexity: f32,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            n_pairs: 900,
            perplexity: 30.0,
            epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneExport {
    pub image_ids: Vec<String>,
    /// `points[role][pair]`, roles ordered as [`ROLES`].
    pub points: [Vec<[f32; 3]>; 4],
    pub perplexity: f32,
    pub epochs: usize,
    pub method: &'static str,
    pub seed: u64,
}

/// Record indices of the sampled pairs; all records when fewer are available.
pub fn sample_pairs(manifest: &DatabaseManifest, n_pairs: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..manifest.records.len()).collect();
    idx.shuffle(&mut seed::rng(seed, Stream::Tsne, &[0]));
    if idx.len() < n_pairs {
        log::warn!(
            "t-SNE asked for {n_pairs} pairs but {} has only {}; using all",
            manifest.kind,
            idx.len()
        );
    }
    idx.truncate(n_pairs);
    idx
}

fn patch_mean(t: &Tensor) -> Result<Vec<f32>> {
    Ok(t.mean(0)?.to_vec1::<f32>()?)
}

pub fn tsne_export(model: &QualityModel, manifest: &DatabaseManifest, config: &TsneConfig) -> Result<TsneExport> {
    let picked = sample_pairs(manifest, config.n_pairs, config.seed);
    let mut cache = ImageCache::new();
    let mut features: [Vec<Vec<f32>>; 4] = Default::default();
    let mut image_ids = Vec::new();
    for &i in &picked {
        let rec = &manifest.records[i];
        let dist = cache.load(&rec.pixel_source)?;
        let reference = cache.load(manifest.reference_source(&rec.reference_id)?)?;
        if dist.dimensions() != reference.dimensions() {
            return Err(Error::Alignment(format!("{} does not match its reference", rec.image_id)));
        }
        let fb = model.features(&image_patches(&reference)?, &image_patches(&dist)?)?;
        for (slot, t) in features.iter_mut().zip([&fb.f_r, &fb.f_pr, &fb.f_d, &fb.f_pd]) {
            slot.push(patch_mean(t)?);
        }
        image_ids.push(rec.image_id.clone());
    }
    let n = image_ids.len();
    let total = 4 * n;
    if total < 4 {
        return Err(Error::Size("t-SNE needs at least one image pair".into()));
    }
    let max_perplexity = ((total - 1) / 3) as f32;
    let perplexity = config.perplexity.min(max_perplexity);
    if perplexity < config.perplexity {
        log::warn!("perplexity lowered from {} to {perplexity} for {total} points", config.perplexity);
    }
    let samples: Vec<&[f32]> = features.iter().flatten().map(Vec::as_slice).collect();
    let normal = Normal::new(0.0f32, 1e-4).expect("valid normal");
    let mut rng = seed::rng(config.seed, Stream::Tsne, &[1]);
    let init: Vec<f32> = (0..total * 3).map(|_| normal.sample(&mut rng)).collect();
    let dist = |a: &&[f32], b: &&[f32]| a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f32>();
    let mut t: tSNE<f32, &[f32], 3> = tSNE::new(&samples);
    t.perplexity(perplexity).epochs(config.epochs).initial_embedding(init);
    let method = if total <= EXACT_LIMIT {
        t.exact(dist);
        "exact"
    } else {
        t.barnes_hut(BARNES_HUT_THETA, |a, b| dist(a, b).sqrt());
        "barnes_hut"
    };
    let emb = t.embedding();
    if emb.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("t-SNE embedding is not finite".into()));
    }
    let mut points: [Vec<[f32; 3]>; 4] = Default::default();
    for (k, p) in emb.chunks_exact(3).enumerate() {
        points[k / n].push([p[0], p[1], p[2]]);
    }
    Ok(TsneExport {
        image_ids,
        points,
        perplexity,
        epochs: config.epochs,
        method,
        seed: config.seed,
    })
}

impl TsneExport {
    pub fn n_pairs(&self) -> usize {
        self.image_ids.len()
    }

    /// `role,x,y,z` rows, pairs in [`TsneExport::image_ids`] order, under a `#`
    /// header carrying the t-SNE settings.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "# tsne perplexity={} epochs={} method={} seed={} pairs={}",
            self.perplexity,
            self.epochs,
            self.method,
            self.seed,
            self.n_pairs()
        )
        .unwrap();
        writeln!(s, "role,x,y,z").unwrap();
        for (role, pts) in ROLES.iter().zip(&self.points) {
            for p in pts {
                writeln!(s, "{role},{},{},{}", p[0], p[1], p[2]).unwrap();
            }
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Static 3-D scatter, one colour per role.
    pub fn write_svg(&self, path: &Path, title: &str) -> Result<()> {
        let fig = |e: String| Error::io(path, std::io::Error::other(e));
        let all = self.points.iter().flatten();
        let (mut lo, mut hi) = ([f32::INFINITY; 3], [f32::NEG_INFINITY; 3]);
        for p in all {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let range = |k: usize| {
            let pad = ((hi[k] - lo[k]) * 0.05).max(1e-3);
            (lo[k] - pad) as f64..(hi[k] + pad) as f64
        };
        let root = SVGBackend::new(path, (900, 800)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| fig(e.to_string()))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 24))
            .margin(20)
            .build_cartesian_3d(range(0), range(1), range(2))
            .map_err(|e| fig(e.to_string()))?;
        chart.configure_axes().draw().map_err(|e| fig(e.to_string()))?;
        let colours = [RED, BLUE, GREEN, MAGENTA];
        for ((role, pts), colour) in ROLES.iter().zip(&self.points).zip(colours) {
            chart
                .draw_series(
                    pts.iter()
                        .map(|p| Circle::new((p[0] as f64, p[1] as f64, p[2] as f64), 2, colour.filled())),
                )
                .map_err(|e| fig(e.to_string()))?
                .label(*role)
                .legend(move |(x, y)| Circle::new((x, y), 4, colour.filled()));
        }
        chart
            .configure_series_labels()
            .border_style(BLACK)
            .background_style(WHITE.mix(0.8))
            .draw()
            .map_err(|e| fig(e.to_string()))?;
        root.present().map_err(|e| fig(e.to_string()))?;
        Ok(())
    }
}
