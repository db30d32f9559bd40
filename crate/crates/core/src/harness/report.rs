use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gaussian::GaussianCloud;
use crate::metrics::{psnr, ssim};
use crate::raster::{render, RenderOptions};
use crate::scalar::Real;
use crate::scene::{SceneBundle, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraScore {
    pub camera_id: String,
    pub split: Split,
    /// `+∞` when the render matches the target exactly.
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricPair {
    pub psnr: f64,
    pub ssim: f64,
}

/// Scores of one trained model on every train and test view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub cameras: Vec<CameraScore>,
    pub train_mean: MetricPair,
    pub test_mean: MetricPair,
    /// `|train_mean − test_mean|` per metric.
    pub gap: MetricPair,
    pub config_hash: String,
    pub seed: u64,
    /// Zero when timing is not recorded.
    pub wall_ms: f64,
    pub final_count: usize,
    pub final_mean_scale: f64,
}

impl EvalReport {
    /// Rebuilds means and gap from the per-camera rows.
    pub fn from_scores(variant: &str, cameras: Vec<CameraScore>, config_hash: String, seed: u64) -> Self {
        let train_mean = split_mean(&cameras, Split::Train);
        let test_mean = split_mean(&cameras, Split::Test);
        Self {
            variant: variant.to_string(),
            gap: MetricPair {
                psnr: (train_mean.psnr - test_mean.psnr).abs(),
                ssim: (train_mean.ssim - test_mean.ssim).abs(),
            },
            train_mean,
            test_mean,
            cameras,
            config_hash,
            seed,
            wall_ms: 0.0,
            final_count: 0,
            final_mean_scale: 0.0,
        }
    }

    /// CSV rows `variant,camera_id,split,psnr,ssim`: one per camera, then
    /// `mean` rows per split and a `gap` row.
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows: Vec<String> = self
            .cameras
            .iter()
            .map(|c| row(&self.variant, &c.camera_id, c.split.label(), c.psnr, c.ssim))
            .collect();
        rows.push(row(&self.variant, "mean", "train", self.train_mean.psnr, self.train_mean.ssim));
        rows.push(row(&self.variant, "mean", "test", self.test_mean.psnr, self.test_mean.ssim));
        rows.push(row(&self.variant, "gap", "train-test", self.gap.psnr, self.gap.ssim));
        rows
    }
}

pub const REPORT_CSV_HEADER: &str = "variant,camera_id,split,psnr,ssim";

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.6}")
    }
}

fn row(variant: &str, camera: &str, split: &str, psnr: f64, ssim: f64) -> String {
    format!("{variant},{camera},{split},{},{}", fmt_metric(psnr), fmt_metric(ssim))
}

/// Per-image mean within a split. An infinite PSNR makes the mean infinite.
fn split_mean(cameras: &[CameraScore], split: Split) -> MetricPair {
    let rows: Vec<&CameraScore> = cameras.iter().filter(|c| c.split == split).collect();
    if rows.is_empty() {
        return MetricPair {
            psnr: f64::NAN,
            ssim: f64::NAN,
        };
    }
    let n = rows.len() as f64;
    MetricPair {
        psnr: rows.iter().map(|c| c.psnr).sum::<f64>() / n,
        ssim: rows.iter().map(|c| c.ssim).sum::<f64>() / n,
    }
}

/// Renders every view of `scene` and scores it against the target.
pub fn score_views<T: Real>(cloud: &GaussianCloud<T>, scene: &SceneBundle<T>) -> Result<Vec<CameraScore>> {
    let opts = RenderOptions::new(scene.background);
    let score = |v: &View<T>, split: Split| -> Result<CameraScore> {
        let img = render(cloud, &v.camera, &opts).color;
        Ok(CameraScore {
            camera_id: v.camera.id.clone(),
            split,
            psnr: psnr(&img, &v.image)?.as_f64(),
            ssim: ssim(&img, &v.image)?.as_f64(),
        })
    };
    let mut out = Vec::with_capacity(scene.train.len() + scene.test.len());
    for v in &scene.train {
        out.push(score(v, Split::Train)?);
    }
    for v in &scene.test {
        out.push(score(v, Split::Test)?);
    }
    Ok(out)
}
