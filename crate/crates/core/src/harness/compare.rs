use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scene::SceneBundle;
use crate::train::{key_spec, ConfigValue, TrainConfig};

use super::experiment::{run_experiment, ExperimentOptions, NoiseSpec, Variant, VariantOutcome};
use super::report::EvalReport;

pub const ROW_CLEAN: &str = "Clean init";
pub const ROW_NOISY: &str = "Noisy init";
pub const ROW_GAP: &str = "/Clean - Noisy/";

/// Train and test PSNR for one method on one init.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PsnrCell {
    pub train: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub label: &'static str,
    pub baseline: PsnrCell,
    pub efa: PsnrCell,
}

/// Clean/noisy by baseline/EFA table with the absolute difference row.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub rows: [CompareRow; 3],
}

impl CompareTable {
    pub fn from_reports(b_clean: &EvalReport, b_noisy: &EvalReport, e_clean: &EvalReport, e_noisy: &EvalReport) -> Self {
        let cell = |r: &EvalReport| PsnrCell {
            train: r.train_mean.psnr,
            test: r.test_mean.psnr,
        };
        let diff = |a: PsnrCell, b: PsnrCell| PsnrCell {
            train: (a.train - b.train).abs(),
            test: (a.test - b.test).abs(),
        };
        let clean = CompareRow {
            label: ROW_CLEAN,
            baseline: cell(b_clean),
            efa: cell(e_clean),
        };
        let noisy = CompareRow {
            label: ROW_NOISY,
            baseline: cell(b_noisy),
            efa: cell(e_noisy),
        };
        let gap = CompareRow {
            label: ROW_GAP,
            baseline: diff(clean.baseline, noisy.baseline),
            efa: diff(clean.efa, noisy.efa),
        };
        Self { rows: [clean, noisy, gap] }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,baseline_train_psnr,baseline_test_psnr,efa_train_psnr,efa_test_psnr\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.4},{:.4},{:.4},{:.4}\n",
                r.label, r.baseline.train, r.baseline.test, r.efa.train, r.efa.test
            ));
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| | Baseline train | Baseline test | EFA-GS train | EFA-GS test |\n|---|---|---|---|---|\n");
        for r in &self.rows {
            s.push_str(&format!(
                "| {} | {:.2} | {:.2} | {:.2} | {:.2} |\n",
                r.label, r.baseline.train, r.baseline.test, r.efa.train, r.efa.test
            ));
        }
        s
    }
}

pub const COMPARE_VARIANTS: [&str; 4] = ["baseline_clean", "baseline_noisy", "efa_clean", "efa_noisy"];

/// The four runs behind [`CompareTable`]. LFCF is forced off for the
/// baseline and on for EFA-GS.
pub fn compare_variants(baseline: &TrainConfig, efa: &TrainConfig, noise: NoiseSpec) -> Vec<Variant> {
    let mut b = baseline.clone();
    b.lfcf.enabled = false;
    let mut e = efa.clone();
    e.lfcf.enabled = true;
    vec![
        Variant::new(COMPARE_VARIANTS[0], b.clone()),
        Variant::new(COMPARE_VARIANTS[1], b).with_noise(noise.target, noise.k, noise.seed),
        Variant::new(COMPARE_VARIANTS[2], e.clone()),
        Variant::new(COMPARE_VARIANTS[3], e).with_noise(noise.target, noise.k, noise.seed),
    ]
}

pub struct CompareOutcome<T> {
    pub table: Option<CompareTable>,
    pub outcomes: Vec<VariantOutcome<T>>,
}

/// Runs the 2x2 comparison and writes `compare.csv` and `compare.md`.
pub fn compare<T: Real>(
    scene: &SceneBundle<T>,
    baseline: &TrainConfig,
    efa: &TrainConfig,
    noise: NoiseSpec,
    opts: &ExperimentOptions,
) -> Result<CompareOutcome<T>> {
    let variants = compare_variants(baseline, efa, noise);
    let outcomes = run_experiment("compare", scene, &variants, opts)?;
    let reports: Vec<Option<&EvalReport>> = outcomes.iter().map(|o| o.result.as_ref().ok().map(|r| &r.report)).collect();
    let table = match reports.as_slice() {
        [Some(a), Some(b), Some(c), Some(d)] => Some(CompareTable::from_reports(a, b, c, d)),
        _ => None,
    };
    if let (Some(dir), Some(t)) = (&opts.out_dir, &table) {
        write(dir, "compare.csv", &t.to_csv())?;
        write(dir, "compare.md", &t.to_markdown())?;
    }
    Ok(CompareOutcome { table, outcomes })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// One axis of a sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl GridAxis {
    /// Parses `key=v1,v2,...`; the key must be a config key.
    pub fn parse(text: &str) -> Result<Self> {
        let (key, vals) = text
            .split_once('=')
            .ok_or_else(|| Error::param(format!("grid axis `{text}` must look like key=v1,v2")))?;
        let key = key.trim().replace('-', "_");
        let spec = key_spec(&key).ok_or_else(|| Error::UnknownKeys(vec![key.clone()]))?;
        let values: Vec<String> = vals.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::param(format!("grid axis `{key}` has no values")));
        }
        for v in &values {
            ConfigValue::parse(&key, spec.kind, v)?;
        }
        Ok(Self { key, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: String,
    pub assignment: Vec<(String, String)>,
    pub report: std::result::Result<EvalReport, String>,
}

/// Cartesian product of `grid` applied on top of `base`, first axis slowest.
pub fn sweep_variants(base: &TrainConfig, grid: &[GridAxis], noise: Option<NoiseSpec>) -> Result<Vec<(Variant, Vec<(String, String)>)>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in grid {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                axis.values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((axis.key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|assign| {
            let mut cfg = base.clone();
            cfg.apply_overrides(assign.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
            let name = if assign.is_empty() {
                "base".to_string()
            } else {
                assign.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("_")
            };
            let mut v = Variant::new(name, cfg);
            if let Some(n) = noise {
                v = v.with_noise(n.target, n.k, n.seed);
            }
            Ok((v, assign))
        })
        .collect()
}

pub fn sweep_csv(grid: &[GridAxis], rows: &[SweepRow]) -> String {
    let keys: Vec<&str> = grid.iter().map(|a| a.key.as_str()).collect();
    let mut s = format!("variant,{},train_psnr,test_psnr,test_ssim,gap_psnr,wall_ms\n", keys.join(","));
    for r in rows {
        let vals: Vec<&str> = r.assignment.iter().map(|(_, v)| v.as_str()).collect();
        match &r.report {
            Ok(rep) => s.push_str(&format!(
                "{},{},{:.4},{:.4},{:.4},{:.4},{:.1}\n",
                r.variant,
                vals.join(","),
                rep.train_mean.psnr,
                rep.test_mean.psnr,
                rep.test_mean.ssim,
                rep.gap.psnr,
                rep.wall_ms
            )),
            Err(_) => s.push_str(&format!("{},{},error,error,error,error,error\n", r.variant, vals.join(","))),
        }
    }
    s
}

/// Runs a config grid and writes `sweep.csv`.
pub fn sweep<T: Real>(
    scene: &SceneBundle<T>,
    base: &TrainConfig,
    grid: &[GridAxis],
    noise: Option<NoiseSpec>,
    opts: &ExperimentOptions,
) -> Result<Vec<SweepRow>> {
    let pairs = sweep_variants(base, grid, noise)?;
    let variants: Vec<Variant> = pairs.iter().map(|(v, _)| v.clone()).collect();
    let outcomes = run_experiment("sweep", scene, &variants, opts)?;
    let rows: Vec<SweepRow> = pairs
        .into_iter()
        .zip(outcomes)
        .map(|((v, assignment), o)| SweepRow {
            variant: v.name,
            assignment,
            report: o.result.map(|r| r.report),
        })
        .collect();
    if let Some(dir) = &opts.out_dir {
        write(dir, "sweep.csv", &sweep_csv(grid, &rows))?;
    }
    Ok(rows)
}
