use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{masked_psnr, psnr, ssim};
use crate::degrade::{pad_mask, Manifest, ManifestRecord, MaskBuffer};
use crate::error::{Error, Result};
use crate::imaging::{resize_to, to_grayscale, ImageBuffer, ResizeMethod};
use crate::pipeline::{run_auto, PipelinePreset};
use crate::stages::StageRunner;

pub const AGGREGATE_ID: &str = "mean";

/// One table row. Restorations are scored in luma against the `g` tier at its
/// resolution. `degraded_*` score the `gbcn` input the same way and
/// `psnr_vs_input` compares the restoration with that input.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalRow {
    pub image_id: String,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub psnr_in_mask: Option<f64>,
    pub psnr_out_mask: Option<f64>,
    pub degraded_psnr: Option<f64>,
    pub degraded_ssim: Option<f64>,
    pub psnr_vs_input: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
    pub aggregate: EvalRow,
}

impl EvalTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows.iter().chain(std::iter::once(&self.aggregate)) {
            w.serialize(row).map_err(|e| Error::Codec(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Codec(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

fn luma_at(img: &ImageBuffer, w: u32, h: u32) -> Result<ImageBuffer> {
    let gray = to_grayscale(img);
    if gray.dimensions() == (w, h) {
        Ok(gray)
    } else {
        resize_to(&gray, w, h, ResizeMethod::Bicubic)
    }
}

fn eval_record(
    manifest: &Manifest,
    record: &ManifestRecord,
    preset: &PipelinePreset,
    pad_radius: u32,
    runner: &StageRunner,
) -> Result<EvalRow> {
    let original = ImageBuffer::load(manifest.resolve(&record.tier_g))?;
    let degraded = ImageBuffer::load(manifest.resolve(&record.tier_gbcn))?;
    let mask = pad_mask(&MaskBuffer::load(manifest.resolve(&record.mask))?, pad_radius);
    let mask_arg = (!mask.is_empty()).then_some(&mask);
    let restored = run_auto(&degraded, preset, mask_arg, runner)?;

    let (w, h) = original.dimensions();
    let original = to_grayscale(&original);
    let degraded = to_grayscale(&degraded);
    let restored = luma_at(&restored, w, h)?;
    let (psnr_in_mask, psnr_out_mask) = if mask.is_empty() || mask.is_full() {
        (None, None)
    } else {
        let (i, o) = masked_psnr(&restored, &original, &mask)?;
        (Some(i), Some(o))
    };
    Ok(EvalRow {
        image_id: record.id().to_string(),
        psnr: Some(psnr(&restored, &original)?),
        ssim: Some(ssim(&restored, &original)?),
        psnr_in_mask,
        psnr_out_mask,
        degraded_psnr: Some(psnr(&degraded, &original)?),
        degraded_ssim: Some(ssim(&degraded, &original)?),
        psnr_vs_input: Some(psnr(&restored, &degraded)?),
        error: None,
    })
}

fn mean(rows: &[EvalRow], field: impl Fn(&EvalRow) -> Option<f64>) -> Option<f64> {
    let values: Vec<f64> = rows.iter().filter_map(field).collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Restores every record's `gbcn` tier with `preset`, using its crack mask
/// dilated by `pad_radius`, and scores the result. A failing record becomes a
/// row with `error` set; the others still run. Records are processed in parallel
/// on the current rayon pool.
pub fn corpus_eval(
    manifest: &Manifest,
    preset: &PipelinePreset,
    pad_radius: u32,
    runner: &StageRunner,
) -> Result<EvalTable> {
    preset.validate()?;
    let rows: Vec<EvalRow> = manifest
        .records
        .par_iter()
        .map(|record| {
            eval_record(manifest, record, preset, pad_radius, runner).unwrap_or_else(|e| {
                tracing::warn!("{}: {e}", record.id());
                EvalRow {
                    image_id: record.id().to_string(),
                    error: Some(e.to_string()),
                    ..EvalRow::default()
                }
            })
        })
        .collect();
    let aggregate = EvalRow {
        image_id: AGGREGATE_ID.to_string(),
        psnr: mean(&rows, |r| r.psnr),
        ssim: mean(&rows, |r| r.ssim),
        psnr_in_mask: mean(&rows, |r| r.psnr_in_mask),
        psnr_out_mask: mean(&rows, |r| r.psnr_out_mask),
        degraded_psnr: mean(&rows, |r| r.degraded_psnr),
        degraded_ssim: mean(&rows, |r| r.degraded_ssim),
        psnr_vs_input: mean(&rows, |r| r.psnr_vs_input),
        error: None,
    };
    Ok(EvalTable { rows, aggregate })
}
