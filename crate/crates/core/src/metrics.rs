//! Segmentation metrics and losses, optionally split by visibility.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::Serialize;

/// IoU of two BEV maps after thresholding the prediction at `thresh`.
/// Ground truth must be strictly binary. Returns `None` when the union is
/// empty, which is indistinguishable from a perfect score only by
/// convention, so the caller decides.
pub fn iou(pred: &Tensor, gt: &Tensor, thresh: f64) -> Result<Option<f64>> {
    check_pair(pred, gt)?;
    check_binary(gt)?;
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let p = p as f64 >= thresh;
        let g = g != 0.0;
        inter += (p && g) as u64;
        union += (p || g) as u64;
    }
    Ok(if union == 0 {
        None
    } else {
        Some(inter as f64 / union as f64)
    })
}

/// Evaluation report. Optional entries are omitted from serialized output
/// when their region is empty.
#[derive(Debug, Clone, Serialize)]
pub struct VisReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou_vis: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou_occ: Option<f64>,
    pub visible_rate: f64,
    pub occluded_rate: f64,
}

/// Scores a BEV segmentation against ground truth, overall and restricted
/// to the surely-visible (V >= `tau_vis`) and surely-occluded
/// (V < `tau_occ`) regions of the visibility map. Rates report the
/// percentage of ground-truth positives falling in each region.
pub fn visibility_iou(
    pred: &Tensor,
    gt: &Tensor,
    vis: &Tensor,
    tau_vis: f64,
    tau_occ: f64,
    thresh: f64,
) -> Result<VisReport> {
    check_pair(pred, gt)?;
    check_pair(pred, vis)?;
    check_binary(gt)?;
    if !(tau_vis.is_finite() && tau_occ.is_finite()) {
        return Err(Error::invalid("tau", "thresholds must be finite"));
    }
    if !(0.0..=1.0).contains(&tau_occ) || !(0.0..=1.0).contains(&tau_vis) || tau_occ > tau_vis {
        return Err(Error::invalid(
            "tau",
            format!(
                "need 0 <= tau_occ <= tau_vis <= 1, got tau_occ={} tau_vis={}",
                tau_occ, tau_vis
            ),
        ));
    }

    let mut inter = [0u64; 3];
    let mut union = [0u64; 3];
    let mut gt_pos = 0u64;
    let mut gt_vis = 0u64;
    let mut gt_occ = 0u64;
    for ((&p, &g), &v) in pred.data().iter().zip(gt.data()).zip(vis.data()) {
        let p = p as f64 >= thresh;
        let g = g != 0.0;
        let v = v as f64;
        let regions = [true, v >= tau_vis, v < tau_occ];
        for (i, &in_region) in regions.iter().enumerate() {
            if in_region {
                inter[i] += (p && g) as u64;
                union[i] += (p || g) as u64;
            }
        }
        if g {
            gt_pos += 1;
            gt_vis += (v >= tau_vis) as u64;
            gt_occ += (v < tau_occ) as u64;
        }
    }
    let ratio = |i: usize| {
        if union[i] == 0 {
            None
        } else {
            Some(inter[i] as f64 / union[i] as f64)
        }
    };
    let rate = |part: u64| {
        if gt_pos == 0 {
            0.0
        } else {
            100.0 * part as f64 / gt_pos as f64
        }
    };
    Ok(VisReport {
        iou: ratio(0),
        iou_vis: ratio(1),
        iou_occ: ratio(2),
        visible_rate: rate(gt_vis),
        occluded_rate: rate(gt_occ),
    })
}

/// Soft segmentation loss: Dice plus binary cross-entropy, weighted by
/// `beta_dice` and `beta_bce`. Predictions must lie in [0, 1]; ground
/// truth must be binary.
pub fn seg_loss(pred: &Tensor, gt: &Tensor, beta_dice: f64, beta_bce: f64) -> Result<f64> {
    check_pair(pred, gt)?;
    check_binary(gt)?;
    if !(beta_dice.is_finite() && beta_bce.is_finite()) {
        return Err(Error::invalid("beta", "loss weights must be finite"));
    }
    for &p in pred.data() {
        if !(0.0..=1.0).contains(&(p as f64)) {
            return Err(Error::invalid(
                "pred",
                format!("probabilities must lie in [0, 1], got {}", p),
            ));
        }
    }

    const SMOOTH: f64 = 1.0;
    const P_EPS: f64 = 1e-7;
    let mut inter = 0.0f64;
    let mut total = 0.0f64;
    let mut bce = 0.0f64;
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let p = p as f64;
        let g = g as f64;
        inter += p * g;
        total += p + g;
        let pc = p.clamp(P_EPS, 1.0 - P_EPS);
        bce -= g * pc.ln() + (1.0 - g) * (1.0 - pc).ln();
    }
    let dice = 1.0 - (2.0 * inter + SMOOTH) / (total + SMOOTH);
    let bce = bce / pred.len() as f64;
    Ok(beta_dice * dice + beta_bce * bce)
}

fn check_pair(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::shape(
            "metric operands",
            format!("{:?}", a.dims()),
            format!("{:?}", b.dims()),
        ));
    }
    Ok(())
}

fn check_binary(gt: &Tensor) -> Result<()> {
    for &g in gt.data() {
        if g != 0.0 && g != 1.0 {
            return Err(Error::invalid(
                "gt",
                format!("labels must be 0 or 1, got {}", g),
            ));
        }
    }
    Ok(())
}
