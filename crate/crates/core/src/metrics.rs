//! Embedding-space similarity and percentile thresholds.
//!
//! Inputs may be `f32` (store precision) or `f64`; all arithmetic is `f64`.

use crate::error::{Error, Result};

/// Norms below this are treated as zero and yield a cosine of 0.
pub const ZERO_NORM: f64 = 1e-12;

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

pub fn cosine<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<f64> {
    check_dims(u.len(), v.len())?;
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b): (f64, f64) = (a.into(), b.into());
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    let (nu, nv) = (nu.sqrt(), nv.sqrt());
    if nu < ZERO_NORM || nv < ZERO_NORM {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn difference<T: Copy + Into<f64>>(to: &[T], from: &[T]) -> Result<Vec<f64>> {
    check_dims(from.len(), to.len())?;
    Ok(to
        .iter()
        .zip(from)
        .map(|(&a, &b)| a.into() - b.into())
        .collect())
}

/// Directional similarity: cosine between the image shift `v_out - v_in` and
/// the prompt shift `t_tgt - t_src`. Zero when the output equals the input.
pub fn clip_directional<T: Copy + Into<f64>>(v_in: &[T], v_out: &[T], t_src: &[T], t_tgt: &[T]) -> Result<f64> {
    let image_shift = difference(v_out, v_in)?;
    let text_shift = difference(t_tgt, t_src)?;
    cosine(&image_shift, &text_shift)
}

/// Cosine of two CLIP visual embeddings.
pub fn clip_image_sim<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<f64> {
    cosine(a, b)
}

/// Cosine of two DINO visual embeddings.
pub fn dino_image_sim<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> Result<f64> {
    cosine(a, b)
}

/// Lower nearest-rank percentile: the element at sorted index
/// `ceil(p/100 * n) - 1`, clamped to the valid range.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile of an empty list".into()));
    }
    if !(p > 0.0 && p < 100.0) {
        return Err(Error::Range {
            value: p,
            lo: 0.0,
            hi: 100.0,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("percentile input contains a non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (p / 100.0 * n as f64).ceil() as usize;
    let idx = rank.saturating_sub(1).min(n - 1);
    Ok(sorted[idx])
}
