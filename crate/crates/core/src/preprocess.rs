//! Invalid-sample removal, trailing moving-average denoising and class
//! balancing.
//!
//! Balancing is a pure function of `(input, seed)`: the generator lives only
//! inside the call.

use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{Channel, Class, Label, LabeledDataset, LabeledRecord};
use crate::rng::seeded;

pub const DEFAULT_MA_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PreprocessError {
    #[error("moving-average window must be at least 1")]
    ZeroWindow,
    #[error("window {window} is larger than the series length {len}")]
    WindowLargerThanSeries { window: usize, len: usize },
    #[error("no {0:?} records to balance")]
    EmptyClass(Class),
    #[error("invalid records must be dropped before balancing")]
    InvalidPresent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    pub window: usize,
    pub channels: Vec<Channel>,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            window: DEFAULT_MA_WINDOW,
            channels: Channel::ALL.to_vec(),
        }
    }
}

impl DenoiseConfig {
    pub fn with_window(window: usize) -> Self {
        DenoiseConfig {
            window,
            ..DenoiseConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceMethod {
    Under,
    Over,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceConfig {
    pub method: BalanceMethod,
    pub seed: u64,
}

/// Anything carrying a record-level label.
pub trait Labelled {
    fn label(&self) -> Label;
}

impl Labelled for LabeledRecord {
    fn label(&self) -> Label {
        self.label
    }
}

pub fn drop_invalid(dataset: &LabeledDataset) -> LabeledDataset {
    let kept = dataset
        .records()
        .iter()
        .filter(|r| r.label != Label::Invalid)
        .cloned()
        .collect();
    dataset.with_records(kept)
}

/// Trailing moving average: `out[i] = mean(series[i..i + window])`.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>, PreprocessError> {
    if window == 0 {
        return Err(PreprocessError::ZeroWindow);
    }
    if window > series.len() {
        return Err(PreprocessError::WindowLargerThanSeries {
            window,
            len: series.len(),
        });
    }
    Ok(series.windows(window).map(window_mean).collect())
}

/// Mean taken relative to the first element and clamped to the window range,
/// so constant windows reproduce their value exactly.
pub(crate) fn window_mean(values: &[f64]) -> f64 {
    let anchor = values[0];
    let (mut lo, mut hi, mut acc) = (anchor, anchor, 0.0);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        acc += v - anchor;
    }
    (anchor + acc / values.len() as f64).clamp(lo, hi)
}

/// Denoising output plus the number of smoothing windows that mixed labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub dataset: LabeledDataset,
    pub mixed_label_windows: usize,
}

/// Replaces each configured channel by its trailing moving average.
///
/// The first `window - 1` records are dropped; each surviving record keeps the
/// time and label of the newest raw record in its window.
pub fn denoise_dataset(
    dataset: &LabeledDataset,
    cfg: &DenoiseConfig,
) -> Result<LabeledDataset, PreprocessError> {
    denoise_with_diagnostics(dataset, cfg).map(|d| d.dataset)
}

pub fn denoise_with_diagnostics(
    dataset: &LabeledDataset,
    cfg: &DenoiseConfig,
) -> Result<Denoised, PreprocessError> {
    let w = cfg.window;
    if w == 0 {
        return Err(PreprocessError::ZeroWindow);
    }
    let raw = dataset.records();
    if w > raw.len() {
        return Err(PreprocessError::WindowLargerThanSeries {
            window: w,
            len: raw.len(),
        });
    }

    let mut out: Vec<LabeledRecord> = raw[w - 1..].to_vec();
    let mut column = Vec::with_capacity(raw.len());
    for &channel in &cfg.channels {
        column.clear();
        column.extend(raw.iter().map(|r| r.record.channel(channel)));
        let smoothed = moving_average(&column, w)?;
        for (rec, value) in out.iter_mut().zip(smoothed) {
            *rec.record.channel_mut(channel) = value;
        }
    }

    let mixed_label_windows = raw
        .windows(w)
        .filter(|win| win.iter().any(|r| r.label != win[w - 1].label))
        .count();
    Ok(Denoised {
        dataset: dataset.with_records(out),
        mixed_label_windows,
    })
}

fn split_by_class<T: Labelled>(items: &[T]) -> Result<(Vec<usize>, Vec<usize>), PreprocessError> {
    let mut normal = Vec::new();
    let mut abnormal = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match item.label() {
            Label::Normal => normal.push(i),
            Label::Abnormal => abnormal.push(i),
            Label::Invalid => return Err(PreprocessError::InvalidPresent),
        }
    }
    if normal.is_empty() {
        return Err(PreprocessError::EmptyClass(Class::Normal));
    }
    if abnormal.is_empty() {
        return Err(PreprocessError::EmptyClass(Class::Abnormal));
    }
    Ok((normal, abnormal))
}

/// Keeps every minority-class item and a seeded uniform sample (without
/// replacement) of the majority class of the same size, then shuffles.
pub fn under_sample<T: Labelled + Clone>(
    items: &[T],
    seed: u64,
) -> Result<Vec<T>, PreprocessError> {
    let (normal, abnormal) = split_by_class(items)?;
    let (minority, majority) = if abnormal.len() <= normal.len() {
        (abnormal, normal)
    } else {
        (normal, abnormal)
    };
    let mut rng = seeded(seed);
    let mut picked: Vec<usize> = minority.clone();
    picked.extend(
        index::sample(&mut rng, majority.len(), minority.len())
            .into_iter()
            .map(|i| majority[i]),
    );
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| items[i].clone()).collect())
}

/// Keeps everything and tops the minority class up by sampling with
/// replacement, then shuffles.
pub fn over_sample<T: Labelled + Clone>(items: &[T], seed: u64) -> Result<Vec<T>, PreprocessError> {
    let (normal, abnormal) = split_by_class(items)?;
    let (minority, majority) = if abnormal.len() <= normal.len() {
        (abnormal, normal)
    } else {
        (normal, abnormal)
    };
    let mut rng = seeded(seed);
    let mut picked: Vec<usize> = (0..items.len()).collect();
    let deficit = majority.len() - minority.len();
    picked.extend((0..deficit).map(|_| minority[rng.random_range(0..minority.len())]));
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| items[i].clone()).collect())
}

/// Applies `method` to a labelled sequence; `None` returns the input as is.
pub fn balance<T: Labelled + Clone>(
    items: &[T],
    method: BalanceMethod,
    seed: u64,
) -> Result<Vec<T>, PreprocessError> {
    match method {
        BalanceMethod::Under => under_sample(items, seed),
        BalanceMethod::Over => over_sample(items, seed),
        BalanceMethod::None => Ok(items.to_vec()),
    }
}

pub fn under_sample_dataset(
    dataset: &LabeledDataset,
    seed: u64,
) -> Result<LabeledDataset, PreprocessError> {
    under_sample(dataset.records(), seed).map(|r| dataset.with_records(r))
}

pub fn over_sample_dataset(
    dataset: &LabeledDataset,
    seed: u64,
) -> Result<LabeledDataset, PreprocessError> {
    over_sample(dataset.records(), seed).map(|r| dataset.with_records(r))
}
