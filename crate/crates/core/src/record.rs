//! SCADA data model and label-window application.
//!
//! A [`ScadaRecord`] carries the 26 continuous channels exported by the turbine
//! controller plus the `group` identifier. Timestamps are integer epoch seconds;
//! text formats are handled by the IO crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Epoch seconds.
pub type Timestamp = i64;

macro_rules! channels {
    ($($variant:ident => $field:ident, $name:literal;)*) => {
        /// One continuous SCADA channel.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum Channel {
            $(#[serde(rename = $name)] $variant,)*
        }

        impl Channel {
            /// All continuous channels in canonical export order.
            pub const ALL: [Channel; 26] = [$(Channel::$variant,)*];

            /// Column name as it appears in the CSV header.
            pub const fn name(self) -> &'static str {
                match self {
                    $(Channel::$variant => $name,)*
                }
            }

            pub fn from_name(name: &str) -> Option<Channel> {
                match name {
                    $($name => Some(Channel::$variant),)*
                    _ => None,
                }
            }
        }

        /// One timestamped SCADA observation.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct ScadaRecord {
            pub time: Timestamp,
            $(pub $field: f64,)*
            pub group: i64,
        }

        impl ScadaRecord {
            /// A record at `time` with every channel set to `value` and group 0.
            pub fn filled(time: Timestamp, value: f64) -> Self {
                ScadaRecord { time, $($field: value,)* group: 0 }
            }

            pub fn channel(&self, channel: Channel) -> f64 {
                match channel {
                    $(Channel::$variant => self.$field,)*
                }
            }

            pub fn channel_mut(&mut self, channel: Channel) -> &mut f64 {
                match channel {
                    $(Channel::$variant => &mut self.$field,)*
                }
            }
        }
    };
}

channels! {
    WindSpeed => wind_speed, "wind_speed";
    GeneratorSpeed => generator_speed, "generator_speed";
    Power => power, "power";
    WindDirection => wind_direction, "wind_direction";
    WindDirectionMean => wind_direction_mean, "wind_direction_mean";
    YawPosition => yaw_position, "yaw_position";
    YawSpeed => yaw_speed, "yaw_speed";
    Pitch1Angle => pitch1_angle, "pitch1_angle";
    Pitch2Angle => pitch2_angle, "pitch2_angle";
    Pitch3Angle => pitch3_angle, "pitch3_angle";
    Pitch1Speed => pitch1_speed, "pitch1_speed";
    Pitch2Speed => pitch2_speed, "pitch2_speed";
    Pitch3Speed => pitch3_speed, "pitch3_speed";
    Pitch1MotoTmp => pitch1_moto_tmp, "pitch1_moto_tmp";
    Pitch2MotoTmp => pitch2_moto_tmp, "pitch2_moto_tmp";
    Pitch3MotoTmp => pitch3_moto_tmp, "pitch3_moto_tmp";
    AccX => acc_x, "acc_x";
    AccY => acc_y, "acc_y";
    EnvironmentTmp => environment_tmp, "environment_tmp";
    IntTmp => int_tmp, "int_tmp";
    Pitch1Ng5Tmp => pitch1_ng5_tmp, "pitch1_ng5_tmp";
    Pitch2Ng5Tmp => pitch2_ng5_tmp, "pitch2_ng5_tmp";
    Pitch3Ng5Tmp => pitch3_ng5_tmp, "pitch3_ng5_tmp";
    Pitch1Ng5Dc => pitch1_ng5_dc, "pitch1_ng5_DC";
    Pitch2Ng5Dc => pitch2_ng5_dc, "pitch2_ng5_DC";
    Pitch3Ng5Dc => pitch3_ng5_dc, "pitch3_ng5_DC";
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Name of the timestamp column.
pub const TIME_COLUMN: &str = "time";
/// Name of the group identifier column.
pub const GROUP_COLUMN: &str = "group";

/// All 28 column names of a SCADA export, in canonical order.
pub fn column_names() -> impl Iterator<Item = &'static str> {
    core::iter::once(TIME_COLUMN)
        .chain(Channel::ALL.iter().map(|c| c.name()))
        .chain(core::iter::once(GROUP_COLUMN))
}

impl ScadaRecord {
    pub fn is_finite(&self) -> bool {
        Channel::ALL.iter().all(|&c| self.channel(c).is_finite())
    }
}

/// Per-record class after window labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Abnormal,
    Invalid,
}

/// Binary class used by features, learners and scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Normal,
    Abnormal,
}

impl Class {
    /// 0 for normal, 1 for abnormal.
    pub const fn as_index(self) -> usize {
        match self {
            Class::Normal => 0,
            Class::Abnormal => 1,
        }
    }

    pub const fn from_index(index: usize) -> Class {
        if index == 0 {
            Class::Normal
        } else {
            Class::Abnormal
        }
    }
}

impl From<Class> for Label {
    fn from(class: Class) -> Label {
        match class {
            Class::Normal => Label::Normal,
            Class::Abnormal => Label::Abnormal,
        }
    }
}

impl Label {
    pub fn class(self) -> Option<Class> {
        match self {
            Label::Normal => Some(Class::Normal),
            Label::Abnormal => Some(Class::Abnormal),
            Label::Invalid => None,
        }
    }
}

/// Class of a supplied label window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowClass {
    Icing,
    Normal,
}

impl WindowClass {
    pub const fn label(self) -> Label {
        match self {
            WindowClass::Icing => Label::Abnormal,
            WindowClass::Normal => Label::Normal,
        }
    }
}

/// Half-open interval `[start, end)` of known icing or no-icing operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelWindow {
    pub start: Timestamp,
    pub end: Timestamp,
    pub class: WindowClass,
}

impl LabelWindow {
    pub fn new(start: Timestamp, end: Timestamp, class: WindowClass) -> Result<Self, RecordError> {
        if start >= end {
            return Err(RecordError::EmptyWindow { start, end });
        }
        Ok(LabelWindow { start, end, class })
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    fn overlaps(&self, other: &LabelWindow) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub record: ScadaRecord,
    pub label: Label,
}

/// Records of one turbine with their labels, ascending in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct LabeledDataset {
    turbine_id: String,
    records: Vec<LabeledRecord>,
}

#[derive(Deserialize)]
struct RawDataset {
    turbine_id: String,
    records: Vec<LabeledRecord>,
}

impl TryFrom<RawDataset> for LabeledDataset {
    type Error = RecordError;

    fn try_from(raw: RawDataset) -> Result<Self, Self::Error> {
        LabeledDataset::new(raw.turbine_id, raw.records)
    }
}

impl LabeledDataset {
    /// Fails with [`RecordError::Unsorted`] if times decrease anywhere.
    pub fn new(
        turbine_id: impl Into<String>,
        records: Vec<LabeledRecord>,
    ) -> Result<Self, RecordError> {
        if let Some(row) = records
            .windows(2)
            .position(|pair| pair[1].record.time < pair[0].record.time)
        {
            return Err(RecordError::Unsorted { row: row + 1 });
        }
        Ok(LabeledDataset {
            turbine_id: turbine_id.into(),
            records,
        })
    }

    pub fn empty(turbine_id: impl Into<String>) -> Self {
        LabeledDataset {
            turbine_id: turbine_id.into(),
            records: Vec::new(),
        }
    }

    pub fn turbine_id(&self) -> &str {
        &self.turbine_id
    }

    pub fn records(&self) -> &[LabeledRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<LabeledRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Keeps the turbine id and replaces the records, preserving order.
    pub(crate) fn with_records(&self, records: Vec<LabeledRecord>) -> LabeledDataset {
        LabeledDataset {
            turbine_id: self.turbine_id.clone(),
            records,
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.records.iter().map(|r| r.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub turbine_id: String,
    pub n_normal: usize,
    pub n_abnormal: usize,
    pub n_invalid: usize,
    /// `None` for an empty dataset.
    pub time_span: Option<(Timestamp, Timestamp)>,
}

impl DatasetSummary {
    pub fn total(&self) -> usize {
        self.n_normal + self.n_abnormal + self.n_invalid
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("label windows {0} and {1} overlap")]
    OverlappingWindows(usize, usize),
    #[error("label window [{start}, {end}) is empty")]
    EmptyWindow { start: Timestamp, end: Timestamp },
    #[error("record {row} is earlier than its predecessor")]
    Unsorted { row: usize },
}

/// Labels every record by window membership (`start <= t < end`).
///
/// Records outside every window are `Invalid`. The output is stably sorted by
/// time, so file order is kept for already-sorted exports.
pub fn apply_label_windows(
    turbine_id: impl Into<String>,
    records: Vec<ScadaRecord>,
    windows: &[LabelWindow],
) -> Result<LabeledDataset, RecordError> {
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by_key(|&i| (windows[i].start, windows[i].end, i));
    for pair in order.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if windows[a].overlaps(&windows[b]) {
            return Err(RecordError::OverlappingWindows(a.min(b), a.max(b)));
        }
    }
    let sorted: Vec<LabelWindow> = order.iter().map(|&i| windows[i]).collect();

    let mut records = records;
    records.sort_by_key(|r| r.time);
    let labeled = records
        .into_iter()
        .map(|record| {
            let label = window_label(&sorted, record.time);
            LabeledRecord { record, label }
        })
        .collect();
    Ok(LabeledDataset {
        turbine_id: turbine_id.into(),
        records: labeled,
    })
}

fn window_label(sorted: &[LabelWindow], t: Timestamp) -> Label {
    // last window starting at or before t; non-overlap makes it the only candidate
    let idx = sorted.partition_point(|w| w.start <= t);
    match idx.checked_sub(1).map(|i| &sorted[i]) {
        Some(w) if w.contains(t) => w.class.label(),
        _ => Label::Invalid,
    }
}

pub fn summarize(dataset: &LabeledDataset) -> DatasetSummary {
    let mut summary = DatasetSummary {
        turbine_id: dataset.turbine_id.clone(),
        n_normal: 0,
        n_abnormal: 0,
        n_invalid: 0,
        time_span: None,
    };
    for r in &dataset.records {
        match r.label {
            Label::Normal => summary.n_normal += 1,
            Label::Abnormal => summary.n_abnormal += 1,
            Label::Invalid => summary.n_invalid += 1,
        }
    }
    if let (Some(first), Some(last)) = (dataset.records.first(), dataset.records.last()) {
        summary.time_span = Some((first.record.time, last.record.time));
    }
    summary
}
