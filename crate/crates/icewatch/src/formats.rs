//! CSV and JSON file formats.
//!
//! * SCADA CSV: a header with the 28 export columns in any order; extra
//!   columns are ignored.
//! * Label windows: `start,end,class` with class `icing` or `normal`.
//! * Labeled dataset: a SCADA CSV with an extra `label` column.
//! * Stream labels: `time,label,confidence_flag`.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces every value bit for bit.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use icewatch_core::features::{FeatureId, FeatureVector};
use icewatch_core::pipeline::StreamLabel;
use icewatch_core::record::{
    column_names, Channel, Label, LabelWindow, LabeledDataset, LabeledRecord, RecordError,
    ScadaRecord, WindowClass, GROUP_COLUMN, TIME_COLUMN,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::timestamp::TimeFormat;

pub const LABEL_COLUMN: &str = "label";

/// Rows are numbered from 1, not counting the header.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: `{column}` is not a finite number")]
    NonNumericCell { row: usize, column: String },
    #[error("row {row}: unparseable timestamp")]
    UnparseableTimestamp { row: usize },
    #[error("row {row}: unknown {what} `{value}`")]
    UnknownValue {
        row: usize,
        what: &'static str,
        value: String,
    },
    #[error("file has no data rows")]
    EmptyFile,
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_error(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>, DataError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_error(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, DataError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source)
}

struct Columns {
    time: usize,
    group: usize,
    channels: Vec<(Channel, usize)>,
    extra: Option<usize>,
}

impl Columns {
    fn locate(headers: &csv::StringRecord, extra: Option<&str>) -> Result<Columns, DataError> {
        let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
        let find = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))
        };
        // report the first missing name in canonical order
        for name in column_names().map(|n| -> &str { n }).chain(extra) {
            find(name)?;
        }
        Ok(Columns {
            time: find(TIME_COLUMN)?,
            group: find(GROUP_COLUMN)?,
            channels: Channel::ALL
                .iter()
                .map(|&c| Ok((c, find(c.name())?)))
                .collect::<Result<_, DataError>>()?,
            extra: extra.map(find).transpose()?,
        })
    }
}

fn parse_group(cell: &str) -> Option<i64> {
    cell.parse::<i64>().ok().or_else(|| {
        let v: f64 = cell.parse().ok()?;
        (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
    })
}

/// Parses SCADA rows, optionally returning one extra column per row.
fn parse_rows<R: Read>(
    source: R,
    extra: Option<&str>,
) -> Result<Vec<(ScadaRecord, Option<String>)>, DataError> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let cols = Columns::locate(&headers, extra)?;
    let mut format = None;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let n = i + 1;
        let time_cell = &row[cols.time];
        let fmt = *format.get_or_insert(
            TimeFormat::detect(time_cell).ok_or(DataError::UnparseableTimestamp { row: n })?,
        );
        let time = fmt
            .parse(time_cell)
            .ok_or(DataError::UnparseableTimestamp { row: n })?;
        let mut record = ScadaRecord::filled(time, 0.0);
        for &(channel, at) in &cols.channels {
            let value: f64 = row[at]
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| DataError::NonNumericCell {
                    row: n,
                    column: channel.name().to_string(),
                })?;
            *record.channel_mut(channel) = value;
        }
        record.group = parse_group(&row[cols.group]).ok_or_else(|| DataError::NonNumericCell {
            row: n,
            column: GROUP_COLUMN.to_string(),
        })?;
        out.push((record, cols.extra.map(|at| row[at].to_string())));
    }
    if out.is_empty() {
        return Err(DataError::EmptyFile);
    }
    Ok(out)
}

pub fn parse_scada_csv<R: Read>(source: R) -> Result<Vec<ScadaRecord>, DataError> {
    Ok(parse_rows(source, None)?
        .into_iter()
        .map(|(r, _)| r)
        .collect())
}

fn record_cells(r: &ScadaRecord) -> impl Iterator<Item = String> + '_ {
    std::iter::once(r.time.to_string())
        .chain(Channel::ALL.iter().map(|&c| r.channel(c).to_string()))
        .chain(std::iter::once(r.group.to_string()))
}

/// Canonical column order, epoch-second timestamps.
pub fn write_scada_csv<W: Write>(sink: W, records: &[ScadaRecord]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(column_names())?;
    for r in records {
        w.write_record(record_cells(r))?;
    }
    w.flush().map_err(|e| io_error(Path::new("<csv>"), e))?;
    Ok(())
}

fn window_class_name(c: WindowClass) -> &'static str {
    match c {
        WindowClass::Icing => "icing",
        WindowClass::Normal => "normal",
    }
}

pub fn parse_windows_csv<R: Read>(source: R) -> Result<Vec<LabelWindow>, DataError> {
    let mut rdr = reader(source);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let (s, e, c) = (find("start")?, find("end")?, find("class")?);
    let mut format = None;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let n = i + 1;
        let fmt = *format.get_or_insert(
            TimeFormat::detect(&row[s]).ok_or(DataError::UnparseableTimestamp { row: n })?,
        );
        let start = fmt
            .parse(&row[s])
            .ok_or(DataError::UnparseableTimestamp { row: n })?;
        let end = fmt
            .parse(&row[e])
            .ok_or(DataError::UnparseableTimestamp { row: n })?;
        let class = match row[c].to_ascii_lowercase().as_str() {
            "icing" => WindowClass::Icing,
            "normal" => WindowClass::Normal,
            other => {
                return Err(DataError::UnknownValue {
                    row: n,
                    what: "window class",
                    value: other.to_string(),
                })
            }
        };
        out.push(LabelWindow::new(start, end, class)?);
    }
    Ok(out)
}

pub fn write_windows_csv<W: Write>(sink: W, windows: &[LabelWindow]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["start", "end", "class"])?;
    for win in windows {
        w.write_record([
            win.start.to_string(),
            win.end.to_string(),
            window_class_name(win.class).to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_error(Path::new("<csv>"), e))?;
    Ok(())
}

pub fn label_name(l: Label) -> &'static str {
    match l {
        Label::Normal => "normal",
        Label::Abnormal => "abnormal",
        Label::Invalid => "invalid",
    }
}

fn parse_label(cell: &str) -> Option<Label> {
    match cell.to_ascii_lowercase().as_str() {
        "normal" => Some(Label::Normal),
        "abnormal" => Some(Label::Abnormal),
        "invalid" => Some(Label::Invalid),
        _ => None,
    }
}

pub fn read_dataset_csv<R: Read>(source: R, turbine_id: &str) -> Result<LabeledDataset, DataError> {
    let rows = parse_rows(source, Some(LABEL_COLUMN))?;
    let mut records = Vec::with_capacity(rows.len());
    for (i, (record, cell)) in rows.into_iter().enumerate() {
        let cell = cell.unwrap_or_default();
        let label = parse_label(&cell).ok_or(DataError::UnknownValue {
            row: i + 1,
            what: "label",
            value: cell,
        })?;
        records.push(LabeledRecord { record, label });
    }
    Ok(LabeledDataset::new(turbine_id, records)?)
}

pub fn write_dataset_csv<W: Write>(sink: W, dataset: &LabeledDataset) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(column_names().chain([LABEL_COLUMN]))?;
    for r in dataset.records() {
        w.write_record(record_cells(&r.record).chain([label_name(r.label).to_string()]))?;
    }
    w.flush().map_err(|e| io_error(Path::new("<csv>"), e))?;
    Ok(())
}

/// Turbine id for a dataset file: its stem.
pub fn dataset_id(path: &Path) -> String {
    path.file_stem().map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset, DataError> {
    read_dataset_csv(open(path)?, &dataset_id(path))
}

/// `confidence_flag` is `low` for partial smoothing windows, `ok` otherwise.
pub fn write_labels_csv<W: Write>(sink: W, labels: &[StreamLabel]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["time", "label", "confidence_flag"])?;
    for l in labels {
        w.write_record([
            l.time.to_string(),
            label_name(l.label.into()).to_string(),
            if l.low_confidence { "low" } else { "ok" }.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_error(Path::new("<csv>"), e))?;
    Ok(())
}

pub fn write_features_csv<W: Write>(sink: W, vectors: &[FeatureVector]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(FeatureId::ALL.iter().map(|f| f.name()).chain(["y"]))?;
    for v in vectors {
        w.write_record(
            v.x.iter()
                .map(|x| x.to_string())
                .chain([label_name(v.y.into()).to_string()]),
        )?;
    }
    w.flush().map_err(|e| io_error(Path::new("<csv>"), e))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DataError> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, DataError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut f = create(path)?;
    f.write_all(to_json_string(value)?.as_bytes())
        .map_err(|e| io_error(path, e))?;
    f.flush().map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        column_names().collect::<Vec<_>>().join(",")
    }

    fn row(time: &str, fill: &str) -> String {
        std::iter::once(time.to_string())
            .chain(Channel::ALL.iter().map(|_| fill.to_string()))
            .chain(std::iter::once("1".to_string()))
            .collect::<Vec<_>>()
            .join(",")
    }

    #[test]
    fn two_rows() {
        let text = format!(
            "{}\n{}\n{}\n",
            header(),
            row("100", "0.5"),
            row("107", "-1.25")
        );
        let recs = parse_scada_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].time, 107);
        assert_eq!(recs[1].power, -1.25);
        assert_eq!(recs[0].group, 1);
    }

    #[test]
    fn shuffled_header_order() {
        let mut names: Vec<&str> = column_names().collect();
        names.reverse();
        let cells: Vec<String> = names
            .iter()
            .map(|n| match *n {
                "time" => "2015-11-01T00:00:00Z".to_string(),
                "group" => "4".to_string(),
                "power" => "3.5".to_string(),
                _ => "0".to_string(),
            })
            .collect();
        let text = format!("{}\n{}\n", names.join(","), cells.join(","));
        let recs = parse_scada_csv(text.as_bytes()).unwrap();
        assert_eq!(recs[0].time, 1_446_336_000);
        assert_eq!(recs[0].power, 3.5);
        assert_eq!(recs[0].group, 4);
    }

    #[test]
    fn missing_wind_speed() {
        let names: Vec<&str> = column_names().filter(|n| *n != "wind_speed").collect();
        let text = format!("{}\n", names.join(","));
        match parse_scada_csv(text.as_bytes()) {
            Err(DataError::MissingColumn(name)) => assert_eq!(name, "wind_speed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_power() {
        let names: Vec<&str> = column_names().collect();
        let power = names.iter().position(|n| *n == "power").unwrap();
        let mut cells: Vec<String> = row("100", "0").split(',').map(str::to_string).collect();
        cells[power] = "abc".to_string();
        let bad = cells.join(",");
        let text = format!("{}\n{}\n", header(), bad);
        match parse_scada_csv(text.as_bytes()) {
            Err(DataError::NonNumericCell { row, column }) => {
                assert_eq!((row, column.as_str()), (1, "power"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nan_is_rejected() {
        let text = format!("{}\n{}\n", header(), row("100", "NaN"));
        assert!(matches!(
            parse_scada_csv(text.as_bytes()),
            Err(DataError::NonNumericCell { .. })
        ));
    }

    #[test]
    fn timestamp_format_fixed_by_first_row() {
        let text = format!(
            "{}\n{}\n{}\n",
            header(),
            row("100", "0"),
            row("2015-11-01T00:00:00Z", "0")
        );
        assert!(matches!(
            parse_scada_csv(text.as_bytes()),
            Err(DataError::UnparseableTimestamp { row: 2 })
        ));
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(
            parse_scada_csv("".as_bytes()),
            Err(DataError::EmptyFile)
        ));
        assert!(matches!(
            parse_scada_csv(format!("{}\n", header()).as_bytes()),
            Err(DataError::EmptyFile)
        ));
    }

    #[test]
    fn windows_round_trip() {
        let windows = vec![
            LabelWindow::new(10, 20, WindowClass::Icing).unwrap(),
            LabelWindow::new(30, 45, WindowClass::Normal).unwrap(),
        ];
        let mut buf = Vec::new();
        write_windows_csv(&mut buf, &windows).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "start,end,class\n10,20,icing\n30,45,normal\n"
        );
        assert_eq!(parse_windows_csv(buf.as_slice()).unwrap(), windows);
        let bad = "start,end,class\n10,20,frost\n";
        assert!(matches!(
            parse_windows_csv(bad.as_bytes()),
            Err(DataError::UnknownValue { .. })
        ));
        let reversed = "start,end,class\n20,10,icing\n";
        assert!(matches!(
            parse_windows_csv(reversed.as_bytes()),
            Err(DataError::Record(_))
        ));
    }

    #[test]
    fn labels_file_layout() {
        let labels = [
            StreamLabel {
                time: 5,
                label: icewatch_core::record::Class::Abnormal,
                low_confidence: true,
            },
            StreamLabel {
                time: 12,
                label: icewatch_core::record::Class::Normal,
                low_confidence: false,
            },
        ];
        let mut buf = Vec::new();
        write_labels_csv(&mut buf, &labels).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,label,confidence_flag\n5,abnormal,low\n12,normal,ok\n"
        );
    }
}
