//! Recording and epoch data model, on-disk formats, and epoch segmentation.
//!
//! Three formats are supported:
//!
//! * signal CSV: a header row of channel names, then one row per sample instant;
//! * events CSV: `start,end,label` with 0-based, end-exclusive sample indices and
//!   labels `1`/`2`, stored next to the signal file as `<stem>.events.csv`;
//! * binary: `PDCF` magic, `u32` channel count, `u32` sample count, `f64` sample
//!   rate, then `f64` samples in channel-major order, all little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// The sixteen electrode sites of the reference montage, in recording order.
pub const DEFAULT_CHANNELS: [&str; 16] = [
    "FC5", "FC1", "FC2", "FC6", "C3", "CZ", "C4", "CP5", "CP1", "CP2", "CP6", "P3", "PZ", "P4", "PO3", "PO4",
];

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 1200.0;

const BINARY_MAGIC: &[u8; 4] = b"PDCF";

/// Motor-imagery task label: right hand (`Class1`) or left hand (`Class2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    Class1,
    Class2,
}

impl ClassLabel {
    pub const BOTH: [ClassLabel; 2] = [ClassLabel::Class1, ClassLabel::Class2];

    pub fn code(self) -> u8 {
        match self {
            ClassLabel::Class1 => 1,
            ClassLabel::Class2 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(ClassLabel::Class1),
            2 => Some(ClassLabel::Class2),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            ClassLabel::Class1 => ClassLabel::Class2,
            ClassLabel::Class2 => ClassLabel::Class1,
        }
    }

    /// Signed label used by the SVM: `+1` for Class1, `-1` for Class2.
    pub fn sign(self) -> f64 {
        match self {
            ClassLabel::Class1 => 1.0,
            ClassLabel::Class2 => -1.0,
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Class{}", self.code())
    }
}

/// A labelled sample range `[start, end)` within a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialMark {
    pub start: usize,
    pub end: usize,
    pub label: Option<ClassLabel>,
}

impl TrialMark {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Multichannel recording stored as a `channels × time` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    samples: DMatrix<f64>,
    sample_rate_hz: f64,
    channel_names: Vec<String>,
    trial_marks: Vec<TrialMark>,
}

impl Recording {
    /// Builds a recording, checking the shape and range invariants.
    ///
    /// An empty `trial_marks` list is replaced by a single unlabelled trial
    /// covering the whole recording.
    pub fn new(
        samples: DMatrix<f64>,
        sample_rate_hz: f64,
        channel_names: Vec<String>,
        mut trial_marks: Vec<TrialMark>,
    ) -> Result<Self> {
        ensure!(
            sample_rate_hz > 0.0 && sample_rate_hz.is_finite(),
            "sample rate must be positive, got {sample_rate_hz}"
        );
        ensure!(
            channel_names.len() == samples.nrows(),
            "{} channel names for {} channels",
            channel_names.len(),
            samples.nrows()
        );
        let n = samples.ncols();
        if trial_marks.is_empty() {
            trial_marks.push(TrialMark {
                start: 0,
                end: n,
                label: None,
            });
        }
        for (k, m) in trial_marks.iter().enumerate() {
            ensure!(
                m.start < m.end && m.end <= n,
                "trial {k} range [{}, {}) lies outside [0, {n})",
                m.start,
                m.end
            );
        }
        Ok(Recording {
            samples,
            sample_rate_hz,
            channel_names,
            trial_marks,
        })
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn trial_marks(&self) -> &[TrialMark] {
        &self.trial_marks
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    /// Same recording with the sample matrix and rate replaced.
    pub(crate) fn with_samples(
        &self,
        samples: DMatrix<f64>,
        sample_rate_hz: f64,
        trial_marks: Vec<TrialMark>,
    ) -> Result<Self> {
        Recording::new(samples, sample_rate_hz, self.channel_names.clone(), trial_marks)
    }
}

/// One fixed-length, labelled window of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub samples: DMatrix<f64>,
    pub label: ClassLabel,
    pub source_trial: usize,
}

impl Epoch {
    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    /// Samples of one channel as a contiguous vector.
    pub fn channel(&self, m: usize) -> Vec<f64> {
        self.samples.row(m).iter().copied().collect()
    }
}

/// Epochs sharing one shape, sample rate and channel list.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub epochs: Vec<Epoch>,
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
}

impl EpochSet {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn of_class(&self, label: ClassLabel) -> impl Iterator<Item = &Epoch> {
        self.epochs.iter().filter(move |e| e.label == label)
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.of_class(label).count()
    }

    /// Fails unless both classes hold at least `min_per_class` epochs.
    pub fn require_both_classes(&self, min_per_class: usize) -> Result<()> {
        for label in ClassLabel::BOTH {
            let n = self.count(label);
            ensure!(
                n >= min_per_class,
                "{label} has {n} epochs, at least {min_per_class} required"
            );
        }
        Ok(())
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }
}

/// On-disk signal encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalFormat {
    Csv,
    Binary,
}

impl SignalFormat {
    /// Guess from the file extension: `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => SignalFormat::Csv,
            _ => SignalFormat::Binary,
        }
    }
}

impl std::str::FromStr for SignalFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(SignalFormat::Csv),
            "binary" | "bin" | "pdcf" => Ok(SignalFormat::Binary),
            other => Err(Error::Contract(format!("unknown signal format {other:?}"))),
        }
    }
}

/// Companion events file for a signal file: `dir/stem.events.csv`.
pub fn events_path_for(signal_path: &Path) -> PathBuf {
    let stem = signal_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    signal_path.with_file_name(format!("{stem}.events.csv"))
}

/// Reads a recording and, when present, its companion events file.
pub fn load_recording(path: &Path, format: SignalFormat) -> Result<Recording> {
    let (samples, rate, names) = match format {
        SignalFormat::Csv => {
            let (samples, names) = read_signal_csv(path)?;
            // CSV carries no rate; the caller rescales via `with_sample_rate`.
            (samples, DEFAULT_SAMPLE_RATE_HZ, names)
        }
        SignalFormat::Binary => read_signal_binary(path)?,
    };
    let events = events_path_for(path);
    let marks = if events.exists() {
        read_events_csv(&events)?
    } else {
        Vec::new()
    };
    Recording::new(samples, rate, names, marks)
}

impl Recording {
    /// Copy of the recording with a different nominal sample rate.
    pub fn with_sample_rate(&self, sample_rate_hz: f64) -> Result<Self> {
        Recording::new(
            self.samples.clone(),
            sample_rate_hz,
            self.channel_names.clone(),
            self.trial_marks.clone(),
        )
    }
}

/// Writes the signal file and, if any trial is labelled, its events file.
pub fn save_recording(rec: &Recording, path: &Path, format: SignalFormat) -> Result<()> {
    match format {
        SignalFormat::Csv => write_signal_csv(rec, path)?,
        SignalFormat::Binary => write_signal_binary(rec, path)?,
    }
    if rec.trial_marks.iter().any(|m| m.label.is_some()) {
        write_events_csv(&rec.trial_marks, &events_path_for(path))?;
    }
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        csv::ErrorKind::Utf8 { err, .. } => Error::Format {
            line,
            message: format!("invalid UTF-8: {err}"),
        },
        other => Error::Format {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        column,
        value: cell.to_string(),
    })
}

fn read_signal_csv(path: &Path) -> Result<(DMatrix<f64>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(BufReader::new(open(path)?));
    let mut records = reader.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => {
            return Err(Error::Format {
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    if names.iter().any(|n| n.is_empty()) {
        return Err(Error::Format {
            line: 1,
            message: "empty channel name in header".into(),
        });
    }
    if names.iter().any(|n| n.parse::<f64>().is_ok()) {
        return Err(Error::Format {
            line: 1,
            message: "header row is numeric; expected channel names".into(),
        });
    }
    let n_ch = names.len();

    // Column-wise buffers, assembled into channels × time at the end.
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_ch];
    for (k, record) in records.enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != n_ch {
            return Err(Error::Format {
                line,
                message: format!("expected {n_ch} columns, found {}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            columns[c].push(parse_cell(cell, line, c + 1)?);
        }
    }
    let n = columns.first().map_or(0, Vec::len);
    let samples = DMatrix::from_fn(n_ch, n, |c, t| columns[c][t]);
    Ok((samples, names))
}

fn write_signal_csv(rec: &Recording, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", rec.channel_names.join(",")).map_err(io)?;
    let mut line = String::new();
    for t in 0..rec.n_samples() {
        line.clear();
        for c in 0..rec.n_channels() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format_value(rec.samples[(c, t)]));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_events_csv(path: &Path) -> Result<Vec<TrialMark>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(BufReader::new(open(path)?));
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => {
            return Err(Error::Format {
                line: 1,
                message: "events file is empty".into(),
            })
        }
    };
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols != ["start", "end", "label"] {
        return Err(Error::Format {
            line: 1,
            message: format!("events header must be start,end,label, found {cols:?}"),
        });
    }
    let mut marks = Vec::new();
    for (k, record) in records.enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != 3 {
            return Err(Error::Format {
                line,
                message: format!("expected 3 columns, found {}", record.len()),
            });
        }
        let index = |c: usize| -> Result<usize> {
            record[c].trim().parse::<usize>().map_err(|_| Error::Parse {
                row: line,
                column: c + 1,
                value: record[c].to_string(),
            })
        };
        let start = index(0)?;
        let end = index(1)?;
        let code = index(2)?;
        let label = u8::try_from(code)
            .ok()
            .and_then(ClassLabel::from_code)
            .ok_or_else(|| Error::Format {
                line,
                message: format!("label must be 1 or 2, found {code}"),
            })?;
        marks.push(TrialMark {
            start,
            end,
            label: Some(label),
        });
    }
    Ok(marks)
}

fn write_events_csv(marks: &[TrialMark], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    let io = |e| Error::io(path, e);
    writeln!(w, "start,end,label").map_err(io)?;
    for m in marks {
        if let Some(label) = m.label {
            writeln!(w, "{},{},{}", m.start, m.end, label.code()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

fn read_signal_binary(path: &Path) -> Result<(DMatrix<f64>, f64, Vec<String>)> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let format_err = |message: String| Error::Format { line: 0, message };
    if bytes.len() < 20 || &bytes[..4] != BINARY_MAGIC {
        return Err(format_err("missing PDCF magic or truncated header".into()));
    }
    let n_ch = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let rate = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let expected = 20 + 8 * n_ch * n;
    if bytes.len() != expected {
        return Err(format_err(format!(
            "payload holds {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let body = &bytes[20..];
    let value = |c: usize, t: usize| {
        let at = 8 * (c * n + t);
        f64::from_le_bytes(body[at..at + 8].try_into().unwrap())
    };
    let samples = DMatrix::from_fn(n_ch, n, value);
    let names = (1..=n_ch).map(|c| format!("ch{c}")).collect();
    Ok((samples, rate, names))
}

fn write_signal_binary(rec: &Recording, path: &Path) -> Result<()> {
    let n_ch =
        u32::try_from(rec.n_channels()).map_err(|_| Error::Contract("too many channels for u32 header".into()))?;
    let n = u32::try_from(rec.n_samples()).map_err(|_| Error::Contract("too many samples for u32 header".into()))?;
    let mut w = BufWriter::new(create(path)?);
    let io = |e| Error::io(path, e);
    w.write_all(BINARY_MAGIC).map_err(io)?;
    w.write_all(&n_ch.to_le_bytes()).map_err(io)?;
    w.write_all(&n.to_le_bytes()).map_err(io)?;
    w.write_all(&rec.sample_rate_hz.to_le_bytes()).map_err(io)?;
    for c in 0..rec.n_channels() {
        for t in 0..rec.n_samples() {
            w.write_all(&rec.samples[(c, t)].to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:?}")
}

/// Cuts every labelled trial into non-overlapping epochs of
/// `round(epoch_seconds × sample_rate)` samples, dropping the trailing remainder.
pub fn segment_epochs(rec: &Recording, epoch_seconds: f64) -> Result<EpochSet> {
    ensure!(
        epoch_seconds > 0.0 && epoch_seconds.is_finite(),
        "epoch length must be positive, got {epoch_seconds} s"
    );
    let epoch_len = (epoch_seconds * rec.sample_rate_hz).round() as usize;
    ensure!(epoch_len >= 1, "epoch of {epoch_seconds} s is shorter than one sample");

    let mut epochs = Vec::new();
    for (k, mark) in rec.trial_marks.iter().enumerate() {
        let label = mark
            .label
            .ok_or_else(|| Error::Contract(format!("trial {k} carries no class label")))?;
        if mark.len() < epoch_len {
            return Err(Error::Epoching {
                trial: k,
                length: mark.len(),
                epoch_length: epoch_len,
            });
        }
        for e in 0..mark.len() / epoch_len {
            let start = mark.start + e * epoch_len;
            epochs.push(Epoch {
                samples: rec.samples.columns(start, epoch_len).into_owned(),
                label,
                source_trial: k,
            });
        }
    }
    Ok(EpochSet {
        epochs,
        sample_rate_hz: rec.sample_rate_hz,
        channel_names: rec.channel_names.clone(),
    })
}

/// A labelled matrix as read back from [`save_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub values: DMatrix<f64>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

/// Writes `matrix` as CSV with a header of column labels and a leading label
/// column; values use the shortest exact decimal representation.
pub fn save_matrix(path: &Path, matrix: &DMatrix<f64>, row_labels: &[String], col_labels: &[String]) -> Result<()> {
    ensure!(
        row_labels.len() == matrix.nrows() && col_labels.len() == matrix.ncols(),
        "labels ({} rows, {} cols) do not match a {}x{} matrix",
        row_labels.len(),
        col_labels.len(),
        matrix.nrows(),
        matrix.ncols()
    );
    let mut w = BufWriter::new(create(path)?);
    let io = |e| Error::io(path, e);
    writeln!(w, ",{}", col_labels.join(",")).map_err(io)?;
    for (r, label) in row_labels.iter().enumerate() {
        let row: Vec<String> = matrix.row(r).iter().map(|&v| format_value(v)).collect();
        writeln!(w, "{label},{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_matrix(path: &Path) -> Result<LabeledMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(BufReader::new(open(path)?));
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => {
            return Err(Error::Format {
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut row_labels = Vec::new();
    let mut data = Vec::new();
    for (k, record) in rows.enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != col_labels.len() + 1 {
            return Err(Error::Format {
                line,
                message: format!("expected {} columns, found {}", col_labels.len() + 1, record.len()),
            });
        }
        row_labels.push(record[0].to_string());
        for c in 1..record.len() {
            data.push(parse_cell(&record[c], line, c + 1)?);
        }
    }
    let values = DMatrix::from_row_slice(row_labels.len(), col_labels.len(), &data);
    Ok(LabeledMatrix {
        values,
        row_labels,
        col_labels,
    })
}
