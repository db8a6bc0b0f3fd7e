//! Canonical CSV formats.
//!
//! Recording: header `t,<channel names...>,label`, one row per sample.
//! Feature matrix: header `f1..fd` with an optional trailing `label` column,
//! one row per window.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Domain, FeatureMatrix, Label, RawRecording};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn parse_err(source_name: &str, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        msg: msg.into(),
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn read_header<R: Read>(rdr: &mut csv::Reader<R>, source_name: &str) -> Result<Vec<String>> {
    let header = rdr
        .headers()
        .map_err(|e| parse_err(source_name, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyFile(source_name.to_string()));
    }
    Ok(header)
}

fn parse_real(cell: &str, source_name: &str, line: u64, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(parse_err(
            source_name,
            line,
            format!("non-finite value {cell:?} in column `{column}`"),
        )),
        Err(_) => Err(parse_err(
            source_name,
            line,
            format!("non-numeric value {cell:?} in column `{column}`"),
        )),
    }
}

fn parse_label(cell: &str, source_name: &str, line: u64) -> Result<Label> {
    match cell.parse::<Label>() {
        Ok(l) if l >= 1 => Ok(l),
        Ok(l) => Err(parse_err(source_name, line, format!("label {l} must be >= 1"))),
        Err(_) => Err(parse_err(
            source_name,
            line,
            format!("non-integer label {cell:?}"),
        )),
    }
}

/// Reads a recording and infers the sample rate from the `t` column.
pub fn load_recording<S: AsRef<str>>(path: impl AsRef<Path>, schema: &[S]) -> Result<RawRecording> {
    let path = path.as_ref();
    read_recording(open(path)?, schema, &path.display().to_string(), None)
}

/// Reads a recording with an explicit sample rate.
pub fn load_recording_at_rate<S: AsRef<str>>(
    path: impl AsRef<Path>,
    schema: &[S],
    sample_rate: f64,
) -> Result<RawRecording> {
    let path = path.as_ref();
    read_recording(open(path)?, schema, &path.display().to_string(), Some(sample_rate))
}

pub fn read_recording<R: Read, S: AsRef<str>>(
    reader: R,
    schema: &[S],
    source_name: &str,
    sample_rate: Option<f64>,
) -> Result<RawRecording> {
    let mut rdr = csv_reader(reader);
    let header = read_header(&mut rdr, source_name)?;
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(source_name, 1, format!("missing column `{name}`")))
    };
    let t_col = find("t")?;
    let label_col = find("label")?;
    let channel_cols = schema
        .iter()
        .map(|s| find(s.as_ref()))
        .collect::<Result<Vec<_>>>()?;

    let mut times = Vec::new();
    let mut channels = vec![Vec::new(); schema.len()];
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(source_name, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(parse_err(
                source_name,
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let t = parse_real(&record[t_col], source_name, line, "t")?;
        if let Some(&prev) = times.last() {
            if t < prev {
                return Err(parse_err(source_name, line, "timestamps must be non-decreasing"));
            }
        }
        times.push(t);
        for (series, (&col, name)) in channels.iter_mut().zip(channel_cols.iter().zip(schema)) {
            series.push(parse_real(&record[col], source_name, line, name.as_ref())?);
        }
        labels.push(parse_label(&record[label_col], source_name, line)?);
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile(source_name.to_string()));
    }

    let rate = match sample_rate {
        Some(r) => r,
        None => {
            let span = times[times.len() - 1] - times[0];
            if times.len() < 2 || span <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{source_name}: cannot infer the sample rate from the timestamps; supply one explicitly"
                )));
            }
            (times.len() - 1) as f64 / span
        }
    };
    RawRecording::new(
        rate,
        schema.iter().map(|s| s.as_ref().to_string()).collect(),
        channels,
        labels,
    )
}

/// Writes a recording; timestamps are regenerated from the sample rate.
pub fn save_recording(recording: &RawRecording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["t".to_string()];
    header.extend(recording.channel_names.iter().cloned());
    header.push("label".into());
    wtr.write_record(&header)?;
    for i in 0..recording.len() {
        let mut row = Vec::with_capacity(header.len());
        row.push((i as f64 / recording.sample_rate).to_string());
        row.extend(recording.channels.iter().map(|ch| ch[i].to_string()));
        row.push(recording.labels[i].to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_feature_matrix(path: impl AsRef<Path>) -> Result<Domain> {
    let path = path.as_ref();
    read_feature_matrix(open(path)?, &path.display().to_string())
}

/// Reads a feature-matrix CSV. A trailing `label` column is optional.
pub fn read_feature_matrix<R: Read>(reader: R, source_name: &str) -> Result<Domain> {
    let mut rdr = csv_reader(reader);
    let header = read_header(&mut rdr, source_name)?;
    let has_labels = header.last().map(|h| h == "label").unwrap_or(false);
    let dim = header.len() - usize::from(has_labels);
    if dim == 0 {
        return Err(parse_err(source_name, 1, "no feature columns"));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(source_name, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(parse_err(
                source_name,
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        for (j, name) in header.iter().enumerate().take(dim) {
            data.push(parse_real(&record[j], source_name, line, name)?);
        }
        if has_labels {
            labels.push(parse_label(&record[dim], source_name, line)?);
        }
    }
    if data.is_empty() {
        return Err(Error::EmptyFile(source_name.to_string()));
    }
    let rows = data.len() / dim;
    let features = FeatureMatrix::new(rows, dim, data)?;
    Domain::new(features, has_labels.then_some(labels))
}

pub fn save_feature_matrix(domain: &Domain, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = create(path)?;
    write_feature_matrix(domain, &mut file)?;
    file.flush().map_err(|e| Error::io(path, e))
}

pub fn write_feature_matrix<W: Write>(domain: &Domain, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=domain.dim()).map(|j| format!("f{j}")).collect();
    if domain.labels.is_some() {
        header.push("label".into());
    }
    wtr.write_record(&header)?;
    for (i, row) in domain.features.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        if let Some(labels) = &domain.labels {
            rec.push(labels[i].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<feature matrix>", e))?;
    Ok(())
}

/// Writes one label per row under the header `row,label`.
pub fn save_labels(labels: &[Label], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv::Writer::from_writer(create(path)?);
    wtr.write_record(["row", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        wtr.write_record([i.to_string(), l.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads the `label` column of any canonical CSV (predictions or a labeled
/// feature matrix).
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<Label>> {
    let path = path.as_ref();
    let source_name = path.display().to_string();
    let mut rdr = csv_reader(open(path)?);
    let header = read_header(&mut rdr, &source_name)?;
    let col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| parse_err(&source_name, 1, "missing column `label`"))?;
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(&source_name, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = record
            .get(col)
            .ok_or_else(|| parse_err(&source_name, line, "missing label field"))?;
        labels.push(parse_label(cell, &source_name, line)?);
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile(source_name));
    }
    Ok(labels)
}
