//! Context-aware module: the domain's append-only context dataset.
//!
//! Persistence format, one record per line:
//! `device_id \t class \t f1,f2,...,fn \t timestamp_ms`

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::request::DeviceContextRecord;
use crate::dfl::Dataset;

#[derive(Debug, Error)]
pub enum CamError {
    #[error("feature vector has {found} entries, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("feature values must lie in [0, 1]")]
    FeatureRange,
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug)]
pub struct ContextAwareModule {
    dim: usize,
    classes: usize,
    records: Vec<DeviceContextRecord>,
    latest: BTreeMap<String, usize>,
    sink: Option<File>,
}

impl ContextAwareModule {
    pub fn new(dim: usize, classes: usize) -> Self {
        ContextAwareModule { dim, classes, records: Vec::new(), latest: BTreeMap::new(), sink: None }
    }

    /// Load any records already in `path`, then append new ones to it.
    pub fn open_persistent(path: &Path, dim: usize, classes: usize) -> Result<Self, CamError> {
        let mut cam = Self::new(dim, classes);
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                let rec = parse_line(&line).map_err(|message| CamError::Parse { path: path.to_path_buf(), line: i + 1, message })?;
                cam.push(rec)?;
            }
        }
        cam.sink = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(cam)
    }

    fn check(&self, record: &DeviceContextRecord) -> Result<(), CamError> {
        if record.feature_vector.len() != self.dim {
            return Err(CamError::DimensionMismatch { expected: self.dim, found: record.feature_vector.len() });
        }
        if record.context_class >= self.classes {
            return Err(CamError::ClassOutOfRange { class: record.context_class, classes: self.classes });
        }
        if record.feature_vector.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CamError::FeatureRange);
        }
        Ok(())
    }

    fn push(&mut self, record: DeviceContextRecord) -> Result<(), CamError> {
        self.check(&record)?;
        self.latest.insert(record.device_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    /// Append one record and return the new dataset size.
    pub fn cam_ingest(&mut self, record: DeviceContextRecord) -> Result<usize, CamError> {
        self.check(&record)?;
        if let Some(f) = self.sink.as_mut() {
            writeln!(f, "{}", format_line(&record))?;
        }
        self.push(record)?;
        Ok(self.records.len())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DeviceContextRecord] {
        &self.records
    }

    pub fn latest_for(&self, device_id: &str) -> Option<&DeviceContextRecord> {
        self.latest.get(device_id).map(|&i| &self.records[i])
    }

    /// Records as labelled training samples.
    pub fn training_set(&self) -> Dataset {
        Dataset {
            xs: self.records.iter().map(|r| r.feature_vector.clone()).collect(),
            ys: self.records.iter().map(|r| r.context_class).collect(),
        }
    }
}

pub fn format_line(r: &DeviceContextRecord) -> String {
    let features: Vec<String> = r.feature_vector.iter().map(|v| format!("{v:?}")).collect();
    format!("{}\t{}\t{}\t{}", r.device_id, r.context_class, features.join(","), r.timestamp_ms)
}

pub fn parse_line(line: &str) -> Result<DeviceContextRecord, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let [id, class, features, ts] = cols[..] else {
        return Err(format!("expected 4 tab-separated columns, found {}", cols.len()));
    };
    Ok(DeviceContextRecord {
        device_id: id.to_string(),
        context_class: class.parse().map_err(|_| format!("bad class `{class}`"))?,
        feature_vector: features
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|_| format!("bad feature `{v}`")))
            .collect::<Result<_, _>>()?,
        timestamp_ms: ts.parse().map_err(|_| format!("bad timestamp `{ts}`"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, class: usize, v: f64) -> DeviceContextRecord {
        DeviceContextRecord { device_id: id.into(), context_class: class, feature_vector: vec![v; 4], timestamp_ms: 7 }
    }

    #[test]
    fn ingest_counts_and_rejects() {
        let mut cam = ContextAwareModule::new(4, 4);
        for i in 0..5 {
            assert_eq!(cam.cam_ingest(rec("d", i % 4, 0.1 * i as f64)).unwrap(), i + 1);
        }
        let bad = DeviceContextRecord { feature_vector: vec![0.0; 3], ..rec("d", 0, 0.0) };
        assert!(matches!(cam.cam_ingest(bad), Err(CamError::DimensionMismatch { expected: 4, found: 3 })));
        assert_eq!(cam.latest_for("d").unwrap().context_class, 0);
        assert_eq!(cam.len(), 5);
    }

    #[test]
    fn persistence_round_trips_byte_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cam.tsv");
        let first = rec("a", 1, 0.1 + 0.2);
        {
            let mut cam = ContextAwareModule::open_persistent(&path, 4, 4).unwrap();
            cam.cam_ingest(first.clone()).unwrap();
        }
        let before = std::fs::read(&path).unwrap();
        let mut cam = ContextAwareModule::open_persistent(&path, 4, 4).unwrap();
        assert_eq!(cam.records()[0], first);
        cam.cam_ingest(rec("b", 2, 0.5)).unwrap();
        let after = std::fs::read(&path).unwrap();
        assert_eq!(&after[..before.len()], &before[..]);
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
    }
}
