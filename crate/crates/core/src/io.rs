//! Readers and writers for ground truth, feature CSVs, manifests, and the
//! detection results (submission) format.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    Annotation, Detection, FeatureMatrix, FrameScoreTrack, GroundTruth, LabelTable, Proposal,
    Segment, VideoAnnotations,
};

#[derive(Debug, Deserialize, Serialize)]
struct RawGroundTruth {
    database: BTreeMap<String, RawVideo>,
    /// Optional full class list, so classes without annotations keep ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawVideo {
    duration: f64,
    #[serde(default)]
    subset: String,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawAnnotation {
    label: String,
    segment: [f64; 2],
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place. Creates missing parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    parse_ground_truth(&read_to_string(path)?, path)
}

/// Parses ground-truth JSON. The class table is the optional top-level
/// `labels` list plus every annotated label, in lexicographic order.
pub fn parse_ground_truth(text: &str, origin: &Path) -> Result<GroundTruth> {
    let raw: RawGroundTruth =
        serde_json::from_str(text).map_err(|e| Error::json_parse(origin, e))?;
    let labels = LabelTable::from_labels(
        raw.labels.iter().flatten().cloned().chain(
            raw.database
                .values()
                .flat_map(|v| v.annotations.iter().map(|a| a.label.clone())),
        ),
    );
    let mut videos = BTreeMap::new();
    for (video_id, video) in raw.database {
        let mut annotations = Vec::with_capacity(video.annotations.len());
        for ann in video.annotations {
            let [start, end] = ann.segment;
            let segment = Segment::new(start, end).map_err(|_| {
                Error::Validation(format!(
                    "video {video_id:?}: annotation [{start}, {end}] lies outside [0, {}]",
                    video.duration
                ))
            })?;
            let class_id = labels.id(&ann.label).expect("label interned above");
            annotations.push(Annotation { class_id, segment });
        }
        videos.insert(
            video_id,
            VideoAnnotations {
                duration: video.duration,
                subset: video.subset,
                annotations,
            },
        );
    }
    let gt = GroundTruth { videos, labels };
    gt.validate()?;
    Ok(gt)
}

pub fn ground_truth_to_string(gt: &GroundTruth) -> Result<String> {
    let raw = RawGroundTruth {
        database: gt
            .videos
            .iter()
            .map(|(id, v)| {
                let annotations = v
                    .annotations
                    .iter()
                    .map(|a| {
                        let label = gt
                            .labels
                            .name(a.class_id)
                            .ok_or_else(|| Error::UnknownClass(a.class_id.to_string()))?;
                        Ok(RawAnnotation {
                            label: label.to_owned(),
                            segment: a.segment.into(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((
                    id.clone(),
                    RawVideo {
                        duration: v.duration,
                        subset: v.subset.clone(),
                        annotations,
                    },
                ))
            })
            .collect::<Result<_>>()?,
        labels: Some(gt.labels.names().to_vec()),
    };
    to_json_string(&raw, true)
}

pub fn save_ground_truth(gt: &GroundTruth, path: &Path) -> Result<()> {
    write_atomic(path, ground_truth_to_string(gt)?.as_bytes())
}

/// Reads a headerless CSV of reals, one frame per line.
pub fn load_feature_matrix(path: &Path, video_id: &str) -> Result<FeatureMatrix> {
    let text = read_to_string(path)?;
    parse_feature_csv(&text, path, video_id)
}

pub fn parse_feature_csv(text: &str, origin: &Path, video_id: &str) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: origin.to_owned(),
            line: e.position().map_or(row + 1, |p| p.line() as usize),
            column: 1,
            message: e.to_string(),
        })?;
        let width = *cols.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Parse {
                path: origin.to_owned(),
                line: row + 1,
                column: 1,
                message: format!(
                    "ragged row: expected {width} columns, found {}",
                    record.len()
                ),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: origin.to_owned(),
                line: row + 1,
                column: col + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    path: origin.to_owned(),
                    row,
                    col,
                });
            }
            data.push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Validation(format!(
            "{}: feature file has no rows",
            origin.display()
        )));
    }
    FeatureMatrix::new(video_id, rows, cols.unwrap_or(0), data)
}

pub fn feature_matrix_to_csv(m: &FeatureMatrix) -> String {
    let mut out = String::new();
    for row in m.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format_decimal(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn save_feature_matrix(m: &FeatureMatrix, path: &Path) -> Result<()> {
    write_atomic(path, feature_matrix_to_csv(m).as_bytes())
}

/// Loads a score track stored as a single-column feature CSV.
pub fn load_track(path: &Path, video_id: &str, fps: f64) -> Result<FrameScoreTrack> {
    let m = load_feature_matrix(path, video_id)?;
    if m.cols() != 1 {
        return Err(Error::Validation(format!(
            "{}: score track must have exactly one column, found {}",
            path.display(),
            m.cols()
        )));
    }
    FrameScoreTrack::new(video_id, m.data().to_vec(), fps)
}

pub fn save_track(track: &FrameScoreTrack, path: &Path) -> Result<()> {
    let m = FeatureMatrix::new(track.video_id(), track.len(), 1, track.scores().to_vec())?;
    save_feature_matrix(&m, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub fps: f64,
    pub duration: f64,
}

/// Maps video ids to per-video CSV files. Relative paths resolve against
/// the manifest's own directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: BTreeMap<String, ManifestEntry>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let entries: BTreeMap<String, ManifestEntry> =
            serde_json::from_str(&text).map_err(|e| Error::json_parse(path, e))?;
        for (id, e) in &entries {
            if !(e.fps.is_finite() && e.fps > 0.0) {
                return Err(Error::Validation(format!(
                    "{}: video {id:?} has invalid fps {}",
                    path.display(),
                    e.fps
                )));
            }
        }
        Ok(Self {
            entries,
            base_dir: path.parent().map(Path::to_owned).unwrap_or_default(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, to_json_string(&self.entries, true)?.as_bytes())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    pub fn get(&self, video_id: &str) -> Result<&ManifestEntry> {
        self.entries
            .get(video_id)
            .ok_or_else(|| Error::UnknownVideo(video_id.to_owned()))
    }

    pub fn load_features(&self, video_id: &str) -> Result<FeatureMatrix> {
        let entry = self.get(video_id)?;
        load_feature_matrix(&self.resolve(entry), video_id)
    }

    pub fn load_track(&self, video_id: &str) -> Result<FrameScoreTrack> {
        let entry = self.get(video_id)?;
        load_track(&self.resolve(entry), video_id, entry.fps)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SubmissionFile {
    version: String,
    results: BTreeMap<String, Vec<SubmissionEntry>>,
    #[serde(default)]
    external_data: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SubmissionEntry {
    label: String,
    score: f64,
    segment: [f64; 2],
}

/// Renders detections in the challenge results format. Videos appear in
/// id order; detections keep their input order within a video.
pub fn detections_to_string(detections: &[Detection], labels: &LabelTable) -> Result<String> {
    let mut results: BTreeMap<String, Vec<SubmissionEntry>> = BTreeMap::new();
    for det in detections {
        let label = labels
            .name(det.class_id)
            .ok_or_else(|| Error::UnknownClass(format!("class id {}", det.class_id)))?;
        results
            .entry(det.video_id.clone())
            .or_default()
            .push(SubmissionEntry {
                label: label.to_owned(),
                score: det.score,
                segment: det.segment.into(),
            });
    }
    let file = SubmissionFile {
        version: "1.0".to_owned(),
        results,
        external_data: serde_json::Map::new(),
    };
    to_json_string(&file, true)
}

pub fn save_detections(detections: &[Detection], labels: &LabelTable, path: &Path) -> Result<()> {
    let mut text = detections_to_string(detections, labels)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_detections(path: &Path, labels: &LabelTable) -> Result<Vec<Detection>> {
    parse_detections(&read_to_string(path)?, path, labels)
}

pub fn parse_detections(text: &str, origin: &Path, labels: &LabelTable) -> Result<Vec<Detection>> {
    let file: SubmissionFile =
        serde_json::from_str(text).map_err(|e| Error::json_parse(origin, e))?;
    let mut out = Vec::new();
    for (video_id, entries) in file.results {
        for e in entries {
            let class_id = labels
                .id(&e.label)
                .ok_or_else(|| Error::UnknownClass(e.label.clone()))?;
            if !(e.score.is_finite() && e.score >= 0.0) {
                return Err(Error::Validation(format!(
                    "video {video_id:?}: invalid detection score {}",
                    e.score
                )));
            }
            out.push(Detection {
                video_id: video_id.clone(),
                class_id,
                segment: Segment::new(e.segment[0], e.segment[1])?,
                score: e.score,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub video_id: String,
    pub start: f64,
    pub end: f64,
    pub score: f64,
}

impl ProposalRecord {
    pub fn new(video_id: &str, p: &Proposal) -> Self {
        Self {
            video_id: video_id.to_owned(),
            start: p.segment.start(),
            end: p.segment.end(),
            score: p.score,
        }
    }
}

pub fn proposals_to_jsonl(records: &[ProposalRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&to_json_string(r, false)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_proposals_jsonl(text: &str, origin: &Path) -> Result<Vec<ProposalRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                path: origin.to_owned(),
                line: i + 1,
                column: e.column(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Serializes with at most six fractional digits per number. `spaced`
/// selects `", "` / `": "` separators on a single line.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T, spaced: bool) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, DecimalFormatter { spaced });
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Fixed six-decimal rendering with trailing zeros trimmed, keeping at least
/// one fractional digit: `2.0`, `0.42`, `0.000001`.
pub fn format_decimal(v: f64) -> String {
    let mut s = format!("{v:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.push('0');
    }
    if s == "-0.0" {
        s = "0.0".to_owned();
    }
    s
}

struct DecimalFormatter {
    spaced: bool,
}

impl serde_json::ser::Formatter for DecimalFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        w.write_all(format_decimal(value).as_bytes())
    }

    fn write_f32<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        value: f32,
    ) -> std::io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array_value<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        if first {
            Ok(())
        } else if self.spaced {
            w.write_all(b", ")
        } else {
            w.write_all(b",")
        }
    }

    fn begin_object_key<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.begin_array_value(w, first)
    }

    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        if self.spaced {
            w.write_all(b": ")
        } else {
            w.write_all(b":")
        }
    }
}
