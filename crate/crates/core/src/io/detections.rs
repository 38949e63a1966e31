//! Detection and annotation files: a JSON header line followed by one JSON
//! record per line. See `docs/detection-format.md`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{ClassScores, Detection, FrameDetections, StageScores};
use crate::error::{Error, Result};
use crate::geometry::{BBox, BitMask};
use crate::motion::FlowVector;
use crate::taxonomy::{Species, SpeciesLabel};

pub const DETECTIONS_SCHEMA: &str = "catchcomp.detections";
pub const ANNOTATIONS_SCHEMA: &str = "catchcomp.annotations";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema: String,
    pub version: u32,
    pub frame_width: usize,
    pub frame_height: usize,
    pub fps: f64,
    pub afo_id: String,
}

impl Header {
    pub fn detections(frame_width: usize, frame_height: usize, fps: f64, afo_id: impl Into<String>) -> Self {
        Header {
            schema: DETECTIONS_SCHEMA.into(),
            version: FORMAT_VERSION,
            frame_width,
            frame_height,
            fps,
            afo_id: afo_id.into(),
        }
    }

    pub fn annotations(frame_width: usize, frame_height: usize, fps: f64, afo_id: impl Into<String>) -> Self {
        Header { schema: ANNOTATIONS_SCHEMA.into(), ..Header::detections(frame_width, frame_height, fps, afo_id) }
    }

    fn check(&self, schema: &str) -> std::result::Result<(), String> {
        if self.schema != schema {
            return Err(format!("schema '{}' where '{schema}' was expected", self.schema));
        }
        if self.version != FORMAT_VERSION {
            return Err(format!("unsupported version {} (expected {FORMAT_VERSION})", self.version));
        }
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err("frame size must be positive".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(format!("fps must be positive, got {}", self.fps));
        }
        Ok(())
    }
}

/// A parsed detection file: header plus the frame-grouped stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFile {
    pub header: Header,
    pub stream: Vec<FrameDetections>,
}

impl DetectionFile {
    pub fn detection_count(&self) -> usize {
        self.stream.iter().map(|f| f.detections.len()).sum()
    }
}

/// One ground-truth object.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub frame: u64,
    pub bbox: BBox,
    pub mask: Option<BitMask>,
    pub label: Option<SpeciesLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFile {
    pub header: Header,
    pub annotations: Vec<Annotation>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskRecord {
    width: usize,
    height: usize,
    counts: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageRecord {
    target: f64,
    skj: f64,
    bet: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionRecord {
    frame: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<MaskRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_scores: Option<BTreeMap<Species, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stage_scores: Option<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flow: Option<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    frame: u64,
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<MaskRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

fn mask_from_record(m: MaskRecord, header: &Header) -> std::result::Result<BitMask, String> {
    if m.width != header.frame_width || m.height != header.frame_height {
        return Err(format!(
            "mask is {}x{}, frames are {}x{}",
            m.width, m.height, header.frame_width, header.frame_height
        ));
    }
    BitMask::from_rle(m.width, m.height, &m.counts).map_err(|e| e.to_string())
}

fn mask_record(m: &BitMask) -> MaskRecord {
    MaskRecord { width: m.width(), height: m.height(), counts: m.to_rle() }
}

/// Missing species count as zero; the vector is then renormalised.
fn class_scores_from_map(map: &BTreeMap<Species, f64>) -> Result<ClassScores> {
    let mut raw = [0.0; 4];
    for (s, v) in map {
        raw[s.index()] = *v;
    }
    ClassScores::new(raw)
}

fn detection_from_record(r: DetectionRecord, header: &Header) -> std::result::Result<Option<Detection>, String> {
    let (bbox, confidence) = match (r.bbox, r.confidence) {
        (Some(b), Some(c)) => (b, c),
        (None, None) => {
            if r.mask.is_some() || r.class_scores.is_some() || r.stage_scores.is_some() {
                return Err("mask or scores given without bbox and confidence".into());
            }
            return Ok(None);
        }
        (Some(_), None) => return Err("bbox without confidence".into()),
        (None, Some(_)) => return Err("confidence without bbox".into()),
    };
    let bbox = BBox::try_from(bbox).map_err(|e| e.to_string())?;
    let mut d = Detection::new(r.frame, bbox, confidence).map_err(|e| e.to_string())?;
    if let Some(map) = r.class_scores {
        d = d.with_class_scores(class_scores_from_map(&map).map_err(|e| e.to_string())?);
    }
    if let Some(s) = r.stage_scores {
        d = d.with_stage_scores(StageScores::new(s.target, s.skj, s.bet).map_err(|e| e.to_string())?);
    }
    if let Some(m) = r.mask {
        d = d.with_mask(mask_from_record(m, header)?).map_err(|e| e.to_string())?;
    }
    Ok(Some(d))
}

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines(reader: impl BufRead) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

fn read_header(
    lines: &mut impl Iterator<Item = Result<(usize, String)>>,
    source: &str,
    schema: &str,
) -> Result<Header> {
    let (no, line) = lines.next().transpose()?.ok_or_else(|| Error::parse(source, 1, "missing header line"))?;
    let header: Header =
        serde_json::from_str(&line).map_err(|e| Error::parse(source, no, format!("bad header: {e}")))?;
    header.check(schema).map_err(|m| Error::parse(source, no, m))?;
    Ok(header)
}

/// Parse a detection file. Records are validated, class scores
/// renormalised, and records sharing a frame grouped together. A record
/// with only `frame` (and optionally `flow`) marks a frame without
/// detections.
pub fn parse_detections(reader: impl BufRead, source: &str) -> Result<DetectionFile> {
    let mut lines = numbered_lines(reader);
    let header = read_header(&mut lines, source, DETECTIONS_SCHEMA)?;
    let mut stream: Vec<FrameDetections> = Vec::new();
    for item in lines {
        let (no, line) = item?;
        let record: DetectionRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(source, no, e.to_string()))?;
        let frame = record.frame;
        let flow = record.flow.map(|[dx, dy]| FlowVector::new(dx, dy));
        if flow.is_some_and(|f| !(f.dx.is_finite() && f.dy.is_finite())) {
            return Err(Error::parse(source, no, "flow must be finite"));
        }
        let det = detection_from_record(record, &header).map_err(|m| Error::parse(source, no, m))?;
        match stream.last() {
            Some(last) if last.frame > frame => {
                return Err(Error::parse(source, no, format!("frame {frame} after frame {}", last.frame)));
            }
            Some(last) if last.frame == frame => {}
            _ => stream.push(FrameDetections { frame, flow: None, detections: Vec::new() }),
        }
        let group = stream.last_mut().expect("pushed above");
        if let Some(f) = flow {
            match group.flow {
                Some(prev) if prev != f => {
                    return Err(Error::parse(source, no, format!("conflicting flow values for frame {frame}")));
                }
                _ => group.flow = Some(f),
            }
        }
        group.detections.extend(det);
    }
    Ok(DetectionFile { header, stream })
}

pub fn read_detections(path: &Path) -> Result<DetectionFile> {
    let file = super::open_file(path)?;
    parse_detections(BufReader::new(file), &path.display().to_string())
}

/// Write a detection file that [`parse_detections`] reads back unchanged.
pub fn write_detections(mut w: impl Write, file: &DetectionFile) -> Result<()> {
    file.header.check(DETECTIONS_SCHEMA).map_err(Error::Config)?;
    let mut out = serde_json::to_string(&file.header).expect("header serialises");
    out.push('\n');
    let mut previous: Option<u64> = None;
    for group in &file.stream {
        if previous.is_some_and(|p| p >= group.frame) {
            return Err(Error::UnsortedFrames { previous: previous.unwrap_or(0), next: group.frame });
        }
        previous = Some(group.frame);
        let mut flow = group.flow.map(|f| [f.dx, f.dy]);
        if group.detections.is_empty() {
            let r = DetectionRecord {
                frame: group.frame,
                bbox: None,
                confidence: None,
                mask: None,
                class_scores: None,
                stage_scores: None,
                flow,
            };
            out.push_str(&serde_json::to_string(&r).expect("record serialises"));
            out.push('\n');
        }
        for d in &group.detections {
            if d.frame != group.frame {
                return Err(Error::FrameMismatch { expected: group.frame, found: d.frame });
            }
            if let Some(m) = &d.mask {
                if m.width() != file.header.frame_width || m.height() != file.header.frame_height {
                    return Err(Error::FrameDimensions(
                        m.width(),
                        m.height(),
                        file.header.frame_width,
                        file.header.frame_height,
                    ));
                }
            }
            let r = DetectionRecord {
                frame: d.frame,
                bbox: Some(d.bbox.into()),
                confidence: Some(d.confidence),
                mask: d.mask.as_ref().map(mask_record),
                class_scores: d.class_scores.map(|s| s.to_map()),
                stage_scores: d.stage_scores.map(|s| StageRecord { target: s.target, skj: s.skj, bet: s.bet }),
                flow: flow.take(),
            };
            out.push_str(&serde_json::to_string(&r).expect("record serialises"));
            out.push('\n');
        }
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// Parse an annotation file; records may come in any frame order.
pub fn parse_annotations(reader: impl BufRead, source: &str) -> Result<AnnotationFile> {
    let mut lines = numbered_lines(reader);
    let header = read_header(&mut lines, source, ANNOTATIONS_SCHEMA)?;
    let mut annotations = Vec::new();
    for item in lines {
        let (no, line) = item?;
        let r: AnnotationRecord = serde_json::from_str(&line).map_err(|e| Error::parse(source, no, e.to_string()))?;
        let bbox = BBox::try_from(r.bbox).map_err(|e| Error::parse(source, no, e.to_string()))?;
        let mask = r.mask.map(|m| mask_from_record(m, &header)).transpose().map_err(|m| Error::parse(source, no, m))?;
        let label = r
            .label
            .map(|l| l.parse::<SpeciesLabel>())
            .transpose()
            .map_err(|e| Error::parse(source, no, e.to_string()))?;
        annotations.push(Annotation { frame: r.frame, bbox, mask, label });
    }
    Ok(AnnotationFile { header, annotations })
}

pub fn read_annotations(path: &Path) -> Result<AnnotationFile> {
    let file = super::open_file(path)?;
    parse_annotations(BufReader::new(file), &path.display().to_string())
}

pub fn write_annotations(mut w: impl Write, file: &AnnotationFile) -> Result<()> {
    file.header.check(ANNOTATIONS_SCHEMA).map_err(Error::Config)?;
    let mut out = serde_json::to_string(&file.header).expect("header serialises");
    out.push('\n');
    for a in &file.annotations {
        let r = AnnotationRecord {
            frame: a.frame,
            bbox: a.bbox.into(),
            mask: a.mask.as_ref().map(mask_record),
            label: a.label.map(|l| l.to_string()),
        };
        out.push_str(&serde_json::to_string(&r).expect("record serialises"));
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}
