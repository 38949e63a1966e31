//! CSV inputs (expert labels, per-AFO tables, ground truth, reference
//! values) and outputs (tracks, compositions, error tables).

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::Method;
use crate::compose::{CompositionEstimate, CompositionPair, SegmentedComparison, SegmentedValue, SpeciesErrorTable};
use crate::detection::{ClassScores, GroundTruthOperation, StageScores};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::stats::{AgreementResult, AlphaBands, ExpertMatrix};
use crate::taxonomy::{PerSpecies, Species};
use crate::tracker::{ScoreRecord, Track};

/// How many decimals numeric report columns get.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Shortest representation that parses back to the same value.
    #[default]
    Full,
    Decimals(usize),
}

impl Precision {
    pub fn format(self, v: f64) -> String {
        match self {
            Precision::Full => format!("{v}"),
            Precision::Decimals(d) => {
                let s = format!("{v:.d$}");
                // no "-0.0"
                if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                    s[1..].to_string()
                } else {
                    s
                }
            }
        }
    }
}

fn csv_error(source: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::Deserialize { err, .. } => Error::parse(source, line, err.to_string()),
        other => Error::parse(source, line, format!("{other:?}")),
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn open(path: &Path) -> Result<std::fs::File> {
    super::open_file(path)
}

fn source_of(path: &Path) -> String {
    path.display().to_string()
}

fn write_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Deserialize every row of a CSV into `T`, with its line number.
fn read_rows<T: for<'de> Deserialize<'de>>(r: impl Read, source: &str) -> Result<Vec<(usize, T)>> {
    let mut rdr = reader(r);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let v: T = rec.deserialize(Some(&headers)).map_err(|e| Error::parse(source, line, e.to_string()))?;
        out.push((line, v));
    }
    Ok(out)
}

// ---- expert labels ----

/// `fish_id,expert_1,...,expert_n`; cells are BET, YFT or empty.
pub fn parse_expert_matrix(r: impl Read, source: &str) -> Result<ExpertMatrix> {
    let mut rdr = reader(r);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    if headers.len() < 2 || &headers[0] != "fish_id" {
        return Err(Error::parse(source, 1, "expected header 'fish_id,<expert columns>'"));
    }
    let experts = headers.len() - 1;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != headers.len() {
            return Err(Error::parse(source, line, format!("{} fields, header has {}", rec.len(), headers.len())));
        }
        let mut cells = Vec::with_capacity(experts);
        for cell in rec.iter().skip(1) {
            cells.push(match cell {
                "" => None,
                s => Some(s.parse::<Species>().map_err(|e| Error::parse(source, line, e.to_string()))?),
            });
        }
        rows.push((rec[0].to_string(), cells));
    }
    ExpertMatrix::new(experts, rows)
}

pub fn read_expert_matrix(path: &Path) -> Result<ExpertMatrix> {
    parse_expert_matrix(open(path)?, &source_of(path))
}

/// `species,min_experts,mean_percent,sd_percent,unanimous_fish`
pub fn write_agreement(w: impl Write, r: &AgreementResult, precision: Precision) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["species", "min_experts", "mean_percent", "sd_percent", "fish", "unanimous_fish"])
        .map_err(write_err)?;
    for (species, ms, unanimous) in
        [("BET", &r.bet_percent, &r.unanimous_bet), ("YFT", &r.yft_percent, &r.unanimous_yft)]
    {
        wtr.write_record([
            species.to_string(),
            r.min_experts.to_string(),
            precision.format(ms.mean),
            precision.format(ms.sd),
            ms.n.to_string(),
            unanimous.join(";"),
        ])
        .map_err(write_err)?;
    }
    wtr.flush()?;
    Ok(())
}

// ---- per-AFO tables ----

#[derive(Debug, Deserialize)]
struct AfoCsvRow {
    afo_id: String,
    trip: String,
    gt_total: u64,
    segmented_percent: f64,
    #[serde(rename = "BET_gt")]
    bet_gt: f64,
    #[serde(rename = "BET_flat")]
    bet_flat: f64,
    #[serde(rename = "BET_hier")]
    bet_hier: f64,
    #[serde(rename = "SKJ_gt")]
    skj_gt: f64,
    #[serde(rename = "SKJ_flat")]
    skj_flat: f64,
    #[serde(rename = "SKJ_hier")]
    skj_hier: f64,
    #[serde(rename = "YFT_gt")]
    yft_gt: f64,
    #[serde(rename = "YFT_flat")]
    yft_flat: f64,
    #[serde(rename = "YFT_hier")]
    yft_hier: f64,
    #[serde(rename = "NO_TARGET_gt")]
    nt_gt: f64,
    #[serde(rename = "NO_TARGET_flat")]
    nt_flat: f64,
    #[serde(rename = "NO_TARGET_hier")]
    nt_hier: f64,
}

/// One operation of a per-AFO results table: ground truth and predicted
/// compositions in percent, and the segmented fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct AfoRow {
    pub afo_id: String,
    pub trip: String,
    pub gt_total: u64,
    pub segmented_percent: f64,
    pub truth: PerSpecies<f64>,
    pub flat: PerSpecies<f64>,
    pub hierarchical: PerSpecies<f64>,
}

impl AfoRow {
    pub fn predicted(&self, method: Method) -> PerSpecies<f64> {
        match method {
            Method::Flat => self.flat,
            Method::Hierarchical => self.hierarchical,
        }
    }
}

pub fn parse_afo_table(r: impl Read, source: &str) -> Result<Vec<AfoRow>> {
    let rows: Vec<(usize, AfoCsvRow)> = read_rows(r, source)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        if !seen.insert(r.afo_id.clone()) {
            return Err(Error::parse(source, line, format!("AFO '{}' listed twice", r.afo_id)));
        }
        let all = [
            r.segmented_percent,
            r.bet_gt,
            r.bet_flat,
            r.bet_hier,
            r.skj_gt,
            r.skj_flat,
            r.skj_hier,
            r.yft_gt,
            r.yft_flat,
            r.yft_hier,
            r.nt_gt,
            r.nt_flat,
            r.nt_hier,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::parse(source, line, "percentages must be finite and nonnegative"));
        }
        out.push(AfoRow {
            afo_id: r.afo_id,
            trip: r.trip,
            gt_total: r.gt_total,
            segmented_percent: r.segmented_percent,
            truth: PerSpecies([r.bet_gt, r.skj_gt, r.yft_gt, r.nt_gt]),
            flat: PerSpecies([r.bet_flat, r.skj_flat, r.yft_flat, r.nt_flat]),
            hierarchical: PerSpecies([r.bet_hier, r.skj_hier, r.yft_hier, r.nt_hier]),
        });
    }
    if out.is_empty() {
        return Err(Error::parse(source, 1, "no AFO rows"));
    }
    Ok(out)
}

pub fn read_afo_table(path: &Path) -> Result<Vec<AfoRow>> {
    parse_afo_table(open(path)?, &source_of(path))
}

/// Predicted against true composition per operation, grouped by trip.
pub fn afo_pairs(rows: &[AfoRow], method: Method) -> Vec<CompositionPair> {
    rows.iter()
        .map(|r| CompositionPair {
            afo_id: r.afo_id.clone(),
            group: r.trip.clone(),
            predicted: r.predicted(method),
            truth: r.truth,
        })
        .collect()
}

pub fn afo_segmented(rows: &[AfoRow]) -> Vec<SegmentedValue> {
    rows.iter()
        .map(|r| SegmentedValue { afo_id: r.afo_id.clone(), group: r.trip.clone(), percent: r.segmented_percent })
        .collect()
}

// ---- reference values ----

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SegmentedReference {
    pub approach: String,
    pub group: String,
    pub mean_percent: f64,
    pub sd_percent: f64,
    pub marker: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ErrorReference {
    pub group: String,
    pub method: Method,
    pub species: Species,
    pub mae_percent: f64,
    pub sd_percent: f64,
    pub marker: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AgreementReference {
    pub species: Species,
    pub min_experts: usize,
    pub mean_percent: f64,
    pub sd_percent: f64,
    pub unanimous_fish: String,
}

pub fn read_reference<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    Ok(read_rows(open(path)?, &source_of(path))?.into_iter().map(|(_, v)| v).collect())
}

// ---- ground truth counts ----

#[derive(Debug, Serialize, Deserialize)]
struct GroundTruthRow {
    afo_id: String,
    #[serde(rename = "BET")]
    bet: u64,
    #[serde(rename = "SKJ")]
    skj: u64,
    #[serde(rename = "YFT")]
    yft: u64,
    #[serde(rename = "NO_TARGET")]
    no_target: u64,
}

/// `afo_id,BET,SKJ,YFT,NO_TARGET` with individual counts.
pub fn parse_ground_truth(r: impl Read, source: &str) -> Result<Vec<GroundTruthOperation>> {
    read_rows::<GroundTruthRow>(r, source)?
        .into_iter()
        .map(|(line, g)| {
            GroundTruthOperation::new(g.afo_id, PerSpecies([g.bet, g.skj, g.yft, g.no_target]))
                .map_err(|e| Error::parse(source, line, e.to_string()))
        })
        .collect()
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthOperation>> {
    parse_ground_truth(open(path)?, &source_of(path))
}

pub fn write_ground_truth(w: impl Write, gts: &[GroundTruthOperation]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for g in gts {
        let c = g.counts.0;
        wtr.serialize(GroundTruthRow { afo_id: g.afo_id.clone(), bet: c[0], skj: c[1], yft: c[2], no_target: c[3] })
            .map_err(write_err)?;
    }
    if gts.is_empty() {
        wtr.write_record(["afo_id", "BET", "SKJ", "YFT", "NO_TARGET"]).map_err(write_err)?;
    }
    wtr.flush()?;
    Ok(())
}

// ---- tracks ----

const TRACK_HEADER: [&str; 15] = [
    "afo_id",
    "track_id",
    "frame",
    "confidence",
    "x",
    "y",
    "w",
    "h",
    "BET",
    "SKJ",
    "YFT",
    "NO_TARGET",
    "target",
    "skj",
    "bet",
];

/// Long-format track file: one row per matched detection.
pub struct TrackWriter<W: Write> {
    wtr: csv::Writer<W>,
}

impl<W: Write> TrackWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(TRACK_HEADER).map_err(write_err)?;
        Ok(TrackWriter { wtr })
    }

    pub fn write_track(&mut self, afo_id: &str, track: &Track) -> Result<()> {
        self.write_history(afo_id, track.track_id, &track.history)
    }

    pub fn write_history(&mut self, afo_id: &str, track_id: u64, history: &[ScoreRecord]) -> Result<()> {
        for r in history {
            let mut row: Vec<String> = vec![
                afo_id.to_string(),
                track_id.to_string(),
                r.frame.to_string(),
                format!("{}", r.confidence),
                format!("{}", r.bbox.x()),
                format!("{}", r.bbox.y()),
                format!("{}", r.bbox.w()),
                format!("{}", r.bbox.h()),
            ];
            match r.class_scores {
                Some(cs) => row.extend(cs.values().iter().map(|v| format!("{v}"))),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            match r.stage_scores {
                Some(s) => row.extend([s.target, s.skj, s.bet].iter().map(|v| format!("{v}"))),
                None => row.extend(std::iter::repeat_n(String::new(), 3)),
            }
            self.wtr.write_record(&row).map_err(write_err)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.wtr.flush()?;
        self.wtr.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

/// Score history of one track read back from a track file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackHistory {
    pub afo_id: String,
    pub track_id: u64,
    pub history: Vec<ScoreRecord>,
}

#[derive(Debug, Deserialize)]
struct TrackCsvRow {
    afo_id: String,
    track_id: u64,
    frame: u64,
    confidence: f64,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    #[serde(rename = "BET")]
    bet_score: Option<f64>,
    #[serde(rename = "SKJ")]
    skj_score: Option<f64>,
    #[serde(rename = "YFT")]
    yft_score: Option<f64>,
    #[serde(rename = "NO_TARGET")]
    nt_score: Option<f64>,
    target: Option<f64>,
    skj: Option<f64>,
    bet: Option<f64>,
}

/// Tracks in order of first appearance; rows of one track keep file order.
pub fn parse_tracks(r: impl Read, source: &str) -> Result<Vec<TrackHistory>> {
    let mut out: Vec<TrackHistory> = Vec::new();
    let mut index: HashMap<(String, u64), usize> = HashMap::new();
    for (line, row) in read_rows::<TrackCsvRow>(r, source)? {
        let bad = |m: String| Error::parse(source, line, m);
        let bbox = BBox::new(row.x, row.y, row.w, row.h).map_err(|e| bad(e.to_string()))?;
        if !(0.0..=1.0).contains(&row.confidence) {
            return Err(bad(format!("confidence {} outside [0, 1]", row.confidence)));
        }
        let class_scores = match (row.bet_score, row.skj_score, row.yft_score, row.nt_score) {
            (None, None, None, None) => None,
            (Some(a), Some(b), Some(c), Some(d)) => {
                Some(ClassScores::new([a, b, c, d]).map_err(|e| bad(e.to_string()))?)
            }
            _ => return Err(bad("class scores must be all present or all empty".into())),
        };
        let stage_scores = match (row.target, row.skj, row.bet) {
            (None, None, None) => None,
            (Some(t), Some(s), Some(b)) => Some(StageScores::new(t, s, b).map_err(|e| bad(e.to_string()))?),
            _ => return Err(bad("stage scores must be all present or all empty".into())),
        };
        let rec = ScoreRecord { frame: row.frame, bbox, confidence: row.confidence, class_scores, stage_scores };
        let key = (row.afo_id.clone(), row.track_id);
        let i = *index.entry(key).or_insert_with(|| {
            out.push(TrackHistory { afo_id: row.afo_id.clone(), track_id: row.track_id, history: Vec::new() });
            out.len() - 1
        });
        out[i].history.push(rec);
    }
    Ok(out)
}

pub fn read_tracks(path: &Path) -> Result<Vec<TrackHistory>> {
    parse_tracks(open(path)?, &source_of(path))
}

// ---- compositions ----

/// `afo_id,species,count,percent,segmented_fraction`, four rows per AFO.
pub fn write_compositions(w: impl Write, estimates: &[CompositionEstimate], precision: Precision) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["afo_id", "species", "count", "percent", "segmented_fraction"]).map_err(write_err)?;
    for e in estimates {
        for s in Species::ALL {
            wtr.write_record([
                e.afo_id.clone(),
                s.to_string(),
                e.counts[s].to_string(),
                precision.format(e.percentages[s]),
                e.segmented_fraction.map(|f| precision.format(f)).unwrap_or_default(),
            ])
            .map_err(write_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CompositionCsvRow {
    afo_id: String,
    species: Species,
    count: u64,
    percent: f64,
    segmented_fraction: Option<f64>,
}

// per-species (count, percent) and the segmented fraction of one AFO
type PartialEstimate = (PerSpecies<Option<(u64, f64)>>, Option<f64>);

pub fn parse_compositions(r: impl Read, source: &str) -> Result<Vec<CompositionEstimate>> {
    let mut order: Vec<String> = Vec::new();
    let mut parts: BTreeMap<String, PartialEstimate> = BTreeMap::new();
    for (line, row) in read_rows::<CompositionCsvRow>(r, source)? {
        let entry = parts.entry(row.afo_id.clone()).or_insert_with(|| {
            order.push(row.afo_id.clone());
            (PerSpecies([None; 4]), row.segmented_fraction)
        });
        if entry.0[row.species].replace((row.count, row.percent)).is_some() {
            return Err(Error::parse(source, line, format!("{} listed twice for '{}'", row.species, row.afo_id)));
        }
        if entry.1 != row.segmented_fraction {
            return Err(Error::parse(source, line, "segmented_fraction differs between rows of one AFO"));
        }
    }
    order
        .into_iter()
        .map(|id| {
            let (cells, seg) = &parts[&id];
            if cells.0.iter().any(Option::is_none) {
                return Err(Error::parse(source, 0, format!("AFO '{id}' lacks a species row")));
            }
            let counts = cells.map(|_, c| c.expect("checked").0);
            let percentages = cells.map(|_, c| c.expect("checked").1);
            Ok(CompositionEstimate { afo_id: id, counts, percentages, segmented_fraction: *seg })
        })
        .collect()
}

// ---- error tables ----

/// `group,method,species,mae_percent,sd_percent,p_value,marker,n`
pub fn write_error_table(
    w: impl Write,
    table: &SpeciesErrorTable,
    method: Method,
    bands: &AlphaBands,
    precision: Precision,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["group", "method", "species", "mae_percent", "sd_percent", "p_value", "marker", "n"])
        .map_err(write_err)?;
    for g in &table.groups {
        for s in Species::ALL {
            let e = &g.species[s];
            wtr.write_record([
                g.group.clone(),
                method.to_string(),
                s.to_string(),
                precision.format(e.mae.mean),
                precision.format(e.mae.sd),
                format!("{}", e.wilcoxon.p_value),
                bands.marker(e.wilcoxon.p_value).to_string(),
                e.mae.n.to_string(),
            ])
            .map_err(write_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One row of a written error table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ErrorRow {
    pub group: String,
    pub method: Method,
    pub species: Species,
    pub mae_percent: f64,
    pub sd_percent: f64,
    pub p_value: f64,
    pub marker: String,
    pub n: usize,
}

pub fn parse_error_rows(r: impl Read, source: &str) -> Result<Vec<ErrorRow>> {
    Ok(read_rows(r, source)?.into_iter().map(|(_, v)| v).collect())
}

/// `approach,group,mean_percent,sd_percent,p_value,marker,n`: both
/// approaches per group, sharing the paired test.
pub fn write_segmented(
    w: impl Write,
    names: (&str, &str),
    rows: &[SegmentedComparison],
    bands: &AlphaBands,
    precision: Precision,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["approach", "group", "mean_percent", "sd_percent", "p_value", "marker", "n"])
        .map_err(write_err)?;
    for (name, pick) in [(names.0, 0), (names.1, 1)] {
        for c in rows {
            let ms = if pick == 0 { &c.first } else { &c.second };
            wtr.write_record([
                name.to_string(),
                c.group.clone(),
                precision.format(ms.mean),
                precision.format(ms.sd),
                format!("{}", c.wilcoxon.p_value),
                bands.marker(c.wilcoxon.p_value).to_string(),
                ms.n.to_string(),
            ])
            .map_err(write_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::error_table;
    use crate::stats::SdConvention;

    #[test]
    fn precision_formatting() {
        assert_eq!(Precision::Decimals(1).format(42.91666), "42.9");
        assert_eq!(Precision::Decimals(1).format(-0.01), "0.0");
        assert_eq!(Precision::Full.format(0.1 + 0.2), "0.30000000000000004");
    }

    #[test]
    fn expert_matrix_parsing() {
        let text = "fish_id,e1,e2,e3\n001,BET,,YFT\n002,,,\n";
        let m = parse_expert_matrix(text.as_bytes(), "x").unwrap();
        assert_eq!(m.experts(), 3);
        assert_eq!(m.rows()[0].1, vec![Some(Species::Bet), None, Some(Species::Yft)]);
        let bad = "fish_id,e1\n001,SKJX\n";
        match parse_expert_matrix(bad.as_bytes(), "x").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn ground_truth_round_trip() {
        let gts = vec![
            GroundTruthOperation::new("a", PerSpecies([1, 2, 3, 0])).unwrap(),
            GroundTruthOperation::new("b", PerSpecies([0, 0, 0, 9])).unwrap(),
        ];
        let mut buf = Vec::new();
        write_ground_truth(&mut buf, &gts).unwrap();
        assert_eq!(parse_ground_truth(buf.as_slice(), "x").unwrap(), gts);
        let zero = "afo_id,BET,SKJ,YFT,NO_TARGET\nz,0,0,0,0\n";
        assert!(parse_ground_truth(zero.as_bytes(), "x").unwrap_err().is_parse());
    }

    #[test]
    fn tracks_round_trip() {
        let bb = BBox::new(1.5, 2.25, 100.0, 40.0).unwrap();
        let h = vec![
            ScoreRecord {
                frame: 3,
                bbox: bb,
                confidence: 0.1 + 0.7,
                class_scores: Some(ClassScores::new([0.1, 0.2, 0.3, 0.4]).unwrap()),
                stage_scores: Some(StageScores::new(0.9, 1.0 / 3.0, 0.2).unwrap()),
            },
            ScoreRecord { frame: 4, bbox: bb, confidence: 0.3, class_scores: None, stage_scores: None },
        ];
        let mut w = TrackWriter::new(Vec::new()).unwrap();
        w.write_history("a", 7, &h).unwrap();
        w.write_history("b", 7, &h[..1]).unwrap();
        let buf = w.finish().unwrap();
        let back = parse_tracks(buf.as_slice(), "x").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], TrackHistory { afo_id: "a".into(), track_id: 7, history: h.clone() });
        assert_eq!(back[1].history, h[..1].to_vec());
    }

    #[test]
    fn compositions_round_trip() {
        let gt = GroundTruthOperation::new("x", PerSpecies([3, 3, 1, 0])).unwrap();
        let e =
            CompositionEstimate::from_counts("x", PerSpecies([2, 3, 1, 1])).unwrap().with_ground_truth(&gt).unwrap();
        let f = CompositionEstimate::from_counts("y", PerSpecies([0, 0, 1, 0])).unwrap();
        let mut buf = Vec::new();
        write_compositions(&mut buf, &[e.clone(), f.clone()], Precision::Full).unwrap();
        assert_eq!(parse_compositions(buf.as_slice(), "x").unwrap(), vec![e, f]);
    }

    #[test]
    fn error_table_round_trip() {
        let pairs: Vec<CompositionPair> = (0..5)
            .map(|i| CompositionPair {
                afo_id: format!("1_{i}"),
                group: "1".into(),
                predicted: PerSpecies([10.0 + i as f64, 50.0, 30.0, 10.0 - i as f64]),
                truth: PerSpecies([10.0, 50.5, 29.0, 10.5]),
            })
            .collect();
        let t = error_table(&pairs, SdConvention::Population).unwrap();
        let mut buf = Vec::new();
        let bands = AlphaBands::default();
        write_error_table(&mut buf, &t, Method::Flat, &bands, Precision::Full).unwrap();
        let rows = parse_error_rows(buf.as_slice(), "x").unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].group, "1");
        assert_eq!(rows[4].group, "all");
        assert_eq!(rows[0].mae_percent, t.groups[0].species[Species::Bet].mae.mean);
        assert_eq!(rows[0].p_value, t.groups[0].species[Species::Bet].wilcoxon.p_value);
    }
}
