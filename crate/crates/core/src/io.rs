//! File formats: annotation and detection CSV, mask and image PNG, and the
//! provenance block stamped on every artifact.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{Annotation, DetectionRecord};
use crate::fusion::FrameDetections;
use crate::geometry::{BinaryMask, BoundingBox};
use crate::maskprop::EdgeMap;
use crate::sampling::{DatasetManifest, SourceKind};

pub const ANNOTATION_HEADER: [&str; 6] = ["image_id", "class", "x_min", "y_min", "x_max", "y_max"];
pub const DETECTION_HEADER: [&str; 7] = ["image_id", "class", "x_min", "y_min", "x_max", "y_max", "confidence"];
pub const FRAME_COLUMNS: [&str; 2] = ["sequence_id", "frame_index"];

/// Where an artifact came from. Serialized as JSON inside reports and as
/// `#` comment lines at the top of CSV outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub format_version: u32,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Input name -> SHA-256 hex digest.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub parameters: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Provenance {
            tool: "detkit".into(),
            version: crate::VERSION.into(),
            format_version: crate::FORMAT_VERSION,
            command: command.into(),
            seed: None,
            inputs: BTreeMap::new(),
            parameters: BTreeMap::new(),
        }
    }

    /// `# key: value` lines, ending in a newline.
    pub fn comment_block(&self) -> String {
        let mut s = format!(
            "# tool: {} {}\n# format_version: {}\n# command: {}\n",
            self.tool, self.version, self.format_version, self.command
        );
        if let Some(seed) = self.seed {
            s.push_str(&format!("# seed: {seed}\n"));
        }
        for (k, v) in &self.inputs {
            s.push_str(&format!("# input {k}: {v}\n"));
        }
        for (k, v) in &self.parameters {
            s.push_str(&format!("# param {k}: {v}\n"));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("provenance serializes")
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("line {}: {other:?}", line.unwrap_or(0))),
    }
}

fn parse_f64(path: &Path, line: u64, field: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::format(path, format!("line {line}: {field} '{v}' is not a number")))
}

fn parse_box(path: &Path, line: u64, rec: &csv::StringRecord) -> Result<BoundingBox> {
    let c: Vec<f64> = (2..6)
        .map(|i| parse_f64(path, line, ANNOTATION_HEADER[i], &rec[i]))
        .collect::<Result<_>>()?;
    BoundingBox::new(c[0], c[1], c[2], c[3]).map_err(|e| Error::format(path, format!("line {line}: {e}")))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.len() < expected.len() || found.iter().zip(expected).any(|(a, b)| a != *b) {
        return Err(Error::format(
            path,
            format!(
                "expected header starting '{}', found '{}'",
                expected.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(())
}

/// Reads ground-truth boxes: `image_id,class,x_min,y_min,x_max,y_max`.
pub fn parse_annotations<R: Read>(path: &Path, r: R) -> Result<Vec<Annotation>> {
    let mut rdr = reader(r);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &headers, &ANNOTATION_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(Annotation {
            image_id: rec[0].to_owned(),
            class_label: rec[1].to_owned(),
            bbox: parse_box(path, line, &rec)?,
        });
    }
    Ok(out)
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    parse_annotations(path, open(path)?)
}

/// A detection with the video frame it belongs to, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub record: DetectionRecord,
    pub frame: Option<(String, u32)>,
}

/// Reads detections: the ground-truth columns plus `confidence`, optionally
/// followed by `sequence_id,frame_index`.
pub fn parse_detections<R: Read>(path: &Path, r: R) -> Result<Vec<DetectionRow>> {
    let mut rdr = reader(r);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &headers, &DETECTION_HEADER)?;
    let framed = headers.len() >= 9 && headers[7] == *FRAME_COLUMNS[0] && headers[8] == *FRAME_COLUMNS[1];
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let confidence = parse_f64(path, line, "confidence", &rec[6])?;
        let frame = if framed && !rec[7].is_empty() {
            let idx = rec[8]
                .parse::<u32>()
                .map_err(|_| Error::format(path, format!("line {line}: frame_index '{}' is not an integer", &rec[8])))?;
            Some((rec[7].to_owned(), idx))
        } else {
            None
        };
        out.push(DetectionRow {
            record: DetectionRecord {
                image_id: rec[0].to_owned(),
                class_label: rec[1].to_owned(),
                bbox: parse_box(path, line, &rec)?,
                confidence,
            },
            frame,
        });
    }
    Ok(out)
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRow>> {
    parse_detections(path, open(path)?)
}

fn fmt_box(b: &BoundingBox) -> [String; 4] {
    [b.x_min.to_string(), b.y_min.to_string(), b.x_max.to_string(), b.y_max.to_string()]
}

pub fn write_annotations<W: Write>(mut w: W, rows: &[Annotation], provenance: Option<&Provenance>) -> std::io::Result<()> {
    if let Some(p) = provenance {
        w.write_all(p.comment_block().as_bytes())?;
    }
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(ANNOTATION_HEADER)?;
    for a in rows {
        let [x0, y0, x1, y1] = fmt_box(&a.bbox);
        cw.write_record([a.image_id.as_str(), a.class_label.as_str(), &x0, &y0, &x1, &y1])?;
    }
    cw.flush()
}

/// Writes detections, with frame columns when any row carries a frame.
pub fn write_detections<W: Write>(mut w: W, rows: &[DetectionRow], provenance: Option<&Provenance>) -> std::io::Result<()> {
    if let Some(p) = provenance {
        w.write_all(p.comment_block().as_bytes())?;
    }
    let framed = rows.iter().any(|r| r.frame.is_some());
    let mut cw = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = DETECTION_HEADER.to_vec();
    if framed {
        header.extend(FRAME_COLUMNS);
    }
    cw.write_record(&header)?;
    for r in rows {
        let d = &r.record;
        let [x0, y0, x1, y1] = fmt_box(&d.bbox);
        let conf = d.confidence.to_string();
        let mut rec = vec![d.image_id.clone(), d.class_label.clone(), x0, y0, x1, y1, conf];
        if framed {
            match &r.frame {
                Some((s, f)) => rec.extend([s.clone(), f.to_string()]),
                None => rec.extend([String::new(), String::new()]),
            }
        }
        cw.write_record(&rec)?;
    }
    cw.flush()
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(contents).and_then(|_| f.flush()).map_err(|e| Error::io(path, e))
}

/// Runs `body` against a buffered file at `path`.
pub fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut f = create(path)?;
    body(&mut f).and_then(|_| f.flush()).map_err(|e| Error::io(path, e))
}

fn image_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_owned(),
            source: other,
        },
    }
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path).map_err(|e| image_err(path, e))?.to_rgb8())
}

/// Reads a mask image; any non-zero gray value is foreground.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let g = image::open(path).map_err(|e| image_err(path, e))?.to_luma8();
    let (w, h) = g.dimensions();
    Ok(BinaryMask::from_raw(w, h, g.into_raw())?)
}

/// Reads an 8-bit edge map, scaled to `[0, 1]`.
pub fn read_edge_map(path: &Path) -> Result<EdgeMap> {
    let g = image::open(path).map_err(|e| image_err(path, e))?.to_luma8();
    let (w, h) = g.dimensions();
    Ok(EdgeMap::from_gray(w, h, g.as_raw())?)
}

fn write_png(path: &Path, width: u32, height: u32, color: png::ColorType, data: &[u8], provenance: Option<&Provenance>) -> Result<()> {
    let f = create(path)?;
    let mut enc = png::Encoder::new(f, width, height);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let to_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    };
    if let Some(p) = provenance {
        enc.add_text_chunk("provenance".into(), p.to_json()).map_err(to_err)?;
    }
    let mut w = enc.write_header().map_err(to_err)?;
    w.write_image_data(data).map_err(to_err)?;
    w.finish().map_err(to_err)
}

/// Writes a mask as 8-bit gray PNG, foreground 255.
pub fn write_mask(path: &Path, mask: &BinaryMask, provenance: Option<&Provenance>) -> Result<()> {
    let data: Vec<u8> = mask.as_raw().iter().map(|&v| v * 255).collect();
    write_png(path, mask.width(), mask.height(), png::ColorType::Grayscale, &data, provenance)
}

pub fn write_rgb(path: &Path, img: &RgbImage, provenance: Option<&Provenance>) -> Result<()> {
    write_png(path, img.width(), img.height(), png::ColorType::Rgb, img.as_raw(), provenance)
}

/// Groups detection rows into per-frame sets for temporal fusion.
///
/// Frames without any detection still matter to the tracker (tracks age
/// through them), so gaps are filled: from the manifest's video frames
/// when one is given, otherwise every index between a sequence's first and
/// last detected frame, with `"{sequence}/{frame}"` as the image id of
/// frames never seen.
pub fn group_frames(path: &Path, rows: &[DetectionRow], manifest: Option<&DatasetManifest>) -> Result<Vec<FrameDetections>> {
    let mut frames: BTreeMap<(String, u32), FrameDetections> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let Some((seq, idx)) = &r.frame else {
            return Err(Error::format(path, format!("row {}: detection has no sequence_id/frame_index", i + 1)));
        };
        let f = frames.entry((seq.clone(), *idx)).or_insert_with(|| FrameDetections {
            sequence_id: seq.clone(),
            frame_index: *idx,
            image_id: r.record.image_id.clone(),
            detections: Vec::new(),
        });
        if f.image_id != r.record.image_id {
            return Err(Error::format(
                path,
                format!("frame {seq}/{idx} appears with image ids '{}' and '{}'", f.image_id, r.record.image_id),
            ));
        }
        f.detections.push(r.record.clone());
    }
    let seqs: BTreeSet<String> = frames.keys().map(|(s, _)| s.clone()).collect();
    match manifest {
        Some(m) => {
            for e in m.entries() {
                if e.source_kind != SourceKind::Video {
                    continue;
                }
                let (Some(seq), Some(idx)) = (&e.sequence_id, e.frame_index) else { continue };
                if !seqs.contains(seq) {
                    continue;
                }
                frames.entry((seq.clone(), idx)).or_insert_with(|| FrameDetections {
                    sequence_id: seq.clone(),
                    frame_index: idx,
                    image_id: e.image_id.clone(),
                    detections: Vec::new(),
                });
            }
        }
        None => {
            for seq in &seqs {
                let idxs: Vec<u32> = frames.range((seq.clone(), 0)..=(seq.clone(), u32::MAX)).map(|(k, _)| k.1).collect();
                let (lo, hi) = (idxs[0], idxs[idxs.len() - 1]);
                for idx in lo..=hi {
                    frames.entry((seq.clone(), idx)).or_insert_with(|| FrameDetections {
                        sequence_id: seq.clone(),
                        frame_index: idx,
                        image_id: format!("{seq}/{idx}"),
                        detections: Vec::new(),
                    });
                }
            }
        }
    }
    Ok(frames.into_values().collect())
}
