//! File I/O: frame sequences (PNG/PGM/PPM directories or raw planar streams),
//! ROI configuration, and the CSV/JSON outputs of the pipeline.
//!
//! All CSVs use `.` decimal separators, `\n` line endings, and a single
//! header row. Track coordinates are written with 3 decimal places and lost
//! entries carry the literal `nan`.

use std::fs;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use image::ImageReader;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::{Point, Quad, Roi};
use crate::synth::{EvalReport, EvalSummary, ScenarioTruth};
use crate::tracker::{TrackTiming, Trajectory};

const FRAME_EXTENSIONS: [&str; 3] = ["png", "pgm", "ppm"];

/// Header sidecar of a raw planar stream (`<stream>.json` next to the data).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawHeader {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub frames: usize,
}

#[derive(Debug)]
enum SourceKind {
    /// Lexicographically sorted image files.
    Dir(Vec<PathBuf>),
    /// Single uncompressed stream, frame-major with planar channels.
    Raw(PathBuf),
}

/// An ordered, dimension-checked sequence of frames, decoded on demand.
#[derive(Debug)]
pub struct FrameSource {
    kind: SourceKind,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    len: usize,
}

impl FrameSource {
    /// Opens a directory of 8-bit PNG/PGM/PPM frames or a raw stream with a
    /// `.json` header sidecar. Dimensions are checked across all frames up
    /// front; decoding happens lazily per frame.
    pub fn open(path: &Path) -> Result<FrameSource> {
        if path.is_dir() {
            Self::open_dir(path)
        } else {
            Self::open_raw(path)
        }
    }

    fn open_dir(dir: &Path) -> Result<FrameSource> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::BadInput {
                path: dir.to_path_buf(),
                reason: "no PNG/PGM/PPM frames found".into(),
            });
        }
        let (fw, fh, channels) = probe(&files[0])?;
        for other in &files[1..] {
            let (w, h, _) = probe(other)?;
            if (w, h) != (fw, fh) {
                return Err(Error::MixedDimensions {
                    first: files[0].clone(),
                    fw,
                    fh,
                    other: other.clone(),
                    ow: w,
                    oh: h,
                });
            }
        }
        Ok(FrameSource {
            len: files.len(),
            kind: SourceKind::Dir(files),
            width: fw,
            height: fh,
            channels,
        })
    }

    fn open_raw(path: &Path) -> Result<FrameSource> {
        let header_path = raw_header_path(path);
        let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
        let header: RawHeader = serde_json::from_str(&text).map_err(|e| Error::BadInput {
            path: header_path.clone(),
            reason: format!("bad header: {e}"),
        })?;
        if header.channels != 1 && header.channels != 3 {
            return Err(Error::UnsupportedChannels(header.channels));
        }
        if header.frames == 0 {
            return Err(Error::BadInput {
                path: path.to_path_buf(),
                reason: "stream declares zero frames".into(),
            });
        }
        let expected = header.width * header.height * header.channels * header.frames;
        let actual = fs::metadata(path).map_err(|e| Error::io(path, e))?.len() as usize;
        if actual != expected {
            return Err(Error::BadInput {
                path: path.to_path_buf(),
                reason: format!("stream is {actual} bytes, header implies {expected}"),
            });
        }
        Ok(FrameSource {
            kind: SourceKind::Raw(path.to_path_buf()),
            width: header.width,
            height: header.height,
            channels: header.channels,
            len: header.frames,
        })
    }

    /// Like [`FrameSource::open`], additionally checking the source against
    /// expected dimensions (for pairing a data sequence with a tracked one).
    pub fn open_expecting(path: &Path, expect: Option<(usize, usize)>) -> Result<FrameSource> {
        let source = Self::open(path)?;
        if let Some((w, h)) = expect {
            if (source.width, source.height) != (w, h) {
                return Err(Error::DimensionMismatch(w, h, source.width, source.height));
            }
        }
        Ok(source)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, index: usize) -> Result<Frame> {
        match &self.kind {
            SourceKind::Dir(files) => {
                let path = &files[index];
                let img = ImageReader::open(path)
                    .map_err(|e| Error::io(path, e))?
                    .decode()
                    .map_err(|e| Error::Image {
                        path: path.clone(),
                        source: e,
                    })?;
                let frame = match self.channels {
                    1 => {
                        let g = img.into_luma8();
                        Frame::new(
                            g.width() as usize,
                            g.height() as usize,
                            1,
                            g.into_raw(),
                            index,
                        )?
                    }
                    _ => {
                        let rgb = img.into_rgb8();
                        Frame::new(
                            rgb.width() as usize,
                            rgb.height() as usize,
                            3,
                            rgb.into_raw(),
                            index,
                        )?
                    }
                };
                if frame.width != self.width || frame.height != self.height {
                    return Err(Error::MixedDimensions {
                        first: files[0].clone(),
                        fw: self.width,
                        fh: self.height,
                        other: path.clone(),
                        ow: frame.width,
                        oh: frame.height,
                    });
                }
                Ok(frame)
            }
            SourceKind::Raw(path) => {
                let plane = self.width * self.height;
                let frame_bytes = plane * self.channels;
                let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
                file.seek(SeekFrom::Start((index * frame_bytes) as u64))
                    .map_err(|e| Error::io(path, e))?;
                let mut planar = vec![0u8; frame_bytes];
                file.read_exact(&mut planar)
                    .map_err(|e| Error::io(path, e))?;
                let data = if self.channels == 1 {
                    planar
                } else {
                    let mut interleaved = vec![0u8; frame_bytes];
                    for ch in 0..self.channels {
                        for (i, &v) in planar[ch * plane..(ch + 1) * plane].iter().enumerate() {
                            interleaved[i * self.channels + ch] = v;
                        }
                    }
                    interleaved
                };
                Frame::new(self.width, self.height, self.channels, data, index)
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<Frame>> + '_ {
        (0..self.len).map(|i| self.get(i))
    }
}

/// Decodes a single still image as a frame (8-bit, grayscale kept
/// single-channel, anything colored converted to RGB).
pub fn read_image(path: &Path) -> Result<Frame> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?;
    if img.color().has_color() {
        let rgb = img.into_rgb8();
        Frame::new(
            rgb.width() as usize,
            rgb.height() as usize,
            3,
            rgb.into_raw(),
            0,
        )
    } else {
        let g = img.into_luma8();
        Frame::new(g.width() as usize, g.height() as usize, 1, g.into_raw(), 0)
    }
}

fn probe(path: &Path) -> Result<(usize, usize, usize)> {
    let decoder = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .into_decoder()
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?;
    let (w, h) = image::ImageDecoder::dimensions(&decoder);
    let channels = if image::ImageDecoder::color_type(&decoder).has_color() {
        3
    } else {
        1
    };
    Ok((w as usize, h as usize, channels))
}

fn raw_header_path(stream: &Path) -> PathBuf {
    let mut os = stream.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Writes frames as `frame_NNNNNN.png` into `dir` (created if needed).
pub fn write_frames<'a>(dir: &Path, frames: impl IntoIterator<Item = &'a Frame>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in frames.into_iter().enumerate() {
        let path = dir.join(format!("frame_{i:06}.png"));
        save_png(&path, frame)?;
    }
    Ok(())
}

fn save_png(path: &Path, frame: &Frame) -> Result<()> {
    let err = |e: image::ImageError| Error::Image {
        path: path.to_path_buf(),
        source: e,
    };
    match frame.channels {
        1 => {
            image::GrayImage::from_raw(frame.width as u32, frame.height as u32, frame.data.clone())
                .expect("frame data length is validated")
                .save(path)
                .map_err(err)
        }
        _ => image::RgbImage::from_raw(frame.width as u32, frame.height as u32, frame.data.clone())
            .expect("frame data length is validated")
            .save(path)
            .map_err(err),
    }
}

/// Writes a raw planar stream plus its `.json` header sidecar.
pub fn write_raw(path: &Path, frames: &[&Frame]) -> Result<()> {
    let first = frames.first().ok_or(Error::EmptyFrameSequence)?;
    let header = RawHeader {
        width: first.width,
        height: first.height,
        channels: first.channels,
        frames: frames.len(),
    };
    let mut out = Vec::with_capacity(frames.len() * first.data.len());
    for f in frames {
        if f.width != first.width || f.height != first.height || f.channels != first.channels {
            return Err(Error::DimensionMismatch(
                first.width,
                first.height,
                f.width,
                f.height,
            ));
        }
        let plane = f.width * f.height;
        for ch in 0..f.channels {
            for i in 0..plane {
                out.push(f.data[i * f.channels + ch]);
            }
        }
    }
    fs::write(path, &out).map_err(|e| Error::io(path, e))?;
    let header_path = raw_header_path(path);
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&header_path, text).map_err(|e| Error::io(&header_path, e))
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    path: &Path,
    line_no: usize,
    what: &str,
) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("bad {what}: {field:?}")))
}

/// Reads the ROI configuration CSV (`id,x,y,w,h`, integer pixels at frame 0).
pub fn read_rois(path: &Path) -> Result<Vec<Roi>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rois = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line_no == 0 {
            if line.trim() != "id,x,y,w,h" {
                return Err(Error::parse(path, 1, "expected header `id,x,y,w,h`"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(path, line_no + 1, "expected 5 fields"));
        }
        let id: u32 = parse_field(fields[0], path, line_no + 1, "id")?;
        let x: i64 = parse_field(fields[1], path, line_no + 1, "x")?;
        let y: i64 = parse_field(fields[2], path, line_no + 1, "y")?;
        let w: i64 = parse_field(fields[3], path, line_no + 1, "w")?;
        let h: i64 = parse_field(fields[4], path, line_no + 1, "h")?;
        if rois.iter().any(|r: &Roi| r.id == id) {
            return Err(Error::parse(
                path,
                line_no + 1,
                format!("duplicate id {id}"),
            ));
        }
        rois.push(
            Roi::new(id, x as f64, y as f64, w as f64, h as f64)
                .map_err(|e| Error::parse(path, line_no + 1, e.to_string()))?,
        );
    }
    if rois.is_empty() {
        return Err(Error::BadInput {
            path: path.to_path_buf(),
            reason: "no ROIs declared".into(),
        });
    }
    Ok(rois)
}

pub fn write_rois(path: &Path, rois: &[Roi]) -> Result<()> {
    let mut out = String::from("id,x,y,w,h\n");
    for r in rois {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.id, r.x as i64, r.y as i64, r.w as i64, r.h as i64
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn fmt_coord(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.3}")
    }
}

/// Writes a trajectory as `frame,id,x,y,w,h` with 3 decimal places; lost
/// entries carry `nan` in all four geometry columns. Rows are sorted by
/// frame, then id.
pub fn write_tracks(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut out = String::from("frame,id,x,y,w,h\n");
    for (t, rois) in traj.frames.iter().enumerate() {
        let mut sorted: Vec<&Roi> = rois.iter().collect();
        sorted.sort_by_key(|r| r.id);
        for r in sorted {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                t,
                r.id,
                fmt_coord(r.x),
                fmt_coord(r.y),
                fmt_coord(r.w),
                fmt_coord(r.h)
            ));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses a tracks CSV back into a trajectory. Frames must be contiguous
/// from 0 and every frame must list the same ids.
pub fn read_tracks(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut frames: Vec<Vec<Roi>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line_no == 0 {
            if line.trim() != "frame,id,x,y,w,h" {
                return Err(Error::parse(path, 1, "expected header `frame,id,x,y,w,h`"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::parse(path, line_no + 1, "expected 6 fields"));
        }
        let t: usize = parse_field(fields[0], path, line_no + 1, "frame")?;
        let id: u32 = parse_field(fields[1], path, line_no + 1, "id")?;
        let x: f64 = parse_field(fields[2], path, line_no + 1, "x")?;
        let y: f64 = parse_field(fields[3], path, line_no + 1, "y")?;
        let w: f64 = parse_field(fields[4], path, line_no + 1, "w")?;
        let h: f64 = parse_field(fields[5], path, line_no + 1, "h")?;
        if t == frames.len() {
            frames.push(Vec::new());
        } else if t + 1 != frames.len() {
            return Err(Error::parse(
                path,
                line_no + 1,
                format!("frame index {t} out of order"),
            ));
        }
        let roi = if x.is_nan() || y.is_nan() || w.is_nan() || h.is_nan() {
            Roi::lost(id)
        } else {
            Roi { id, x, y, w, h }
        };
        frames[t].push(roi);
    }
    if frames.is_empty() {
        return Err(Error::BadInput {
            path: path.to_path_buf(),
            reason: "no track rows".into(),
        });
    }
    let ids: Vec<u32> = frames[0].iter().map(|r| r.id).collect();
    for (t, rois) in frames.iter().enumerate() {
        let got: Vec<u32> = rois.iter().map(|r| r.id).collect();
        if got != ids {
            return Err(Error::BadInput {
                path: path.to_path_buf(),
                reason: format!("frame {t} ids {got:?} differ from frame 0 ids {ids:?}"),
            });
        }
    }
    Ok(Trajectory { frames })
}

/// Writes ground-truth quads as `frame,id,x0,y0,x1,y1,x2,y2,x3,y3` with the
/// left-top corner first, clockwise in image coordinates.
pub fn write_truth(truth: &ScenarioTruth, path: &Path) -> Result<()> {
    let mut out = String::from("frame,id,x0,y0,x1,y1,x2,y2,x3,y3\n");
    for (t, frame_quads) in truth.quads.iter().enumerate() {
        for (id, quad) in truth.roi_ids.iter().zip(frame_quads) {
            out.push_str(&format!("{t},{id}"));
            for p in quad.corners() {
                out.push_str(&format!(",{:.6},{:.6}", p.x, p.y));
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads truth quads back. The homography column is not stored in the file,
/// so `homographies` comes back empty.
pub fn read_truth(path: &Path) -> Result<ScenarioTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut roi_ids: Vec<u32> = Vec::new();
    let mut quads: Vec<Vec<Quad>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line_no == 0 {
            if line.trim() != "frame,id,x0,y0,x1,y1,x2,y2,x3,y3" {
                return Err(Error::parse(path, 1, "bad truth header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::parse(path, line_no + 1, "expected 10 fields"));
        }
        let t: usize = parse_field(fields[0], path, line_no + 1, "frame")?;
        let id: u32 = parse_field(fields[1], path, line_no + 1, "id")?;
        let mut corners = [Point::new(0.0, 0.0); 4];
        for (k, corner) in corners.iter_mut().enumerate() {
            let x: f64 = parse_field(fields[2 + 2 * k], path, line_no + 1, "corner x")?;
            let y: f64 = parse_field(fields[3 + 2 * k], path, line_no + 1, "corner y")?;
            *corner = Point::new(x, y);
        }
        let quad =
            Quad::new(corners).map_err(|e| Error::parse(path, line_no + 1, e.to_string()))?;
        if t == quads.len() {
            quads.push(Vec::new());
        } else if t + 1 != quads.len() {
            return Err(Error::parse(
                path,
                line_no + 1,
                format!("frame {t} out of order"),
            ));
        }
        if t == 0 {
            roi_ids.push(id);
        }
        quads[t].push(quad);
    }
    if quads.is_empty() {
        return Err(Error::BadInput {
            path: path.to_path_buf(),
            reason: "no truth rows".into(),
        });
    }
    Ok(ScenarioTruth {
        roi_ids,
        homographies: Vec::new(),
        quads,
    })
}

/// Writes the per-entry Jaccard table (`frame,id,jaccard`; `nan` marks lost
/// estimates).
pub fn write_metrics(report: &EvalReport, path: &Path) -> Result<()> {
    let mut out = String::from("frame,id,jaccard\n");
    for row in &report.rows {
        let j = if row.jaccard.is_nan() {
            "nan".into()
        } else {
            format!("{:.6}", row.jaccard)
        };
        out.push_str(&format!("{},{},{}\n", row.frame, row.id, j));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Sidecar path for a summary: `metrics.csv` -> `metrics.summary.json`.
pub fn summary_sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.json")
}

/// Sidecar path for the tracker timing log: `tracks.csv` -> `tracks.timing.json`.
pub fn timing_sidecar_path(tracks_path: &Path) -> PathBuf {
    tracks_path.with_extension("timing.json")
}

pub fn write_summary(summary: &EvalSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingLog {
    pub frames_tracked: usize,
    pub per_frame_seconds: Vec<f64>,
    pub total_seconds: f64,
}

pub fn write_timing(timing: &TrackTiming, path: &Path) -> Result<()> {
    let log = TimingLog {
        frames_tracked: timing.per_frame.len(),
        per_frame_seconds: timing.per_frame.clone(),
        total_seconds: timing.total_seconds,
    };
    let text = serde_json::to_string_pretty(&log).expect("timing serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_timing(path: &Path) -> Result<TrackTiming> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let log: TimingLog = serde_json::from_str(&text).map_err(|e| Error::BadInput {
        path: path.to_path_buf(),
        reason: format!("bad timing log: {e}"),
    })?;
    Ok(TrackTiming {
        per_frame: log.per_frame_seconds,
        total_seconds: log.total_seconds,
    })
}

/// Mean data-frame intensity inside a tracked ROI, per channel; NaN once the
/// ROI is lost.
#[derive(Debug, Clone)]
pub struct IntensityRecord {
    pub frame: usize,
    pub id: u32,
    pub means: Vec<f64>,
}

/// Per-frame, per-ROI mean intensity of `data` over each live ROI's pixel
/// set (centers inside the rectangle, clipped to the frame).
pub fn extract_intensity(data: &FrameSource, traj: &Trajectory) -> Result<Vec<IntensityRecord>> {
    if data.len() != traj.len() {
        return Err(Error::FrameCountMismatch {
            tracking: traj.len(),
            data: data.len(),
        });
    }
    let channels = data.channels;
    let mut records = Vec::new();
    for (t, rois) in traj.frames.iter().enumerate() {
        let frame = data.get(t)?;
        let mut sorted: Vec<&Roi> = rois.iter().collect();
        sorted.sort_by_key(|r| r.id);
        for r in sorted {
            let means = if r.is_lost() {
                vec![f64::NAN; channels]
            } else {
                roi_mean(&frame, r)
            };
            records.push(IntensityRecord {
                frame: t,
                id: r.id,
                means,
            });
        }
    }
    Ok(records)
}

fn roi_mean(frame: &Frame, r: &Roi) -> Vec<f64> {
    let x0 = ((r.x - 0.5).ceil() as i64).max(0);
    let x1 = (((r.x + r.w) - 0.5).ceil() as i64 - 1).min(frame.width as i64 - 1);
    let y0 = ((r.y - 0.5).ceil() as i64).max(0);
    let y1 = (((r.y + r.h) - 0.5).ceil() as i64 - 1).min(frame.height as i64 - 1);
    if x0 > x1 || y0 > y1 {
        return vec![f64::NAN; frame.channels];
    }
    let mut sums = vec![0.0f64; frame.channels];
    let mut count = 0u64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            for (ch, sum) in sums.iter_mut().enumerate() {
                *sum += frame.sample(x as usize, y as usize, ch) as f64;
            }
            count += 1;
        }
    }
    sums.iter().map(|s| s / count as f64).collect()
}

/// Writes intensity records as `frame,id,mean` (single channel) or
/// `frame,id,mean_c0,mean_c1,mean_c2`.
pub fn write_intensity(records: &[IntensityRecord], channels: usize, path: &Path) -> Result<()> {
    let mut out = String::new();
    if channels == 1 {
        out.push_str("frame,id,mean\n");
    } else {
        out.push_str("frame,id,mean_c0,mean_c1,mean_c2\n");
    }
    for rec in records {
        out.push_str(&format!("{},{}", rec.frame, rec.id));
        for m in &rec.means {
            if m.is_nan() {
                out.push_str(",nan");
            } else {
                out.push_str(&format!(",{m:.6}"));
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Fixed overlay palette, cycled by ROI id.
pub const PALETTE: [[u8; 3]; 8] = [
    [230, 60, 60],
    [60, 200, 60],
    [70, 110, 245],
    [240, 200, 40],
    [210, 70, 210],
    [60, 210, 210],
    [245, 140, 40],
    [240, 240, 240],
];

/// 3x5 digit glyphs, one row per bitmask line (LSB = leftmost column).
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b011, 0b010, 0b010, 0b111],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b100, 0b111],
    [0b101, 0b101, 0b111, 0b100, 0b100],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b101, 0b111],
    [0b111, 0b100, 0b100, 0b100, 0b100],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b100, 0b111],
];

const GLYPH_SCALE: usize = 2;
const OUTLINE_PX: i64 = 2;

/// The integer pixel columns/rows covered by a live ROI, clipped to a frame.
fn roi_pixel_span(r: &Roi, w: usize, h: usize) -> Option<(i64, i64, i64, i64)> {
    let x0 = ((r.x - 0.5).ceil() as i64).max(0);
    let x1 = (((r.x + r.w) - 0.5).ceil() as i64 - 1).min(w as i64 - 1);
    let y0 = ((r.y - 0.5).ceil() as i64).max(0);
    let y1 = (((r.y + r.h) - 0.5).ceil() as i64 - 1).min(h as i64 - 1);
    (x0 <= x1 && y0 <= y1).then_some((x0, x1, y0, y1))
}

/// Pixels painted by the overlay for one ROI: a 2-px outline band just
/// inside the ROI's pixel span, plus the id label glyph above the left-top
/// corner. Exposed so tests can audit the rendered output pixel by pixel.
pub fn overlay_mask(r: &Roi, w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut px = Vec::new();
    let Some((x0, x1, y0, y1)) = roi_pixel_span(r, w, h) else {
        return px;
    };
    for y in y0..=y1 {
        for x in x0..=x1 {
            let band = x - x0 < OUTLINE_PX
                || x1 - x < OUTLINE_PX
                || y - y0 < OUTLINE_PX
                || y1 - y < OUTLINE_PX;
            if band {
                px.push((x as usize, y as usize));
            }
        }
    }
    for (x, y) in label_pixels(r.id, x0, y0, w, h) {
        px.push((x, y));
    }
    px.sort_unstable();
    px.dedup();
    px
}

fn label_pixels(id: u32, x0: i64, y0: i64, w: usize, h: usize) -> Vec<(usize, usize)> {
    let digits: Vec<usize> = id
        .to_string()
        .bytes()
        .map(|b| (b - b'0') as usize)
        .collect();
    let glyph_h = (5 * GLYPH_SCALE) as i64;
    let glyph_w = (3 * GLYPH_SCALE) as i64;
    let ox = x0.max(0);
    let oy = (y0 - glyph_h - 2).max(0);
    let mut px = Vec::new();
    for (d_idx, &d) in digits.iter().enumerate() {
        let base_x = ox + d_idx as i64 * (glyph_w + GLYPH_SCALE as i64);
        for (row, bits) in DIGITS[d].iter().enumerate() {
            for col in 0..3 {
                if bits & (1 << col) == 0 {
                    continue;
                }
                for sy in 0..GLYPH_SCALE {
                    for sx in 0..GLYPH_SCALE {
                        let x = base_x + (col * GLYPH_SCALE + sx) as i64;
                        let y = oy + (row * GLYPH_SCALE + sy) as i64;
                        if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                            px.push((x as usize, y as usize));
                        }
                    }
                }
            }
        }
    }
    px
}

/// Renders the frames with each live ROI outlined (2 px, per-id palette
/// color) and its id drawn nearby; lost ROIs are not drawn. Output is a PNG
/// sequence in `out_dir`.
pub fn render_overlay(frames: &FrameSource, traj: &Trajectory, out_dir: &Path) -> Result<()> {
    if frames.len() != traj.len() {
        return Err(Error::FrameCountMismatch {
            tracking: traj.len(),
            data: frames.len(),
        });
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (t, rois) in traj.frames.iter().enumerate() {
        let frame = frames.get(t)?;
        let mut rgb = to_rgb(&frame);
        for r in rois {
            if r.is_lost() {
                continue;
            }
            let color = PALETTE[r.id as usize % PALETTE.len()];
            for (x, y) in overlay_mask(r, rgb.width, rgb.height) {
                for (ch, &v) in color.iter().enumerate() {
                    *rgb.sample_mut(x, y, ch) = v;
                }
            }
        }
        save_png(&out_dir.join(format!("frame_{t:06}.png")), &rgb)?;
    }
    Ok(())
}

fn to_rgb(f: &Frame) -> Frame {
    if f.channels == 3 {
        return f.clone();
    }
    let mut data = Vec::with_capacity(f.width * f.height * 3);
    for &v in &f.data {
        data.extend_from_slice(&[v, v, v]);
    }
    Frame {
        width: f.width,
        height: f.height,
        channels: 3,
        data,
        index: f.index,
    }
}
