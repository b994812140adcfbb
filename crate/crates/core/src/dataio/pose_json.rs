//! Pose-export JSON ingestion.
//!
//! Two layouts are accepted:
//!
//! - a single file `{"fps": 50, "width": 1280, "height": 720, "id": "...",
//!   "frames": [{"people": [...]}, ...]}` where `fps`, `width`, `height`
//!   and `id` are optional;
//! - a directory of per-frame files `{"people": [...]}` (the layout written
//!   by OpenPose), read in file-name order.
//!
//! Each person holds flat `x, y, confidence` arrays `pose_keypoints_2d`
//! (75 values), `face_keypoints_2d` (210), `hand_left_keypoints_2d` (63) and
//! `hand_right_keypoints_2d` (63). Only the first person is used. An absent
//! or empty array means the part was not detected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::pose_features::{Landmark, Part, PoseFrame, PoseSequence, SourceId};

const PART_KEYS: [(Part, &str); 4] = [
    (Part::Body, "pose_keypoints_2d"),
    (Part::Face, "face_keypoints_2d"),
    (Part::LeftHand, "hand_left_keypoints_2d"),
    (Part::RightHand, "hand_right_keypoints_2d"),
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseFileHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

fn parse_frame(frame: &Value, index: usize) -> Result<PoseFrame> {
    let people = frame
        .get("people")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(index, "missing \"people\" array"))?;
    let mut out = PoseFrame::empty();
    let Some(person) = people.first() else {
        return Ok(out);
    };
    for (part, key) in PART_KEYS {
        let values = match person.get(key) {
            None | Some(Value::Null) => continue,
            Some(Value::Array(v)) => v,
            Some(_) => return Err(Error::parse(index, format!("{key} is not an array"))),
        };
        if values.is_empty() {
            continue;
        }
        let expected = 3 * part.len();
        if values.len() != expected {
            return Err(Error::parse(
                index,
                format!("{key} has {} values, expected {expected}", values.len()),
            ));
        }
        let nums: Vec<f64> = values
            .iter()
            .map(|v| v.as_f64())
            .collect::<Option<_>>()
            .ok_or_else(|| Error::parse(index, format!("{key} holds a non-numeric value")))?;
        for (slot, xyc) in part.range().zip(nums.chunks_exact(3)) {
            let lm = Landmark::new(xyc[0], xyc[1], xyc[2]);
            if lm.is_present() && !(lm.x.is_finite() && lm.y.is_finite()) {
                return Err(Error::parse(index, format!("{key} has a non-finite coordinate")));
            }
            out.landmarks_mut()[slot] = lm;
        }
    }
    Ok(out)
}

/// Parses the single-file layout. `fps` overrides the header value.
pub fn parse_pose_json(text: &str, fps: Option<f64>, default_id: &str) -> Result<(PoseSequence, PoseFileHeader)> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::parse(None, e.to_string()))?;
    let header: PoseFileHeader =
        serde_json::from_value(root.clone()).map_err(|e| Error::parse(None, format!("header: {e}")))?;
    let frames = root
        .get("frames")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(None, "missing \"frames\" array"))?;
    let frames = frames
        .iter()
        .enumerate()
        .map(|(i, f)| parse_frame(f, i))
        .collect::<Result<Vec<_>>>()?;
    let seq = build_sequence(frames, fps.or(header.fps), header.id.as_deref().unwrap_or(default_id))?;
    Ok((seq, header))
}

fn build_sequence(frames: Vec<PoseFrame>, fps: Option<f64>, id: &str) -> Result<PoseSequence> {
    let fps = fps.ok_or(Error::MissingFps)?;
    if frames.is_empty() {
        return Err(Error::parse(None, "no frames"));
    }
    PoseSequence::new(frames, fps, SourceId::parse(id))
}

/// Loads a pose file or a directory of per-frame OpenPose files. `fps`
/// overrides the header; one of them must be present.
pub fn load_pose_file(path: impl AsRef<Path>, fps: Option<f64>) -> Result<PoseSequence> {
    let path = path.as_ref();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = stem.strip_suffix(".pose").unwrap_or(&stem).to_string();
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        let frames = files
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let text = fs::read_to_string(f)?;
                let v: Value = serde_json::from_str(&text).map_err(|e| Error::parse(i, e.to_string()))?;
                parse_frame(&v, i)
            })
            .collect::<Result<Vec<_>>>()?;
        return build_sequence(frames, fps, &stem);
    }
    let text = fs::read_to_string(path)?;
    Ok(parse_pose_json(&text, fps, &stem)?.0)
}

fn frame_json(frame: &PoseFrame) -> Value {
    let mut person = serde_json::Map::new();
    for (part, key) in PART_KEYS {
        let vals: Vec<Value> = frame
            .part(part)
            .iter()
            .flat_map(|l| [l.x, l.y, l.confidence])
            .map(Value::from)
            .collect();
        person.insert(key.to_string(), Value::Array(vals));
    }
    serde_json::json!({ "people": [Value::Object(person)] })
}

/// Writes the single-file layout, including fps and source id.
pub fn save_pose_file(seq: &PoseSequence, header: &PoseFileHeader, path: impl AsRef<Path>) -> Result<()> {
    let mut header = header.clone();
    header.fps = Some(seq.fps);
    header.id.get_or_insert_with(|| seq.source.file_stem());
    let mut root = serde_json::to_value(&header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    root["frames"] = Value::Array(seq.frames.iter().map(frame_json).collect());
    let text = serde_json::to_string(&root).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(path, text)?;
    Ok(())
}
