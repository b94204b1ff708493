//! KITTI-style dataset recorder and the label/detection text formats.
//!
//! Layout under the output directory:
//!
//! ```text
//! velodyne/NNNNNN.bin   float32 x, y, z, intensity per point, little-endian
//! label_2/NNNNNN.txt    one line per object: class x y z l w h yaw
//! det_2/NNNNNN.txt      optional, one line per detection: class x y l w yaw score
//! manifest.json         frame list and train/val split
//! ```
//!
//! Coordinates are in the sensor frame; z is the box center measured from
//! the optical center.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, DatasetError};
use crate::geometry::OrientedBox;
use crate::lidar::{scan, LidarConfig};
use crate::perception::{Detection, DetectorParams, Geofence, ReferenceDetector};
use crate::rng;
use crate::scenario::{
    ground_truth_objects, init_scenario, Dims, LabeledBox, ObjectClass, ScenarioConfig,
};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub record_hz: u32,
    pub sim_hz: u32,
    /// Frames to write; ignored when `ticks` is set.
    pub n_frames: u64,
    /// Simulated ticks; defaults to `n_frames` times the recording stride.
    pub ticks: Option<u64>,
    pub out_dir: PathBuf,
    /// Fraction of frames assigned to training.
    pub split: f64,
    pub seed: u64,
    pub with_detections: bool,
    pub lidar: LidarConfig,
    pub geofence: Geofence,
    pub detector: DetectorParams,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            record_hz: 2,
            sim_hz: 10,
            n_frames: 200,
            ticks: None,
            out_dir: PathBuf::from("dataset"),
            split: 0.8,
            seed: 1,
            with_detections: false,
            lidar: LidarConfig::default(),
            geofence: Geofence::default(),
            detector: DetectorParams::default(),
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.record_hz == 0 || self.sim_hz == 0 || self.sim_hz % self.record_hz != 0 {
            return Err(ConfigError::invalid(
                "dataset.record_hz",
                format!(
                    "{} Hz does not divide the simulation rate {} Hz",
                    self.record_hz, self.sim_hz
                ),
            ));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(ConfigError::invalid("dataset.split", "must be in (0, 1)"));
        }
        self.lidar.validate()?;
        self.geofence.validate()?;
        self.detector.validate()
    }

    /// Simulation ticks between recorded frames.
    pub fn stride(&self) -> u64 {
        (self.sim_hz / self.record_hz) as u64
    }

    pub fn total_ticks(&self) -> u64 {
        self.ticks.unwrap_or(self.n_frames * self.stride())
    }

    /// Recorded frames for a run of `ticks`: the last tick of every stride.
    pub fn frame_count(&self, ticks: u64) -> u64 {
        ticks / self.stride()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: u64,
    pub tick: u64,
    pub sim_time_ms: u64,
    pub velodyne: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection: Option<String>,
    pub n_points: usize,
    pub n_objects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub record_hz: u32,
    pub sim_hz: u32,
    pub ticks: u64,
    pub seed: u64,
    pub split: f64,
    pub frames: Vec<FrameEntry>,
    pub train: Vec<u64>,
    pub val: Vec<u64>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Format {
            path: path.to_path_buf(),
            line: e.line(),
            reason: e.to_string(),
        })
    }
}

/// Deterministic shuffle of `0..n` into sorted train and val lists with
/// `round(n × split)` training frames.
pub fn split_indices(n: u64, split: f64, seed: u64) -> (Vec<u64>, Vec<u64>) {
    let mut idx: Vec<u64> = (0..n).collect();
    idx.shuffle(&mut rng::keyed(seed, rng::DOMAIN_SPLIT, n));
    let n_train = ((n as f64) * split).round() as usize;
    let mut train = idx[..n_train].to_vec();
    let mut val = idx[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

fn probe_writable(dir: &Path) -> Result<(), DatasetError> {
    let unwritable = |source| DatasetError::Unwritable {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(unwritable)?;
    tempfile::NamedTempFile::new_in(dir).map_err(unwritable)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), DatasetError> {
    fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Simulate `scenario` and write every recorded frame. The output
/// directory is checked before any simulation runs.
pub fn record_dataset(
    scenario: &ScenarioConfig,
    spec: &DatasetSpec,
) -> Result<Manifest, DatasetError> {
    spec.validate()?;
    probe_writable(&spec.out_dir)?;
    let (scenario, mut state) = init_scenario(scenario.clone())?;
    let ticks = spec.total_ticks();
    let n = spec.frame_count(ticks);
    let mount = spec.lidar.mount();
    let detector = spec
        .with_detections
        .then(|| ReferenceDetector::new(spec.detector));

    if n > 0 {
        for sub in ["velodyne", "label_2"] {
            probe_writable(&spec.out_dir.join(sub))?;
        }
        if spec.with_detections {
            probe_writable(&spec.out_dir.join("det_2"))?;
        }
    }

    let mut frames = Vec::with_capacity(n as usize);
    for k in 0..ticks {
        if (k + 1) % spec.stride() == 0 {
            let index = frames.len() as u64;
            let name = format!("{index:06}");
            let cloud = scan(&state, &spec.lidar, spec.seed);
            let velodyne = format!("velodyne/{name}.bin");
            cloud.write_bin(&spec.out_dir.join(&velodyne))?;
            let labels = ground_truth_objects(&state, &mount, &spec.geofence);
            let label = format!("label_2/{name}.txt");
            write_text(&spec.out_dir.join(&label), &format_labels(&labels))?;
            let detection = match &detector {
                Some(d) => {
                    let dets = d.detect_cloud(&spec.geofence.apply(&cloud));
                    let path = format!("det_2/{name}.txt");
                    write_text(&spec.out_dir.join(&path), &format_detections(&dets))?;
                    Some(path)
                }
                None => None,
            };
            frames.push(FrameEntry {
                index,
                tick: state.tick,
                sim_time_ms: state.sim_time_ms(),
                velodyne,
                label,
                detection,
                n_points: cloud.len(),
                n_objects: labels.len(),
            });
        }
        if k + 1 < ticks {
            state = scenario.step_world(&state);
        }
    }

    let (train, val) = split_indices(n, spec.split, spec.seed);
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        record_hz: spec.record_hz,
        sim_hz: spec.sim_hz,
        ticks,
        seed: spec.seed,
        split: spec.split,
        frames,
        train,
        val,
    };
    let path = spec.out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&path, &(text + "\n"))?;
    Ok(manifest)
}

/// Label file body. Floats use the shortest representation that parses
/// back to the same value.
pub fn format_labels(labels: &[LabeledBox]) -> String {
    let mut out = String::new();
    for b in labels {
        let [x, y, z] = b.center;
        let Dims {
            length,
            width,
            height,
        } = b.dims;
        let _ = writeln!(
            out,
            "{} {x} {y} {z} {length} {width} {height} {}",
            b.class, b.yaw
        );
    }
    out
}

pub fn format_detections(dets: &[Detection]) -> String {
    let mut out = String::new();
    for d in dets {
        let b = &d.bbox;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            d.class, b.cx, b.cy, b.length, b.width, b.yaw, d.confidence
        );
    }
    out
}

fn parse_fields(
    path: &Path,
    line_no: usize,
    line: &str,
    expected: usize,
) -> Result<(ObjectClass, Vec<f64>), DatasetError> {
    let bad = |reason: String| DatasetError::Format {
        path: path.to_path_buf(),
        line: line_no,
        reason,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != expected {
        return Err(bad(format!(
            "expected {expected} fields, found {}",
            fields.len()
        )));
    }
    let class: ObjectClass = fields[0].parse().map_err(bad)?;
    let nums = fields[1..]
        .iter()
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(bad(format!("`{f}` is not a finite number"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((class, nums))
}

fn lines(path: &Path) -> Result<Vec<(usize, String)>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| (k + 1, l.to_owned()))
        .collect())
}

/// Read a label file; ids are assigned by line order.
pub fn read_labels(path: &Path) -> Result<Vec<LabeledBox>, DatasetError> {
    lines(path)?
        .into_iter()
        .enumerate()
        .map(|(k, (line_no, line))| {
            let (class, v) = parse_fields(path, line_no, &line, 8)?;
            Ok(LabeledBox {
                id: k as u32,
                class,
                center: [v[0], v[1], v[2]],
                dims: Dims::new(v[3], v[4], v[5]),
                yaw: v[6],
            })
        })
        .collect()
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>, DatasetError> {
    lines(path)?
        .into_iter()
        .map(|(line_no, line)| {
            let (class, v) = parse_fields(path, line_no, &line, 7)?;
            let bbox = OrientedBox::new(v[0], v[1], v[2], v[3], v[4]);
            if bbox.validate().is_err() || !(0.0..=1.0).contains(&v[5]) {
                return Err(DatasetError::Format {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: "box dimensions must be positive and the score in [0, 1]".into(),
                });
            }
            Ok(Detection {
                class,
                bbox,
                confidence: v[5],
            })
        })
        .collect()
}
