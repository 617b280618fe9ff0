//! Synthetic dataset scaffold: one NPY pose file per sample plus the names
//! of the image and mask an external renderer is expected to produce.
//!
//! ```text
//! root/
//!   manifest.json
//!   pose/pose0.npy, pose/pose1.npy, ...
//!   rgb/0.jpg, rgb/1.jpg, ...        (rendered elsewhere)
//!   mask/0.png, mask/1.png, ...      (rendered elsewhere)
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::RigidPose;

const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";
const NPY_PREAMBLE: usize = 10;
const NPY_ALIGN: usize = 64;
const NPY_DICT: &str = "{'descr':'<f8','fortran_order':False,'shape':(4,4)}";
const POSE_DATA_BYTES: usize = 16 * 8;

/// Orthonormality and determinant tolerance for pose matrices.
const RIGID_TOL: f64 = 1e-9;

pub const MANIFEST_FILE: &str = "manifest.json";

/// A 4×4 homogeneous object-in-camera transform, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRecord {
    values: [f64; 16],
}

impl PoseRecord {
    /// Validates that `values` is a proper rigid transform.
    pub fn new(values: [f64; 16]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("pose matrix has non-finite entries"));
        }
        if values[12..] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::validation(format!(
                "bottom row must be (0, 0, 0, 1), got {:?}",
                &values[12..]
            )));
        }
        let r = |i: usize, j: usize| values[4 * i + j];
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r(k, i) * r(k, j)).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > RIGID_TOL {
                    return Err(Error::validation(format!(
                        "rotation block is not orthonormal (column {i}·{j} = {dot})"
                    )));
                }
            }
        }
        let det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1))
            - r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0))
            + r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
        if (det - 1.0).abs() > RIGID_TOL {
            return Err(Error::validation(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(PoseRecord { values })
    }

    pub fn from_pose(pose: &RigidPose) -> Self {
        let m = pose.to_matrix();
        let mut values = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                values[4 * i + j] = m[(i, j)];
            }
        }
        // bottom row is exact by construction; orthonormality holds to rounding
        PoseRecord { values }
    }

    pub fn values(&self) -> &[f64; 16] {
        &self.values
    }

    pub fn to_pose(&self) -> RigidPose {
        RigidPose::from_matrix(&nalgebra::Matrix4::from_row_slice(&self.values))
    }
}

/// NPY v1.0 bytes of a `(4, 4)` little-endian float64 array in C order.
/// The header is padded with spaces so the data starts at byte 64.
pub fn write_pose_file(record: &PoseRecord) -> Vec<u8> {
    let unpadded = NPY_PREAMBLE + NPY_DICT.len() + 1;
    let total = unpadded.div_ceil(NPY_ALIGN) * NPY_ALIGN;
    let header_len = total - NPY_PREAMBLE;
    let mut out = Vec::with_capacity(total + POSE_DATA_BYTES);
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(NPY_DICT.as_bytes());
    out.resize(total - 1, b' ');
    out.push(b'\n');
    for v in record.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Minimal reader for the subset of Python literal syntax NPY headers use.
struct HeaderParser<'a> {
    src: &'a [u8],
    pos: usize,
}

#[derive(Debug, PartialEq)]
enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<u64>),
}

impl<'a> HeaderParser<'a> {
    fn skip_spaces(&mut self) {
        while self.src.get(self.pos) == Some(&b' ') {
            self.pos += 1;
        }
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        self.skip_spaces();
        if self.src.get(self.pos) == Some(&byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::format(format!(
                "npy header: expected {:?} at offset {}",
                byte as char, self.pos
            )))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_spaces();
        self.src.get(self.pos).copied()
    }

    fn string(&mut self) -> Result<String> {
        self.skip_spaces();
        let quote = match self.src.get(self.pos) {
            Some(q @ (b'\'' | b'"')) => *q,
            _ => return Err(Error::format("npy header: expected a string")),
        };
        let start = self.pos + 1;
        let len = self.src[start..]
            .iter()
            .position(|b| *b == quote)
            .ok_or_else(|| Error::format("npy header: unterminated string"))?;
        self.pos = start + len + 1;
        Ok(String::from_utf8_lossy(&self.src[start..start + len]).into_owned())
    }

    fn literal(&mut self) -> Result<Literal> {
        match self.peek() {
            Some(b'\'' | b'"') => Ok(Literal::Str(self.string()?)),
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    match self.peek() {
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        Some(b'0'..=b'9') => {
                            let start = self.pos;
                            while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                                self.pos += 1;
                            }
                            let text = std::str::from_utf8(&self.src[start..self.pos])
                                .expect("ascii digits");
                            dims.push(text.parse().map_err(|_| {
                                Error::format("npy header: shape dimension overflow")
                            })?);
                            match self.peek() {
                                Some(b',') => self.pos += 1,
                                Some(b')') => {}
                                _ => return Err(Error::format("npy header: malformed shape")),
                            }
                        }
                        _ => return Err(Error::format("npy header: malformed shape")),
                    }
                }
                Ok(Literal::Tuple(dims))
            }
            _ => {
                let rest = &self.src[self.pos..];
                for (word, value) in [(&b"True"[..], true), (&b"False"[..], false)] {
                    if rest.starts_with(word) {
                        self.pos += word.len();
                        return Ok(Literal::Bool(value));
                    }
                }
                Err(Error::format("npy header: unsupported value"))
            }
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Literal)>> {
        self.expect(b'{')?;
        let mut entries = Vec::new();
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = self.string()?;
            self.expect(b':')?;
            let value = self.literal()?;
            entries.push((key, value));
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(Error::format("npy header: expected ',' or '}'")),
            }
        }
        self.skip_spaces();
        if self.pos != self.src.len() {
            return Err(Error::format("npy header: trailing characters after dict"));
        }
        Ok(entries)
    }
}

/// Parses and validates a pose file written by [`write_pose_file`] (or by
/// numpy for a `(4, 4)` float64 array).
pub fn read_pose_file(bytes: &[u8]) -> Result<PoseRecord> {
    if bytes.len() < NPY_PREAMBLE {
        return Err(Error::format("npy file truncated before header"));
    }
    if &bytes[..6] != NPY_MAGIC {
        return Err(Error::format("not an npy file (bad magic)"));
    }
    if bytes[6..8] != [1, 0] {
        return Err(Error::format(format!(
            "unsupported npy version {}.{}",
            bytes[6], bytes[7]
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let data_start = NPY_PREAMBLE + header_len;
    if bytes.len() < data_start {
        return Err(Error::format("npy file truncated inside header"));
    }
    let header = &bytes[NPY_PREAMBLE..data_start];
    let Some((b'\n', dict)) = header.split_last() else {
        return Err(Error::format("npy header does not end with a newline"));
    };
    if !dict.is_ascii() {
        return Err(Error::format("npy header is not ASCII"));
    }
    let entries = HeaderParser { src: dict, pos: 0 }.dict()?;
    let mut seen = BTreeSet::new();
    for (key, value) in &entries {
        if !seen.insert(key.as_str()) {
            return Err(Error::format(format!("npy header: duplicate key {key:?}")));
        }
        match (key.as_str(), value) {
            ("descr", Literal::Str(d)) if d == "<f8" => {}
            ("descr", other) => return Err(Error::format(format!("unsupported dtype {other:?}"))),
            ("fortran_order", Literal::Bool(false)) => {}
            ("fortran_order", _) => {
                return Err(Error::format("fortran-order arrays are not supported"))
            }
            ("shape", Literal::Tuple(dims)) if dims[..] == [4, 4] => {}
            ("shape", other) => {
                return Err(Error::format(format!(
                    "expected shape (4, 4), got {other:?}"
                )))
            }
            (other, _) => return Err(Error::format(format!("npy header: unknown key {other:?}"))),
        }
    }
    if seen.len() != 3 {
        return Err(Error::format("npy header is missing required keys"));
    }
    let data = &bytes[data_start..];
    if data.len() != POSE_DATA_BYTES {
        return Err(Error::format(format!(
            "expected {POSE_DATA_BYTES} data bytes, found {}",
            data.len()
        )));
    }
    let mut values = [0.0; 16];
    for (v, chunk) in values.iter_mut().zip(data.chunks_exact(8)) {
        *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    PoseRecord::new(values)
}

pub fn pose_file_name(i: usize) -> String {
    format!("pose/pose{i}.npy")
}

pub fn rgb_file_name(i: usize) -> String {
    format!("rgb/{i}.jpg")
}

pub fn mask_file_name(i: usize) -> String {
    format!("mask/{i}.png")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub pose: String,
    pub rgb: String,
    pub mask: String,
}

impl ManifestEntry {
    pub fn for_index(index: usize) -> Self {
        ManifestEntry {
            index,
            pose: pose_file_name(index),
            rgb: rgb_file_name(index),
            mask: mask_file_name(index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub count: usize,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(count: usize) -> Self {
        Manifest {
            count,
            entries: (0..count).map(ManifestEntry::for_index).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// File names of a built dataset, relative to `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub count: usize,
    pub pose_files: Vec<String>,
    pub rgb_files: Vec<String>,
    pub mask_files: Vec<String>,
}

/// Creates `pose/`, `rgb/` and `mask/` under `root`, writes one pose file
/// per record and a manifest naming the images the renderer must supply.
pub fn build_dataset_layout(root: &Path, poses: &[PoseRecord]) -> Result<DatasetLayout> {
    if poses.is_empty() {
        return Err(Error::param("a dataset needs at least one pose"));
    }
    for dir in ["pose", "rgb", "mask"] {
        fs::create_dir_all(root.join(dir))?;
    }
    for (i, record) in poses.iter().enumerate() {
        fs::write(root.join(pose_file_name(i)), write_pose_file(record))?;
    }
    let manifest = Manifest::new(poses.len());
    fs::write(root.join(MANIFEST_FILE), manifest.to_json())?;
    log::info!("wrote {} pose files under {}", poses.len(), root.display());
    Ok(DatasetLayout {
        root: root.to_path_buf(),
        count: poses.len(),
        pose_files: (0..poses.len()).map(pose_file_name).collect(),
        rgb_files: (0..poses.len()).map(rgb_file_name).collect(),
        mask_files: (0..poses.len()).map(mask_file_name).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    MissingRoot,
    MissingDirectory,
    Manifest,
    UnexpectedFile,
    MissingIndex,
    PoseFormat,
    NotRigid,
    MissingImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub index: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// Number of entries the dataset is expected to hold.
    pub count: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, index: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            index,
            message: message.into(),
        });
    }
}

/// `pose{i}.npy` with `i` in plain decimal (no sign, no leading zeros).
fn parse_pose_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("pose")?.strip_suffix(".npy")?;
    if digits.is_empty()
        || !digits.bytes().all(|b| b.is_ascii_digit())
        || (digits.len() > 1 && digits.starts_with('0'))
    {
        return None;
    }
    digits.parse().ok()
}

/// Checks a dataset directory against the layout. Never fails: every
/// problem becomes an entry of the returned report.
pub fn validate_dataset(root: &Path, require_images: bool) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !root.is_dir() {
        report.push(
            ViolationKind::MissingRoot,
            None,
            format!("dataset root {} does not exist", root.display()),
        );
        return report;
    }
    for dir in ["pose", "rgb", "mask"] {
        if !root.join(dir).is_dir() {
            report.push(
                ViolationKind::MissingDirectory,
                None,
                format!("missing directory {dir}/"),
            );
        }
    }

    let mut found = BTreeSet::new();
    if let Ok(entries) = fs::read_dir(root.join("pose")) {
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for name in names {
            match parse_pose_index(&name) {
                Some(i) => {
                    found.insert(i);
                }
                None => report.push(
                    ViolationKind::UnexpectedFile,
                    None,
                    format!("unexpected file pose/{name}"),
                ),
            }
        }
    }

    let manifest_count = match fs::read_to_string(root.join(MANIFEST_FILE)) {
        Err(_) => {
            report.push(ViolationKind::Manifest, None, "missing manifest.json");
            None
        }
        Ok(text) => match serde_json::from_str::<Manifest>(&text) {
            Err(e) => {
                report.push(
                    ViolationKind::Manifest,
                    None,
                    format!("unreadable manifest.json: {e}"),
                );
                None
            }
            Ok(manifest) => {
                if manifest != Manifest::new(manifest.count) {
                    report.push(
                        ViolationKind::Manifest,
                        None,
                        "manifest.json entries do not follow the naming template",
                    );
                }
                Some(manifest.count)
            }
        },
    };
    let count = manifest_count.unwrap_or_else(|| found.last().map_or(0, |i| i + 1));
    report.count = count;

    for &i in found.range(count..) {
        report.push(
            ViolationKind::UnexpectedFile,
            Some(i),
            format!("pose file for index {i} beyond count {count}"),
        );
    }
    for i in 0..count {
        if !found.contains(&i) {
            report.push(
                ViolationKind::MissingIndex,
                Some(i),
                format!("missing index {i}"),
            );
            continue;
        }
        let path = root.join(pose_file_name(i));
        match fs::read(&path)
            .map_err(Error::from)
            .and_then(|b| read_pose_file(&b))
        {
            Ok(_) => {}
            Err(Error::Validation(msg)) => report.push(
                ViolationKind::NotRigid,
                Some(i),
                format!("index {i}: {msg}"),
            ),
            Err(e) => report.push(
                ViolationKind::PoseFormat,
                Some(i),
                format!("index {i}: {e}"),
            ),
        }
    }

    if require_images {
        for i in 0..count {
            for name in [rgb_file_name(i), mask_file_name(i)] {
                let ok = fs::metadata(root.join(&name)).is_ok_and(|m| m.is_file() && m.len() > 0);
                if !ok {
                    report.push(
                        ViolationKind::MissingImage,
                        Some(i),
                        format!("missing or empty {name}"),
                    );
                }
            }
        }
    }
    report
}
