use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Volume3D, VolumeError};

/// Voxel encodings accepted in the raw data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    /// `MET_SHORT`: 16-bit signed integer.
    Short,
    /// `MET_FLOAT`: 32-bit IEEE float.
    Float,
}

impl ElementType {
    pub fn size(self) -> usize {
        match self {
            ElementType::Short => 2,
            ElementType::Float => 4,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "MET_SHORT" => Some(ElementType::Short),
            "MET_FLOAT" => Some(ElementType::Float),
            _ => None,
        }
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementType::Short => "MET_SHORT",
            ElementType::Float => "MET_FLOAT",
        })
    }
}

/// Parsed `.mhd` header.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    pub element_type: ElementType,
    pub big_endian: bool,
    /// Bytes to skip at the start of the data file.
    pub header_size: u64,
    /// Data file, resolved against the header's directory.
    pub data_file: PathBuf,
    /// Keys that were present but not understood.
    pub warnings: Vec<String>,
}

// Keys that carry no information this reader needs.
const IGNORED_KEYS: &[&str] = &[
    "Comment",
    "AnatomicalOrientation",
    "CenterOfRotation",
    "ElementSize",
    "Name",
    "ID",
    "ParentID",
    "Color",
];

/// Reads and validates a MetaImage header without touching the data file.
pub fn read_metaimage_header(header_path: &Path) -> Result<MetaHeader, VolumeError> {
    let text = fs::read_to_string(header_path).map_err(|source| VolumeError::Io {
        path: header_path.to_path_buf(),
        source,
    })?;
    parse_header(&text, header_path)
}

fn parse_header(text: &str, path: &Path) -> Result<MetaHeader, VolumeError> {
    let invalid = |key: &str, value: &str| VolumeError::InvalidValue {
        path: path.to_path_buf(),
        key: key.to_string(),
        value: value.to_string(),
    };

    let mut ndims = None;
    let mut dims = None;
    let mut spacing = None;
    let mut origin = None;
    let mut element_type = None;
    let mut data_file = None;
    let mut big_endian = false;
    let mut header_size = 0u64;
    let mut warnings = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(VolumeError::MalformedHeaderLine {
                path: path.to_path_buf(),
                line: lineno + 1,
                text: raw.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "ObjectType" => {
                if value != "Image" {
                    return Err(VolumeError::UnsupportedObjectType {
                        path: path.to_path_buf(),
                        object_type: value.to_string(),
                    });
                }
            }
            "NDims" => {
                let n: usize = value.parse().map_err(|_| invalid(key, value))?;
                if n != 3 {
                    return Err(VolumeError::UnsupportedDimensionality {
                        path: path.to_path_buf(),
                        ndims: n,
                    });
                }
                ndims = Some(n);
            }
            "DimSize" => {
                let v: [usize; 3] = parse_triple(value).ok_or_else(|| invalid(key, value))?;
                if v.contains(&0) {
                    return Err(invalid(key, value));
                }
                dims = Some(v);
            }
            "ElementSpacing" => {
                let v: [f64; 3] = parse_triple(value).ok_or_else(|| invalid(key, value))?;
                if v.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err(invalid(key, value));
                }
                spacing = Some(v);
            }
            "Offset" | "Origin" | "Position" => {
                let v: [f64; 3] = parse_triple(value).ok_or_else(|| invalid(key, value))?;
                origin = Some(v);
            }
            "TransformMatrix" | "Rotation" | "Orientation" => {
                let m: Vec<f64> = parse_list(value).ok_or_else(|| invalid(key, value))?;
                let identity = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
                if m.len() != 9 || m.iter().zip(identity).any(|(a, b)| *a != b) {
                    return Err(VolumeError::NonIdentityTransform {
                        path: path.to_path_buf(),
                    });
                }
            }
            "ElementType" => {
                element_type = Some(ElementType::parse(value).ok_or_else(|| {
                    VolumeError::UnsupportedElementType {
                        path: path.to_path_buf(),
                        element_type: value.to_string(),
                    }
                })?);
            }
            "ElementByteOrderMSB" | "BinaryDataByteOrderMSB" => {
                big_endian = parse_bool(value).ok_or_else(|| invalid(key, value))?;
            }
            "CompressedData" => {
                if parse_bool(value).ok_or_else(|| invalid(key, value))? {
                    return Err(VolumeError::Compressed {
                        path: path.to_path_buf(),
                    });
                }
            }
            "BinaryData" => {
                if !parse_bool(value).ok_or_else(|| invalid(key, value))? {
                    return Err(invalid(key, value));
                }
            }
            "ElementNumberOfChannels" => {
                if value != "1" {
                    return Err(invalid(key, value));
                }
            }
            "HeaderSize" => {
                header_size = value.parse().map_err(|_| invalid(key, value))?;
            }
            "ElementDataFile" => {
                if value == "LOCAL" || value.starts_with("LIST") || value.contains('%') {
                    return Err(invalid(key, value));
                }
                let base = path.parent().unwrap_or_else(|| Path::new(""));
                data_file = Some(base.join(value));
            }
            k if IGNORED_KEYS.contains(&k) => {}
            other => {
                log::warn!("{}: ignoring unknown header key `{}`", path.display(), other);
                warnings.push(format!("unknown key `{other}`"));
            }
        }
    }

    let missing = |key| VolumeError::MissingKey {
        path: path.to_path_buf(),
        key,
    };
    ndims.ok_or_else(|| missing("NDims"))?;
    Ok(MetaHeader {
        dims: dims.ok_or_else(|| missing("DimSize"))?,
        spacing: spacing.unwrap_or([1.0; 3]),
        origin: origin.unwrap_or([0.0; 3]),
        element_type: element_type.ok_or_else(|| missing("ElementType"))?,
        big_endian,
        header_size,
        data_file: data_file.ok_or_else(|| missing("ElementDataFile"))?,
        warnings,
    })
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Option<Vec<T>> {
    value.split_whitespace().map(|t| t.parse().ok()).collect()
}

fn parse_triple<T: std::str::FromStr + Copy>(value: &str) -> Option<[T; 3]> {
    let v = parse_list::<T>(value)?;
    match v.as_slice() {
        [a, b, c] => Some([*a, *b, *c]),
        _ => None,
    }
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

/// Loads a MetaImage volume. Values are returned in the file's units
/// (Hounsfield units for CT).
pub fn load_metaimage(header_path: &Path) -> Result<Volume3D, VolumeError> {
    let header = read_metaimage_header(header_path)?;
    let bytes = fs::read(&header.data_file).map_err(|source| VolumeError::Io {
        path: header.data_file.clone(),
        source,
    })?;

    let [nx, ny, nz] = header.dims;
    let count = nx * ny * nz;
    let elem = header.element_type.size();
    let expected = header.header_size + (count * elem) as u64;
    if bytes.len() as u64 != expected {
        return Err(VolumeError::SizeMismatch {
            path: header.data_file.clone(),
            expected,
            actual: bytes.len() as u64,
        });
    }

    let payload = &bytes[header.header_size as usize..];
    let data: Vec<f32> = match header.element_type {
        ElementType::Short => payload
            .chunks_exact(2)
            .map(|c| {
                let b = [c[0], c[1]];
                f32::from(if header.big_endian {
                    i16::from_be_bytes(b)
                } else {
                    i16::from_le_bytes(b)
                })
            })
            .collect(),
        ElementType::Float => payload
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                if header.big_endian {
                    f32::from_be_bytes(b)
                } else {
                    f32::from_le_bytes(b)
                }
            })
            .collect(),
    };
    Volume3D::new(header.dims, header.spacing, header.origin, data)
}

/// Writes `volume` as a little-endian MetaImage pair: the header at
/// `header_path` and the raw data beside it with a `.raw` extension.
///
/// `MET_SHORT` output requires every voxel to be an integer in `i16` range.
pub fn write_metaimage(
    volume: &Volume3D,
    header_path: &Path,
    element_type: ElementType,
) -> Result<(), VolumeError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| VolumeError::Io { path, source }
    };
    let raw_path = header_path.with_extension("raw");
    let raw_name = raw_path
        .file_name()
        .expect("header path has a file name")
        .to_string_lossy()
        .into_owned();

    let mut payload = Vec::with_capacity(volume.data().len() * element_type.size());
    match element_type {
        ElementType::Short => {
            for &v in volume.data() {
                if v.fract() != 0.0 || v < f32::from(i16::MIN) || v > f32::from(i16::MAX) {
                    return Err(VolumeError::InvalidVolume(format!(
                        "value {v} is not representable as MET_SHORT"
                    )));
                }
                payload.extend_from_slice(&(v as i16).to_le_bytes());
            }
        }
        ElementType::Float => {
            for &v in volume.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    let [nx, ny, nz] = volume.dims();
    let [sx, sy, sz] = volume.spacing();
    let [ox, oy, oz] = volume.origin();
    let header = format!(
        "ObjectType = Image\n\
         NDims = 3\n\
         BinaryData = True\n\
         BinaryDataByteOrderMSB = False\n\
         CompressedData = False\n\
         TransformMatrix = 1 0 0 0 1 0 0 0 1\n\
         Offset = {ox} {oy} {oz}\n\
         ElementSpacing = {sx} {sy} {sz}\n\
         DimSize = {nx} {ny} {nz}\n\
         ElementType = {element_type}\n\
         ElementDataFile = {raw_name}\n"
    );

    fs::write(&raw_path, &payload).map_err(io_err(&raw_path))?;
    let mut f = fs::File::create(header_path).map_err(io_err(header_path))?;
    f.write_all(header.as_bytes()).map_err(io_err(header_path))?;
    Ok(())
}
