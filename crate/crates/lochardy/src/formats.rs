//! On-disk formats.
//!
//! * `.gf`: `{"version":1,"n":..,"L":..,"J":..,"data":[..]}` with the samples
//!   in row-major order (the first index varies slowest).
//! * `.pspec`: `{"kind": "constant" | "logfamily" | "bump" | "samples", ..}`.
//! * `.atoms`: a JSON array of atom entries whose samples live in a shared
//!   payload file, by default `<name>.atoms.gf`.
//!
//! Floats are written by `serde_json`, which emits the shortest decimal that
//! parses back to the identical `f64`, so files round-trip bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use lochardy_core::atoms::{Atom, AtomicDecomposition, Provenance};
use lochardy_core::exponent::ExponentSpec;
use lochardy_core::{Cube, Grid, GridFunction, IndexBox, LocalField};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const GF_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed JSON")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: field `{field}`: {message}")]
    Field { path: PathBuf, field: String, message: String },
}

fn field_error(path: &Path, field: &str, message: impl Into<String>) -> FormatError {
    FormatError::Field { path: path.to_path_buf(), field: field.to_string(), message: message.into() }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.to_path_buf(), source })
}

/// Serialises to pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| FormatError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| FormatError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

/// Grid header shared by `.gf` files and reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "J")]
    pub level: u32,
}

impl GridInfo {
    pub fn of(g: &Grid) -> Self {
        GridInfo { n: g.dim(), half_width: g.half_width(), level: g.level() }
    }

    pub fn grid(&self) -> lochardy_core::Result<Grid> {
        Grid::new(self.n, self.half_width, self.level)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GfFile {
    pub version: u32,
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "J")]
    pub level: u32,
    pub data: Vec<f64>,
}

impl GfFile {
    pub fn new(g: &Grid, data: Vec<f64>) -> Self {
        GfFile { version: GF_VERSION, n: g.dim(), half_width: g.half_width(), level: g.level(), data }
    }

    pub fn from_function(f: &GridFunction) -> Self {
        GfFile::new(f.grid(), f.values().to_vec())
    }

    pub fn grid_info(&self) -> GridInfo {
        GridInfo { n: self.n, half_width: self.half_width, level: self.level }
    }

    fn header(&self, path: &Path) -> Result<Grid, FormatError> {
        if self.version != GF_VERSION {
            return Err(field_error(path, "version", format!("unsupported version {}", self.version)));
        }
        self.grid_info().grid().map_err(|e| field_error(path, "n/L/J", e.to_string()))
    }

    pub fn to_function(&self, path: &Path) -> Result<GridFunction, FormatError> {
        let g = self.header(path)?;
        if self.data.len() != g.len() {
            return Err(field_error(path, "data", format!("expected {} samples, found {}", g.len(), self.data.len())));
        }
        GridFunction::new(g, self.data.clone()).map_err(|e| field_error(path, "data", e.to_string()))
    }
}

pub fn read_gf(path: &Path) -> Result<GridFunction, FormatError> {
    read_json::<GfFile>(path)?.to_function(path)
}

pub fn write_gf(path: &Path, f: &GridFunction) -> Result<(), FormatError> {
    write_json(path, &GfFile::from_function(f))
}

/// Exponent spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PSpec {
    Constant { p: f64 },
    /// `p_inf + c / log(e + |x|)`.
    Logfamily { p_inf: f64, c: f64 },
    Bump { base: f64, amplitude: f64, center: Vec<f64>, radius: f64 },
    /// Lattice samples, row-major; the length must match the grid in use.
    Samples { values: Vec<f64>, p_inf: f64 },
}

impl PSpec {
    pub fn to_spec(&self) -> ExponentSpec {
        match self {
            PSpec::Constant { p } => ExponentSpec::Constant(*p),
            PSpec::Logfamily { p_inf, c } => ExponentSpec::LogFamily { p_inf: *p_inf, c: *c },
            PSpec::Bump { base, amplitude, center, radius } => ExponentSpec::Bump {
                base: *base,
                amplitude: *amplitude,
                center: [center.first().copied().unwrap_or(0.0), center.get(1).copied().unwrap_or(0.0)],
                radius: *radius,
            },
            PSpec::Samples { values, p_inf } => ExponentSpec::Samples { values: values.clone(), p_inf: *p_inf },
        }
    }

    pub fn check(&self, path: &Path) -> Result<(), FormatError> {
        let bad = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(field_error(path, field, format!("must be positive and finite, got {v}")))
            }
        };
        match self {
            PSpec::Constant { p } => bad("p", *p),
            PSpec::Logfamily { p_inf, c } => {
                bad("p_inf", *p_inf)?;
                if !c.is_finite() {
                    return Err(field_error(path, "c", "must be finite"));
                }
                Ok(())
            }
            PSpec::Bump { base, radius, center, .. } => {
                bad("base", *base)?;
                bad("radius", *radius)?;
                if center.is_empty() || center.len() > 2 {
                    return Err(field_error(path, "center", "needs one or two coordinates"));
                }
                Ok(())
            }
            PSpec::Samples { values, p_inf } => {
                bad("p_inf", *p_inf)?;
                if values.is_empty() {
                    return Err(field_error(path, "values", "empty"));
                }
                Ok(())
            }
        }
    }
}

pub fn read_pspec(path: &Path) -> Result<PSpec, FormatError> {
    let spec: PSpec = read_json(path)?;
    spec.check(path)?;
    Ok(spec)
}

/// `q` as a number, or the string `"inf"`.
mod q_value {
    use super::*;

    pub fn serialize<S: Serializer>(q: &f64, s: S) -> Result<S::Ok, S::Error> {
        if q.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*q)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeEntry {
    pub center: Vec<f64>,
    pub side: f64,
}

/// Location of one atom's samples inside the payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRef {
    pub file: String,
    pub offset: usize,
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomEntry {
    pub cube: CubeEntry,
    pub lambda: f64,
    #[serde(with = "q_value")]
    pub q: f64,
    pub d: usize,
    pub data_ref: DataRef,
}

/// Writes `path` and its payload `<path>.gf`; the payload carries the grid
/// header and the atoms' window samples concatenated in entry order.
pub fn write_atoms(path: &Path, dec: &AtomicDecomposition) -> Result<(), FormatError> {
    let payload_path = payload_path(path);
    let payload_name = payload_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut data = Vec::new();
    let mut entries = Vec::with_capacity(dec.atoms.len());
    let n = dec.grid.dim();
    for (a, lambda) in dec.atoms.iter().zip(&dec.coefficients) {
        entries.push(AtomEntry {
            cube: CubeEntry { center: a.cube.center[..n].to_vec(), side: a.cube.side },
            lambda: *lambda,
            q: a.q,
            d: a.d,
            data_ref: DataRef {
                file: payload_name.clone(),
                offset: data.len(),
                lo: a.samples.window.lo[..n].to_vec(),
                hi: a.samples.window.hi[..n].to_vec(),
            },
        });
        data.extend_from_slice(&a.samples.values);
    }
    write_json(&payload_path, &GfFile::new(&dec.grid, data))?;
    write_json(path, &entries)
}

pub fn payload_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".gf");
    PathBuf::from(s)
}

fn index_pair(path: &Path, field: &str, v: &[usize], n: usize) -> Result<[usize; 2], FormatError> {
    if v.len() != n {
        return Err(field_error(path, field, format!("expected {n} entries, found {}", v.len())));
    }
    Ok([v[0], if n == 2 { v[1] } else { 0 }])
}

pub fn read_atoms(path: &Path) -> Result<AtomicDecomposition, FormatError> {
    let entries: Vec<AtomEntry> = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut payloads: Vec<(String, GfFile, Grid)> = Vec::new();
    let mut atoms = Vec::with_capacity(entries.len());
    let mut coefficients = Vec::with_capacity(entries.len());
    let mut grid: Option<Grid> = None;
    for (i, e) in entries.iter().enumerate() {
        let at = |f: &str| format!("[{i}].{f}");
        if !payloads.iter().any(|(name, _, _)| *name == e.data_ref.file) {
            let p = dir.join(&e.data_ref.file);
            let file: GfFile = read_json(&p)?;
            let g = file.header(&p)?;
            payloads.push((e.data_ref.file.clone(), file, g));
        }
        let (_, file, g) = payloads.iter().find(|(name, _, _)| *name == e.data_ref.file).expect("payload loaded");
        if grid.is_some_and(|h| h != *g) {
            return Err(field_error(path, &at("data_ref.file"), "payloads live on different grids"));
        }
        grid = Some(*g);
        let n = g.dim();
        let lo = index_pair(path, &at("data_ref.lo"), &e.data_ref.lo, n)?;
        let hi = index_pair(path, &at("data_ref.hi"), &e.data_ref.hi, n)?;
        let hi = [hi[0], if n == 2 { hi[1] } else { 1 }];
        if (0..n).any(|d| lo[d] >= hi[d] || hi[d] > g.side()) {
            return Err(field_error(path, &at("data_ref"), "window outside the grid"));
        }
        let window = IndexBox::new(n, lo, hi);
        let end = e.data_ref.offset + window.len();
        if end > file.data.len() {
            return Err(field_error(path, &at("data_ref.offset"), "window runs past the payload"));
        }
        if e.cube.center.len() != n {
            return Err(field_error(path, &at("cube.center"), format!("expected {n} coordinates")));
        }
        if !(e.cube.side > 0.0) {
            return Err(field_error(path, &at("cube.side"), "must be positive"));
        }
        if !(e.q > 1.0) {
            return Err(field_error(path, &at("q"), "must exceed 1"));
        }
        let center = [e.cube.center[0], if n == 2 { e.cube.center[1] } else { 0.0 }];
        let samples = LocalField { grid: *g, window, values: file.data[e.data_ref.offset..end].to_vec() };
        atoms.push(Atom { cube: Cube::new(n, center, e.cube.side), samples, q: e.q, d: e.d });
        coefficients.push(e.lambda);
    }
    let grid = grid.ok_or_else(|| field_error(path, "[]", "no atoms"))?;
    AtomicDecomposition::new(grid, atoms, coefficients, Provenance::Manual)
        .map_err(|e| field_error(path, "lambda", e.to_string()))
}
