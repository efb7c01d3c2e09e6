//! JSON serialization with a fixed decimal convention.
//!
//! Every float is written as `{:.16e}` — 17 significant digits, scientific
//! notation, C-locale digits only. That is enough to round-trip any f64
//! exactly, so write → read → write reproduces files byte for byte, and
//! fixture comparisons can be done on raw bytes.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::MatrixProductState;
use crate::tensor::ComplexTensor;

/// `serde_json` formatter that pins the float representation.
struct SciFloatFormatter;

impl serde_json::ser::Formatter for SciFloatFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{:.16e}", value as f64)
    }
}

/// Serialize with the 17-significant-digit float convention.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFloatFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Format(format!("JSON encoding failed: {e}")))?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("non-UTF8 JSON output: {e}")))
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_json_string(value)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: malformed JSON: {e}", path.display())))
}

/// Write a text file, creating parent directories as needed.
pub fn write_text_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// On-disk tensor: shape plus row-major `[re, im]` pairs.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: Vec<(f64, f64)>,
}

impl TensorRecord {
    pub fn from_tensor(t: &ComplexTensor) -> Self {
        Self {
            shape: t.shape().to_vec(),
            data: t.data().iter().map(|z| (z.re, z.im)).collect(),
        }
    }

    pub fn to_tensor(&self) -> Result<ComplexTensor> {
        let data = self
            .data
            .iter()
            .map(|&(re, im)| num_complex::Complex64::new(re, im))
            .collect();
        ComplexTensor::new(self.shape.clone(), data)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MpsFile {
    n_sites: usize,
    tensors: Vec<TensorRecord>,
}

pub fn save_mps(psi: &MatrixProductState, path: &Path) -> Result<()> {
    let file = MpsFile {
        n_sites: psi.n_sites(),
        tensors: psi.site_tensors().iter().map(TensorRecord::from_tensor).collect(),
    };
    write_json_file(path, &file)
}

pub fn load_mps(path: &Path) -> Result<MatrixProductState> {
    let file: MpsFile = read_json_file(path)?;
    if file.n_sites != file.tensors.len() {
        return Err(Error::Format(format!(
            "{}: n_sites is {} but {} tensors are present",
            path.display(),
            file.n_sites,
            file.tensors.len()
        )));
    }
    let tensors: Vec<ComplexTensor> = file
        .tensors
        .iter()
        .map(TensorRecord::to_tensor)
        .collect::<Result<_>>()?;
    let max_bond = tensors
        .iter()
        .map(|t| t.shape()[0].max(t.shape()[2]))
        .max()
        .unwrap_or(1);
    MatrixProductState::from_tensors(tensors, max_bond)
}
