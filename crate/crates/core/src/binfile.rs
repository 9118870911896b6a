//! Header-plus-payload container for numeric arrays.
//!
//! A file is one line of JSON describing the arrays, a `\n`, then the raw
//! little-endian payload of every array in header order, row-major:
//!
//! ```text
//! {"format":"spatok-bin","version":1,"kind":"embedding-table","byte_order":"little","dtype":"f32",
//!  "arrays":[{"name":"table","shape":[8194,64]}],"meta":{...}}\n
//! <8194 * 64 * 4 bytes>
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BIN_FORMAT: &str = "spatok-bin";
pub const BIN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl BinArray {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        BinArray {
            name: name.into(),
            shape,
            data,
        }
    }

    /// Fails unless the array has exactly `shape`.
    pub fn expect_shape(&self, shape: &[usize]) -> Result<&[f64]> {
        if self.shape != shape {
            return Err(Error::Shape {
                expected: format!("{} {:?}", self.name, shape),
                actual: format!("{:?}", self.shape),
            });
        }
        Ok(&self.data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinFile {
    pub kind: String,
    pub dtype: Dtype,
    pub arrays: Vec<BinArray>,
    pub meta: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct ArrayHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
    byte_order: String,
    dtype: Dtype,
    arrays: Vec<ArrayHeader>,
    #[serde(default)]
    meta: serde_json::Map<String, serde_json::Value>,
}

impl BinFile {
    pub fn new(kind: impl Into<String>, dtype: Dtype) -> Self {
        BinFile {
            kind: kind.into(),
            dtype,
            arrays: Vec::new(),
            meta: serde_json::Map::new(),
        }
    }

    pub fn with_array(mut self, array: BinArray) -> Self {
        self.arrays.push(array);
        self
    }

    pub fn array(&self, name: &str) -> Result<&BinArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Format(format!("{} file has no array `{name}`", self.kind)))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "expected a `{kind}` file, found `{}`",
                self.kind
            )))
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        for a in &self.arrays {
            let n: usize = a.shape.iter().product();
            if n != a.data.len() {
                return Err(Error::Shape {
                    expected: format!("{} elements for {} {:?}", n, a.name, a.shape),
                    actual: a.data.len().to_string(),
                });
            }
        }
        let header = Header {
            format: BIN_FORMAT.into(),
            version: BIN_FORMAT_VERSION,
            kind: self.kind.clone(),
            byte_order: "little".into(),
            dtype: self.dtype,
            arrays: self
                .arrays
                .iter()
                .map(|a| ArrayHeader {
                    name: a.name.clone(),
                    shape: a.shape.clone(),
                })
                .collect(),
            meta: self.meta.clone(),
        };
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        for x in self.arrays.iter().flat_map(|a| &a.data) {
            match self.dtype {
                Dtype::F32 => out.extend_from_slice(&(*x as f32).to_le_bytes()),
                Dtype::F64 => out.extend_from_slice(&x.to_le_bytes()),
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("missing header line".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..split])?;
        if header.format != BIN_FORMAT || header.version != BIN_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported container {} v{}",
                header.format, header.version
            )));
        }
        if header.byte_order != "little" {
            return Err(Error::Format(format!("unsupported byte order {}", header.byte_order)));
        }
        let payload = &bytes[split + 1..];
        let width = header.dtype.width();
        let total: usize = header.arrays.iter().map(|a| a.shape.iter().product::<usize>()).sum();
        if payload.len() != total * width {
            return Err(Error::Format(format!(
                "payload holds {} bytes, header describes {}",
                payload.len(),
                total * width
            )));
        }
        let mut values = payload.chunks_exact(width).map(|c| match header.dtype {
            Dtype::F32 => f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64,
            Dtype::F64 => f64::from_le_bytes(c.try_into().expect("8-byte chunk")),
        });
        let arrays = header
            .arrays
            .into_iter()
            .map(|h| {
                let n = h.shape.iter().product();
                BinArray {
                    name: h.name,
                    shape: h.shape,
                    data: values.by_ref().take(n).collect(),
                }
            })
            .collect();
        Ok(BinFile {
            kind: header.kind,
            dtype: header.dtype,
            arrays,
            meta: header.meta,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_bytes(&bytes).map_err(|e| e.in_file(path))
    }
}
