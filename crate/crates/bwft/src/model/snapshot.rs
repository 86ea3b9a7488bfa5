//! Immutable full-parameter snapshots and their binary file format.
//!
//! Layout: magic `BWFT-SNAP`, version u16, 32-byte architecture fingerprint,
//! then one record per tensor: name length (u16), name bytes, rank (u8),
//! extents (u32 each), and the values as little-endian f32. Everything is
//! little-endian; round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::SequentialModel;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 9] = b"BWFT-SNAP";
const VERSION: u16 = 1;

/// Where a snapshot came from: the pre-training seed and a digest of the
/// pre-training configuration. Informational only; not stored in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub config_digest: String,
}

impl Provenance {
    pub fn unknown() -> Provenance {
        Provenance { seed: 0, config_digest: "unknown".to_string() }
    }
}

/// A deep copy of every parameter and buffer of a model at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    fingerprint: [u8; 32],
    tensors: Vec<(String, Tensor)>,
    provenance: Provenance,
}

impl Snapshot {
    /// Deep-copies the model's tensors.
    pub fn capture(model: &SequentialModel, provenance: Provenance) -> Snapshot {
        Snapshot {
            fingerprint: model.fingerprint(),
            tensors: model
                .named_tensors()
                .into_iter()
                .map(|(n, t)| (n, t.clone()))
                .collect(),
            provenance,
        }
    }

    /// Writes the snapshot's tensors back into `model`. The architectures
    /// must match exactly.
    pub fn restore(&self, model: &mut SequentialModel) -> Result<()> {
        let model_fp = model.fingerprint();
        if model_fp != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                snapshot: hex(&self.fingerprint),
                model: hex(&model_fp),
            });
        }
        model.load_named_tensors(&self.tensors)
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn fingerprint_hex(&self) -> String {
        hex(&self.fingerprint)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn tensors(&self) -> &[(String, Tensor)] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Digest of the serialized content; equal digests mean bit-equal
    /// snapshots.
    pub fn content_digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_bytes());
        hex(&hasher.finalize())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.fingerprint);
        for (name, tensor) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(tensor.rank() as u8);
            for &e in tensor.shape() {
                out.extend_from_slice(&(e as u32).to_le_bytes());
            }
            for v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Snapshot> {
        let mut r = Cursor::new(BufReader::new(File::open(path)?));
        let magic = r.take_bytes(MAGIC.len(), "magic")?;
        if magic != MAGIC {
            return Err(Error::Format { offset: 0, what: "bad magic, expected BWFT-SNAP".into() });
        }
        let version = r.take_u16("version")?;
        if version != VERSION {
            return Err(Error::Format {
                offset: r.pos - 2,
                what: format!("unsupported version {version}"),
            });
        }
        let fp_bytes = r.take_bytes(32, "fingerprint")?;
        let mut fingerprint = [0u8; 32];
        fingerprint.copy_from_slice(&fp_bytes);

        let mut tensors = Vec::new();
        loop {
            let name_len = match r.try_take_u16()? {
                None => break, // clean EOF between records
                Some(v) => v as usize,
            };
            let name_bytes = r.take_bytes(name_len, "tensor name")?;
            let name = String::from_utf8(name_bytes).map_err(|_| Error::Format {
                offset: r.pos - name_len as u64,
                what: "tensor name is not UTF-8".into(),
            })?;
            let rank = r.take_bytes(1, "rank")?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.take_u32("extent")? as usize);
            }
            let count: usize = shape.iter().product();
            let data_offset = r.pos;
            let raw = r.take_bytes(count * 4, "tensor data")?;
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let tensor = Tensor::from_vec(&shape, data).map_err(|e| Error::Format {
                offset: data_offset,
                what: e.to_string(),
            })?;
            tensors.push((name, tensor));
        }

        Ok(Snapshot { fingerprint, tensors, provenance: Provenance::unknown() })
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Byte reader that tracks its offset for format errors.
struct Cursor<R> {
    inner: R,
    pos: u64,
}

impl<R: Read> Cursor<R> {
    fn new(inner: R) -> Self {
        Cursor { inner, pos: 0 }
    }

    fn take_bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        let offset = self.pos;
        self.inner.read_exact(&mut buf).map_err(|_| Error::Format {
            offset,
            what: format!("truncated while reading {what}"),
        })?;
        self.pos += n as u64;
        Ok(buf)
    }

    fn take_u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take_bytes(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn take_u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take_bytes(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Reads a u16 or reports a clean EOF (None) when no bytes remain.
    fn try_take_u16(&mut self) -> Result<Option<u16>> {
        let mut buf = [0u8; 2];
        let mut filled = 0;
        while filled < 2 {
            let n = self.inner.read(&mut buf[filled..])?;
            if n == 0 {
                if filled == 0 {
                    return Ok(None);
                }
                return Err(Error::Format {
                    offset: self.pos,
                    what: "truncated record header".into(),
                });
            }
            filled += n;
            self.pos += n as u64;
        }
        Ok(Some(u16::from_le_bytes(buf)))
    }
}
