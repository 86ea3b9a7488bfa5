//! Binary dataset interchange format.
//!
//! Layout, all little-endian: magic `BWFT-DATA`, version u16, sample count
//! u32, height/width/channels u16, class count u16, labels as u16 array,
//! images as raw f32, and a trailing CRC32 over every preceding byte.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};

const MAGIC: &[u8; 9] = b"BWFT-DATA";
const VERSION: u16 = 1;

impl LabeledDataset {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes();
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let [h, w, c] = self.sample_shape();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(h as u16).to_le_bytes());
        out.extend_from_slice(&(w as u16).to_le_bytes());
        out.extend_from_slice(&(c as u16).to_le_bytes());
        out.extend_from_slice(&(self.num_classes() as u16).to_le_bytes());
        for &l in self.labels() {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for v in self.images() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LabeledDataset> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LabeledDataset> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(MAGIC.len(), "magic")?;
        if magic != MAGIC {
            return Err(Error::Format { offset: 0, what: "bad magic, expected BWFT-DATA".into() });
        }
        let version = r.take_u16("version")?;
        if version != VERSION {
            return Err(Error::Format {
                offset: r.pos as u64 - 2,
                what: format!("unsupported version {version}"),
            });
        }
        let m = r.take_u32("sample count")? as usize;
        let h = r.take_u16("height")? as usize;
        let w = r.take_u16("width")? as usize;
        let c = r.take_u16("channels")? as usize;
        let num_classes = r.take_u16("class count")? as usize;

        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            labels.push(r.take_u16("label")?);
        }
        let pixel_count = m * h * w * c;
        let data_offset = r.pos;
        let raw = r.take(pixel_count * 4, "image data")?;
        let images: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();

        let crc_offset = r.pos;
        let stored = r.take_u32("checksum")?;
        let computed = crc32(&bytes[..crc_offset]);
        if stored != computed {
            return Err(Error::Format {
                offset: crc_offset as u64,
                what: format!("checksum mismatch: stored {stored:08x}, computed {computed:08x}"),
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format {
                offset: r.pos as u64,
                what: "trailing bytes after checksum".into(),
            });
        }

        LabeledDataset::new(
            h,
            w,
            c,
            num_classes,
            images,
            labels,
            (0..num_classes).map(|i| format!("class{i}")).collect(),
        )
        .map_err(|e| Error::Format { offset: data_offset as u64, what: e.to_string() })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                what: format!("truncated while reading {what}"),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn take_u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn take_u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// IEEE CRC32 (polynomial 0xEDB88320), table-driven.
pub fn crc32(bytes: &[u8]) -> u32 {
    static TABLE: std::sync::OnceLock<[u32; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0u32; 256];
        for (i, slot) in t.iter_mut().enumerate() {
            let mut v = i as u32;
            for _ in 0..8 {
                v = if v & 1 != 0 { 0xEDB8_8320 ^ (v >> 1) } else { v >> 1 };
            }
            *slot = v;
        }
        t
    });
    let mut crc = !0u32;
    for &b in bytes {
        crc = table[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}

#[cfg(test)]
mod tests {
    use super::super::{generate, SyntheticTaskSpec};
    use super::*;

    #[test]
    fn crc32_known_vector() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let data = generate(&SyntheticTaskSpec {
            samples_per_class: 3,
            image_size: 8,
            seed: 3,
            ..SyntheticTaskSpec::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("task.bwft");
        data.save(&path).unwrap();
        let loaded = LabeledDataset::load(&path).unwrap();
        assert_eq!(loaded.labels(), data.labels());
        assert_eq!(loaded.sample_shape(), data.sample_shape());
        assert_eq!(loaded.num_classes(), data.num_classes());
        for (a, b) in loaded.images().iter().zip(data.images()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Serializing again produces identical bytes.
        assert_eq!(loaded.to_bytes(), data.to_bytes());
    }

    #[test]
    fn corrupted_magic_names_offset_zero() {
        let data = generate(&SyntheticTaskSpec {
            samples_per_class: 1,
            image_size: 4,
            ..SyntheticTaskSpec::default()
        })
        .unwrap();
        let mut bytes = data.to_bytes();
        bytes[3] = b'?';
        match LabeledDataset::from_bytes(&bytes) {
            Err(Error::Format { offset: 0, what }) => assert!(what.contains("magic")),
            other => panic!("expected magic error, got {other:?}"),
        }
    }

    #[test]
    fn flipped_pixel_fails_checksum() {
        let data = generate(&SyntheticTaskSpec {
            samples_per_class: 1,
            image_size: 4,
            ..SyntheticTaskSpec::default()
        })
        .unwrap();
        let mut bytes = data.to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        match LabeledDataset::from_bytes(&bytes) {
            Err(Error::Format { what, .. }) => assert!(what.contains("checksum")),
            other => panic!("expected checksum error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let data = generate(&SyntheticTaskSpec {
            samples_per_class: 1,
            image_size: 4,
            ..SyntheticTaskSpec::default()
        })
        .unwrap();
        let bytes = data.to_bytes();
        assert!(matches!(
            LabeledDataset::from_bytes(&bytes[..bytes.len() - 2]),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn empty_dataset_round_trips() {
        let empty =
            LabeledDataset::new(4, 4, 3, 5, vec![], vec![], (0..5).map(|i| format!("class{i}")).collect())
                .unwrap();
        let bytes = empty.to_bytes();
        let loaded = LabeledDataset::from_bytes(&bytes).unwrap();
        assert_eq!(loaded.len(), 0);
        assert_eq!(loaded.to_bytes(), bytes);
    }
}
