//! `SERW` weight checkpoints.
//!
//! Layout (little endian): magic `SERW`, `u16` version, `u32` entry count, then
//! one manifest record per entry (`u8` layer tag, `u8` role, `u8` ndim,
//! `ndim x u32` dims), then every payload as `f32` in manifest order, then a
//! `u32` CRC32 of all preceding bytes.

use std::path::Path;

use super::{LayerTag, NnError, Role, Scalar, StateEntry, Tensor};

pub const MAGIC: &[u8; 4] = b"SERW";
pub const VERSION: u16 = 1;

pub fn encode_state<T: Scalar>(entries: &[StateEntry<T>]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        out.push(e.tag as u8);
        out.push(e.role as u8);
        out.push(e.tensor.shape().len() as u8);
        for &d in e.tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for e in entries {
        for v in e.tensor.data() {
            out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(NnError::Truncated)?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_state<T: Scalar>(bytes: &[u8]) -> Result<Vec<StateEntry<T>>, NnError> {
    if bytes.len() < 4 + 2 + 4 + 4 {
        return Err(NnError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(NnError::BadMagic);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(NnError::ChecksumMismatch);
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u16()?;
    if version != VERSION {
        return Err(NnError::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    let mut manifest = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let tag = r.u8()?;
        let role = r.u8()?;
        let tag = LayerTag::from_u8(tag)
            .ok_or_else(|| NnError::StateMismatch(format!("unknown layer tag {tag}")))?;
        let role = Role::from_u8(role)
            .ok_or_else(|| NnError::StateMismatch(format!("unknown role {role}")))?;
        let ndim = r.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32()? as usize);
        }
        manifest.push((tag, role, dims));
    }
    let mut entries = Vec::with_capacity(manifest.len());
    for (tag, role, dims) in manifest {
        let n: usize = dims.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or(NnError::Truncated)?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        entries.push(StateEntry {
            tag,
            role,
            tensor: Tensor::from_vec(&dims, data)?,
        });
    }
    if r.pos != body.len() {
        return Err(NnError::StateMismatch("trailing bytes after payload".into()));
    }
    Ok(entries)
}

pub fn write_state_file<T: Scalar>(path: &Path, entries: &[StateEntry<T>]) -> Result<(), NnError> {
    std::fs::write(path, encode_state(entries))
        .map_err(|e| NnError::Io(format!("{}: {e}", path.display())))
}

pub fn read_state_file<T: Scalar>(path: &Path) -> Result<Vec<StateEntry<T>>, NnError> {
    let bytes =
        std::fs::read(path).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))?;
    decode_state(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<StateEntry<f32>> {
        vec![
            StateEntry {
                tag: LayerTag::Conv,
                role: Role::Weight,
                tensor: Tensor::from_vec(&[2, 1, 1, 1], vec![0.5, -1.25]).unwrap(),
            },
            StateEntry {
                tag: LayerTag::BatchNorm,
                role: Role::RunningVar,
                tensor: Tensor::from_vec(&[2], vec![1.0, 3.0]).unwrap(),
            },
        ]
    }

    #[test]
    fn round_trip() {
        let bytes = encode_state(&sample());
        assert_eq!(&bytes[..4], b"SERW");
        assert_eq!(decode_state::<f32>(&bytes).unwrap(), sample());
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = encode_state(&sample());
        let k = bytes.len() - 6;
        bytes[k] ^= 0x40;
        assert_eq!(decode_state::<f32>(&bytes).unwrap_err(), NnError::ChecksumMismatch);
        let bytes = encode_state(&sample());
        assert_eq!(
            decode_state::<f32>(&bytes[..bytes.len() - 3]).unwrap_err(),
            NnError::ChecksumMismatch
        );
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_state::<f32>(&bad).unwrap_err(), NnError::BadMagic);
    }
}
