//! `SERF` feature cache files.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "SERF" | version: u16 | layout: u8 | channels: u32 | height: u32 | frames: u32 | f32 payload
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{DspError, FeatureKind, FeatureTensor};

pub const SERF_MAGIC: &[u8; 4] = b"SERF";
pub const SERF_VERSION: u16 = 1;

pub fn write_serf<W: Write>(mut w: W, t: &FeatureTensor) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(19 + 4 * t.values.len());
    buf.extend_from_slice(SERF_MAGIC);
    buf.extend_from_slice(&SERF_VERSION.to_le_bytes());
    buf.push(t.layout.code());
    for d in [t.channels, t.height, t.frames] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &t.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_serf<R: Read>(mut r: R) -> Result<FeatureTensor, DspError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| DspError::Cache(e.to_string()))?;
    if bytes.len() < 19 || &bytes[..4] != SERF_MAGIC {
        return Err(DspError::Cache("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SERF_VERSION {
        return Err(DspError::Cache(format!("unsupported version {version}")));
    }
    let layout = FeatureKind::from_code(bytes[6])
        .ok_or_else(|| DspError::Cache(format!("unknown layout code {}", bytes[6])))?;
    let dim = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (channels, height, frames) = (dim(7), dim(11), dim(15));
    let n = channels
        .checked_mul(height)
        .and_then(|v| v.checked_mul(frames))
        .ok_or_else(|| DspError::Cache("dims overflow".into()))?;
    let payload = &bytes[19..];
    if payload.len() != 4 * n {
        return Err(DspError::Cache(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            4 * n
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FeatureTensor {
        channels,
        height,
        frames,
        layout,
        values,
    })
}

pub fn write_serf_file(path: impl AsRef<Path>, t: &FeatureTensor) -> Result<(), DspError> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path)
        .map_err(|e| DspError::Cache(format!("{}: {e}", path.display())))?;
    write_serf(&mut file, t).map_err(|e| DspError::Cache(format!("{}: {e}", path.display())))
}

pub fn read_serf_file(path: impl AsRef<Path>) -> Result<FeatureTensor, DspError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| DspError::Cache(format!("{}: {e}", path.display())))?;
    read_serf(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_bytes() {
        let t = FeatureTensor {
            channels: 1,
            height: 2,
            frames: 3,
            layout: FeatureKind::Lmsddc,
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        let mut buf = Vec::new();
        write_serf(&mut buf, &t).unwrap();
        assert_eq!(&buf[..4], b"SERF");
        assert_eq!(&buf[4..6], &[1, 0]);
        assert_eq!(buf[6], 1);
        assert_eq!(&buf[7..19], &[1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&buf[19..23], &1.0f32.to_le_bytes());
        assert_eq!(buf.len(), 19 + 24);
    }

    #[test]
    fn truncated_payload_rejected() {
        let t = FeatureTensor {
            channels: 1,
            height: 1,
            frames: 2,
            layout: FeatureKind::Lms,
            values: vec![1.0, 2.0],
        };
        let mut buf = Vec::new();
        write_serf(&mut buf, &t).unwrap();
        buf.pop();
        assert!(read_serf(&buf[..]).is_err());
        assert!(read_serf(&b"SERX"[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(h in 1usize..8, f in 1usize..8, ddc in any::<bool>(), seed in any::<u32>()) {
            let values: Vec<f32> = (0..h * f).map(|i| (i as f32 + seed as f32).sin()).collect();
            let t = FeatureTensor {
                channels: 1, height: h, frames: f,
                layout: if ddc { FeatureKind::Lmsddc } else { FeatureKind::Lms },
                values,
            };
            let mut buf = Vec::new();
            write_serf(&mut buf, &t).unwrap();
            prop_assert_eq!(read_serf(&buf[..]).unwrap(), t);
        }
    }
}
