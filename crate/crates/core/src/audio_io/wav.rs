use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, AudioError};

/// Loads a PCM16 or float32 WAV file as a mono clip.
///
/// Stereo frames are averaged; integer samples are scaled by 1/32768.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    if !path.is_file() {
        return Err(AudioError::MissingFile(display));
    }
    let reader = WavReader::open(path).map_err(|e| map_hound(e, &display))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::UnsupportedEncoding {
            path: display,
            detail: format!("{} channels", spec.channels),
        });
    }
    if spec.sample_rate == 0 {
        return Err(AudioError::CorruptHeader {
            path: display,
            detail: "zero sample rate".into(),
        });
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(e, &display))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v.clamp(-1.0, 1.0)))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(e, &display))?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedEncoding {
                path: display,
                detail: format!("{fmt:?} {bits}-bit"),
            })
        }
    };
    if interleaved.iter().any(|s| !s.is_finite()) {
        return Err(AudioError::CorruptHeader {
            path: display,
            detail: "non-finite sample".into(),
        });
    }
    let samples = if spec.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|f| 0.5 * (f[0] + f[1]))
            .collect()
    } else {
        interleaved
    };
    Ok(AudioClip {
        samples,
        sample_rate: spec.sample_rate,
        source_path: display,
    })
}

/// Writes a mono clip as 16-bit PCM.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| map_hound(e, &display))?;
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| map_hound(e, &display))?;
    }
    writer.finalize().map_err(|e| map_hound(e, &display))
}

fn map_hound(err: hound::Error, path: &str) -> AudioError {
    match err {
        hound::Error::IoError(source) => AudioError::Io {
            path: path.to_string(),
            source,
        },
        hound::Error::Unsupported => AudioError::UnsupportedEncoding {
            path: path.to_string(),
            detail: "compressed or unsupported format".into(),
        },
        hound::Error::FormatError(msg) => AudioError::CorruptHeader {
            path: path.to_string(),
            detail: msg.to_string(),
        },
        other => AudioError::CorruptHeader {
            path: path.to_string(),
            detail: other.to_string(),
        },
    }
}
