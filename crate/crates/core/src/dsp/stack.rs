use super::{DspError, FeatureKind, FeatureMatrix, FeatureTensor};

const STD_EPS: f64 = 1e-8;

/// `(x - mean) / (std + 1e-8)` over the whole block (population std).
pub fn standardize(values: &[f64]) -> Vec<f32> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + STD_EPS);
    values.iter().map(|v| ((v - mean) * scale) as f32).collect()
}

/// Stacks `[lms; delta; delta-delta; chroma]` along the frequency axis into a
/// single-channel tensor, standardizing each block independently.
pub fn stack_lmsddc(
    lms: &FeatureMatrix,
    d1: &FeatureMatrix,
    d2: &FeatureMatrix,
    chroma: &FeatureMatrix,
) -> Result<FeatureTensor, DspError> {
    let blocks = [lms, d1, d2, chroma];
    let frames: Vec<usize> = blocks.iter().map(|b| b.n_frames()).collect();
    let hop_mismatch = blocks
        .iter()
        .any(|b| (b.frame_hop_seconds - lms.frame_hop_seconds).abs() > 1e-12);
    if frames.iter().any(|&f| f != frames[0]) || hop_mismatch {
        return Err(DspError::FrameCountMismatch(frames));
    }
    let height: usize = blocks.iter().map(|b| b.n_bins()).sum();
    let mut values = Vec::with_capacity(height * frames[0]);
    for b in blocks {
        values.extend(standardize(&b.values.data));
    }
    Ok(FeatureTensor {
        channels: 1,
        height,
        frames: frames[0],
        layout: FeatureKind::Lmsddc,
        values,
    })
}

/// Center-crops or symmetrically zero-pads the time axis to `target_frames`.
pub fn fix_length(tensor: &FeatureTensor, target_frames: usize) -> FeatureTensor {
    assert!(target_frames >= 1, "target_frames must be positive");
    let frames = tensor.frames;
    if frames == target_frames {
        return tensor.clone();
    }
    let rows = tensor.channels * tensor.height;
    let mut values = vec![0.0f32; rows * target_frames];
    if frames > target_frames {
        let start = (frames - target_frames) / 2;
        for r in 0..rows {
            values[r * target_frames..(r + 1) * target_frames]
                .copy_from_slice(&tensor.values[r * frames + start..r * frames + start + target_frames]);
        }
    } else {
        let left = (target_frames - frames) / 2;
        for r in 0..rows {
            values[r * target_frames + left..r * target_frames + left + frames]
                .copy_from_slice(&tensor.values[r * frames..(r + 1) * frames]);
        }
    }
    FeatureTensor {
        frames: target_frames,
        values,
        ..tensor.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{BinKind, Matrix};

    fn fm(rows: usize, frames: usize, seed: f64, kind: BinKind) -> FeatureMatrix {
        FeatureMatrix {
            values: Matrix::from_vec(
                rows,
                frames,
                (0..rows * frames).map(|i| (i as f64 * seed).sin() * 3.0 + seed).collect(),
            ),
            kind,
            frame_hop_seconds: 0.016,
        }
    }

    fn ramp_tensor(height: usize, frames: usize) -> FeatureTensor {
        FeatureTensor {
            channels: 1,
            height,
            frames,
            layout: FeatureKind::Lms,
            values: (0..height * frames).map(|i| i as f32 + 1.0).collect(),
        }
    }

    #[test]
    fn stacked_height_and_blocks() {
        let lms = fm(40, 50, 0.3, BinKind::MelLog);
        let d1 = fm(13, 50, 0.7, BinKind::MfccDelta);
        let d2 = fm(13, 50, 1.1, BinKind::MfccDelta2);
        let ch = fm(12, 50, 1.9, BinKind::Chroma);
        let t = stack_lmsddc(&lms, &d1, &d2, &ch).unwrap();
        assert_eq!(t.dims(), (1, 78, 50));
        // reassemble-and-compare
        let mut expected = Vec::new();
        for b in [&lms, &d1, &d2, &ch] {
            expected.extend(standardize(&b.values.data));
        }
        assert_eq!(t.values, expected);
        let block = &t.values[40 * 50..53 * 50];
        let mean: f64 = block.iter().map(|&v| v as f64).sum::<f64>() / block.len() as f64;
        assert!(mean.abs() < 1e-5);
    }

    #[test]
    fn mismatched_frames() {
        let lms = fm(40, 50, 0.3, BinKind::MelLog);
        let d1 = fm(13, 49, 0.7, BinKind::MfccDelta);
        assert!(matches!(
            stack_lmsddc(&lms, &d1, &d1, &lms),
            Err(DspError::FrameCountMismatch(_))
        ));
    }

    #[test]
    fn fix_length_cases() {
        let t = ramp_tensor(2, 12);
        assert_eq!(fix_length(&t, 12), t);
        let cropped = fix_length(&t, 10);
        assert_eq!(cropped.frames, 10);
        assert_eq!(cropped.values[0], t.values[1]);
        assert_eq!(cropped.values[9], t.values[10]);
        assert_eq!(cropped.values[10], t.values[13]);

        let short = ramp_tensor(1, 10);
        let padded = fix_length(&short, 300);
        assert_eq!(padded.frames, 300);
        assert!(padded.values[..145].iter().all(|&v| v == 0.0));
        assert_eq!(&padded.values[145..155], &short.values[..]);
        assert!(padded.values[155..].iter().all(|&v| v == 0.0));
        assert_eq!(300 - 155, 145);
    }

    #[test]
    fn standardize_constant_is_zero() {
        assert!(standardize(&[4.0; 10]).iter().all(|&v| v == 0.0));
    }
}
