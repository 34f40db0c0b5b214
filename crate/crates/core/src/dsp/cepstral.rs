use std::f64::consts::PI;

use super::{BinKind, DspError, FeatureMatrix, Matrix};

/// Orthonormal DCT-II basis, `[n_out x n_in]`.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Matrix {
    let mut m = Matrix::zeros(n_out, n_in);
    let n = n_in as f64;
    for k in 0..n_out {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for i in 0..n_in {
            m.set(k, i, scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos());
        }
    }
    m
}

/// MFCCs: orthonormal DCT-II along the mel axis, first `n_mfcc` coefficients.
pub fn mfcc(lms: &FeatureMatrix, n_mfcc: usize) -> Result<FeatureMatrix, DspError> {
    let n_mels = lms.n_bins();
    if n_mfcc == 0 || n_mfcc > n_mels {
        return Err(DspError::BadCoefficientCount { n_mfcc, n_mels });
    }
    let basis = dct_matrix(n_mfcc, n_mels);
    let frames = lms.n_frames();
    let mut out = Matrix::zeros(n_mfcc, frames);
    for k in 0..n_mfcc {
        for (m, &b) in basis.row(k).iter().enumerate() {
            let src = lms.values.row(m);
            let dst = &mut out.data[k * frames..(k + 1) * frames];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += b * s;
            }
        }
    }
    Ok(FeatureMatrix {
        values: out,
        kind: BinKind::Mfcc,
        frame_hop_seconds: lms.frame_hop_seconds,
    })
}

/// Regression deltas over `width` frames with edge frames replicated.
///
/// Applied to MFCCs yields `MfccDelta`; applied to deltas yields `MfccDelta2`.
pub fn delta(features: &FeatureMatrix, width: usize) -> Result<FeatureMatrix, DspError> {
    if width < 3 || width.is_multiple_of(2) {
        return Err(DspError::BadWidth(width));
    }
    let reach = (width - 1) / 2;
    let denom: f64 = 2.0 * (1..=reach).map(|n| (n * n) as f64).sum::<f64>();
    let (rows, frames) = (features.n_bins(), features.n_frames());
    let mut out = Matrix::zeros(rows, frames);
    for r in 0..rows {
        let src = features.values.row(r);
        for t in 0..frames {
            let mut acc = 0.0;
            for n in 1..=reach {
                let ahead = src[(t + n).min(frames - 1)];
                let behind = src[t.saturating_sub(n)];
                acc += n as f64 * (ahead - behind);
            }
            out.set(r, t, acc / denom);
        }
    }
    let kind = match features.kind {
        BinKind::Mfcc => BinKind::MfccDelta,
        BinKind::MfccDelta => BinKind::MfccDelta2,
        other => other,
    };
    Ok(FeatureMatrix {
        values: out,
        kind,
        frame_hop_seconds: features.frame_hop_seconds,
    })
}
