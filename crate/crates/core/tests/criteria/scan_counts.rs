//! Real-corpus record counts. Point `SER_EMODB_DIR` / `SER_RAVDESS_DIR` at
//! the extracted corpora; absent variables skip the check.

use ser_core::audio_io::scan_dataset;
use ser_core::Dataset;

use super::Outcome;
use crate::ensure;

pub fn check() -> Result<Outcome, String> {
    let mut done = Vec::new();
    let mut missing = Vec::new();
    for (var, dataset, expected) in [
        ("SER_EMODB_DIR", Dataset::Emodb, 535usize),
        ("SER_RAVDESS_DIR", Dataset::Ravdess, 1440),
    ] {
        match std::env::var_os(var).filter(|v| !v.is_empty()) {
            None => missing.push(var),
            Some(dir) => {
                let scan = scan_dataset(&dir, dataset).map_err(|e| format!("{var}: {e}"))?;
                ensure!(
                    scan.records.len() == expected,
                    "{}: {} records, expected {expected} ({} rejected)",
                    dataset.name(),
                    scan.records.len(),
                    scan.rejects.len()
                );
                done.push(format!("{} {}", dataset.name(), expected));
            }
        }
    }
    if done.is_empty() {
        return Ok(Outcome::Skip(format!("corpora not present; set {}", missing.join(" / "))));
    }
    let mut d = done.join(", ");
    if !missing.is_empty() {
        d.push_str(&format!(" ({} unset)", missing.join(", ")));
    }
    Ok(Outcome::Pass(d))
}
