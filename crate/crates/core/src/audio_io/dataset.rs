use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AudioError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Emodb,
    Ravdess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Calm,
    Happiness,
    Sadness,
    Anger,
    Fear,
    Disgust,
    Boredom,
    Surprise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

/// EMODB emotion letter (6th filename character) to label.
pub const EMODB_EMOTION_CODES: [(char, Emotion); 7] = [
    ('W', Emotion::Anger),
    ('L', Emotion::Boredom),
    ('E', Emotion::Disgust),
    ('A', Emotion::Fear),
    ('F', Emotion::Happiness),
    ('T', Emotion::Sadness),
    ('N', Emotion::Neutral),
];

/// EMODB speaker ids and their gender.
pub const EMODB_SPEAKERS: [(&str, Gender); 10] = [
    ("03", Gender::Male),
    ("08", Gender::Female),
    ("09", Gender::Female),
    ("10", Gender::Male),
    ("11", Gender::Male),
    ("12", Gender::Male),
    ("13", Gender::Female),
    ("14", Gender::Female),
    ("15", Gender::Male),
    ("16", Gender::Female),
];

/// RAVDESS emotion field (third hyphen-separated field) to label.
pub const RAVDESS_EMOTION_CODES: [(&str, Emotion); 8] = [
    ("01", Emotion::Neutral),
    ("02", Emotion::Calm),
    ("03", Emotion::Happiness),
    ("04", Emotion::Sadness),
    ("05", Emotion::Anger),
    ("06", Emotion::Fear),
    ("07", Emotion::Disgust),
    ("08", Emotion::Surprise),
];

impl Dataset {
    pub fn name(self) -> &'static str {
        match self {
            Dataset::Emodb => "emodb",
            Dataset::Ravdess => "ravdess",
        }
    }

    /// Emotion classes in label-index order.
    pub fn emotions(self) -> &'static [Emotion] {
        use Emotion::*;
        match self {
            Dataset::Emodb => &[Happiness, Sadness, Anger, Neutral, Fear, Boredom, Disgust],
            Dataset::Ravdess => &[Neutral, Calm, Happiness, Sadness, Anger, Fear, Disgust, Surprise],
        }
    }

    /// Parses emotion, gender and speaker from a file name.
    pub fn parse_file_name(self, file_name: &str) -> Result<(Emotion, Gender, String), String> {
        let stem = file_name
            .rsplit_once('.')
            .map(|(s, _)| s)
            .unwrap_or(file_name);
        match self {
            Dataset::Emodb => {
                let chars: Vec<char> = stem.chars().collect();
                if chars.len() < 7 {
                    return Err(format!("name too short: {file_name}"));
                }
                let speaker: String = chars[..2].iter().collect();
                let code = chars[5];
                let emotion = EMODB_EMOTION_CODES
                    .iter()
                    .find(|(c, _)| *c == code)
                    .map(|(_, e)| *e)
                    .ok_or_else(|| format!("unknown emotion code '{code}'"))?;
                let gender = EMODB_SPEAKERS
                    .iter()
                    .find(|(s, _)| *s == speaker)
                    .map(|(_, g)| *g)
                    .ok_or_else(|| format!("unknown speaker '{speaker}'"))?;
                Ok((emotion, gender, speaker))
            }
            Dataset::Ravdess => {
                let fields: Vec<&str> = stem.split('-').collect();
                if fields.len() != 7 {
                    return Err(format!("expected 7 fields: {file_name}"));
                }
                if fields[1] != "01" {
                    return Err(format!("vocal channel '{}' is not speech", fields[1]));
                }
                let emotion = RAVDESS_EMOTION_CODES
                    .iter()
                    .find(|(c, _)| *c == fields[2])
                    .map(|(_, e)| *e)
                    .ok_or_else(|| format!("unknown emotion code '{}'", fields[2]))?;
                let actor: u32 = fields[6]
                    .parse()
                    .map_err(|_| format!("bad actor field '{}'", fields[6]))?;
                if actor == 0 {
                    return Err("actor id 0".into());
                }
                let gender = if actor % 2 == 1 {
                    Gender::Male
                } else {
                    Gender::Female
                };
                Ok((emotion, gender, fields[6].to_string()))
            }
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "emodb" => Ok(Dataset::Emodb),
            "ravdess" => Ok(Dataset::Ravdess),
            other => Err(format!("unknown dataset '{other}' (expected emodb or ravdess)")),
        }
    }
}

impl Emotion {
    pub fn name(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Calm => "calm",
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Anger => "anger",
            Emotion::Fear => "fear",
            Emotion::Disgust => "disgust",
            Emotion::Boredom => "boredom",
            Emotion::Surprise => "surprise",
        }
    }
}

impl FromStr for Emotion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use Emotion::*;
        [Neutral, Calm, Happiness, Sadness, Anger, Fear, Disgust, Boredom, Surprise]
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown emotion '{s}'"))
    }
}

impl Gender {
    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl FromStr for Gender {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "male" => Ok(Gender::Male),
            "female" => Ok(Gender::Female),
            other => Err(format!("unknown gender '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub clip_path: String,
    pub dataset: Dataset,
    pub emotion: Emotion,
    pub gender: Gender,
    pub speaker_id: String,
}

/// Maps records to integer class labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassScheme {
    pub dataset: Dataset,
    pub joint_gender: bool,
}

impl ClassScheme {
    pub fn new(dataset: Dataset, joint_gender: bool) -> Self {
        Self {
            dataset,
            joint_gender,
        }
    }

    pub fn n_classes(&self) -> usize {
        let n = self.dataset.emotions().len();
        if self.joint_gender {
            2 * n
        } else {
            n
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        let emotions = self.dataset.emotions();
        if self.joint_gender {
            emotions
                .iter()
                .flat_map(|e| {
                    [Gender::Male, Gender::Female]
                        .into_iter()
                        .map(move |g| format!("{}_{}", e.name(), g.name()))
                })
                .collect()
        } else {
            emotions.iter().map(|e| e.name().to_string()).collect()
        }
    }

    pub fn label(&self, record: &UtteranceRecord) -> Option<usize> {
        let e = self
            .dataset
            .emotions()
            .iter()
            .position(|&x| x == record.emotion)?;
        Some(if self.joint_gender {
            2 * e + usize::from(record.gender == Gender::Female)
        } else {
            e
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanResult {
    pub records: Vec<UtteranceRecord>,
    pub rejects: Vec<Reject>,
}

/// Catalogs every `.wav` file under `root`, sorted lexicographically by path.
///
/// Files whose names do not parse are reported in `rejects`. A tree with no
/// WAV files at all is an error.
pub fn scan_dataset(root: impl AsRef<Path>, dataset: Dataset) -> Result<ScanResult, AudioError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(AudioError::MissingFile(root.display().to_string()));
    }
    let mut files = Vec::new();
    collect_wavs(root, &mut files)?;
    if files.is_empty() {
        return Err(AudioError::EmptyDataset(root.display().to_string()));
    }
    files.sort();
    let mut out = ScanResult::default();
    for path in files {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let path_str = path.display().to_string();
        match dataset.parse_file_name(&name) {
            Ok((emotion, gender, speaker_id)) => out.records.push(UtteranceRecord {
                clip_path: path_str,
                dataset,
                emotion,
                gender,
                speaker_id,
            }),
            Err(reason) => out.rejects.push(Reject {
                path: path_str,
                reason,
            }),
        }
    }
    Ok(out)
}

fn collect_wavs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), AudioError> {
    let entries = std::fs::read_dir(dir).map_err(|source| AudioError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| AudioError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.is_dir() {
            collect_wavs(&path, out)?;
        } else if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        {
            out.push(path);
        }
    }
    Ok(())
}

pub const MANIFEST_HEADER: &str = "path,dataset,emotion,gender,speaker_id";

/// Writes the manifest CSV (UTF-8, LF endings).
pub fn write_manifest<W: Write>(mut w: W, records: &[UtteranceRecord]) -> std::io::Result<()> {
    writeln!(w, "{MANIFEST_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            csv_field(&r.clip_path),
            r.dataset.name(),
            r.emotion.name(),
            r.gender.name(),
            csv_field(&r.speaker_id)
        )?;
    }
    Ok(())
}

pub fn write_rejects<W: Write>(mut w: W, rejects: &[Reject]) -> std::io::Result<()> {
    writeln!(w, "path,reason")?;
    for r in rejects {
        writeln!(w, "{},{}", csv_field(&r.path), csv_field(&r.reason))?;
    }
    Ok(())
}

pub fn read_manifest(text: &str) -> Result<Vec<UtteranceRecord>, AudioError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end_matches('\r') == MANIFEST_HEADER => {}
        _ => {
            return Err(AudioError::Manifest(format!(
                "missing header '{MANIFEST_HEADER}'"
            )))
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields = split_csv_line(line);
        if fields.len() != 5 {
            return Err(AudioError::Manifest(format!(
                "line {lineno}: expected 5 fields, got {}",
                fields.len()
            )));
        }
        let bad = |e: String| AudioError::Manifest(format!("line {lineno}: {e}"));
        out.push(UtteranceRecord {
            clip_path: fields[0].clone(),
            dataset: fields[1].parse().map_err(bad)?,
            emotion: fields[2].parse().map_err(bad)?,
            gender: fields[3].parse().map_err(bad)?,
            speaker_id: fields[4].clone(),
        });
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}
