//! Dataset manifests and reproducible train/test split plans.
//!
//! A manifest lists every annotated image with its class, where it came
//! from (video frame, real static image or synthetic composite) and, where
//! applicable, its sequence/frame or background/pose keys. A split plan is a
//! deterministic partition of a class subset of that manifest into train and
//! test ids following one of the [`StrategyKind`] rules.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

/// Column order of the manifest CSV.
pub const MANIFEST_HEADER: [&str; 8] = [
    "image_id",
    "class",
    "source_kind",
    "sequence_id",
    "frame_index",
    "background_id",
    "pose_id",
    "path",
];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate image_id '{id}' (line {line})")]
    DuplicateId { id: String, line: u64 },
    #[error("image '{id}': {source_kind} entry is missing {field}")]
    MissingField {
        id: String,
        source_kind: SourceKind,
        field: &'static str,
    },
    #[error("sequence '{sequence_id}': frame indices are not contiguous from 0 ({detail})")]
    NonContiguousFrames { sequence_id: String, detail: String },
    #[error("sequence '{sequence_id}' mixes classes '{first}' and '{second}' (image '{id}')")]
    MixedSequence {
        sequence_id: String,
        first: String,
        second: String,
        id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("class '{class}' has {available} {unit}, {} short of the requested {requested}", requested - available)]
    Insufficient {
        class: String,
        unit: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("empty plan")]
    EmptyPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Video,
    StaticReal,
    Synthetic,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Video => "video",
            SourceKind::StaticReal => "static_real",
            SourceKind::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "video" => Ok(SourceKind::Video),
            "static_real" => Ok(SourceKind::StaticReal),
            "synthetic" => Ok(SourceKind::Synthetic),
            other => Err(format!(
                "unknown source_kind '{other}' (expected video, static_real or synthetic)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub class_label: String,
    pub source_kind: SourceKind,
    pub sequence_id: Option<String>,
    pub frame_index: Option<u32>,
    pub background_id: Option<String>,
    pub pose_id: Option<String>,
    pub path: String,
}

impl ManifestEntry {
    pub fn video(id: &str, class: &str, sequence: &str, frame: u32, path: &str) -> Self {
        ManifestEntry {
            image_id: id.to_owned(),
            class_label: class.to_owned(),
            source_kind: SourceKind::Video,
            sequence_id: Some(sequence.to_owned()),
            frame_index: Some(frame),
            background_id: None,
            pose_id: None,
            path: path.to_owned(),
        }
    }

    pub fn static_real(id: &str, class: &str, path: &str) -> Self {
        ManifestEntry {
            image_id: id.to_owned(),
            class_label: class.to_owned(),
            source_kind: SourceKind::StaticReal,
            sequence_id: None,
            frame_index: None,
            background_id: None,
            pose_id: None,
            path: path.to_owned(),
        }
    }

    pub fn synthetic(id: &str, class: &str, background: &str, pose: &str, path: &str) -> Self {
        ManifestEntry {
            image_id: id.to_owned(),
            class_label: class.to_owned(),
            source_kind: SourceKind::Synthetic,
            sequence_id: None,
            frame_index: None,
            background_id: Some(background.to_owned()),
            pose_id: Some(pose.to_owned()),
            path: path.to_owned(),
        }
    }
}

/// Validated inventory of dataset images.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, ManifestError> {
        validate(&entries, |i| i as u64 + 2)?;
        Ok(DatasetManifest { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count_by_kind(&self, kind: SourceKind) -> usize {
        self.entries
            .iter()
            .filter(|e| e.source_kind == kind)
            .count()
    }

    /// Sorted, de-duplicated class labels.
    pub fn classes(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.class_label.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Parses manifest CSV. Lines starting with `#` are ignored.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ManifestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(false)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(&e))?.clone();
        if headers.iter().ne(MANIFEST_HEADER.iter().copied()) {
            return Err(ManifestError::Parse {
                line: headers.position().map_or(1, |p| p.line()),
                message: format!(
                    "expected header '{}', found '{}'",
                    MANIFEST_HEADER.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let mut entries = Vec::new();
        let mut lines = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(&e))?;
            let line = rec.position().map_or(0, |p| p.line());
            entries.push(parse_entry(&rec).map_err(|message| ManifestError::Parse { line, message })?);
            lines.push(line);
        }
        validate(&entries, |i| lines[i])?;
        Ok(DatasetManifest { entries })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        write_entries(writer, &self.entries, None)
    }
}

/// Writes manifest rows, optionally preceded by a `#` comment line.
pub fn write_entries<W: Write>(
    mut writer: W,
    entries: &[ManifestEntry],
    comment: Option<&str>,
) -> Result<(), csv::Error> {
    if let Some(c) = comment {
        writeln!(writer, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MANIFEST_HEADER)?;
    for e in entries {
        let frame = e.frame_index.map(|f| f.to_string()).unwrap_or_default();
        w.write_record([
            e.image_id.as_str(),
            e.class_label.as_str(),
            e.source_kind.as_str(),
            e.sequence_id.as_deref().unwrap_or(""),
            frame.as_str(),
            e.background_id.as_deref().unwrap_or(""),
            e.pose_id.as_deref().unwrap_or(""),
            e.path.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads and validates a manifest CSV file.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, ManifestError> {
    let file = std::fs::File::open(path).map_err(|source| ManifestError::Io {
        path: path.to_owned(),
        source,
    })?;
    DatasetManifest::from_reader(std::io::BufReader::new(file))
}

fn csv_error(e: &csv::Error) -> ManifestError {
    let line = e.position().map_or(0, |p| p.line());
    ManifestError::Parse {
        line,
        message: e.to_string(),
    }
}

fn opt(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_owned())
}

fn parse_entry(rec: &csv::StringRecord) -> Result<ManifestEntry, String> {
    let image_id = rec[0].trim().to_owned();
    if image_id.is_empty() {
        return Err("empty image_id".into());
    }
    let class_label = rec[1].trim().to_owned();
    if class_label.is_empty() {
        return Err(format!("image '{image_id}': empty class"));
    }
    let source_kind: SourceKind = rec[2].trim().parse()?;
    let frame_index = match opt(&rec[4]) {
        None => None,
        Some(f) => Some(
            f.parse::<u32>()
                .map_err(|_| format!("image '{image_id}': bad frame_index '{f}'"))?,
        ),
    };
    Ok(ManifestEntry {
        image_id,
        class_label,
        source_kind,
        sequence_id: opt(&rec[3]),
        frame_index,
        background_id: opt(&rec[5]),
        pose_id: opt(&rec[6]),
        path: rec[7].trim().to_owned(),
    })
}

fn validate(entries: &[ManifestEntry], line_of: impl Fn(usize) -> u64) -> Result<(), ManifestError> {
    let mut ids: HashMap<&str, ()> = HashMap::with_capacity(entries.len());
    // sequence -> (class, frames)
    let mut sequences: HashMap<&str, (&str, Vec<u32>)> = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        if ids.insert(&e.image_id, ()).is_some() {
            return Err(ManifestError::DuplicateId {
                id: e.image_id.clone(),
                line: line_of(i),
            });
        }
        let missing = |field| ManifestError::MissingField {
            id: e.image_id.clone(),
            source_kind: e.source_kind,
            field,
        };
        match e.source_kind {
            SourceKind::Video => {
                let seq = e.sequence_id.as_deref().ok_or_else(|| missing("sequence_id"))?;
                let frame = e.frame_index.ok_or_else(|| missing("frame_index"))?;
                let slot = sequences
                    .entry(seq)
                    .or_insert_with(|| (e.class_label.as_str(), Vec::new()));
                if slot.0 != e.class_label {
                    return Err(ManifestError::MixedSequence {
                        sequence_id: seq.to_owned(),
                        first: slot.0.to_owned(),
                        second: e.class_label.clone(),
                        id: e.image_id.clone(),
                    });
                }
                slot.1.push(frame);
            }
            SourceKind::Synthetic => {
                e.background_id.as_ref().ok_or_else(|| missing("background_id"))?;
                e.pose_id.as_ref().ok_or_else(|| missing("pose_id"))?;
            }
            SourceKind::StaticReal => {}
        }
    }
    for (seq, (_, mut frames)) in sequences {
        frames.sort_unstable();
        if let Some((pos, &f)) = frames
            .iter()
            .enumerate()
            .find(|(pos, &f)| f as usize != *pos)
        {
            return Err(ManifestError::NonContiguousFrames {
                sequence_id: seq.to_owned(),
                detail: format!("expected frame {pos}, found {f}"),
            });
        }
    }
    Ok(())
}

/// Split rule. Counts are per class unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum StrategyKind {
    /// Whole video sequences go to train until the class holds at least `n`
    /// images, overshooting as little as possible; every other sequence is
    /// test.
    PerClassFromCompleteSequences { n: usize },
    /// `n` evenly spaced frames across the concatenation of the class's
    /// sequences; all other frames are test.
    EvenAcrossSequences { n: usize },
    /// The first `ceil(fraction * len)` frames of every sequence.
    PrefixFraction { fraction: f64 },
    /// `k` evenly spaced frames from each of `sequences` seeded-random
    /// sequences; the rest of those sequences is test.
    PerSequenceEven { k: usize, sequences: usize },
    /// `n` seeded-random real static images; the remaining static images
    /// are test.
    StaticPerClass { n: usize },
    /// `k` seeded-random poses per background for synthetic images.
    PosesPerBackground { k: usize },
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::PerClassFromCompleteSequences { .. } => "per-class-from-complete-sequences",
            StrategyKind::EvenAcrossSequences { .. } => "even-across-sequences",
            StrategyKind::PrefixFraction { .. } => "prefix-fraction",
            StrategyKind::PerSequenceEven { .. } => "per-sequence-even",
            StrategyKind::StaticPerClass { .. } => "static-per-class",
            StrategyKind::PosesPerBackground { .. } => "poses-per-background",
        }
    }

    pub fn source_kind(&self) -> SourceKind {
        match self {
            StrategyKind::StaticPerClass { .. } => SourceKind::StaticReal,
            StrategyKind::PosesPerBackground { .. } => SourceKind::Synthetic,
            _ => SourceKind::Video,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStrategy {
    #[serde(flatten)]
    pub kind: StrategyKind,
    pub classes: Vec<String>,
    #[serde(skip)]
    pub seed: u64,
}

impl SplitStrategy {
    pub fn new(kind: StrategyKind, classes: Vec<String>, seed: u64) -> Result<Self, SplitError> {
        let s = SplitStrategy {
            kind,
            classes,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        let bad = |m: &str| Err(SplitError::InvalidStrategy(m.to_owned()));
        if self.classes.is_empty() {
            return bad("class subset is empty");
        }
        let mut seen = BTreeSet::new();
        for c in &self.classes {
            if !seen.insert(c) {
                return Err(SplitError::InvalidStrategy(format!("class '{c}' listed twice")));
            }
        }
        match self.kind {
            StrategyKind::PerClassFromCompleteSequences { n }
            | StrategyKind::EvenAcrossSequences { n }
            | StrategyKind::StaticPerClass { n }
                if n == 0 =>
            {
                bad("n must be positive")
            }
            StrategyKind::PrefixFraction { fraction }
                if !(fraction > 0.0 && fraction <= 1.0) =>
            {
                bad("fraction must be in (0, 1]")
            }
            StrategyKind::PerSequenceEven { k, sequences } if k == 0 || sequences == 0 => {
                bad("k and sequence count must be positive")
            }
            StrategyKind::PosesPerBackground { k: 0 } => bad("k must be positive"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub train: usize,
    pub test: usize,
}

/// A reproducible train/test partition. Id lists follow manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub strategy: SplitStrategy,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub summary: BTreeMap<String, ClassCounts>,
}

#[derive(Serialize, Deserialize)]
struct PlanRepr<P> {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    provenance: Option<P>,
    strategy: SplitStrategy,
    seed: u64,
    train: Vec<String>,
    test: Vec<String>,
    summary: BTreeMap<String, ClassCounts>,
}

impl SplitPlan {
    /// Canonical JSON, with an optional provenance object as the first key.
    pub fn to_json<P: Serialize>(&self, provenance: Option<&P>) -> String {
        let repr = PlanRepr {
            provenance,
            strategy: self.strategy.clone(),
            seed: self.strategy.seed,
            train: self.train.clone(),
            test: self.test.clone(),
            summary: self.summary.clone(),
        };
        let mut s = serde_json::to_string_pretty(&repr).expect("plan serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let repr: PlanRepr<serde_json::Value> = serde_json::from_str(text)?;
        let mut strategy = repr.strategy;
        strategy.seed = repr.seed;
        Ok(SplitPlan {
            strategy,
            train: repr.train,
            test: repr.test,
            summary: repr.summary,
        })
    }

    /// Number of distinct video sequences among `ids`.
    pub fn count_sequences(manifest: &DatasetManifest, ids: &[String]) -> usize {
        let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        manifest
            .entries()
            .iter()
            .filter(|e| wanted.contains(e.image_id.as_str()))
            .filter_map(|e| e.sequence_id.as_deref())
            .collect::<BTreeSet<_>>()
            .len()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Unused,
    Train,
    Test,
}

/// Partitions `manifest` according to `strategy`.
pub fn plan_split(manifest: &DatasetManifest, strategy: &SplitStrategy) -> Result<SplitPlan, SplitError> {
    strategy.validate()?;
    let kind = strategy.kind.source_kind();
    let entries = manifest.entries();
    let mut side = vec![Side::Unused; entries.len()];

    for class in &strategy.classes {
        let members: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| &e.class_label == class && e.source_kind == kind)
            .map(|(i, _)| i)
            .collect();
        match strategy.kind {
            StrategyKind::PerClassFromCompleteSequences { n } => {
                let seqs = sequences_of(entries, &members);
                complete_sequences(&mut side, class, seqs, n, strategy.seed)?;
            }
            StrategyKind::EvenAcrossSequences { n } => {
                let frames: Vec<usize> = sequences_of(entries, &members)
                    .into_values()
                    .flatten()
                    .collect();
                if frames.len() < n {
                    return Err(insufficient(class, "video frames", n, frames.len()));
                }
                for &i in &frames {
                    side[i] = Side::Test;
                }
                for pos in even_positions(frames.len(), n, false) {
                    side[frames[pos]] = Side::Train;
                }
            }
            StrategyKind::PrefixFraction { fraction } => {
                let seqs = sequences_of(entries, &members);
                if seqs.is_empty() {
                    return Err(insufficient(class, "video sequences", 1, 0));
                }
                for frames in seqs.values() {
                    let keep = prefix_len(fraction, frames.len());
                    for (pos, &i) in frames.iter().enumerate() {
                        side[i] = if pos < keep { Side::Train } else { Side::Test };
                    }
                }
            }
            StrategyKind::PerSequenceEven { k, sequences } => {
                let seqs = sequences_of(entries, &members);
                if seqs.len() < sequences {
                    return Err(insufficient(class, "video sequences", sequences, seqs.len()));
                }
                let mut order: Vec<&String> = seqs.keys().copied().collect();
                SeededRng::new(strategy.seed, &format!("per-sequence/{class}")).shuffle(&mut order);
                for id in order.into_iter().take(sequences) {
                    let frames = &seqs[id];
                    if frames.len() < k {
                        return Err(insufficient(class, "frames in a sequence", k, frames.len()));
                    }
                    for &i in frames {
                        side[i] = Side::Test;
                    }
                    for pos in even_positions(frames.len(), k, true) {
                        side[frames[pos]] = Side::Train;
                    }
                }
            }
            StrategyKind::StaticPerClass { n } => {
                if members.len() < n {
                    return Err(insufficient(class, "static images", n, members.len()));
                }
                let mut order = members.clone();
                order.sort_by(|&a, &b| entries[a].image_id.cmp(&entries[b].image_id));
                SeededRng::new(strategy.seed, &format!("static/{class}")).shuffle(&mut order);
                for (rank, &i) in order.iter().enumerate() {
                    side[i] = if rank < n { Side::Train } else { Side::Test };
                }
            }
            StrategyKind::PosesPerBackground { k } => {
                if members.is_empty() {
                    return Err(insufficient(class, "synthetic images", 1, 0));
                }
                // background -> pose -> entries
                let mut grid: BTreeMap<&str, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
                for &i in &members {
                    let e = &entries[i];
                    let bg = e.background_id.as_deref().unwrap_or_default();
                    let pose = e.pose_id.as_deref().unwrap_or_default();
                    grid.entry(bg).or_default().entry(pose).or_default().push(i);
                }
                for (bg, poses) in grid {
                    let mut order: Vec<&str> = poses.keys().copied().collect();
                    SeededRng::new(strategy.seed, &format!("poses/{class}/{bg}")).shuffle(&mut order);
                    let chosen: BTreeSet<&str> = order.into_iter().take(k).collect();
                    for (pose, items) in &poses {
                        let s = if chosen.contains(pose) { Side::Train } else { Side::Test };
                        for &i in items {
                            side[i] = s;
                        }
                    }
                }
            }
        }
    }

    let mut plan = SplitPlan {
        strategy: strategy.clone(),
        train: Vec::new(),
        test: Vec::new(),
        summary: strategy
            .classes
            .iter()
            .map(|c| (c.clone(), ClassCounts::default()))
            .collect(),
    };
    for (e, s) in entries.iter().zip(&side) {
        match s {
            Side::Unused => {}
            Side::Train => {
                plan.train.push(e.image_id.clone());
                plan.summary.get_mut(&e.class_label).expect("class in subset").train += 1;
            }
            Side::Test => {
                plan.test.push(e.image_id.clone());
                plan.summary.get_mut(&e.class_label).expect("class in subset").test += 1;
            }
        }
    }
    Ok(plan)
}

fn insufficient(class: &str, unit: &'static str, requested: usize, available: usize) -> SplitError {
    SplitError::Insufficient {
        class: class.to_owned(),
        unit,
        requested,
        available,
    }
}

/// Sequence id -> entry indices ordered by frame.
fn sequences_of<'a>(entries: &'a [ManifestEntry], members: &[usize]) -> BTreeMap<&'a String, Vec<usize>> {
    let mut seqs: BTreeMap<&String, Vec<usize>> = BTreeMap::new();
    for &i in members {
        if let Some(s) = &entries[i].sequence_id {
            seqs.entry(s).or_default().push(i);
        }
    }
    for frames in seqs.values_mut() {
        frames.sort_by_key(|&i| entries[i].frame_index);
    }
    seqs
}

/// Whole-sequence selection. Sequences are visited in seeded-random order
/// and taken while the remaining gap to `n` stays wider than the class's
/// mean sequence length. The gap is then closed exactly or with the least overshoot by
/// a subset of the remaining sequences: fewest sequences first, earliest in
/// the shuffled order on ties.
fn complete_sequences(
    side: &mut [Side],
    class: &str,
    seqs: BTreeMap<&String, Vec<usize>>,
    n: usize,
    seed: u64,
) -> Result<(), SplitError> {
    let total: usize = seqs.values().map(Vec::len).sum();
    if total < n {
        return Err(insufficient(class, "video frames", n, total));
    }
    let mut order: Vec<&Vec<usize>> = seqs.values().collect();
    SeededRng::new(seed, &format!("complete-sequences/{class}")).shuffle(&mut order);
    let longest = order.iter().map(|s| s.len()).max().unwrap_or(0);
    let mean = total / order.len();

    let mut taken = vec![false; order.len()];
    let mut count = 0usize;
    let mut next = 0;
    while next < order.len() && count + order[next].len() + mean < n {
        taken[next] = true;
        count += order[next].len();
        next += 1;
    }
    if count < n {
        for j in close_gap(&order[next..], n - count, longest) {
            taken[next + j] = true;
        }
    }
    for (frames, t) in order.iter().zip(taken) {
        let s = if t { Side::Train } else { Side::Test };
        for &i in frames.iter() {
            side[i] = s;
        }
    }
    Ok(())
}

/// Subset of `seqs` whose total reaches `gap` with the least overshoot,
/// preferring fewer sequences and then lower indices.
fn close_gap(seqs: &[&Vec<usize>], gap: usize, longest: usize) -> Vec<usize> {
    // a minimal covering subset overshoots by less than its shortest member
    let cap = gap + longest;
    let mut best: Vec<Option<Vec<usize>>> = vec![None; cap];
    best[0] = Some(Vec::new());
    for (i, s) in seqs.iter().enumerate() {
        let len = s.len();
        for sum in (len..cap).rev() {
            let Some(prev) = &best[sum - len] else { continue };
            let mut cand = prev.clone();
            cand.push(i);
            let better = match &best[sum] {
                None => true,
                Some(cur) => (cand.len(), &cand) < (cur.len(), cur),
            };
            if better {
                best[sum] = Some(cand);
            }
        }
    }
    best.into_iter()
        .skip(gap)
        .flatten()
        .next()
        .expect("all remaining sequences together reach the gap")
}

/// `count` evenly spaced positions in `0..len` (`count <= len`). With
/// `centered`, samples sit in the middle of equal-width bins; otherwise
/// they start at 0. Consecutive gaps differ by at most one.
pub fn even_positions(len: usize, count: usize, centered: bool) -> Vec<usize> {
    debug_assert!(count <= len);
    let (len, count) = (len as u128, count as u128);
    (0..count)
        .map(|i| {
            if centered {
                ((2 * i + 1) * len / (2 * count)) as usize
            } else {
                (i * len / count) as usize
            }
        })
        .collect()
}

/// `ceil(fraction * len)`, ignoring floating-point dust just above an
/// integer so that e.g. 5% of 20 frames is 1, not 2.
pub fn prefix_len(fraction: f64, len: usize) -> usize {
    let exact = fraction * len as f64;
    ((exact - 1e-9).ceil().max(0.0) as usize).min(len)
}

/// Per-class train counts and the max/min imbalance ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceSummary {
    pub train_per_class: BTreeMap<String, usize>,
    /// `max / min` over classes; infinite when some class got nothing.
    pub ratio: f64,
}

pub fn summarize_balance(plan: &SplitPlan) -> Result<BalanceSummary, SplitError> {
    if plan.train.is_empty() {
        return Err(SplitError::EmptyPlan);
    }
    let train_per_class: BTreeMap<String, usize> =
        plan.summary.iter().map(|(c, n)| (c.clone(), n.train)).collect();
    let max = *train_per_class.values().max().expect("non-empty");
    let min = *train_per_class.values().min().expect("non-empty");
    let ratio = if min == 0 {
        f64::INFINITY
    } else {
        max as f64 / min as f64
    };
    Ok(BalanceSummary {
        train_per_class,
        ratio,
    })
}
