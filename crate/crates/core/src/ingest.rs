//! Loading and cleaning of the influence and song tables.
//!
//! The influence table lists one influencer → follower relation per row. The
//! song table carries per-track audio descriptors; after cleaning, 13 numeric
//! features remain (`mode` and `explicit` are discarded).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 13;

pub type FeatureRow = [f64; NUM_FEATURES];

/// The retained audio features, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Danceability,
    Energy,
    Valence,
    Tempo,
    Loudness,
    Key,
    Acousticness,
    Instrumentalness,
    Liveness,
    Speechiness,
    DurationMs,
    Popularity,
    Year,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::Danceability,
        Feature::Energy,
        Feature::Valence,
        Feature::Tempo,
        Feature::Loudness,
        Feature::Key,
        Feature::Acousticness,
        Feature::Instrumentalness,
        Feature::Liveness,
        Feature::Speechiness,
        Feature::DurationMs,
        Feature::Popularity,
        Feature::Year,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Danceability => "danceability",
            Feature::Energy => "energy",
            Feature::Valence => "valence",
            Feature::Tempo => "tempo",
            Feature::Loudness => "loudness",
            Feature::Key => "key",
            Feature::Acousticness => "acousticness",
            Feature::Instrumentalness => "instrumentalness",
            Feature::Liveness => "liveness",
            Feature::Speechiness => "speechiness",
            Feature::DurationMs => "duration_ms",
            Feature::Popularity => "popularity",
            Feature::Year => "year",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFeature(s.to_string()))
    }
}

/// Columns of the song table that never reach a feature vector.
pub const DROPPED_COLUMNS: [&str; 2] = ["explicit", "mode"];

pub const INFLUENCE_COLUMNS: [&str; 8] = [
    "influencer_id",
    "influencer_name",
    "influencer_main_genre",
    "influencer_active_start",
    "follower_id",
    "follower_name",
    "follower_main_genre",
    "follower_active_start",
];

const MIN_YEAR: i32 = 1900;
const MAX_YEAR: i32 = 2100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInfluenceRow {
    pub influencer_id: u64,
    pub influencer_name: String,
    pub influencer_main_genre: String,
    pub influencer_active_start: i32,
    pub follower_id: u64,
    pub follower_name: String,
    pub follower_main_genre: String,
    pub follower_active_start: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongRecord {
    pub artist_ids: Vec<u64>,
    pub danceability: f64,
    pub energy: f64,
    pub valence: f64,
    pub tempo: f64,
    pub loudness: f64,
    pub key: u8,
    pub acousticness: f64,
    pub instrumentalness: f64,
    pub liveness: f64,
    pub speechiness: f64,
    pub duration_ms: f64,
    pub popularity: f64,
    pub year: i32,
    pub mode: u8,
    pub explicit: u8,
    /// None of `artist_ids` occur in the influence table.
    pub unlinked: bool,
}

impl SongRecord {
    /// The 13 retained features in [`Feature::ALL`] order.
    pub fn features(&self) -> FeatureRow {
        [
            self.danceability,
            self.energy,
            self.valence,
            self.tempo,
            self.loudness,
            f64::from(self.key),
            self.acousticness,
            self.instrumentalness,
            self.liveness,
            self.speechiness,
            self.duration_ms,
            self.popularity,
            f64::from(self.year),
        ]
    }

    pub fn feature(&self, f: Feature) -> f64 {
        self.features()[f.index()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub rows_read: usize,
    pub rows_dropped_loudness: usize,
    pub rows_dropped_missing_artist: usize,
    pub rows_dropped_missing_value: usize,
    pub rows_dropped_out_of_range: usize,
    pub rows_flagged_unlinked: usize,
    pub columns_dropped: Vec<String>,
}

impl CleaningReport {
    pub fn rows_dropped(&self) -> usize {
        self.rows_dropped_loudness
            + self.rows_dropped_missing_artist
            + self.rows_dropped_missing_value
            + self.rows_dropped_out_of_range
    }

    pub fn rows_kept(&self) -> usize {
        self.rows_read - self.rows_dropped()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtistProfile {
    pub artist_id: u64,
    pub song_count: usize,
    pub features: FeatureRow,
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Row {
        line,
        message: e.to_string(),
    }
}

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(headers: &csv::StringRecord) -> Self {
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        Columns { index }
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    }

    fn any_of(&self, names: &[&str]) -> Result<usize> {
        names
            .iter()
            .find_map(|n| self.index.get(*n).copied())
            .ok_or_else(|| Error::Schema(format!("missing column `{}`", names[0])))
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("").trim();
    raw.parse::<T>().map_err(|_| Error::Row {
        line,
        message: format!("cannot parse `{name}` from {raw:?}"),
    })
}

pub fn load_influence(path: impl AsRef<Path>) -> Result<Vec<RawInfluenceRow>> {
    read_influence(open(path.as_ref())?)
}

/// Parses an influence table; duplicate (influencer, follower) pairs keep the
/// first occurrence.
pub fn read_influence<R: Read>(reader: R) -> Result<Vec<RawInfluenceRow>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let cols = Columns::new(rdr.headers().map_err(csv_err)?);
    let idx: Vec<usize> = INFLUENCE_COLUMNS
        .iter()
        .map(|c| cols.require(c))
        .collect::<Result<_>>()?;

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let text = |i: usize| rec.get(idx[i]).unwrap_or("").trim().to_string();
        let row = RawInfluenceRow {
            influencer_id: parse_field(&rec, idx[0], INFLUENCE_COLUMNS[0], line)?,
            influencer_name: text(1),
            influencer_main_genre: text(2),
            influencer_active_start: parse_field(&rec, idx[3], INFLUENCE_COLUMNS[3], line)?,
            follower_id: parse_field(&rec, idx[4], INFLUENCE_COLUMNS[4], line)?,
            follower_name: text(5),
            follower_main_genre: text(6),
            follower_active_start: parse_field(&rec, idx[7], INFLUENCE_COLUMNS[7], line)?,
        };
        for year in [row.influencer_active_start, row.follower_active_start] {
            if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
                return Err(Error::Row {
                    line,
                    message: format!("active_start {year} outside [{MIN_YEAR}, {MAX_YEAR}]"),
                });
            }
        }
        if seen.insert((row.influencer_id, row.follower_id)) {
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_influence<W: Write>(writer: W, rows: &[RawInfluenceRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(INFLUENCE_COLUMNS).map_err(csv_err)?;
    for r in rows {
        wtr.write_record([
            r.influencer_id.to_string(),
            r.influencer_name.clone(),
            r.influencer_main_genre.clone(),
            r.influencer_active_start.to_string(),
            r.follower_id.to_string(),
            r.follower_name.clone(),
            r.follower_main_genre.clone(),
            r.follower_active_start.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<influence writer>", e))
}

/// Parses `"[101, 202]"` (brackets optional) into ids.
pub fn parse_id_list(raw: &str) -> std::result::Result<Vec<u64>, String> {
    let inner = raw
        .trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|s| {
            let s = s.trim().trim_matches(|c| c == '\'' || c == '"');
            s.parse::<u64>().map_err(|_| format!("bad artist id {s:?}"))
        })
        .collect()
}

pub fn format_id_list(ids: &[u64]) -> String {
    let parts: Vec<String> = ids.iter().map(u64::to_string).collect();
    format!("[{}]", parts.join(", "))
}

const SONG_NUMERIC: [&str; 13] = [
    "danceability",
    "energy",
    "valence",
    "tempo",
    "loudness",
    "key",
    "acousticness",
    "instrumentalness",
    "liveness",
    "speechiness",
    "duration_ms",
    "popularity",
    "year",
];

const SONG_HEADER: [&str; 16] = [
    "artist_ids",
    "danceability",
    "energy",
    "valence",
    "tempo",
    "loudness",
    "mode",
    "key",
    "acousticness",
    "instrumentalness",
    "liveness",
    "speechiness",
    "explicit",
    "duration_ms",
    "popularity",
    "year",
];

enum RowOutcome {
    Kept(SongRecord),
    MissingValue,
    MissingArtist,
    Loudness,
    OutOfRange,
}

pub fn load_songs(
    path: impl AsRef<Path>,
    known_artists: Option<&HashSet<u64>>,
) -> Result<(Vec<SongRecord>, CleaningReport)> {
    read_songs(open(path.as_ref())?, known_artists)
}

/// Parses and cleans a song table.
///
/// Rows with an empty numeric cell, an empty artist list, loudness outside
/// `[-60, 0]`, or another out-of-range descriptor are dropped; each dropped row
/// is counted under exactly one reason, checked in that order. When
/// `known_artists` is given, rows none of whose artists are known are kept
/// and flagged `unlinked`.
pub fn read_songs<R: Read>(
    reader: R,
    known_artists: Option<&HashSet<u64>>,
) -> Result<(Vec<SongRecord>, CleaningReport)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let cols = Columns::new(rdr.headers().map_err(csv_err)?);
    let artists_col = cols.any_of(&["artist_ids", "artists_id"])?;
    let numeric: Vec<usize> = SONG_NUMERIC
        .iter()
        .map(|c| cols.require(c))
        .collect::<Result<_>>()?;
    let mode_col = cols.optional("mode");
    let explicit_col = cols.optional("explicit");

    let mut report = CleaningReport {
        columns_dropped: DROPPED_COLUMNS.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    let mut songs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        report.rows_read += 1;
        match clean_song_row(&rec, artists_col, &numeric, mode_col, explicit_col)? {
            RowOutcome::Kept(mut song) => {
                if let Some(known) = known_artists {
                    song.unlinked = !song.artist_ids.iter().any(|id| known.contains(id));
                    if song.unlinked {
                        report.rows_flagged_unlinked += 1;
                    }
                }
                songs.push(song);
            }
            RowOutcome::MissingValue => report.rows_dropped_missing_value += 1,
            RowOutcome::MissingArtist => report.rows_dropped_missing_artist += 1,
            RowOutcome::Loudness => report.rows_dropped_loudness += 1,
            RowOutcome::OutOfRange => report.rows_dropped_out_of_range += 1,
        }
    }
    Ok((songs, report))
}

fn clean_song_row(
    rec: &csv::StringRecord,
    artists_col: usize,
    numeric: &[usize],
    mode_col: Option<usize>,
    explicit_col: Option<usize>,
) -> Result<RowOutcome> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let mut vals = [0.0f64; NUM_FEATURES];
    for (slot, (&idx, name)) in vals.iter_mut().zip(numeric.iter().zip(SONG_NUMERIC)) {
        let raw = rec.get(idx).unwrap_or("").trim();
        if raw.is_empty() {
            return Ok(RowOutcome::MissingValue);
        }
        let v: f64 = raw.parse().map_err(|_| Error::Row {
            line,
            message: format!("cannot parse `{name}` from {raw:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Row {
                line,
                message: format!("non-finite `{name}`"),
            });
        }
        *slot = v;
    }
    let flag = |col: Option<usize>, name: &str| -> Result<Option<f64>> {
        let Some(idx) = col else { return Ok(Some(0.0)) };
        let raw = rec.get(idx).unwrap_or("").trim();
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse::<f64>().map(Some).map_err(|_| Error::Row {
            line,
            message: format!("cannot parse `{name}` from {raw:?}"),
        })
    };
    let (Some(mode), Some(explicit)) = (flag(mode_col, "mode")?, flag(explicit_col, "explicit")?)
    else {
        return Ok(RowOutcome::MissingValue);
    };

    let artist_ids = parse_id_list(rec.get(artists_col).unwrap_or("")).map_err(|message| {
        Error::Row { line, message }
    })?;
    if artist_ids.is_empty() {
        return Ok(RowOutcome::MissingArtist);
    }

    let [danceability, energy, valence, tempo, loudness, key, acousticness, instrumentalness, liveness, speechiness, duration_ms, popularity, year] =
        vals;
    if !(-60.0..=0.0).contains(&loudness) {
        return Ok(RowOutcome::Loudness);
    }
    let unit = [
        danceability,
        energy,
        valence,
        acousticness,
        instrumentalness,
        liveness,
        speechiness,
    ];
    let in_range = unit.iter().all(|v| (0.0..=1.0).contains(v))
        && tempo >= 0.0
        && duration_ms > 0.0
        && popularity >= 0.0
        && is_int_in(key, 0.0, 11.0)
        && is_int_in(mode, 0.0, 1.0)
        && is_int_in(explicit, 0.0, 1.0)
        && year.fract() == 0.0
        && year.abs() < f64::from(i32::MAX);
    if !in_range {
        return Ok(RowOutcome::OutOfRange);
    }

    Ok(RowOutcome::Kept(SongRecord {
        artist_ids,
        danceability,
        energy,
        valence,
        tempo,
        loudness,
        key: key as u8,
        acousticness,
        instrumentalness,
        liveness,
        speechiness,
        duration_ms,
        popularity,
        year: year as i32,
        mode: mode as u8,
        explicit: explicit as u8,
        unlinked: false,
    }))
}

fn is_int_in(v: f64, lo: f64, hi: f64) -> bool {
    v.fract() == 0.0 && v >= lo && v <= hi
}

pub fn write_songs<W: Write>(writer: W, songs: &[SongRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SONG_HEADER).map_err(csv_err)?;
    for s in songs {
        wtr.write_record([
            format_id_list(&s.artist_ids),
            s.danceability.to_string(),
            s.energy.to_string(),
            s.valence.to_string(),
            s.tempo.to_string(),
            s.loudness.to_string(),
            s.mode.to_string(),
            s.key.to_string(),
            s.acousticness.to_string(),
            s.instrumentalness.to_string(),
            s.liveness.to_string(),
            s.speechiness.to_string(),
            s.explicit.to_string(),
            s.duration_ms.to_string(),
            s.popularity.to_string(),
            s.year.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<song writer>", e))
}

/// Per-artist mean of the retained features. A song credited to k artists
/// contributes to all k profiles.
pub fn build_artist_profiles(songs: &[SongRecord]) -> BTreeMap<u64, ArtistProfile> {
    let mut acc: BTreeMap<u64, (usize, FeatureRow)> = BTreeMap::new();
    for song in songs {
        let f = song.features();
        let mut credited = song.artist_ids.clone();
        credited.sort_unstable();
        credited.dedup();
        for id in credited {
            let (n, sum) = acc.entry(id).or_insert((0, [0.0; NUM_FEATURES]));
            *n += 1;
            for (s, v) in sum.iter_mut().zip(f) {
                *s += v;
            }
        }
    }
    acc.into_iter()
        .map(|(id, (n, sum))| {
            let features = sum.map(|s| s / n as f64);
            (
                id,
                ArtistProfile {
                    artist_id: id,
                    song_count: n,
                    features,
                },
            )
        })
        .collect()
}

pub fn write_profiles<'a, W, I>(writer: W, profiles: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ArtistProfile>,
{
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["artist_id".to_string(), "song_count".to_string()];
    header.extend(Feature::ALL.iter().map(|f| f.name().to_string()));
    wtr.write_record(&header).map_err(csv_err)?;
    for p in profiles {
        let mut rec = vec![p.artist_id.to_string(), p.song_count.to_string()];
        rec.extend(p.features.iter().map(f64::to_string));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<profile writer>", e))
}

pub fn read_profiles<R: Read>(reader: R) -> Result<BTreeMap<u64, ArtistProfile>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let cols = Columns::new(rdr.headers().map_err(csv_err)?);
    let id_col = cols.require("artist_id")?;
    let n_col = cols.require("song_count")?;
    let feat_cols: Vec<usize> = Feature::ALL
        .iter()
        .map(|f| cols.require(f.name()))
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let artist_id: u64 = parse_field(&rec, id_col, "artist_id", line)?;
        let song_count: usize = parse_field(&rec, n_col, "song_count", line)?;
        let mut features = [0.0; NUM_FEATURES];
        for (slot, (&c, f)) in features.iter_mut().zip(feat_cols.iter().zip(Feature::ALL)) {
            *slot = parse_field(&rec, c, f.name(), line)?;
        }
        out.insert(
            artist_id,
            ArtistProfile {
                artist_id,
                song_count,
                features,
            },
        );
    }
    Ok(out)
}
