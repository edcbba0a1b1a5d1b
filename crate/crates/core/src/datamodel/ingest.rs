//! File ingestion and serialization for the four cohort input files.
//!
//! Formats (see README):
//! - `events.jsonl`      one JSON object per screen record
//! - `assessments.csv`   participant_id,assessment_index,ts,cesd,missingness
//! - `demographics.csv`  participant_id,age,gender,race,ethnicity,income_band,utc_offset
//! - `embeddings.jsonl`  one JSON object per embedding vector
//!
//! Ingest -> serialize -> ingest round-trips to an identical cohort because
//! `Cohort::finalize` enforces canonical ordering on both paths.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use super::{
    AssessmentRecord, Cohort, Demographics, EmbeddingRecord, Ethnicity, Gender, IncomeBand,
    Participant, ScreenRecord,
};
use crate::error::{Error, Result};

/// Row counts observed during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct LoadReport {
    pub events: usize,
    pub assessments: usize,
    pub demographics: usize,
    pub embeddings: usize,
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Deserialize)]
struct EventRow {
    participant_id: String,
    ts: i64,
    app_id: String,
    is_social: bool,
}

#[derive(Deserialize)]
struct EmbeddingRow {
    participant_id: String,
    ts: i64,
    vector: Vec<f64>,
}

/// Field accessor for one CSV record, carrying enough context to produce
/// a `file:line: field` error.
struct Fields<'a> {
    file: &'a str,
    line: usize,
    header_index: &'a BTreeMap<String, usize>,
    rec: &'a csv::StringRecord,
}

impl<'a> Fields<'a> {
    fn err(&self, field: &str, message: impl Into<String>) -> Error {
        Error::parse(self.file, self.line, field, message)
    }

    fn get(&self, name: &str) -> Result<&'a str> {
        let idx = self
            .header_index
            .get(name)
            .ok_or_else(|| Error::parse(self.file, 1, name, "column missing from header"))?;
        self.rec
            .get(*idx)
            .map(str::trim)
            .ok_or_else(|| self.err(name, "missing value"))
    }

    fn get_opt(&self, name: &str) -> Option<&'a str> {
        self.header_index
            .get(name)
            .and_then(|i| self.rec.get(*i))
            .map(str::trim)
    }

    fn parse<T: std::str::FromStr>(&self, name: &str) -> Result<T> {
        let raw = self.get(name)?;
        raw.parse::<T>()
            .map_err(|_| self.err(name, format!("cannot parse `{raw}`")))
    }
}

/// Iterates a headered CSV file, handing each record to `f` with 1-based
/// file line numbers (header is line 1).
fn for_each_csv_row(
    path: &Path,
    mut f: impl FnMut(Fields<'_>) -> Result<()>,
) -> Result<()> {
    let file = file_name(path);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let header_index: BTreeMap<String, usize> = reader
        .headers()
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    for (row_no, rec) in reader.records().enumerate() {
        let line = row_no + 2;
        let rec = rec.map_err(|e| Error::parse(file.clone(), line, "record", e.to_string()))?;
        f(Fields {
            file: &file,
            line,
            header_index: &header_index,
            rec: &rec,
        })?;
    }
    Ok(())
}

/// Loads and validates a cohort from the four input files
/// (`embeddings_path` optional). Errors name file, line and field.
pub fn load_cohort(
    events_path: &Path,
    assessments_path: &Path,
    demographics_path: &Path,
    embeddings_path: Option<&Path>,
) -> Result<(Cohort, LoadReport)> {
    let mut report = LoadReport::default();
    let mut participants: BTreeMap<String, Participant> = BTreeMap::new();

    // Demographics first: they define the participant set.
    for_each_csv_row(demographics_path, |f| {
        let age_years: u32 = f.parse("age")?;
        if age_years < 18 {
            return Err(f.err("age", format!("age {age_years} below adult minimum 18")));
        }
        let gender_raw = f.get("gender")?;
        let gender = Gender::parse(gender_raw)
            .ok_or_else(|| f.err("gender", format!("unknown gender `{gender_raw}`")))?;
        let ethnicity_raw = f.get("ethnicity")?;
        let ethnicity = Ethnicity::parse(ethnicity_raw)
            .ok_or_else(|| f.err("ethnicity", format!("unknown ethnicity `{ethnicity_raw}`")))?;
        let income_raw = f.get("income_band")?;
        let income_band = IncomeBand::parse(income_raw)
            .ok_or_else(|| f.err("income_band", format!("unknown income band `{income_raw}`")))?;
        let mut race: Vec<String> = f
            .get("race")?
            .split(';')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        race.sort();
        race.dedup();
        let utc_offset_seconds = match f.get_opt("utc_offset") {
            Some(raw) if !raw.is_empty() => raw
                .parse()
                .map_err(|_| f.err("utc_offset", format!("cannot parse `{raw}`")))?,
            _ => 0,
        };
        let pid = f.get("participant_id")?.to_string();
        if pid.is_empty() {
            return Err(f.err("participant_id", "empty id"));
        }
        if participants.contains_key(&pid) {
            return Err(f.err("participant_id", format!("duplicate participant `{pid}`")));
        }
        participants.insert(
            pid.clone(),
            Participant {
                demographics: Demographics {
                    participant_id: pid,
                    age_years,
                    gender,
                    race,
                    ethnicity,
                    income_band,
                    utc_offset_seconds,
                },
                assessments: Vec::new(),
                screen_records: Vec::new(),
                embeddings: Vec::new(),
            },
        );
        report.demographics += 1;
        Ok(())
    })?;

    let mut seen_idx: BTreeMap<(String, u32), usize> = BTreeMap::new();
    for_each_csv_row(assessments_path, |f| {
        let cesd_raw: i64 = f.parse("cesd")?;
        if !(0..=60).contains(&cesd_raw) {
            return Err(f.err("cesd", format!("value {cesd_raw} outside range 0-60")));
        }
        let missingness: f64 = f.parse("missingness")?;
        if !(0.0..=1.0).contains(&missingness) {
            return Err(f.err("missingness", format!("value {missingness} outside [0,1]")));
        }
        let participant_id = f.get("participant_id")?.to_string();
        let assessment_index: u32 = f.parse("assessment_index")?;
        if let Some(prev_line) =
            seen_idx.insert((participant_id.clone(), assessment_index), f.line)
        {
            return Err(f.err(
                "assessment_index",
                format!(
                    "duplicate (participant `{participant_id}`, index {assessment_index}); first seen on line {prev_line}"
                ),
            ));
        }
        let ts: i64 = f.parse("ts")?;
        let part = participants.get_mut(&participant_id).ok_or_else(|| {
            f.err(
                "participant_id",
                format!("participant `{participant_id}` missing from demographics"),
            )
        })?;
        part.assessments.push(AssessmentRecord {
            participant_id,
            assessment_index,
            ts,
            cesd: cesd_raw as u8,
            missingness,
        });
        report.assessments += 1;
        Ok(())
    })?;

    let fname = file_name(events_path);
    let reader = open_buffered(events_path)?;
    for (line_no, line_res) in reader.lines().enumerate() {
        let line = line_no + 1;
        let text = line_res.map_err(|e| Error::io(fname.clone(), e))?;
        if text.trim().is_empty() {
            continue;
        }
        let row: EventRow = serde_json::from_str(&text)
            .map_err(|e| Error::parse(fname.clone(), line, "record", format!("invalid JSON: {e}")))?;
        if row.ts <= 0 {
            return Err(Error::parse(
                fname.clone(),
                line,
                "ts",
                format!("timestamp {} not strictly positive", row.ts),
            ));
        }
        let part = participants.get_mut(&row.participant_id).ok_or_else(|| {
            Error::parse(
                fname.clone(),
                line,
                "participant_id",
                format!("participant `{}` missing from demographics", row.participant_id),
            )
        })?;
        part.screen_records.push(ScreenRecord {
            participant_id: row.participant_id,
            ts: row.ts,
            app_id: row.app_id,
            is_social: row.is_social,
        });
        report.events += 1;
    }

    if let Some(embeddings_path) = embeddings_path {
        let fname = file_name(embeddings_path);
        let reader = open_buffered(embeddings_path)?;
        let mut dim: Option<usize> = None;
        for (line_no, line_res) in reader.lines().enumerate() {
            let line = line_no + 1;
            let text = line_res.map_err(|e| Error::io(fname.clone(), e))?;
            if text.trim().is_empty() {
                continue;
            }
            let row: EmbeddingRow = serde_json::from_str(&text).map_err(|e| {
                Error::parse(fname.clone(), line, "record", format!("invalid JSON: {e}"))
            })?;
            if row.vector.is_empty() || row.vector.iter().all(|v| *v == 0.0) {
                return Err(Error::parse(
                    fname.clone(),
                    line,
                    "vector",
                    "zero vector is not normalizable",
                ));
            }
            if !row.vector.iter().all(|v| v.is_finite()) {
                return Err(Error::parse(fname.clone(), line, "vector", "non-finite component"));
            }
            match dim {
                None => dim = Some(row.vector.len()),
                Some(d) if d != row.vector.len() => {
                    return Err(Error::parse(
                        fname.clone(),
                        line,
                        "vector",
                        format!("dimension {} != cohort dimension {d}", row.vector.len()),
                    ));
                }
                _ => {}
            }
            let part = participants.get_mut(&row.participant_id).ok_or_else(|| {
                Error::parse(
                    fname.clone(),
                    line,
                    "participant_id",
                    format!("participant `{}` missing from demographics", row.participant_id),
                )
            })?;
            part.embeddings.push(EmbeddingRecord {
                participant_id: row.participant_id,
                ts: row.ts,
                vector: row.vector,
            });
            report.embeddings += 1;
        }
    }

    let cohort = Cohort {
        participants,
        embedding_dim: None,
    }
    .finalize()?;
    Ok((cohort, report))
}

/// Writes a cohort back out as the four input files under `dir`; returns
/// the file names written (embeddings file only when vectors exist).
pub fn write_cohort(cohort: &Cohort, dir: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();

    let demo_path = dir.join("demographics.csv");
    {
        let mut w = buffered_writer(&demo_path)?;
        write_io(&demo_path, writeln!(
            w,
            "participant_id,age,gender,race,ethnicity,income_band,utc_offset"
        ))?;
        for part in cohort.participants.values() {
            let d = &part.demographics;
            write_io(&demo_path, writeln!(
                w,
                "{},{},{},{},{},{},{}",
                d.participant_id,
                d.age_years,
                d.gender.as_str(),
                d.race.join(";"),
                d.ethnicity.as_str(),
                d.income_band.as_str(),
                d.utc_offset_seconds
            ))?;
        }
        write_io(&demo_path, w.flush())?;
    }
    written.push("demographics.csv".to_string());

    let assess_path = dir.join("assessments.csv");
    {
        let mut w = buffered_writer(&assess_path)?;
        write_io(&assess_path, writeln!(w, "participant_id,assessment_index,ts,cesd,missingness"))?;
        for part in cohort.participants.values() {
            for a in &part.assessments {
                write_io(&assess_path, writeln!(
                    w,
                    "{},{},{},{},{}",
                    a.participant_id, a.assessment_index, a.ts, a.cesd, a.missingness
                ))?;
            }
        }
        write_io(&assess_path, w.flush())?;
    }
    written.push("assessments.csv".to_string());

    let events_path = dir.join("events.jsonl");
    {
        let mut w = buffered_writer(&events_path)?;
        for part in cohort.participants.values() {
            for r in &part.screen_records {
                let line = serde_json::json!({
                    "participant_id": r.participant_id,
                    "ts": r.ts,
                    "app_id": r.app_id,
                    "is_social": r.is_social,
                });
                write_io(&events_path, writeln!(w, "{line}"))?;
            }
        }
        write_io(&events_path, w.flush())?;
    }
    written.push("events.jsonl".to_string());

    if cohort.participants.values().any(|p| !p.embeddings.is_empty()) {
        let emb_path = dir.join("embeddings.jsonl");
        let mut w = buffered_writer(&emb_path)?;
        for part in cohort.participants.values() {
            for e in &part.embeddings {
                let line = serde_json::json!({
                    "participant_id": e.participant_id,
                    "ts": e.ts,
                    "vector": e.vector,
                });
                write_io(&emb_path, writeln!(w, "{line}"))?;
            }
        }
        write_io(&emb_path, w.flush())?;
        written.push("embeddings.jsonl".to_string());
    }

    Ok(written)
}

fn write_io(path: &Path, res: std::io::Result<()>) -> Result<()> {
    res.map_err(|e| Error::io(path.display().to_string(), e))
}

fn open_buffered(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn buffered_writer(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    fn two_participant_files(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
        let demo = write_file(
            dir,
            "demographics.csv",
            "participant_id,age,gender,race,ethnicity,income_band,utc_offset\n\
             p1,34,female,white,non_hispanic,below_25k,0\n\
             p2,51,male,asian;white,hispanic,above_100k,-28800\n",
        );
        let assess = write_file(
            dir,
            "assessments.csv",
            "participant_id,assessment_index,ts,cesd,missingness\n\
             p1,0,1000000,12,0\n\
             p1,1,2209600,15,0.02\n\
             p2,0,1000500,30,0\n\
             p2,1,2210100,28,0.01\n",
        );
        let events = write_file(
            dir,
            "events.jsonl",
            r#"{"participant_id":"p1","ts":1500000,"app_id":"app_1","is_social":false}
{"participant_id":"p2","ts":1500005,"app_id":"app_2","is_social":true}
"#,
        );
        let emb = write_file(
            dir,
            "embeddings.jsonl",
            r#"{"participant_id":"p1","ts":1500000,"vector":[1.0,0.0]}
{"participant_id":"p2","ts":1500005,"vector":[0.0,2.0]}
"#,
        );
        (events, assess, demo, emb)
    }

    #[test]
    fn loads_two_participants() {
        let tmp = tempfile::tempdir().unwrap();
        let (events, assess, demo, emb) = two_participant_files(tmp.path());
        let (cohort, report) = load_cohort(&events, &assess, &demo, Some(&emb)).unwrap();
        assert_eq!(cohort.n_participants(), 2);
        assert_eq!(report.assessments, 4);
        assert_eq!(report.events, 2);
        assert_eq!(report.embeddings, 2);
        assert_eq!(cohort.embedding_dim, Some(2));
    }

    #[test]
    fn cesd_out_of_range_names_file_line_field() {
        let tmp = tempfile::tempdir().unwrap();
        let (events, _, demo, _) = two_participant_files(tmp.path());
        let bad = write_file(
            tmp.path(),
            "bad_assessments.csv",
            "participant_id,assessment_index,ts,cesd,missingness\n\
             p1,0,1000000,61,0\n",
        );
        let err = load_cohort(&events, &bad, &demo, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad_assessments.csv"), "{msg}");
        assert!(msg.contains(":2:"), "{msg}");
        assert!(msg.contains("cesd"), "{msg}");
        assert!(msg.contains("0-60"), "{msg}");
    }

    #[test]
    fn zero_vector_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let (events, assess, demo, _) = two_participant_files(tmp.path());
        let bad = write_file(
            tmp.path(),
            "bad_embeddings.jsonl",
            r#"{"participant_id":"p1","ts":1500000,"vector":[0.0,0.0]}
"#,
        );
        let err = load_cohort(&events, &assess, &demo, Some(&bad)).unwrap_err();
        assert!(err.to_string().contains("zero vector"), "{err}");
    }

    #[test]
    fn duplicate_assessment_index_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let (events, _, demo, _) = two_participant_files(tmp.path());
        let bad = write_file(
            tmp.path(),
            "dup_assessments.csv",
            "participant_id,assessment_index,ts,cesd,missingness\n\
             p1,0,1000000,10,0\n\
             p1,0,2000000,11,0\n",
        );
        let err = load_cohort(&events, &bad, &demo, None).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn round_trip_is_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let (events, assess, demo, emb) = two_participant_files(tmp.path());
        let (cohort, _) = load_cohort(&events, &assess, &demo, Some(&emb)).unwrap();
        let out = tmp.path().join("rt");
        write_cohort(&cohort, &out).unwrap();
        let (cohort2, _) = load_cohort(
            &out.join("events.jsonl"),
            &out.join("assessments.csv"),
            &out.join("demographics.csv"),
            Some(&out.join("embeddings.jsonl")),
        )
        .unwrap();
        assert_eq!(cohort, cohort2);
    }
}
