//! JSONL dataset file: one record per line with fields
//! id, synset, name ('|'-separated candidates), situation (array), label.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::RawSample;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    synset: String,
    name: String,
    situation: Vec<String>,
    label: String,
}

pub fn save_jsonl(samples: &[RawSample], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for s in samples {
        let record = Record {
            id: s.id.clone(),
            synset: s.synset.clone(),
            name: s.name_candidates.join(" | "),
            situation: s.situation_sentences.clone(),
            label: s.label.as_str().to_string(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::Validation(format!("serialize {}: {e}", s.id)))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_jsonl(path: &Path) -> Result<Vec<RawSample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Data {
            line: line_no,
            message: e.to_string(),
        })?;
        let label = record.label.parse().map_err(|_| Error::Data {
            line: line_no,
            message: format!("field \"label\": unknown value {:?}", record.label),
        })?;
        let name_candidates: Vec<String> = record
            .name
            .split('|')
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        if name_candidates.is_empty() {
            return Err(Error::Data {
                line: line_no,
                message: "field \"name\": no candidates".into(),
            });
        }
        samples.push(RawSample {
            id: record.id,
            synset: record.synset,
            name_candidates,
            situation_sentences: record.situation,
            label,
        });
    }
    Ok(samples)
}
