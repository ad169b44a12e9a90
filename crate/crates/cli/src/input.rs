//! Dataset CSV ingestion and loss-free re-emission.
//!
//! Schema: header `study,tp,n_diseased,tn,n_healthy`; integer counts;
//! comment lines start with '#'.

use copmix::likelihood::{Dataset, StudyRecord};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const HEADER: &str = "study,tp,n_diseased,tn,n_healthy";

/// One parsed input row, kept verbatim so reports can echo the dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub study: String,
    pub tp: u64,
    pub n_diseased: u64,
    pub tn: u64,
    pub n_healthy: u64,
}

pub fn parse_csv(text: &str) -> Result<Vec<StudyRow>, CliError> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != HEADER {
                return Err(CliError::input(format!(
                    "line {line_no}: expected header '{HEADER}', got '{line}'"
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::input(format!(
                "line {line_no}: expected 5 fields, got {}",
                fields.len()
            )));
        }
        let parse_count = |col: usize, name: &str| -> Result<u64, CliError> {
            fields[col].trim().parse::<u64>().map_err(|_| {
                CliError::input(format!(
                    "line {line_no}, column {} ({name}): '{}' is not a non-negative integer",
                    col + 1,
                    fields[col].trim()
                ))
            })
        };
        let row = StudyRow {
            study: fields[0].trim().to_string(),
            tp: parse_count(1, "tp")?,
            tn: parse_count(3, "tn")?,
            n_diseased: parse_count(2, "n_diseased")?,
            n_healthy: parse_count(4, "n_healthy")?,
        };
        if row.tp > row.n_diseased {
            return Err(CliError::input(format!(
                "line {line_no}: study '{}': tp {} exceeds n_diseased {}",
                row.study, row.tp, row.n_diseased
            )));
        }
        if row.tn > row.n_healthy {
            return Err(CliError::input(format!(
                "line {line_no}: study '{}': tn {} exceeds n_healthy {}",
                row.study, row.tn, row.n_healthy
            )));
        }
        if row.n_diseased == 0 && row.n_healthy == 0 {
            return Err(CliError::input(format!(
                "line {line_no}: study '{}' has no subjects in either group",
                row.study
            )));
        }
        rows.push(row);
    }
    if !saw_header {
        return Err(CliError::input("empty input: no header line".to_string()));
    }
    if rows.is_empty() {
        return Err(CliError::input("no data rows after the header".to_string()));
    }
    Ok(rows)
}

pub fn to_dataset(rows: &[StudyRow]) -> Result<Dataset, CliError> {
    let mut studies = Vec::with_capacity(rows.len());
    for row in rows {
        let record = StudyRecord::new(row.tp, row.n_diseased, row.tn, row.n_healthy)
            .map_err(|e| CliError::input(format!("study '{}': {e}", row.study)))?;
        studies.push(record);
    }
    let labels = rows.iter().map(|r| r.study.clone()).collect();
    Dataset::with_labels(studies, labels)
        .map_err(|e| CliError::input(e.to_string()))
}

/// Re-emits the rows in the input schema; parsing then emitting an input
/// reproduces its counts exactly.
pub fn emit_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.study, r.tp, r.n_diseased, r.tn, r.n_healthy
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# comment\nstudy,tp,n_diseased,tn,n_healthy\na,5,10,8,10\nb,7,12,9,11\n";

    #[test]
    fn parse_emit_roundtrip_is_loss_free() {
        let rows = parse_csv(SAMPLE).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].tp, 5);
        let emitted = emit_csv(&rows);
        let again = parse_csv(&emitted).unwrap();
        assert_eq!(emit_csv(&again), emitted);
    }

    #[test]
    fn bad_integer_names_line_and_column() {
        let text = "study,tp,n_diseased,tn,n_healthy\na,5,ten,8,10\n";
        let err = parse_csv(text).unwrap_err();
        let msg = format!("{err:?}");
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("column 3"), "{msg}");
    }

    #[test]
    fn empty_study_rejected() {
        let text = "study,tp,n_diseased,tn,n_healthy\na,0,0,0,0\n";
        let err = parse_csv(text).unwrap_err();
        assert!(format!("{err:?}").contains("no subjects"));
    }

    #[test]
    fn wrong_header_rejected() {
        let err = parse_csv("study,tp,fn,tn,fp\na,1,2,3,4\n").unwrap_err();
        assert!(format!("{err:?}").contains("expected header"));
    }

    #[test]
    fn count_exceeding_denominator_rejected() {
        let text = "study,tp,n_diseased,tn,n_healthy\na,11,10,8,10\n";
        let err = parse_csv(text).unwrap_err();
        assert!(format!("{err:?}").contains("exceeds"));
    }
}
