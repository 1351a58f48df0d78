//! Response-matrix files for calibration.
//!
//! CSV with a header row `student_id,<item id>,<item id>,...` and one row per
//! student. Cells are `1` (correct), `0` (incorrect), or empty / `NA` / `.`
//! (not administered).

use std::path::Path;

use super::BankError;

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    pub item_ids: Vec<String>,
    pub student_ids: Vec<String>,
    pub rows: Vec<Vec<Option<bool>>>,
}

pub fn parse_response_matrix(text: &str) -> Result<ResponseMatrix, BankError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| BankError::Matrix(e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(BankError::Matrix("header needs student_id and at least one item".into()));
    }
    let item_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut student_ids = Vec::new();
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let line = n + 2;
        let record = record.map_err(|e| BankError::Matrix(format!("line {line}: {e}")))?;
        if record.len() != header.len() {
            return Err(BankError::Matrix(format!(
                "line {line}: {} fields, expected {}",
                record.len(),
                header.len()
            )));
        }
        student_ids.push(record[0].to_string());
        let row = record
            .iter()
            .skip(1)
            .map(|cell| match cell {
                "1" => Ok(Some(true)),
                "0" => Ok(Some(false)),
                "" | "NA" | "." => Ok(None),
                other => Err(BankError::Matrix(format!("line {line}: bad cell {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(ResponseMatrix { item_ids, student_ids, rows })
}

pub fn load_response_matrix(path: impl AsRef<Path>) -> Result<ResponseMatrix, BankError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| BankError::Io { path: path.display().to_string(), source })?;
    parse_response_matrix(&text)
}
