//! Dataset ingestion from CSV and KEEL `.dat` files.
//!
//! KEEL attribute declarations drive the column typing: enumerated
//! attributes become categorical columns with the declared state order,
//! `real`/`integer` attributes become numeric columns flagged for
//! discretization. CSV columns are categorical with first-appearance state
//! order unless named in `numeric_columns`. Missing values are a hard error
//! naming the row and column.

use std::path::Path;

use crate::core::{Dataset, Variable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    KeelDat,
}

/// One ingested column: either ready categorical states or raw numbers
/// awaiting discretization.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Categorical { labels: Vec<String>, values: Vec<usize> },
    Numeric(Vec<f64>),
}

/// An ingested table, possibly still holding numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub name: String,
    pub columns: Vec<(String, ColumnData)>,
    /// Output variable declared by the file, when any.
    pub declared_output: Option<String>,
}

impl DataTable {
    pub fn num_rows(&self) -> usize {
        match &self.columns.first() {
            Some((_, ColumnData::Categorical { values, .. })) => values.len(),
            Some((_, ColumnData::Numeric(values))) => values.len(),
            None => 0,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    /// Names of the columns still numeric.
    pub fn numeric_columns(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|(_, c)| matches!(c, ColumnData::Numeric(_)))
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// Target column: the declared output when present, else the last column.
    pub fn default_target(&self) -> Option<String> {
        self.declared_output
            .clone()
            .or_else(|| self.columns.last().map(|(n, _)| n.clone()))
    }

    /// Converts to a [`Dataset`]; every column must be categorical by now.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let mut variables = Vec::with_capacity(self.columns.len());
        for (name, col) in &self.columns {
            match col {
                ColumnData::Categorical { labels, .. } => {
                    variables.push(Variable::new(name.clone(), labels.clone())?);
                }
                ColumnData::Numeric(_) => {
                    return Err(Error::Input(format!(
                        "column {name} is numeric; discretize it first"
                    )));
                }
            }
        }
        let n = self.num_rows();
        let mut rows = vec![Vec::with_capacity(self.columns.len()); n];
        for (_, col) in &self.columns {
            if let ColumnData::Categorical { values, .. } = col {
                for (r, &v) in values.iter().enumerate() {
                    rows[r].push(v);
                }
            }
        }
        Dataset::new(variables, rows)
    }
}

/// Reads a table, inferring the format from the extension when not given
/// (`.dat` means KEEL, anything else CSV).
pub fn ingest(path: &Path, format: Option<Format>) -> Result<DataTable> {
    ingest_with_numeric(path, format, &[])
}

/// Same, forcing the named CSV columns to be numeric.
pub fn ingest_with_numeric(
    path: &Path,
    format: Option<Format>,
    numeric_columns: &[String],
) -> Result<DataTable> {
    let format = format.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()) {
            Some("dat") => Format::KeelDat,
            _ => Format::Csv,
        }
    });
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    match format {
        Format::KeelDat => ingest_keel(path, name),
        Format::Csv => ingest_csv(path, name, numeric_columns),
    }
}

/// Serializes an all-categorical table as a KEEL `.dat` file.
pub fn write_keel(table: &DataTable) -> String {
    let mut out = format!("@relation {}\n", table.name);
    for (name, col) in &table.columns {
        match col {
            ColumnData::Categorical { labels, .. } => {
                out.push_str(&format!("@attribute {name} {{{}}}\n", labels.join(", ")));
            }
            ColumnData::Numeric(values) => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                out.push_str(&format!("@attribute {name} real [{lo}, {hi}]\n"));
            }
        }
    }
    let inputs: Vec<&str> = table
        .columns
        .iter()
        .map(|(n, _)| n.as_str())
        .filter(|n| Some(*n) != table.declared_output.as_deref())
        .collect();
    out.push_str(&format!("@inputs {}\n", inputs.join(", ")));
    if let Some(output) = &table.declared_output {
        out.push_str(&format!("@outputs {output}\n"));
    }
    out.push_str("@data\n");
    for r in 0..table.num_rows() {
        let mut cells = Vec::with_capacity(table.columns.len());
        for (_, col) in &table.columns {
            match col {
                ColumnData::Categorical { labels, values } => {
                    cells.push(labels[values[r]].clone());
                }
                ColumnData::Numeric(values) => cells.push(format!("{}", values[r])),
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn missing(value: &str) -> bool {
    let v = value.trim();
    v.is_empty() || v == "?" || v.eq_ignore_ascii_case("<null>")
}

fn ingest_keel(path: &Path, default_name: String) -> Result<DataTable> {
    let text = std::fs::read_to_string(path)?;
    let mut name = default_name;
    let mut decls: Vec<(String, Decl)> = Vec::new();
    let mut declared_output = None;
    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    let mut in_data = false;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !in_data && line.starts_with('@') {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                if let Some(n) = line.split_whitespace().nth(1) {
                    name = n.to_string();
                }
            } else if lower.starts_with("@attribute") {
                let rest = line
                    .splitn(2, char::is_whitespace)
                    .nth(1)
                    .ok_or_else(|| {
                        Error::Input(format!("line {}: empty attribute", line_no + 1))
                    })?
                    .trim();
                if let Some(brace) = rest.find('{') {
                    let attr_name = rest[..brace].trim().trim_end_matches(',').to_string();
                    let end = rest.rfind('}').ok_or_else(|| {
                        Error::Input(format!("line {}: unterminated state set", line_no + 1))
                    })?;
                    let states: Vec<String> = rest[brace + 1..end]
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    decls.push((attr_name, Decl::Declared(states)));
                } else {
                    let attr_name = rest
                        .split(|c: char| c.is_whitespace() || c == '[')
                        .next()
                        .unwrap_or(rest)
                        .to_string();
                    decls.push((attr_name, Decl::Numeric));
                }
            } else if lower.starts_with("@outputs") || lower.starts_with("@output") {
                declared_output = line
                    .splitn(2, char::is_whitespace)
                    .nth(1)
                    .map(|s| s.trim().trim_end_matches(',').to_string());
            } else if lower.starts_with("@data") {
                in_data = true;
            }
            continue;
        }
        if in_data {
            raw_rows.push(line.split(',').map(|s| s.trim().to_string()).collect());
        }
    }
    if decls.is_empty() {
        return Err(Error::Input(format!(
            "{} declares no attributes",
            path.display()
        )));
    }
    build_columns(name, decls, raw_rows, declared_output)
}

fn ingest_csv(path: &Path, name: String, numeric_columns: &[String]) -> Result<DataTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Input(e.to_string()))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let decls: Vec<(String, Decl)> = headers
        .iter()
        .map(|h| {
            if numeric_columns.contains(h) {
                (h.clone(), Decl::Numeric)
            } else {
                (h.clone(), Decl::Collect)
            }
        })
        .collect();
    let mut raw_rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Input(e.to_string()))?;
        raw_rows.push(record.iter().map(|v| v.to_string()).collect());
    }
    build_columns(name, decls, raw_rows, None)
}

enum Decl {
    Numeric,
    /// States fixed by the file header.
    Declared(Vec<String>),
    /// States collected from the data in first-appearance order.
    Collect,
}

fn build_columns(
    name: String,
    decls: Vec<(String, Decl)>,
    raw_rows: Vec<Vec<String>>,
    declared_output: Option<String>,
) -> Result<DataTable> {
    if raw_rows.is_empty() {
        return Err(Error::Input(format!("{name} has no data rows")));
    }
    for (r, row) in raw_rows.iter().enumerate() {
        if row.len() != decls.len() {
            return Err(Error::Input(format!(
                "row {} has {} values, expected {}",
                r + 1,
                row.len(),
                decls.len()
            )));
        }
        for (c, value) in row.iter().enumerate() {
            if missing(value) {
                return Err(Error::Input(format!(
                    "missing value at row {}, column {}",
                    r + 1,
                    decls[c].0
                )));
            }
        }
    }
    let mut columns = Vec::with_capacity(decls.len());
    for (c, (col_name, decl)) in decls.into_iter().enumerate() {
        match decl {
            Decl::Numeric => {
                let mut values = Vec::with_capacity(raw_rows.len());
                for (r, row) in raw_rows.iter().enumerate() {
                    let v: f64 = row[c].parse().map_err(|_| {
                        Error::Input(format!(
                            "row {}, column {col_name}: {} is not numeric",
                            r + 1,
                            row[c]
                        ))
                    })?;
                    values.push(v);
                }
                columns.push((col_name, ColumnData::Numeric(values)));
            }
            Decl::Declared(labels) => {
                let mut values = Vec::with_capacity(raw_rows.len());
                for (r, row) in raw_rows.iter().enumerate() {
                    let v = &row[c];
                    match labels.iter().position(|l| l == v) {
                        Some(i) => values.push(i),
                        None => {
                            return Err(Error::Input(format!(
                                "row {}, column {col_name}: undeclared state {v}",
                                r + 1
                            )))
                        }
                    }
                }
                columns.push((col_name, ColumnData::Categorical { labels, values }));
            }
            Decl::Collect => {
                let mut labels: Vec<String> = Vec::new();
                let mut values = Vec::with_capacity(raw_rows.len());
                for row in &raw_rows {
                    let v = &row[c];
                    let idx = labels.iter().position(|l| l == v).unwrap_or_else(|| {
                        labels.push(v.clone());
                        labels.len() - 1
                    });
                    values.push(idx);
                }
                columns.push((col_name, ColumnData::Categorical { labels, values }));
            }
        }
    }
    Ok(DataTable {
        name,
        columns,
        declared_output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str, ext: &str) -> tempfile::TempPath {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.into_temp_path()
    }

    #[test]
    fn csv_toy_dataset_round_trips() {
        let path = write_temp("A,B\n0,0\n0,0\n0,1\n1,1\n", ".csv");
        let table = ingest(Path::new(&*path), None).unwrap();
        assert_eq!(table.num_rows(), 4);
        let ds = table.to_dataset().unwrap();
        assert_eq!(ds.num_vars(), 2);
        assert_eq!(ds.variables()[0].states, vec!["0", "1"]);
        assert_eq!(ds.rows()[3], vec![1, 1]);
    }

    #[test]
    fn keel_header_is_honored() {
        let content = "@relation tiny\n\
            @attribute color {red, green, blue}\n\
            @attribute size real [0.0, 10.0]\n\
            @attribute class {yes, no}\n\
            @inputs color, size\n\
            @outputs class\n\
            @data\n\
            red, 1.5, yes\n\
            blue, 2.5, no\n";
        let path = write_temp(content, ".dat");
        let table = ingest(Path::new(&*path), None).unwrap();
        assert_eq!(table.name, "tiny");
        assert_eq!(table.declared_output.as_deref(), Some("class"));
        assert_eq!(table.numeric_columns(), vec!["size"]);
        // declared state order kept even though green is unseen
        match &table.columns[0].1 {
            ColumnData::Categorical { labels, values } => {
                assert_eq!(labels, &vec!["red", "green", "blue"]);
                assert_eq!(values, &vec![0, 2]);
            }
            _ => panic!("expected categorical"),
        }
        // numeric column blocks dataset conversion until discretized
        assert!(table.to_dataset().is_err());
    }

    #[test]
    fn undeclared_state_is_an_error() {
        let content = "@relation t\n@attribute a {x, y}\n@data\nz\n";
        let path = write_temp(content, ".dat");
        assert!(matches!(
            ingest(Path::new(&*path), None),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn blank_cell_is_a_hard_error() {
        let path = write_temp("A,B\n0,1\n0,\n", ".csv");
        let err = ingest(Path::new(&*path), None).unwrap_err();
        match err {
            Error::Input(msg) => {
                assert!(msg.contains("row 2"));
                assert!(msg.contains("column B"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let content = "@relation t\n@attribute a {x}\n@attribute b {x}\n@data\nx, ?\n";
        let path = write_temp(content, ".dat");
        assert!(ingest(Path::new(&*path), None).is_err());
    }

    #[test]
    fn csv_numeric_override() {
        let path = write_temp("A,B\n0.5,0\n1.5,1\n", ".csv");
        let table =
            ingest_with_numeric(Path::new(&*path), None, &["A".to_string()]).unwrap();
        assert_eq!(table.numeric_columns(), vec!["A"]);
    }

    #[test]
    fn vendored_iris_parses() {
        let path = Path::new(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/keel/iris.dat"
        ));
        let table = ingest(path, None).unwrap();
        assert_eq!(table.num_rows(), 150);
        assert_eq!(table.columns.len(), 5);
        assert_eq!(table.numeric_columns().len(), 4);
        assert_eq!(table.declared_output.as_deref(), Some("class"));
    }
}
