//! CSV dumps of the `ACT_HI_ACTINST` and `ACT_HI_DETAIL` history tables.

use std::collections::HashMap;

use pm_core::extract::{ActInstRow, DetailRow};
use pm_core::Timestamp;
use thiserror::Error;

use crate::timefmt::parse_ts;

pub const ACTINST_COLUMNS: [&str; 9] = [
    "id_",
    "proc_def_key_",
    "proc_inst_id_",
    "act_id_",
    "act_name_",
    "act_type_",
    "start_time_",
    "end_time_",
    "assignee_",
];

pub const DETAIL_COLUMNS: [&str; 7] = ["act_inst_id_", "name_", "var_type_", "text_", "long_", "double_", "time_"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    ActInst,
    Detail,
}

impl TableKind {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            TableKind::ActInst => &ACTINST_COLUMNS,
            TableKind::Detail => &DETAIL_COLUMNS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableRows {
    ActInst(Vec<ActInstRow>),
    Detail(Vec<DetailRow>),
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("header: unknown column `{0}`")]
    UnknownColumn(String),
    #[error("header: missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}, column `{column}`: {message}")]
    Cell { line: u64, column: &'static str, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    index: &'a HashMap<&'static str, usize>,
    line: u64,
}

impl Row<'_> {
    fn opt(&self, column: &'static str) -> Option<&str> {
        let v = &self.record[self.index[column]];
        (!v.is_empty()).then_some(v)
    }

    fn req(&self, column: &'static str) -> Result<String, TableError> {
        self.opt(column).map(str::to_string).ok_or_else(|| self.err(column, "value required".into()))
    }

    fn time(&self, column: &'static str) -> Result<Option<Timestamp>, TableError> {
        self.opt(column)
            .map(|v| parse_ts(v).ok_or_else(|| self.err(column, format!("`{v}` is not a timestamp"))))
            .transpose()
    }

    fn parsed<T: std::str::FromStr>(&self, column: &'static str) -> Result<Option<T>, TableError> {
        self.opt(column)
            .map(|v| v.trim().parse().map_err(|_| self.err(column, format!("cannot parse `{v}`"))))
            .transpose()
    }

    fn err(&self, column: &'static str, message: String) -> TableError {
        TableError::Cell {
            line: self.line,
            column,
            message,
        }
    }
}

fn header_index(header: &csv::StringRecord, kind: TableKind) -> Result<HashMap<&'static str, usize>, TableError> {
    let columns = kind.columns();
    let mut index = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        match columns.iter().find(|c| **c == name) {
            Some(c) => {
                index.insert(*c, i);
            }
            None => return Err(TableError::UnknownColumn(name.to_string())),
        }
    }
    if let Some(missing) = columns.iter().find(|c| !index.contains_key(*c)) {
        return Err(TableError::MissingColumn(missing.to_string()));
    }
    Ok(index)
}

/// Reads a table dump. Columns may come in any order but must be exactly
/// the table's columns; empty cells are absent values.
pub fn read_table_csv(bytes: &[u8], kind: TableKind) -> Result<TableRows, TableError> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let index = header_index(r.headers()?, kind)?;
    let mut actinst = Vec::new();
    let mut details = Vec::new();
    for record in r.records() {
        let record = record?;
        let row = Row {
            line: record.position().map_or(0, |p| p.line()),
            record: &record,
            index: &index,
        };
        match kind {
            TableKind::ActInst => actinst.push(ActInstRow {
                id_: row.req("id_")?,
                proc_def_key_: row.req("proc_def_key_")?,
                proc_inst_id_: row.req("proc_inst_id_")?,
                act_id_: row.opt("act_id_").unwrap_or_default().to_string(),
                act_name_: row.opt("act_name_").unwrap_or_default().to_string(),
                act_type_: row.opt("act_type_").unwrap_or_default().to_string(),
                start_time_: row.time("start_time_")?.ok_or_else(|| row.err("start_time_", "value required".into()))?,
                end_time_: row.time("end_time_")?,
                assignee_: row.opt("assignee_").map(str::to_string),
            }),
            TableKind::Detail => details.push(DetailRow {
                act_inst_id_: row.req("act_inst_id_")?,
                name_: row.req("name_")?,
                var_type_: row.opt("var_type_").unwrap_or_default().to_string(),
                text_: row.opt("text_").map(str::to_string),
                long_: row.parsed("long_")?,
                double_: row.parsed("double_")?,
                time_: row.time("time_")?,
            }),
        }
    }
    Ok(match kind {
        TableKind::ActInst => TableRows::ActInst(actinst),
        TableKind::Detail => TableRows::Detail(details),
    })
}

pub fn read_actinst_csv(bytes: &[u8]) -> Result<Vec<ActInstRow>, TableError> {
    match read_table_csv(bytes, TableKind::ActInst)? {
        TableRows::ActInst(rows) => Ok(rows),
        TableRows::Detail(_) => unreachable!(),
    }
}

pub fn read_detail_csv(bytes: &[u8]) -> Result<Vec<DetailRow>, TableError> {
    match read_table_csv(bytes, TableKind::Detail)? {
        TableRows::Detail(rows) => Ok(rows),
        TableRows::ActInst(_) => unreachable!(),
    }
}
