//! Tab-separated files with a header row, as used by every manifest and label
//! file in the pipeline.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{LabeledPair, Provenance, RelationshipLabel};

/// A parsed TSV file: header plus rows, with the 1-based line number of each row.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(path, &text)
}

pub fn parse(path: &Path, text: &str) -> Result<Table> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header: Vec<String> = match lines.next() {
        Some((_, line)) => line.split('\t').map(|s| s.trim().to_string()).collect(),
        None => {
            return Err(Error::Tsv {
                path: path.to_path_buf(),
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        let fields: Vec<String> = line.split('\t').map(|s| s.to_string()).collect();
        if fields.len() != header.len() {
            return Err(Error::Tsv {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected {} columns, found {}", header.len(), fields.len()),
            });
        }
        rows.push((i + 1, fields));
    }
    Ok(Table { header, rows })
}

/// Render a header and rows. Fields must not contain tabs or newlines.
pub fn render<S: AsRef<str>>(header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        let mut first = true;
        for field in row {
            if !first {
                out.push('\t');
            }
            first = false;
            let _ = write!(out, "{}", field.as_ref());
        }
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn required(table: &Table, path: &Path, name: &str) -> Result<usize> {
    table.column(name).ok_or_else(|| Error::Tsv {
        path: path.to_path_buf(),
        line: 1,
        message: format!("missing column {name:?}"),
    })
}

/// Read a label file (`left_id`, `right_id`, `label`, optional `provenance`).
/// Rows without a provenance column are real ground truth.
pub fn read_labels(path: &Path) -> Result<Vec<LabeledPair>> {
    let table = read(path)?;
    let left = required(&table, path, "left_id")?;
    let right = required(&table, path, "right_id")?;
    let label = required(&table, path, "label")?;
    let provenance = table.column("provenance");
    table
        .rows
        .iter()
        .map(|(line, row)| {
            let wrap = |e: Error| Error::Tsv {
                path: path.to_path_buf(),
                line: *line,
                message: e.to_string(),
            };
            let lab: RelationshipLabel = row[label].parse().map_err(wrap)?;
            let prov = match provenance {
                Some(c) => row[c].parse().map_err(wrap)?,
                None => Provenance::Real,
            };
            Ok(LabeledPair::new(&row[left], &row[right], lab, prov))
        })
        .collect()
}

pub fn render_labels(pairs: &[LabeledPair], with_provenance: bool) -> String {
    if with_provenance {
        render(
            &["left_id", "right_id", "label", "provenance"],
            pairs.iter().map(|p| {
                vec![
                    p.left_id.as_str(),
                    p.right_id.as_str(),
                    p.label.as_str(),
                    p.provenance.as_str(),
                ]
            }),
        )
    } else {
        render(
            &["left_id", "right_id", "label"],
            pairs
                .iter()
                .map(|p| vec![p.left_id.as_str(), p.right_id.as_str(), p.label.as_str()]),
        )
    }
}
