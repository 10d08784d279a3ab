//! Volume enumeration strings ("v.1", "vol. 6-9", ...) and the catalog
//! heuristic that turns them into same-work, different-volume and whole-part
//! labels.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Book;
use crate::error::{Error, Result};
use crate::tsv;
use crate::types::RelationshipLabel;

/// Returned when a string carries no volume information we recognize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotEnumerated;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enumeration {
    pub raw: String,
    pub canonical: String,
    pub volumes: BTreeSet<u32>,
}

impl Enumeration {
    /// Normalize and parse in one step; `Ok(None)` means "not enumerated".
    pub fn from_raw(raw: &str) -> Result<Option<Self>> {
        let Ok(canonical) = normalize_enumeration(raw) else {
            return Ok(None);
        };
        let mut e = parse_enumeration(&canonical)?;
        e.raw = raw.to_string();
        Ok(Some(e))
    }
}

fn raw_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let prefix = r"(?:volumes|volume|vols|vol|v)";
        Regex::new(&format!(
            r"^{prefix}\s*\.?\s*0*(\d+)(?:\s*(?:-|–|—|to)\s*(?:{prefix}\s*\.?\s*)?0*(\d+))?\s*[.;:]?$"
        ))
        .expect("static regex")
    })
}

fn canonical_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^v\.([1-9]\d*)(?:-([1-9]\d*))?$").expect("static regex"))
}

/// Canonical form of a volume statement: `v.N` or `v.N-M`.
///
/// Recognizes `v`, `v.`, `vol`, `vol.`, `vols`, `volume` and `volumes`
/// prefixes in any case, with or without spaces, and ranges joined by a
/// hyphen, dash or "to". Anything else (issue numbers, dates, comma lists) is
/// [`NotEnumerated`]. Whether a range is well ordered is checked by
/// [`parse_enumeration`], not here.
pub fn normalize_enumeration(raw: &str) -> std::result::Result<String, NotEnumerated> {
    let cleaned = raw.trim().to_lowercase();
    let caps = raw_pattern().captures(&cleaned).ok_or(NotEnumerated)?;
    let number = |i: usize| -> std::result::Result<Option<u32>, NotEnumerated> {
        match caps.get(i) {
            None => Ok(None),
            Some(m) => match m.as_str().parse::<u32>() {
                Ok(0) | Err(_) => Err(NotEnumerated),
                Ok(n) => Ok(Some(n)),
            },
        }
    };
    let start = number(1)?.ok_or(NotEnumerated)?;
    Ok(match number(2)? {
        Some(end) => format!("v.{start}-{end}"),
        None => format!("v.{start}"),
    })
}

pub fn parse_enumeration(canonical: &str) -> Result<Enumeration> {
    let caps = canonical_pattern()
        .captures(canonical)
        .ok_or_else(|| Error::NotCanonical(canonical.to_string()))?;
    let parse = |i: usize| -> Result<Option<u32>> {
        caps.get(i)
            .map(|m| {
                m.as_str()
                    .parse::<u32>()
                    .map_err(|_| Error::NotCanonical(canonical.to_string()))
            })
            .transpose()
    };
    let start = parse(1)?.expect("group 1 always matches");
    let volumes = match parse(2)? {
        None => BTreeSet::from([start]),
        Some(end) if end <= start => return Err(Error::InvalidRange { start, end }),
        Some(end) => (start..=end).collect(),
    };
    Ok(Enumeration {
        raw: canonical.to_string(),
        canonical: canonical.to_string(),
        volumes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRelation {
    pub left_id: String,
    pub right_id: String,
    pub label: RelationshipLabel,
    pub source: String,
}

pub const ENUMERATION_HEURISTIC: &str = "enumeration-heuristic";

/// A catalog row with a parsed enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub book_id: String,
    pub work_key: String,
    pub enumeration: Enumeration,
}

/// Label every ordered pair of books that share a work key.
///
/// Equal volume sets are the same work, disjoint sets are different volumes and
/// strict supersets contain the subset. Partial overlaps are left unlabeled.
/// Output is ordered by work key, then left id, then right id.
pub fn infer_relations(catalog: &[CatalogEntry]) -> Vec<GroundTruthRelation> {
    let mut by_work: BTreeMap<&str, Vec<&CatalogEntry>> = BTreeMap::new();
    for entry in catalog {
        by_work.entry(entry.work_key.as_str()).or_default().push(entry);
    }
    let mut out = Vec::new();
    for entries in by_work.values_mut() {
        entries.sort_by(|a, b| a.book_id.cmp(&b.book_id));
        for left in entries.iter() {
            for right in entries.iter() {
                if left.book_id == right.book_id {
                    continue;
                }
                let (l, r) = (&left.enumeration.volumes, &right.enumeration.volumes);
                let label = if l == r {
                    RelationshipLabel::SameWork
                } else if l.is_disjoint(r) {
                    RelationshipLabel::DifferentVolume
                } else if l.is_superset(r) {
                    RelationshipLabel::Contains
                } else if l.is_subset(r) {
                    RelationshipLabel::PartOf
                } else {
                    continue;
                };
                out.push(GroundTruthRelation {
                    left_id: left.book_id.clone(),
                    right_id: right.book_id.clone(),
                    label,
                    source: ENUMERATION_HEURISTIC.to_string(),
                });
            }
        }
    }
    out
}

/// One row of `catalog.tsv`: `book_id`, `work_key`, `enumeration_raw`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogRow {
    pub book_id: String,
    pub work_key: String,
    pub enumeration_raw: String,
}

pub const CATALOG_HEADER: [&str; 3] = ["book_id", "work_key", "enumeration_raw"];

pub fn read_catalog(path: &Path) -> Result<Vec<CatalogRow>> {
    let table = tsv::read(path)?;
    let col = |name: &str| {
        table.column(name).ok_or_else(|| Error::Tsv {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column {name}"),
        })
    };
    let (id, work, raw) = (col("book_id")?, col("work_key")?, col("enumeration_raw")?);
    Ok(table
        .rows
        .iter()
        .map(|(_, f)| CatalogRow {
            book_id: f[id].trim().to_string(),
            work_key: f[work].trim().to_string(),
            enumeration_raw: f[raw].trim().to_string(),
        })
        .collect())
}

pub fn render_catalog(rows: &[CatalogRow]) -> String {
    tsv::render(
        &CATALOG_HEADER,
        rows.iter()
            .map(|r| vec![r.book_id.as_str(), r.work_key.as_str(), r.enumeration_raw.as_str()]),
    )
}

/// Catalog rows for every book that has both a work key and an enumeration.
pub fn catalog_from_books(books: &[Book]) -> Vec<CatalogRow> {
    books
        .iter()
        .filter_map(|b| {
            Some(CatalogRow {
                book_id: b.id.clone(),
                work_key: b.metadata.work_key.clone()?,
                enumeration_raw: b.metadata.enumeration_raw.clone()?,
            })
        })
        .collect()
}

/// Parse every row, dropping those without a usable enumeration or work key.
/// Malformed ranges such as "v.9-6" are dropped with a warning.
pub fn catalog_entries(rows: &[CatalogRow]) -> Vec<CatalogEntry> {
    rows.iter()
        .filter(|r| !r.work_key.is_empty())
        .filter_map(|r| match Enumeration::from_raw(&r.enumeration_raw) {
            Ok(Some(enumeration)) => Some(CatalogEntry {
                book_id: r.book_id.clone(),
                work_key: r.work_key.clone(),
                enumeration,
            }),
            Ok(None) => None,
            Err(e) => {
                log::warn!("{}: {e}", r.book_id);
                None
            }
        })
        .collect()
}
