//! CSV ingestion with line-numbered diagnostics.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use posthoc::{PValueVector, TwoSampleDataset};
use sha2::{Digest, Sha256};

/// Raw CSV: header plus `(line number, fields)` records.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    pub fn parse(name: &str, bytes: &[u8]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(bytes);
        let header: Vec<String> = reader
            .headers()
            .with_context(|| format!("{name} line 1: unreadable header"))?
            .iter()
            .map(String::from)
            .collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            bail!("{name} line 1: empty header");
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                anyhow::anyhow!("{name} line {line}: {e}")
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            if rec.len() != header.len() {
                bail!("{name} line {line}: expected {} fields, found {}", header.len(), rec.len());
            }
            rows.push((line, rec.iter().map(String::from).collect()));
        }
        if rows.is_empty() {
            bail!("{name}: no data rows");
        }
        Ok(Self { name: name.into(), header, rows })
    }

    pub fn column(&self, wanted: &str) -> Option<usize> {
        self.header.iter().position(|h| h.eq_ignore_ascii_case(wanted))
    }

    fn require(&self, wanted: &str) -> Result<usize> {
        self.column(wanted)
            .with_context(|| format!("{} line 1: missing column '{wanted}' (header is {})", self.name, self.header.join(",")))
    }

    /// Column values keyed by the first column.
    pub fn keyed_column(&self, wanted: &str) -> Result<HashMap<String, String>> {
        let col = self.require(wanted)?;
        Ok(self.rows.iter().map(|(_, r)| (r[0].clone(), r[col].clone())).collect())
    }
}

fn number(table: &str, line: u64, field: &str, what: &str) -> Result<f64> {
    let x: f64 = field.parse().map_err(|_| anyhow::anyhow!("{table} line {line}: {what} '{field}' is not a number"))?;
    if !x.is_finite() {
        bail!("{table} line {line}: {what} '{field}' is not finite");
    }
    Ok(x)
}

fn check_unique_ids<'a>(table: &Table, ids: impl Iterator<Item = (u64, &'a String)>) -> Result<()> {
    let mut seen: HashMap<&str, u64> = HashMap::new();
    for (line, id) in ids {
        if id.is_empty() {
            bail!("{} line {line}: empty identifier", table.name);
        }
        if let Some(first) = seen.insert(id, line) {
            bail!("{} line {line}: identifier '{id}' already used on line {first}", table.name);
        }
    }
    Ok(())
}

pub struct PValueInput {
    pub ids: Vec<String>,
    pub p: PValueVector,
    pub table: Table,
}

/// `id,p` file; extra columns are kept for annotation lookups.
pub fn pvalues(table: Table) -> Result<PValueInput> {
    let id_col = table.require("id")?;
    let p_col = table.require("p")?;
    check_unique_ids(&table, table.rows.iter().map(|(l, r)| (*l, &r[id_col])))?;
    let mut ids = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        let p = number(&table.name, *line, &row[p_col], "p-value")?;
        if !(0.0..=1.0).contains(&p) {
            bail!("{} line {line}: p-value {p} outside [0, 1]", table.name);
        }
        ids.push(row[id_col].clone());
        values.push(p);
    }
    let p = PValueVector::new(values)?;
    Ok(PValueInput { ids, p, table })
}

pub struct TwoSampleInput {
    pub ids: Vec<String>,
    pub ds: TwoSampleDataset,
}

/// Matrix with sample ids in the header and row ids in the first column, plus a
/// `sample_id,group` labels file.
pub fn two_sample(matrix: Table, labels: Table) -> Result<TwoSampleInput> {
    let samples = &matrix.header[1..];
    if samples.is_empty() {
        bail!("{} line 1: no sample columns after the row id column", matrix.name);
    }
    let sid = labels.require("sample_id")?;
    let gcol = labels.require("group")?;
    let mut groups: HashMap<&str, (u64, u8)> = HashMap::new();
    for (line, row) in &labels.rows {
        let g = match row[gcol].as_str() {
            "1" => 1,
            "2" => 2,
            other => bail!("{} line {line}: group '{other}' must be 1 or 2", labels.name),
        };
        if groups.insert(&row[sid], (*line, g)).is_some() {
            bail!("{} line {line}: sample '{}' labelled twice", labels.name, row[sid]);
        }
    }
    let mut label_vec = Vec::with_capacity(samples.len());
    for s in samples {
        match groups.remove(s.as_str()) {
            Some((_, g)) => label_vec.push(g),
            None => bail!("{} line 1: sample '{s}' has no row in {}", matrix.name, labels.name),
        }
    }
    if let Some((s, (line, _))) = groups.into_iter().min_by_key(|(_, (l, _))| *l) {
        bail!("{} line {line}: sample '{s}' does not appear in the header of {}", labels.name, matrix.name);
    }
    check_unique_ids(&matrix, matrix.rows.iter().map(|(l, r)| (*l, &r[0])))?;
    let mut ids = Vec::with_capacity(matrix.rows.len());
    let mut data = Vec::with_capacity(matrix.rows.len() * samples.len());
    for (line, row) in &matrix.rows {
        ids.push(row[0].clone());
        for (j, cell) in row[1..].iter().enumerate() {
            data.push(number(&matrix.name, *line, cell, &format!("value for sample '{}'", samples[j]))?);
        }
    }
    let m = ids.len();
    let ds = TwoSampleDataset::new(data, m, label_vec).with_context(|| format!("{} + {}", matrix.name, labels.name))?;
    Ok(TwoSampleInput { ids, ds })
}

/// A file read once, with its SHA-256.
pub struct Loaded {
    pub table: Table,
    pub sha256: String,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string());
    Ok(Loaded { table: Table::parse(&name, &bytes)?, sha256 })
}

/// Per-hypothesis values of `column`, looked up by id.
pub fn annotation(table: &Table, column: &str, ids: &[String]) -> Result<Vec<String>> {
    let map = table.keyed_column(column)?;
    let missing: Vec<&str> = ids.iter().filter(|id| !map.contains_key(*id)).map(String::as_str).take(5).collect();
    if !missing.is_empty() {
        bail!("{}: no '{column}' entry for ids {}", table.name, missing.join(", "));
    }
    Ok(ids.iter().map(|id| map[id].clone()).collect())
}

pub type Digests = BTreeMap<String, String>;
