//! Clustered election-panel data model and CSV ingestion.
//!
//! A panel is a set of contests (clusters) with a binary cluster-level
//! treatment and per-precinct rows carrying the outcome vote share `y`,
//! the same-party presidential vote share `x`, precinct covariates `w_*`
//! and contest covariates `z_*`. Rows are grouped by contest so cluster
//! slices are contiguous.
//!
//! CSV schema (first row header, comma separated):
//! required `contest_id, precinct_id, y, t, x`; optional repeated
//! `w_<name>` (numeric) and `z_<name>` (numeric or categorical, constant
//! within a contest). Two-party files replace `y`/`x` with
//! `y_d, y_r, x_d, x_r`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Range checking applied to `y` and `x` at ingest.
///
/// `Strict` enforces vote shares in [0, 1]; `Synthetic` admits unrestricted
/// reals because the generator deliberately leaves outcomes unclamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    Strict,
    Synthetic,
}

/// A contest-level (cluster-level) covariate cell.
#[derive(Debug, Clone, PartialEq)]
pub enum ZValue {
    Num(f64),
    Cat(String),
}

/// One contest: the unit of treatment assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Contest {
    pub contest_id: String,
    /// Flip indicator T_c.
    pub treatment: bool,
    /// Cluster covariates, aligned with [`PanelDataset::z_names`].
    pub covariates: Vec<ZValue>,
}

/// One precinct observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecinctRow {
    pub contest_id: String,
    pub precinct_id: String,
    /// Judicial vote share Y_cp.
    pub outcome: f64,
    /// Same-party presidential vote share X_p.
    pub modifier: f64,
    /// Precinct covariates W_cp, aligned with [`PanelDataset::w_names`].
    pub covariates: Vec<f64>,
}

/// Validated clustered panel. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    contests: Vec<Contest>,
    rows: Vec<PrecinctRow>,
    w_names: Vec<String>,
    z_names: Vec<String>,
    cluster_ranges: Vec<Range<usize>>,
    row_cluster: Vec<usize>,
    validation: ValidationMode,
}

impl PanelDataset {
    /// Assemble a dataset from parts, grouping rows by contest
    /// (first-appearance order) and checking structural invariants.
    pub fn from_parts(
        contests: Vec<Contest>,
        rows: Vec<PrecinctRow>,
        w_names: Vec<String>,
        z_names: Vec<String>,
        validation: ValidationMode,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, c) in contests.iter().enumerate() {
            if index.insert(c.contest_id.as_str(), i).is_some() {
                return Err(Error::TreatmentInconsistent(c.contest_id.clone()));
            }
            if c.covariates.len() != z_names.len() {
                return Err(Error::InvalidConfig(format!(
                    "contest `{}` has {} cluster covariates, expected {}",
                    c.contest_id,
                    c.covariates.len(),
                    z_names.len()
                )));
            }
        }
        let mut grouped: Vec<Vec<PrecinctRow>> = vec![Vec::new(); contests.len()];
        for row in rows {
            let Some(&ci) = index.get(row.contest_id.as_str()) else {
                return Err(Error::InvalidConfig(format!(
                    "row references unknown contest `{}`",
                    row.contest_id
                )));
            };
            if row.covariates.len() != w_names.len() {
                return Err(Error::InvalidConfig(format!(
                    "row `{}` has {} precinct covariates, expected {}",
                    row.precinct_id,
                    row.covariates.len(),
                    w_names.len()
                )));
            }
            grouped[ci].push(row);
        }
        if let Some(ci) = grouped.iter().position(Vec::is_empty) {
            return Err(Error::EmptyCluster(contests[ci].contest_id.clone()));
        }
        let mut flat = Vec::new();
        let mut cluster_ranges = Vec::with_capacity(contests.len());
        let mut row_cluster = Vec::new();
        for (ci, group) in grouped.into_iter().enumerate() {
            let start = flat.len();
            row_cluster.extend(std::iter::repeat_n(ci, group.len()));
            flat.extend(group);
            cluster_ranges.push(start..flat.len());
        }
        Ok(PanelDataset {
            contests,
            rows: flat,
            w_names,
            z_names,
            cluster_ranges,
            row_cluster,
            validation,
        })
    }

    /// Cluster count C.
    pub fn n_clusters(&self) -> usize {
        self.contests.len()
    }

    /// Total row count N = Σ n_c.
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Precincts per cluster.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.cluster_ranges.iter().map(|r| r.len()).collect()
    }

    pub fn contests(&self) -> &[Contest] {
        &self.contests
    }

    pub fn rows(&self) -> &[PrecinctRow] {
        &self.rows
    }

    pub fn w_names(&self) -> &[String] {
        &self.w_names
    }

    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    pub fn validation(&self) -> ValidationMode {
        self.validation
    }

    /// Row range of cluster `c` (rows are grouped by cluster).
    pub fn cluster_rows(&self, c: usize) -> Range<usize> {
        self.cluster_ranges[c].clone()
    }

    /// Cluster index of row `r`.
    pub fn cluster_of_row(&self, r: usize) -> usize {
        self.row_cluster[r]
    }

    /// Treatment indicators as 0/1 per cluster.
    pub fn treatments(&self) -> Vec<f64> {
        self.contests
            .iter()
            .map(|c| if c.treatment { 1.0 } else { 0.0 })
            .collect()
    }

    /// FNV-1a digest of the full dataset contents (provenance fingerprint).
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        for c in &self.contests {
            h.write(c.contest_id.as_bytes());
            h.write(&[c.treatment as u8]);
            for z in &c.covariates {
                match z {
                    ZValue::Num(v) => h.write(&v.to_bits().to_le_bytes()),
                    ZValue::Cat(s) => h.write(s.as_bytes()),
                }
            }
        }
        for r in &self.rows {
            h.write(r.contest_id.as_bytes());
            h.write(r.precinct_id.as_bytes());
            h.write(&r.outcome.to_bits().to_le_bytes());
            h.write(&r.modifier.to_bits().to_le_bytes());
            for w in &r.covariates {
                h.write(&w.to_bits().to_le_bytes());
            }
        }
        h.finish()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
        // separator so field boundaries matter
        self.0 ^= 0xff;
        self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// Design counts produced by [`validate_design`].
#[derive(Debug, Clone, Serialize)]
pub struct DesignSummary {
    pub clusters: usize,
    pub rows: usize,
    pub treated: usize,
    pub control: usize,
    pub treated_share: f64,
    /// Set when either arm has fewer than five clusters; cluster-robust
    /// asymptotics are shaky there.
    pub small_design_warning: bool,
}

/// Count treated/control clusters and flag degenerate or tiny designs.
pub fn validate_design(ds: &PanelDataset) -> Result<DesignSummary> {
    let treated = ds.contests.iter().filter(|c| c.treatment).count();
    let control = ds.n_clusters() - treated;
    if treated == 0 || control == 0 {
        return Err(Error::DegenerateTreatment);
    }
    Ok(DesignSummary {
        clusters: ds.n_clusters(),
        rows: ds.n_rows(),
        treated,
        control,
        treated_share: treated as f64 / ds.n_clusters() as f64,
        small_design_warning: treated < 5 || control < 5,
    })
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

const REQUIRED_SINGLE: [&str; 5] = ["contest_id", "precinct_id", "y", "t", "x"];
const REQUIRED_TWO_PARTY: [&str; 7] = [
    "contest_id",
    "precinct_id",
    "y_d",
    "y_r",
    "x_d",
    "x_r",
    "t",
];

struct Columns {
    by_name: HashMap<String, usize>,
    w_cols: Vec<(String, usize)>,
    z_cols: Vec<(String, usize)>,
}

fn resolve_columns(headers: &csv::StringRecord, required: &[&str]) -> Result<Columns> {
    let mut by_name = HashMap::new();
    let mut w_cols = Vec::new();
    let mut z_cols = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if required.contains(&name) {
            by_name.insert(name.to_string(), i);
        } else if let Some(stripped) = name.strip_prefix("w_") {
            w_cols.push((stripped.to_string(), i));
        } else if let Some(stripped) = name.strip_prefix("z_") {
            z_cols.push((stripped.to_string(), i));
        } else {
            return Err(Error::UnknownColumn(name.to_string()));
        }
    }
    for req in required {
        if !by_name.contains_key(*req) {
            return Err(Error::MissingColumn((*req).to_string()));
        }
    }
    Ok(Columns {
        by_name,
        w_cols,
        z_cols,
    })
}

fn parse_f64(record: &csv::StringRecord, idx: usize, col: &str, line: usize) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    if raw.trim().is_empty() {
        return Err(Error::ParseField {
            line,
            column: col.to_string(),
            message: "empty cell (missing values are not imputed)".to_string(),
        });
    }
    let v: f64 = raw.trim().parse().map_err(|_| Error::ParseField {
        line,
        column: col.to_string(),
        message: format!("cannot parse `{raw}` as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::ParseField {
            line,
            column: col.to_string(),
            message: "non-finite value".to_string(),
        });
    }
    Ok(v)
}

fn parse_treatment(record: &csv::StringRecord, idx: usize, line: usize) -> Result<bool> {
    match record.get(idx).map(str::trim) {
        Some("0") => Ok(false),
        Some("1") => Ok(true),
        other => Err(Error::ParseField {
            line,
            column: "t".to_string(),
            message: format!("treatment must be 0 or 1, got `{}`", other.unwrap_or("")),
        }),
    }
}

fn check_share(value: f64, col: &str, line: usize, mode: ValidationMode) -> Result<f64> {
    if mode == ValidationMode::Strict && !(0.0..=1.0).contains(&value) {
        return Err(Error::RangeViolation {
            line,
            column: col.to_string(),
            value,
        });
    }
    Ok(value)
}

/// (contests, rows, w column names, z column names)
type IngestParts<RowT> = (Vec<Contest>, Vec<RowT>, Vec<String>, Vec<String>);

struct RawContest {
    treatment: bool,
    z_raw: Vec<String>,
    first_line: usize,
}

/// Shared ingestion driver: resolves columns, enforces per-contest
/// consistency of `t` and `z_*`, and assembles rows via `make_row`.
fn ingest_generic<RowT>(
    path: &Path,
    required: &[&str],
    mut make_row: impl FnMut(&csv::StringRecord, &Columns, usize, Vec<f64>) -> Result<RowT>,
) -> Result<IngestParts<RowT>> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path_str.clone(),
            source: e,
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path_str.clone(),
            source: e,
        })?
        .clone();
    let cols = resolve_columns(&headers, required)?;

    let mut contest_order: Vec<String> = Vec::new();
    let mut contest_map: HashMap<String, RawContest> = HashMap::new();
    let mut rows: Vec<RowT> = Vec::new();
    let mut z_raw_columns: Vec<Vec<String>> = vec![Vec::new(); cols.z_cols.len()];

    for (rec_idx, record) in reader.records().enumerate() {
        let line = rec_idx + 2; // header is line 1
        let record = record.map_err(|e| Error::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let contest_id = record
            .get(cols.by_name["contest_id"])
            .unwrap_or("")
            .to_string();
        if contest_id.is_empty() {
            return Err(Error::ParseField {
                line,
                column: "contest_id".to_string(),
                message: "empty contest id".to_string(),
            });
        }
        let treatment = parse_treatment(&record, cols.by_name["t"], line)?;
        let z_raw: Vec<String> = cols
            .z_cols
            .iter()
            .map(|(name, idx)| {
                let raw = record.get(*idx).unwrap_or("").trim().to_string();
                if raw.is_empty() {
                    Err(Error::ParseField {
                        line,
                        column: format!("z_{name}"),
                        message: "empty cell (missing values are not imputed)".to_string(),
                    })
                } else {
                    Ok(raw)
                }
            })
            .collect::<Result<_>>()?;

        match contest_map.get(&contest_id) {
            None => {
                contest_order.push(contest_id.clone());
                for (slot, v) in z_raw_columns.iter_mut().zip(&z_raw) {
                    slot.push(v.clone());
                }
                contest_map.insert(
                    contest_id.clone(),
                    RawContest {
                        treatment,
                        z_raw,
                        first_line: line,
                    },
                );
            }
            Some(existing) => {
                if existing.treatment != treatment {
                    return Err(Error::TreatmentInconsistent(contest_id));
                }
                if let Some(pos) = existing.z_raw.iter().zip(&z_raw).position(|(a, b)| a != b) {
                    return Err(Error::ZInconsistent {
                        contest: contest_id,
                        column: format!("z_{}", cols.z_cols[pos].0),
                    });
                }
            }
        }

        let w: Vec<f64> = cols
            .w_cols
            .iter()
            .map(|(name, idx)| parse_f64(&record, *idx, &format!("w_{name}"), line))
            .collect::<Result<_>>()?;
        rows.push(make_row(&record, &cols, line, w)?);
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Type each z column: numeric iff every contest's value parses as f64.
    let z_numeric: Vec<bool> = z_raw_columns
        .iter()
        .map(|vals| vals.iter().all(|v| v.parse::<f64>().is_ok()))
        .collect();

    let contests: Vec<Contest> = contest_order
        .iter()
        .map(|id| {
            let raw = &contest_map[id];
            let covariates = raw
                .z_raw
                .iter()
                .zip(&z_numeric)
                .map(|(v, &numeric)| {
                    if numeric {
                        Ok(ZValue::Num(v.parse::<f64>().map_err(|_| {
                            Error::ParseField {
                                line: raw.first_line,
                                column: "z".to_string(),
                                message: format!("cannot parse `{v}`"),
                            }
                        })?))
                    } else {
                        Ok(ZValue::Cat(v.clone()))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Contest {
                contest_id: id.clone(),
                treatment: raw.treatment,
                covariates,
            })
        })
        .collect::<Result<_>>()?;

    let w_names = cols.w_cols.iter().map(|(n, _)| n.clone()).collect();
    let z_names = cols.z_cols.iter().map(|(n, _)| n.clone()).collect();
    Ok((contests, rows, w_names, z_names))
}

/// Ingest a single-party panel CSV.
pub fn ingest_csv(path: impl AsRef<Path>, mode: ValidationMode) -> Result<PanelDataset> {
    let path = path.as_ref();
    let (contests, rows, w_names, z_names) =
        ingest_generic(path, &REQUIRED_SINGLE, |record, cols, line, w| {
            let y = check_share(
                parse_f64(record, cols.by_name["y"], "y", line)?,
                "y",
                line,
                mode,
            )?;
            let x = check_share(
                parse_f64(record, cols.by_name["x"], "x", line)?,
                "x",
                line,
                mode,
            )?;
            Ok(PrecinctRow {
                contest_id: record.get(cols.by_name["contest_id"]).unwrap().to_string(),
                precinct_id: record.get(cols.by_name["precinct_id"]).unwrap().to_string(),
                outcome: y,
                modifier: x,
                covariates: w,
            })
        })?;
    PanelDataset::from_parts(contests, rows, w_names, z_names, mode)
}

/// One row of a two-party panel (both parties' shares per precinct).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPartyRow {
    pub contest_id: String,
    pub precinct_id: String,
    pub y_d: f64,
    pub y_r: f64,
    pub x_d: f64,
    pub x_r: f64,
    pub covariates: Vec<f64>,
}

/// A panel carrying both parties' outcome and modifier columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPartyPanel {
    pub contests: Vec<Contest>,
    pub rows: Vec<TwoPartyRow>,
    pub w_names: Vec<String>,
    pub z_names: Vec<String>,
    pub validation: ValidationMode,
}

/// Ingest a two-party panel CSV (`y_d, y_r, x_d, x_r` in place of `y, x`).
pub fn ingest_two_party_csv(path: impl AsRef<Path>, mode: ValidationMode) -> Result<TwoPartyPanel> {
    let path = path.as_ref();
    let (contests, rows, w_names, z_names) =
        ingest_generic(path, &REQUIRED_TWO_PARTY, |record, cols, line, w| {
            let get = |col: &str| -> Result<f64> {
                check_share(
                    parse_f64(record, cols.by_name[col], col, line)?,
                    col,
                    line,
                    mode,
                )
            };
            Ok(TwoPartyRow {
                contest_id: record.get(cols.by_name["contest_id"]).unwrap().to_string(),
                precinct_id: record.get(cols.by_name["precinct_id"]).unwrap().to_string(),
                y_d: get("y_d")?,
                y_r: get("y_r")?,
                x_d: get("x_d")?,
                x_r: get("x_r")?,
                covariates: w,
            })
        })?;
    Ok(TwoPartyPanel {
        contests,
        rows,
        w_names,
        z_names,
        validation: mode,
    })
}

/// Split a two-party panel into per-party datasets. Party D takes
/// (`y_d`, `x_d`), party R takes (`y_r`, `x_r`); everything else is copied.
pub fn split_by_party(panel: &TwoPartyPanel) -> Result<(PanelDataset, PanelDataset)> {
    let build = |pick: &dyn Fn(&TwoPartyRow) -> (f64, f64)| -> Result<PanelDataset> {
        let rows = panel
            .rows
            .iter()
            .map(|r| {
                let (y, x) = pick(r);
                PrecinctRow {
                    contest_id: r.contest_id.clone(),
                    precinct_id: r.precinct_id.clone(),
                    outcome: y,
                    modifier: x,
                    covariates: r.covariates.clone(),
                }
            })
            .collect();
        PanelDataset::from_parts(
            panel.contests.clone(),
            rows,
            panel.w_names.clone(),
            panel.z_names.clone(),
            panel.validation,
        )
    };
    let d = build(&|r| (r.y_d, r.x_d))?;
    let r = build(&|r| (r.y_r, r.x_r))?;
    Ok((d, r))
}

/// Build exact two-candidate data from a single-party panel:
/// party D keeps (y, x), party R gets (1−y, 1−x).
pub fn mirror_two_party(ds: &PanelDataset) -> TwoPartyPanel {
    let rows = ds
        .rows()
        .iter()
        .map(|r| TwoPartyRow {
            contest_id: r.contest_id.clone(),
            precinct_id: r.precinct_id.clone(),
            y_d: r.outcome,
            y_r: 1.0 - r.outcome,
            x_d: r.modifier,
            x_r: 1.0 - r.modifier,
            covariates: r.covariates.clone(),
        })
        .collect();
    TwoPartyPanel {
        contests: ds.contests().to_vec(),
        rows,
        w_names: ds.w_names().to_vec(),
        z_names: ds.z_names().to_vec(),
        validation: ds.validation(),
    }
}

/// Serialize a dataset back to the canonical CSV schema. Floats print in
/// shortest round-trip form, so ingest→write→ingest is bit-exact.
pub fn write_csv(ds: &PanelDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("contest_id,precinct_id,y,t,x");
    for w in ds.w_names() {
        let _ = write!(out, ",w_{w}");
    }
    for z in ds.z_names() {
        let _ = write!(out, ",z_{z}");
    }
    out.push('\n');
    for (ci, contest) in ds.contests().iter().enumerate() {
        for r in &ds.rows()[ds.cluster_rows(ci)] {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                contest.contest_id,
                r.precinct_id,
                r.outcome,
                contest.treatment as u8,
                r.modifier
            );
            for w in &r.covariates {
                let _ = write!(out, ",{w}");
            }
            for z in &contest.covariates {
                match z {
                    ZValue::Num(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    ZValue::Cat(s) => {
                        let _ = write!(out, ",{s}");
                    }
                }
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(contents: &str) -> std::path::PathBuf {
        use std::sync::atomic::{AtomicU64, Ordering};
        static NEXT: AtomicU64 = AtomicU64::new(0);
        let path = std::env::temp_dir().join(format!(
            "flipdml-panel-{}-{}.csv",
            std::process::id(),
            NEXT.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn minimal_two_contest_file_loads() {
        let path = write_temp(
            "contest_id,precinct_id,y,t,x\n\
             a,p1,0.5,1,0.4\n\
             a,p2,0.6,1,0.5\n\
             b,p1,0.4,0,0.3\n\
             b,p2,0.45,0,0.35\n",
        );
        let ds = ingest_csv(&path, ValidationMode::Strict).unwrap();
        assert_eq!(ds.n_clusters(), 2);
        assert_eq!(ds.n_rows(), 4);
        assert_eq!(ds.cluster_sizes(), vec![2, 2]);
    }

    #[test]
    fn conflicting_treatment_is_rejected() {
        let path = write_temp(
            "contest_id,precinct_id,y,t,x\n\
             a,p1,0.5,1,0.4\n\
             a,p2,0.6,0,0.5\n",
        );
        let err = ingest_csv(&path, ValidationMode::Strict).unwrap_err();
        assert_eq!(err.kind(), "TreatmentInconsistent");
    }

    #[test]
    fn strict_mode_rejects_out_of_range_synthetic_accepts() {
        let contents = "contest_id,precinct_id,y,t,x\n\
             a,p1,1.2,1,0.4\n\
             b,p1,0.4,0,0.3\n";
        let path = write_temp(contents);
        let err = ingest_csv(&path, ValidationMode::Strict).unwrap_err();
        assert_eq!(err.kind(), "RangeViolation");
        let ds = ingest_csv(&path, ValidationMode::Synthetic).unwrap();
        assert_eq!(ds.rows()[0].outcome, 1.2);
    }

    #[test]
    fn missing_required_column_is_reported() {
        let path = write_temp("contest_id,precinct_id,t,x\na,p1,1,0.4\n");
        let err = ingest_csv(&path, ValidationMode::Strict).unwrap_err();
        assert_eq!(err.kind(), "MissingColumn");
    }

    #[test]
    fn header_only_file_is_empty() {
        let path = write_temp("contest_id,precinct_id,y,t,x\n");
        let err = ingest_csv(&path, ValidationMode::Strict).unwrap_err();
        assert_eq!(err.kind(), "EmptyDataset");
    }

    #[test]
    fn unknown_column_is_rejected() {
        let path = write_temp("contest_id,precinct_id,y,t,x,bogus\na,p1,0.5,1,0.4,7\n");
        let err = ingest_csv(&path, ValidationMode::Strict).unwrap_err();
        assert_eq!(err.kind(), "UnknownColumn");
    }

    #[test]
    fn inconsistent_cluster_covariate_is_rejected() {
        let path = write_temp(
            "contest_id,precinct_id,y,t,x,z_size\n\
             a,p1,0.5,1,0.4,big\n\
             a,p2,0.6,1,0.5,small\n",
        );
        let err = ingest_csv(&path, ValidationMode::Strict).unwrap_err();
        assert_eq!(err.kind(), "ZInconsistent");
    }

    #[test]
    fn empty_covariate_cell_is_an_error() {
        let path = write_temp(
            "contest_id,precinct_id,y,t,x,w_turnout\n\
             a,p1,0.5,1,0.4,\n",
        );
        let err = ingest_csv(&path, ValidationMode::Strict).unwrap_err();
        assert_eq!(err.kind(), "ParseField");
    }

    #[test]
    fn design_summary_counts_and_degenerate_designs() {
        let mk = |treated: usize, control: usize| {
            let mut contests = Vec::new();
            let mut rows = Vec::new();
            for i in 0..(treated + control) {
                let id = format!("c{i}");
                contests.push(Contest {
                    contest_id: id.clone(),
                    treatment: i < treated,
                    covariates: vec![],
                });
                rows.push(PrecinctRow {
                    contest_id: id,
                    precinct_id: "p".into(),
                    outcome: 0.5,
                    modifier: 0.5,
                    covariates: vec![],
                });
            }
            PanelDataset::from_parts(contests, rows, vec![], vec![], ValidationMode::Strict)
                .unwrap()
        };
        let s = validate_design(&mk(9, 5)).unwrap();
        assert_eq!(s.treated, 9);
        assert!((s.treated_share - 9.0 / 14.0).abs() < 1e-15);
        assert!(!s.small_design_warning);

        let err = validate_design(&mk(14, 0)).unwrap_err();
        assert_eq!(err.kind(), "DegenerateTreatment");

        let s = validate_design(&mk(1, 1)).unwrap();
        assert!(s.small_design_warning);
    }

    #[test]
    fn two_party_split_and_mirror_identity() {
        let path = write_temp(
            "contest_id,precinct_id,y_d,y_r,x_d,x_r,t,w_pop\n\
             a,p1,0.6,0.4,0.55,0.45,1,1.5\n\
             b,p1,0.3,0.7,0.35,0.65,0,2.5\n",
        );
        let panel = ingest_two_party_csv(&path, ValidationMode::Strict).unwrap();
        let (d, r) = split_by_party(&panel).unwrap();
        assert_eq!(d.rows()[0].outcome, 0.6);
        assert_eq!(d.rows()[0].modifier, 0.55);
        assert_eq!(r.rows()[0].outcome, 0.4);
        assert_eq!(r.rows()[0].modifier, 0.45);
        // exact two-candidate file: the two parties are mirror images
        for (rd, rr) in d.rows().iter().zip(r.rows()) {
            assert!((rd.outcome + rr.outcome - 1.0).abs() < 1e-15);
            assert!((rd.modifier + rr.modifier - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_party_file_missing_column_errors() {
        let path = write_temp(
            "contest_id,precinct_id,y_d,x_d,x_r,t\n\
             a,p1,0.6,0.55,0.45,1\n",
        );
        let err = ingest_two_party_csv(&path, ValidationMode::Strict).unwrap_err();
        assert_eq!(err.kind(), "MissingColumn");
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let path = write_temp(
            "contest_id,precinct_id,y,t,x,w_a,z_kind,z_num\n\
             a,p1,0.123456789012345,1,0.4,1.25,urban,3.5\n\
             a,p2,0.6,1,0.5,-0.75,urban,3.5\n\
             b,p1,0.4,0,0.3,2.0,rural,1.5\n",
        );
        let ds = ingest_csv(&path, ValidationMode::Strict).unwrap();
        let out = std::env::temp_dir().join(format!("flipdml-rt-{}.csv", std::process::id()));
        write_csv(&ds, &out).unwrap();
        let ds2 = ingest_csv(&out, ValidationMode::Strict).unwrap();
        assert_eq!(ds, ds2);
        assert_eq!(ds.digest(), ds2.digest());
    }
}
