//! Cell-level, well-level and assessment tables, their CSV formats, and the
//! linkage checks between them.
//!
//! Every CSV file starts with a header row whose first column is `well_id`.
//! Wells are ordered by first appearance in the cell table everywhere
//! downstream.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Ordered three-level passaging label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BioClass {
    Low,
    Medium,
    High,
}

impl BioClass {
    pub const ALL: [BioClass; 3] = [BioClass::Low, BioClass::Medium, BioClass::High];

    /// Numeric encoding Low=1, Medium=2, High=3.
    pub fn code(self) -> u8 {
        match self {
            BioClass::Low => 1,
            BioClass::Medium => 2,
            BioClass::High => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<BioClass> {
        match code {
            1 => Some(BioClass::Low),
            2 => Some(BioClass::Medium),
            3 => Some(BioClass::High),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize - 1
    }
}

impl fmt::Display for BioClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BioClass::Low => "Low",
            BioClass::Medium => "Medium",
            BioClass::High => "High",
        })
    }
}

impl FromStr for BioClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Low" => Ok(BioClass::Low),
            "Medium" => Ok(BioClass::Medium),
            "High" => Ok(BioClass::High),
            other => Err(Error::UnknownClass(other.to_string())),
        }
    }
}

/// Row membership of cells in wells, in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct WellGrouping {
    ids: Vec<String>,
    rows: Vec<Vec<usize>>,
    membership: Vec<usize>,
}

impl WellGrouping {
    pub fn from_ids<S: AsRef<str>>(well_ids: &[S]) -> Self {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut ids = Vec::new();
        let mut rows: Vec<Vec<usize>> = Vec::new();
        let mut membership = Vec::with_capacity(well_ids.len());
        for (row, id) in well_ids.iter().enumerate() {
            let id = id.as_ref();
            let w = *index.entry(id).or_insert_with(|| {
                ids.push(id.to_string());
                rows.push(Vec::new());
                ids.len() - 1
            });
            rows[w].push(row);
            membership.push(w);
        }
        WellGrouping {
            ids,
            rows,
            membership,
        }
    }

    pub fn n_wells(&self) -> usize {
        self.ids.len()
    }

    pub fn n_rows(&self) -> usize {
        self.membership.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row indices of well `w`.
    pub fn rows(&self, w: usize) -> &[usize] {
        &self.rows[w]
    }

    /// Well index of every row.
    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }
}

fn check_feature_names(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if name.is_empty() || !seen.insert(name.as_str()) {
            return Err(Error::BadFeatureName(name.clone()));
        }
    }
    Ok(())
}

fn check_finite(values: &DMatrix<f64>, names: &[String]) -> Result<()> {
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            let v = values[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    row: i + 1,
                    column: names.get(j).cloned().unwrap_or_default(),
                    value: v.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Per-cell feature matrix with well membership.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    well_ids: Vec<String>,
    feature_names: Vec<String>,
    values: DMatrix<f64>,
    grouping: WellGrouping,
}

impl CellTable {
    pub fn new(
        well_ids: Vec<String>,
        feature_names: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.nrows() != well_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: well_ids.len(),
                got: values.nrows(),
            });
        }
        if values.ncols() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                got: values.ncols(),
            });
        }
        if well_ids.is_empty() {
            return Err(Error::EmptyInput);
        }
        check_feature_names(&feature_names)?;
        check_finite(&values, &feature_names)?;
        let grouping = WellGrouping::from_ids(&well_ids);
        for w in 0..grouping.n_wells() {
            if grouping.rows(w).len() < 2 {
                return Err(Error::WellWithSingleCell(grouping.ids()[w].clone()));
            }
        }
        Ok(CellTable {
            well_ids,
            feature_names,
            values,
            grouping,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn well_ids(&self) -> &[String] {
        &self.well_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grouping(&self) -> &WellGrouping {
        &self.grouping
    }

    /// Table restricted to the given wells (indices into the grouping), in
    /// the order given.
    pub fn select_wells(&self, wells: &[usize]) -> Result<CellTable> {
        let rows: Vec<usize> = wells
            .iter()
            .flat_map(|&w| self.grouping.rows(w).iter().copied())
            .collect();
        let values = self.values.select_rows(rows.iter());
        let ids = rows.iter().map(|&r| self.well_ids[r].clone()).collect();
        CellTable::new(ids, self.feature_names.clone(), values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_matrix_csv(path, &self.feature_names, &self.well_ids, &self.values)
    }
}

/// Per-well feature matrix (entire-well features).
#[derive(Debug, Clone, PartialEq)]
pub struct WellTable {
    well_ids: Vec<String>,
    feature_names: Vec<String>,
    values: DMatrix<f64>,
}

impl WellTable {
    pub fn new(
        well_ids: Vec<String>,
        feature_names: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.nrows() != well_ids.len() || values.ncols() != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: well_ids.len() * feature_names.len(),
                got: values.len(),
            });
        }
        let mut seen = HashSet::new();
        for id in &well_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateWell(id.clone()));
            }
        }
        check_feature_names(&feature_names)?;
        check_finite(&values, &feature_names)?;
        Ok(WellTable {
            well_ids,
            feature_names,
            values,
        })
    }

    pub fn n_wells(&self) -> usize {
        self.well_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn well_ids(&self) -> &[String] {
        &self.well_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Rows reordered to follow `ids`.
    pub fn aligned_to(&self, ids: &[String]) -> Result<DMatrix<f64>> {
        let index: HashMap<&str, usize> = self
            .well_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let rows = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::WellIdMismatch(vec![id.clone()]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.values.select_rows(rows.iter()))
    }
}

/// Per-well bio-rank and bio-class.
#[derive(Debug, Clone, PartialEq)]
pub struct BioAssessment {
    well_ids: Vec<String>,
    ranks: Vec<usize>,
    classes: Vec<BioClass>,
}

impl BioAssessment {
    pub fn new(well_ids: Vec<String>, ranks: Vec<usize>, classes: Vec<BioClass>) -> Result<Self> {
        let n = well_ids.len();
        if ranks.len() != n || classes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: ranks.len().min(classes.len()),
            });
        }
        let mut seen = HashSet::new();
        for id in &well_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateWell(id.clone()));
            }
        }
        let mut by_rank: Vec<Option<usize>> = vec![None; n];
        for (i, &r) in ranks.iter().enumerate() {
            if r == 0 || r > n || by_rank[r - 1].is_some() {
                return Err(Error::RankNotPermutation(n));
            }
            by_rank[r - 1] = Some(i);
        }
        let mut prev = BioClass::Low;
        for slot in by_rank {
            let i = slot.expect("ranks form a permutation");
            if classes[i] < prev {
                return Err(Error::ClassRankInconsistent {
                    well: well_ids[i].clone(),
                    rank: ranks[i],
                    class: classes[i].to_string(),
                });
            }
            prev = classes[i];
        }
        Ok(BioAssessment {
            well_ids,
            ranks,
            classes,
        })
    }

    pub fn n_wells(&self) -> usize {
        self.well_ids.len()
    }

    pub fn well_ids(&self) -> &[String] {
        &self.well_ids
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn classes(&self) -> &[BioClass] {
        &self.classes
    }

    /// (rank, class) per id in `ids` order.
    pub fn aligned_to(&self, ids: &[String]) -> Result<(Vec<usize>, Vec<BioClass>)> {
        let index: HashMap<&str, usize> = self
            .well_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut ranks = Vec::with_capacity(ids.len());
        let mut classes = Vec::with_capacity(ids.len());
        for id in ids {
            let i = *index
                .get(id.as_str())
                .ok_or_else(|| Error::WellIdMismatch(vec![id.clone()]))?;
            ranks.push(self.ranks[i]);
            classes.push(self.classes[i]);
        }
        Ok((ranks, classes))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("well_id,rank,class\n");
        for i in 0..self.n_wells() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.well_ids[i], self.ranks[i], self.classes[i]
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Linked cell, well and assessment data. Wells follow the cell table's
/// first-appearance order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub cells: CellTable,
    pub wells: Option<WellTable>,
    pub assessment: BioAssessment,
    ranks: Vec<usize>,
    classes: Vec<BioClass>,
    well_features: Option<DMatrix<f64>>,
}

impl Dataset {
    pub fn join(
        cells: CellTable,
        wells: Option<WellTable>,
        assessment: BioAssessment,
    ) -> Result<Self> {
        let mut sets: Vec<BTreeSet<&str>> = vec![
            cells.grouping().ids().iter().map(String::as_str).collect(),
            assessment.well_ids().iter().map(String::as_str).collect(),
        ];
        if let Some(w) = &wells {
            sets.push(w.well_ids().iter().map(String::as_str).collect());
        }
        let union: BTreeSet<&str> = sets.iter().flatten().copied().collect();
        let mismatch: Vec<String> = union
            .into_iter()
            .filter(|id| !sets.iter().all(|s| s.contains(id)))
            .map(str::to_string)
            .collect();
        if !mismatch.is_empty() {
            return Err(Error::WellIdMismatch(mismatch));
        }
        let ids = cells.grouping().ids().to_vec();
        let (ranks, classes) = assessment.aligned_to(&ids)?;
        let well_features = wells.as_ref().map(|w| w.aligned_to(&ids)).transpose()?;
        Ok(Dataset {
            cells,
            wells,
            assessment,
            ranks,
            classes,
            well_features,
        })
    }

    pub fn n_wells(&self) -> usize {
        self.cells.grouping().n_wells()
    }

    pub fn well_ids(&self) -> &[String] {
        self.cells.grouping().ids()
    }

    /// Ranks in well order.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Classes in well order.
    pub fn classes(&self) -> &[BioClass] {
        &self.classes
    }

    /// Well-level features with rows in well order.
    pub fn well_features(&self) -> Option<&DMatrix<f64>> {
        self.well_features.as_ref()
    }

    /// Dataset restricted to the given wells (indices in well order).
    pub fn select_wells(&self, keep: &[usize]) -> Result<Dataset> {
        let cells = self.cells.select_wells(keep)?;
        let ids: Vec<String> = keep.iter().map(|&w| self.well_ids()[w].clone()).collect();
        let wells = match &self.well_features {
            Some(f) => {
                let names = self.wells.as_ref().map(|w| w.feature_names().to_vec());
                Some(WellTable::new(
                    ids.clone(),
                    names.unwrap_or_default(),
                    f.select_rows(keep.iter()),
                )?)
            }
            None => None,
        };
        // Ranks are re-derived as a permutation of 1..keep.len() preserving order.
        let mut order: Vec<usize> = (0..keep.len()).collect();
        order.sort_by_key(|&i| self.ranks[keep[i]]);
        let mut ranks = vec![0; keep.len()];
        for (r, &i) in order.iter().enumerate() {
            ranks[i] = r + 1;
        }
        let classes = keep.iter().map(|&w| self.classes[w]).collect();
        let assessment = BioAssessment::new(ids, ranks, classes)?;
        Dataset::join(cells, wells, assessment)
    }
}

/// Formats a number with 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

struct RawTable {
    ids: Vec<String>,
    names: Vec<String>,
    values: DMatrix<f64>,
}

fn read_matrix_csv(path: &Path) -> Result<RawTable> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("well_id") {
        return Err(Error::MissingColumn("well_id".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        ids.push(record[0].to_string());
        for (j, name) in names.iter().enumerate() {
            let raw = record.get(j + 1).ok_or_else(|| Error::MissingColumn(name.clone()))?;
            let v = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericCell {
                    row: row + 1,
                    column: name.clone(),
                    value: raw.to_string(),
                })?;
            data.push(v);
        }
    }
    let values = DMatrix::from_row_slice(ids.len(), names.len(), &data);
    Ok(RawTable { ids, names, values })
}

fn write_matrix_csv(
    path: &Path,
    names: &[String],
    ids: &[String],
    values: &DMatrix<f64>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_matrix(&mut out, names, ids, values).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_matrix<W: Write>(
    out: &mut W,
    names: &[String],
    ids: &[String],
    values: &DMatrix<f64>,
) -> std::io::Result<()> {
    write!(out, "well_id")?;
    for name in names {
        write!(out, ",{name}")?;
    }
    out.write_all(b"\n")?;
    for (i, id) in ids.iter().enumerate() {
        write!(out, "{id}")?;
        for j in 0..values.ncols() {
            write!(out, ",{}", format_number(values[(i, j)]))?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn load_cell_table(path: &Path) -> Result<CellTable> {
    let raw = read_matrix_csv(path)?;
    CellTable::new(raw.ids, raw.names, raw.values)
}

pub fn load_well_table(path: &Path) -> Result<WellTable> {
    let raw = read_matrix_csv(path)?;
    WellTable::new(raw.ids, raw.names, raw.values)
}

pub fn write_well_table(table: &WellTable, path: &Path) -> Result<()> {
    write_matrix_csv(path, table.feature_names(), table.well_ids(), table.values())
}

pub fn load_assessment(path: &Path) -> Result<BioAssessment> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (c_id, c_rank, c_class) = (col("well_id")?, col("rank")?, col("class")?);
    let mut ids = Vec::new();
    let mut ranks = Vec::new();
    let mut classes = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        ids.push(record[c_id].to_string());
        let raw = &record[c_rank];
        ranks.push(raw.parse::<usize>().map_err(|_| Error::NonNumericCell {
            row: row + 1,
            column: "rank".into(),
            value: raw.to_string(),
        })?);
        classes.push(record[c_class].parse::<BioClass>()?);
    }
    BioAssessment::new(ids, ranks, classes)
}
