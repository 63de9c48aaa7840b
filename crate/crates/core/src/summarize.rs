//! Summary statistics, cell-level coordinate systems (PCA, PLS), the two
//! standardizations, and per-well summarization of cell data.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::datamodel::{format_number, write_matrix, WellGrouping, WellTable};
use crate::error::{Error, Result};

/// One per-well summary statistic of a cell-level column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Quantile(f64),
    Min,
    Max,
    Sd,
}

impl Statistic {
    /// Short label used in column names: `q25`, `q2.5`, `min`, `max`, `sd`.
    pub fn label(&self) -> String {
        match *self {
            Statistic::Quantile(q) => {
                let pct = q * 100.0;
                if (pct - pct.round()).abs() < 1e-9 {
                    format!("q{:02}", pct.round() as i64)
                } else {
                    let s = format!("{pct:.6}");
                    format!("q{}", s.trim_end_matches('0').trim_end_matches('.'))
                }
            }
            Statistic::Min => "min".into(),
            Statistic::Max => "max".into(),
            Statistic::Sd => "sd".into(),
        }
    }

    pub fn quantile_level(&self) -> Option<f64> {
        match *self {
            Statistic::Quantile(q) => Some(q),
            _ => None,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    /// Accepts `min`, `max`, `sd`, `q<percent>` (e.g. `q01`, `q2.5`) or a
    /// bare level in (0, 1) such as `0.75`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSummary(format!("unknown statistic `{s}`"));
        let stat = match s {
            "min" => Statistic::Min,
            "max" => Statistic::Max,
            "sd" => Statistic::Sd,
            _ => {
                let q = if let Some(pct) = s.strip_prefix('q') {
                    pct.parse::<f64>().map_err(|_| bad())? / 100.0
                } else {
                    s.parse::<f64>().map_err(|_| bad())?
                };
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::QOutOfRange(q));
                }
                Statistic::Quantile(q)
            }
        };
        Ok(stat)
    }
}

/// Ordered, duplicate-free list of summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryConfig {
    stats: Vec<Statistic>,
}

impl SummaryConfig {
    pub fn new(stats: Vec<Statistic>) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::InvalidSummary("no statistics".into()));
        }
        let mut seen = HashSet::new();
        for s in &stats {
            if let Statistic::Quantile(q) = *s {
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::QOutOfRange(q));
                }
            }
            if !seen.insert(s.label()) {
                return Err(Error::InvalidSummary(format!("duplicate statistic `{s}`")));
            }
        }
        Ok(SummaryConfig { stats })
    }

    /// Parses a comma-separated list such as `q01,q25,q50,q75,q99`.
    pub fn parse(spec: &str) -> Result<Self> {
        let stats = spec
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        SummaryConfig::new(stats)
    }

    /// The five quantiles 1%, 25%, 50%, 75%, 99%.
    pub fn five_quantiles() -> Self {
        SummaryConfig::new(
            [0.01, 0.25, 0.5, 0.75, 0.99]
                .into_iter()
                .map(Statistic::Quantile)
                .collect(),
        )
        .expect("valid")
    }

    /// Min, max and the three quartiles plus the standard deviation.
    pub fn six_number() -> Self {
        SummaryConfig::new(vec![
            Statistic::Max,
            Statistic::Min,
            Statistic::Quantile(0.5),
            Statistic::Quantile(0.25),
            Statistic::Quantile(0.75),
            Statistic::Sd,
        ])
        .expect("valid")
    }

    pub fn stats(&self) -> &[Statistic] {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// Quantile levels, or `NonQuantileStatistic` for the first non-quantile.
    pub fn quantile_levels(&self) -> Result<Vec<f64>> {
        self.stats
            .iter()
            .map(|s| {
                s.quantile_level()
                    .ok_or_else(|| Error::NonQuantileStatistic(s.label()))
            })
            .collect()
    }
}

impl fmt::Display for SummaryConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.stats.iter().map(Statistic::label).collect();
        f.write_str(&labels.join(","))
    }
}

/// Linear-interpolation quantile of already sorted values.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::QOutOfRange(q));
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Sample quantile by linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::QOutOfRange(q));
    }
    let mut buf = values.to_vec();
    let h = (buf.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let (_, &mut v_lo, right) = buf.select_nth_unstable_by(lo, f64::total_cmp);
    let frac = h - lo as f64;
    if frac == 0.0 {
        return Ok(v_lo);
    }
    let v_hi = right.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(v_lo + frac * (v_hi - v_lo))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with divisor m−1.
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::SdOfSingleton);
    }
    let m = mean(values);
    Ok(values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64)
}

pub fn sample_sd(values: &[f64]) -> Result<f64> {
    sample_variance(values).map(f64::sqrt)
}

/// Statistics of `values` in config order.
pub fn summary_vector(values: &[f64], config: &SummaryConfig) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    config
        .stats()
        .iter()
        .map(|s| match *s {
            Statistic::Quantile(q) => sorted_quantile(&sorted, q),
            Statistic::Min => Ok(sorted[0]),
            Statistic::Max => Ok(sorted[sorted.len() - 1]),
            Statistic::Sd => sample_sd(values),
        })
        .collect()
}

/// Orthonormal coordinate system `Y = X·B` for cell summarization.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    columns: DMatrix<f64>,
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl OrthonormalBasis {
    pub fn new(columns: DMatrix<f64>, labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        let d = columns.nrows();
        if columns.ncols() != d || labels.len() != d || weights.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: columns.ncols(),
            });
        }
        let gram = columns.transpose() * &columns;
        let off = (gram - DMatrix::identity(d, d)).amax();
        if off > 1e-10 {
            return Err(Error::DegenerateData(format!(
                "basis columns are not orthonormal (max deviation {off:e})"
            )));
        }
        let unique: HashSet<&String> = labels.iter().collect();
        if unique.len() != d {
            return Err(Error::InvalidConfig("basis labels must be unique".into()));
        }
        Ok(OrthonormalBasis {
            columns,
            labels,
            weights,
        })
    }

    /// The original coordinates, labelled with the feature names.
    pub fn identity(names: &[String]) -> Self {
        let d = names.len();
        OrthonormalBasis {
            columns: DMatrix::identity(d, d),
            labels: names.to_vec(),
            weights: vec![f64::NAN; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Explained variance per column (NaN where undefined).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// One row per original feature, one column per basis direction.
    pub fn write_csv(&self, path: &Path, feature_names: &[String]) -> Result<()> {
        if feature_names.len() != self.columns.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.nrows(),
                got: feature_names.len(),
            });
        }
        let mut out = String::from("feature");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, name) in feature_names.iter().enumerate() {
            out.push_str(name);
            for j in 0..self.columns.ncols() {
                out.push(',');
                out.push_str(&format_number(self.columns[(i, j)]));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let means = x.row_mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &means;
    }
    xc.tr_mul(&xc) / (n as f64 - 1.0)
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is positive.
fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue.
fn sorted_eigen(sym: DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(sym);
    let vectors: Vec<DVector<f64>> = eig
        .eigenvectors
        .column_iter()
        .map(|c| fix_sign(c.into_owned()))
        .collect();
    let lead = |v: &DVector<f64>| v.iamax();
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(lead(&vectors[a]).cmp(&lead(&vectors[b])))
    });
    (
        order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect(),
        order.iter().map(|&i| vectors[i].clone()).collect(),
    )
}

/// Full-rank PCA basis of the pooled cells.
pub fn pca_basis(x: &DMatrix<f64>) -> Result<OrthonormalBasis> {
    if x.nrows() < 2 {
        return Err(Error::DegenerateData("PCA needs at least two rows".into()));
    }
    let cov = covariance(x);
    if cov.amax() == 0.0 {
        return Err(Error::DegenerateData("covariance matrix is zero".into()));
    }
    let d = x.ncols();
    let (values, vectors) = sorted_eigen(cov);
    let labels = (1..=d).map(|i| format!("PC{i}")).collect();
    OrthonormalBasis::new(DMatrix::from_columns(&vectors), labels, values)
}

/// Orthonormal basis of the complement of unit vector `w` (d × (d−1)), built
/// from a Householder reflection that maps `w` onto a coordinate axis.
fn complement_basis(w: &DVector<f64>) -> DMatrix<f64> {
    let d = w.len();
    let k = w.iamax();
    let mut v = w.clone();
    v[k] += w[k].signum();
    let h = DMatrix::identity(d, d) - (&v * v.transpose()) * (2.0 / v.norm_squared());
    h.remove_column(k)
}

/// First PLS direction (bio-rank response) followed by the PCA basis of the
/// cells projected onto its orthogonal complement.
///
/// `well_response` holds one response value per well in grouping order; each
/// cell takes its well's value.
pub fn pls_basis(
    x: &DMatrix<f64>,
    grouping: &WellGrouping,
    well_response: &[f64],
) -> Result<OrthonormalBasis> {
    let (n, d) = x.shape();
    if grouping.n_rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grouping.n_rows(),
        });
    }
    if well_response.len() != grouping.n_wells() {
        return Err(Error::DimensionMismatch {
            expected: grouping.n_wells(),
            got: well_response.len(),
        });
    }
    let r: Vec<f64> = grouping
        .membership()
        .iter()
        .map(|&w| well_response[w])
        .collect();
    let r_mean = mean(&r);
    let means = x.row_mean();
    let mut dir: DVector<f64> = DVector::zeros(d);
    let mut scale = 0.0;
    for i in 0..n {
        let rc = r[i] - r_mean;
        for j in 0..d {
            dir[j] += (x[(i, j)] - means[j]) * rc;
        }
        scale += rc * rc;
    }
    let norm = dir.norm();
    if scale == 0.0 || norm <= 1e-12 * scale.sqrt() * (x.amax() + 1.0) * n as f64 {
        return Err(Error::DegenerateData(
            "zero covariance between cells and response".into(),
        ));
    }
    let w1 = dir / norm;
    let cov = covariance(x);
    let mut columns = vec![w1.clone()];
    let mut weights = vec![(w1.transpose() * &cov * &w1)[(0, 0)]];
    if d > 1 {
        let q = complement_basis(&w1);
        let (values, vectors) = sorted_eigen(q.transpose() * &cov * &q);
        for (val, v) in values.into_iter().zip(vectors) {
            columns.push(fix_sign(&q * v));
            weights.push(val);
        }
    }
    let mut labels = vec!["PLS1".to_string()];
    labels.extend((2..=d).map(|i| format!("PC{i}")));
    OrthonormalBasis::new(DMatrix::from_columns(&columns), labels, weights)
}

/// `Y = X·B`.
pub fn project(x: &DMatrix<f64>, basis: &OrthonormalBasis) -> Result<DMatrix<f64>> {
    if x.ncols() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: x.ncols(),
        });
    }
    Ok(x * basis.columns())
}

/// Per-column centering and scaling applied by [`standardize_global`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.means[j]) / self.sds[j]
        })
    }
}

/// Pooled z-scoring of every column (sample sd, divisor n−1).
pub fn standardize_global(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Standardization)> {
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        let values: Vec<f64> = col.iter().copied().collect();
        let sd = sample_sd(&values)?;
        if sd == 0.0 {
            return Err(Error::ZeroVarianceColumn(j.to_string()));
        }
        means.push(mean(&values));
        sds.push(sd);
    }
    let st = Standardization { means, sds };
    Ok((st.apply(x), st))
}

/// Within-well sample sds: one row per well, one column per feature.
pub fn within_well_sds(x: &DMatrix<f64>, grouping: &WellGrouping) -> Result<DMatrix<f64>> {
    if grouping.n_rows() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: grouping.n_rows(),
        });
    }
    let mut out = DMatrix::zeros(grouping.n_wells(), x.ncols());
    let mut buf = Vec::new();
    for w in 0..grouping.n_wells() {
        for j in 0..x.ncols() {
            buf.clear();
            buf.extend(grouping.rows(w).iter().map(|&r| x[(r, j)]));
            out[(w, j)] = sample_sd(&buf)?;
        }
    }
    Ok(out)
}

/// Divides each column of each well's block by that block's sample sd.
/// Scale only: well means keep their bio-rank signal.
pub fn standardize_within_well(x: &DMatrix<f64>, grouping: &WellGrouping) -> Result<DMatrix<f64>> {
    let sds = within_well_sds(x, grouping)?;
    let mut out = x.clone();
    for (row, &w) in grouping.membership().iter().enumerate() {
        for j in 0..x.ncols() {
            let sd = sds[(w, j)];
            if sd == 0.0 {
                return Err(Error::ZeroVarianceBlock {
                    well: grouping.ids()[w].clone(),
                    column: j,
                });
            }
            out[(row, j)] /= sd;
        }
    }
    Ok(out)
}

/// Per-well vectors of summary statistics, laid out as all statistics of the
/// first column, then all of the second, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct SummarizedTable {
    pub well_ids: Vec<String>,
    pub column_labels: Vec<String>,
    pub values: DMatrix<f64>,
}

impl SummarizedTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        write_matrix(
            &mut BufWriter::new(file),
            &self.column_labels,
            &self.well_ids,
            &self.values,
        )
        .map_err(|e| Error::io(path, e))
    }
}

pub fn summarize_wells(
    y: &DMatrix<f64>,
    grouping: &WellGrouping,
    config: &SummaryConfig,
    column_labels: &[String],
) -> Result<SummarizedTable> {
    if grouping.n_rows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: y.nrows(),
            got: grouping.n_rows(),
        });
    }
    if column_labels.len() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: y.ncols(),
            got: column_labels.len(),
        });
    }
    let ds = config.len();
    let mut values = DMatrix::zeros(grouping.n_wells(), y.ncols() * ds);
    let mut buf = Vec::new();
    for w in 0..grouping.n_wells() {
        for i in 0..y.ncols() {
            buf.clear();
            buf.extend(grouping.rows(w).iter().map(|&r| y[(r, i)]));
            for (j, v) in summary_vector(&buf, config)?.into_iter().enumerate() {
                values[(w, i * ds + j)] = v;
            }
        }
    }
    let labels = column_labels
        .iter()
        .flat_map(|c| config.stats().iter().map(move |s| format!("{c}.{s}")))
        .collect();
    Ok(SummarizedTable {
        well_ids: grouping.ids().to_vec(),
        column_labels: labels,
        values,
    })
}

/// Well-level feature matrix handed to the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub well_ids: Vec<String>,
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        write_matrix(&mut BufWriter::new(file), &self.labels, &self.well_ids, &self.values)
            .map_err(|e| Error::io(path, e))
    }
}

/// Summaries first, then well features (rows aligned by well id).
pub fn combine(summarized: &SummarizedTable, wells: Option<&WellTable>) -> Result<FeatureMatrix> {
    let Some(wells) = wells else {
        return Ok(FeatureMatrix {
            well_ids: summarized.well_ids.clone(),
            labels: summarized.column_labels.clone(),
            values: summarized.values.clone(),
        });
    };
    let a: BTreeSet<&String> = summarized.well_ids.iter().collect();
    let b: BTreeSet<&String> = wells.well_ids().iter().collect();
    if a != b || a.len() != summarized.well_ids.len() {
        let diff = a.symmetric_difference(&b).map(|s| s.to_string()).collect();
        return Err(Error::WellIdMismatch(diff));
    }
    let extra = wells.aligned_to(&summarized.well_ids)?;
    let n = summarized.values.nrows();
    let (c1, c2) = (summarized.values.ncols(), extra.ncols());
    let values = DMatrix::from_fn(n, c1 + c2, |i, j| {
        if j < c1 {
            summarized.values[(i, j)]
        } else {
            extra[(i, j - c1)]
        }
    });
    let mut labels = summarized.column_labels.clone();
    labels.extend(wells.feature_names().iter().cloned());
    Ok(FeatureMatrix {
        well_ids: summarized.well_ids.clone(),
        labels,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[1., 2., 3., 4., 5.], 0.5).unwrap(), 3.0);
        assert_eq!(quantile(&[1., 2., 3., 4.], 0.5).unwrap(), 2.5);
        // h = 3·0.25 + 1 = 1.75 → 10 + 0.75·10
        assert_eq!(quantile(&[10., 20., 30., 40.], 0.25).unwrap(), 17.5);
        assert_eq!(quantile(&[40., 10., 30., 20.], 0.25).unwrap(), 17.5);
        assert_eq!(quantile(&[7.0], 0.3).unwrap(), 7.0);
    }

    #[test]
    fn quantile_errors() {
        assert!(matches!(quantile(&[], 0.5), Err(Error::EmptyInput)));
        assert!(matches!(quantile(&[1.0], 0.0), Err(Error::QOutOfRange(_))));
        assert!(matches!(quantile(&[1.0], 1.0), Err(Error::QOutOfRange(_))));
    }

    #[test]
    fn summary_vector_examples() {
        let c = SummaryConfig::new(vec![Statistic::Min, Statistic::Max]).unwrap();
        assert_eq!(summary_vector(&[1., 2., 3.], &c).unwrap(), vec![1., 3.]);
        let c = SummaryConfig::new(vec![Statistic::Sd]).unwrap();
        let v = summary_vector(&[2., 4.], &c).unwrap();
        assert!((v[0] - 2f64.sqrt()).abs() < 1e-15);
        let c = SummaryConfig::parse("q25,sd").unwrap();
        assert_eq!(summary_vector(&[5., 5., 5., 5.], &c).unwrap(), vec![5., 0.]);
        assert!(matches!(summary_vector(&[5.], &c), Err(Error::SdOfSingleton)));
    }

    #[test]
    fn summary_config_parsing() {
        let c = SummaryConfig::parse("q01,q25,q50,q75,q99").unwrap();
        assert_eq!(c, SummaryConfig::five_quantiles());
        assert_eq!(c.to_string(), "q01,q25,q50,q75,q99");
        let c = SummaryConfig::parse("min,max,q25,q50,q75,sd").unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(SummaryConfig::parse("q2.5").unwrap().to_string(), "q2.5");
        assert_eq!(SummaryConfig::parse("0.75").unwrap().to_string(), "q75");
        assert!(SummaryConfig::parse("").is_err());
        assert!(SummaryConfig::parse("q50,q50").is_err());
        assert!(SummaryConfig::parse("q100").is_err());
        assert!(SummaryConfig::parse("mean").is_err());
    }

    fn diag_data() -> DMatrix<f64> {
        // columns with sample variances 4 and 1 and zero covariance
        DMatrix::from_row_slice(
            4,
            2,
            &[
                -(6f64).sqrt(),
                0.0,
                (6f64).sqrt(),
                0.0,
                0.0,
                -(1.5f64).sqrt(),
                0.0,
                (1.5f64).sqrt(),
            ],
        )
    }

    #[test]
    fn pca_of_diagonal_covariance() {
        let x = diag_data();
        let b = pca_basis(&x).unwrap();
        assert!((b.columns() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        assert!((b.weights()[0] - 4.0).abs() < 1e-12);
        assert!((b.weights()[1] - 1.0).abs() < 1e-12);
        assert_eq!(b.labels(), ["PC1", "PC2"]);
    }

    #[test]
    fn pca_of_rotated_covariance() {
        let rot = DMatrix::from_row_slice(
            2,
            2,
            &[FRAC_1_SQRT_2, -FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2],
        );
        let x = diag_data() * rot.transpose();
        let b = pca_basis(&x).unwrap();
        assert!((b.columns()[(0, 0)] - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((b.columns()[(1, 0)] - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((b.weights()[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pca_rejects_zero_covariance() {
        let x = DMatrix::from_element(5, 3, 2.0);
        assert!(matches!(pca_basis(&x), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn project_examples() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let id = OrthonormalBasis::identity(&["a".into(), "b".into()]);
        assert_eq!(project(&x, &id).unwrap(), x);
        let rot = OrthonormalBasis::new(
            DMatrix::from_row_slice(
                2,
                2,
                &[FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            ),
            vec!["u".into(), "v".into()],
            vec![1.0, 1.0],
        )
        .unwrap();
        let y = project(&x, &rot).unwrap();
        assert!((y[(0, 0)] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((y[(0, 1)] - FRAC_1_SQRT_2).abs() < 1e-15);
        let wide = DMatrix::zeros(1, 3);
        assert!(matches!(
            project(&wide, &rot),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn global_standardization() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        let (z, st) = standardize_global(&x).unwrap();
        assert!((z[(0, 0)] + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((z[(1, 0)] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(st.means, vec![2.0]);
        let (z2, _) = standardize_global(&z).unwrap();
        assert!((z2 - z).amax() < 1e-12);
        let c = DMatrix::from_element(3, 1, 4.0);
        assert!(matches!(
            standardize_global(&c),
            Err(Error::ZeroVarianceColumn(_))
        ));
    }

    #[test]
    fn within_well_scaling() {
        let g = WellGrouping::from_ids(&["A", "A", "B", "B", "B"]);
        let x = DMatrix::from_row_slice(5, 1, &[2.0, 4.0, 1.0, 2.0, 6.0]);
        let z = standardize_within_well(&x, &g).unwrap();
        let s2 = 2f64.sqrt();
        assert!((z[(0, 0)] - 2.0 / s2).abs() < 1e-15);
        assert!((z[(1, 0)] - 4.0 / s2).abs() < 1e-15);
        let sds = within_well_sds(&z, &g).unwrap();
        assert!((sds.add_scalar(-1.0)).amax() < 1e-12);

        let flat = DMatrix::from_row_slice(5, 1, &[2.0, 2.0, 1.0, 2.0, 6.0]);
        assert!(matches!(
            standardize_within_well(&flat, &g),
            Err(Error::ZeroVarianceBlock { .. })
        ));
    }

    #[test]
    fn uniform_within_well_sd_equals_global_scaling() {
        let g = WellGrouping::from_ids(&["A", "A", "B", "B"]);
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 3.0, 10.0, 13.0]);
        let z = standardize_within_well(&x, &g).unwrap();
        let s = (4.5f64).sqrt();
        assert!((z - x / s).amax() < 1e-14);
    }

    #[test]
    fn summarize_layout() {
        let g = WellGrouping::from_ids(&["A", "A", "A"]);
        let y = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let c = SummaryConfig::parse("q50,max").unwrap();
        let t = summarize_wells(&y, &g, &c, &["PC1".into()]).unwrap();
        assert_eq!(t.values.row(0).iter().copied().collect::<Vec<_>>(), [2.0, 3.0]);
        assert_eq!(t.column_labels, ["PC1.q50", "PC1.max"]);

        let g = WellGrouping::from_ids(&["A", "A", "B", "B"]);
        let y = DMatrix::from_row_slice(4, 2, &[1., 5., 2., 6., 1., 5., 2., 6.]);
        let t = summarize_wells(&y, &g, &c, &["a".into(), "b".into()]).unwrap();
        assert_eq!(t.values.row(0), t.values.row(1));
        assert_eq!(t.column_labels, ["a.q50", "a.max", "b.q50", "b.max"]);
    }

    #[test]
    fn summarize_dimension() {
        let n = 40;
        let ids: Vec<String> = (0..n).map(|i| format!("W{}", i % 4)).collect();
        let g = WellGrouping::from_ids(&ids);
        let y = DMatrix::from_fn(n, 10, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let labels: Vec<String> = (0..10).map(|i| format!("f{i}")).collect();
        let t = summarize_wells(&y, &g, &SummaryConfig::five_quantiles(), &labels).unwrap();
        assert_eq!(t.values.ncols(), 50);
    }

    #[test]
    fn combine_cases() {
        let s = SummarizedTable {
            well_ids: vec!["A".into(), "B".into()],
            column_labels: (0..50).map(|i| format!("c{i}")).collect(),
            values: DMatrix::zeros(2, 50),
        };
        assert_eq!(combine(&s, None).unwrap().values.ncols(), 50);
        let empty = WellTable::new(
            vec!["B".into(), "A".into()],
            vec![],
            DMatrix::zeros(2, 0),
        )
        .unwrap();
        assert_eq!(combine(&s, Some(&empty)).unwrap().values.ncols(), 50);
        let w = WellTable::new(
            vec!["B".into(), "A".into()],
            (0..13).map(|i| format!("w{i}")).collect(),
            DMatrix::from_fn(2, 13, |i, _| i as f64),
        )
        .unwrap();
        let f = combine(&s, Some(&w)).unwrap();
        assert_eq!(f.values.ncols(), 63);
        // row A takes well table row 1
        assert_eq!(f.values[(0, 50)], 1.0);
        let bad = WellTable::new(vec!["A".into(), "C".into()], vec![], DMatrix::zeros(2, 0))
            .unwrap();
        assert!(matches!(
            combine(&s, Some(&bad)),
            Err(Error::WellIdMismatch(ref v)) if v == &["B", "C"]
        ));
    }

    #[test]
    fn pls_constant_response_is_degenerate() {
        let g = WellGrouping::from_ids(&["A", "A", "B", "B"]);
        let x = DMatrix::from_row_slice(4, 2, &[1., 2., 3., 1., 0., 5., 2., 2.]);
        assert!(matches!(
            pls_basis(&x, &g, &[1.0, 1.0]),
            Err(Error::DegenerateData(_))
        ));
        let b = pls_basis(&x, &g, &[1.0, 2.0]).unwrap();
        assert_eq!(b.labels(), ["PLS1", "PC2"]);
    }
}
