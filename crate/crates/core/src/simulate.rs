//! Synthetic cell-well data, the pipeline comparison on it, the replication
//! study, and the two-dimensional toy example on maxima.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::datamodel::{format_number, BioAssessment, BioClass, CellTable, Dataset};
use crate::error::{Error, Result};
use crate::pipeline::{cells_alone, error_rate, FittedPipeline, ObjectKind, PipelineConfig};
use crate::rng::{substream, GENERATOR};
use crate::summarize::{
    mean, pca_basis, pls_basis, project, sample_sd, standardize_global, summarize_wells,
    within_well_sds, Standardization,
};
use crate::uncertainty::{
    eta_empirical, psi_per_well, rotate_direction, DirectionBlocks, PsiInputs, TrueDirection,
    UncertaintyReport,
};

/// Stream ids: correlation draws use 0..CORRELATION_ATTEMPTS, well `w` uses
/// `WELL_STREAM_BASE + w`.
const CORRELATION_ATTEMPTS: u64 = 5;
const WELL_STREAM_BASE: u64 = 1 << 32;

/// How `mean_step` is applied between rank-adjacent wells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// Every coordinate moves by the step (gap along the direction is step·√d).
    PerCoordinate,
    /// The mean moves by the step along the unit direction.
    AlongDirection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_wells: usize,
    pub cells_min: usize,
    pub cells_max: usize,
    pub dim: usize,
    pub var_lo: f64,
    pub var_hi: f64,
    pub mean_step: f64,
    pub step_mode: StepMode,
    pub class_cuts: (usize, usize),
    pub global_standardize: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_wells: 50,
            cells_min: 50,
            cells_max: 300,
            dim: 10,
            var_lo: 20.0,
            var_hi: 500.0,
            mean_step: 0.005,
            step_mode: StepMode::PerCoordinate,
            class_cuts: (17, 33),
            global_standardize: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.cells_min < 2 || self.cells_min > self.cells_max {
            return bad("need 2 ≤ cells_min ≤ cells_max");
        }
        if self.dim == 0 {
            return bad("dimension must be positive");
        }
        if !(self.var_lo > 0.0 && self.var_lo < self.var_hi && self.var_hi.is_finite()) {
            return bad("need 0 < var_lo < var_hi");
        }
        if !self.mean_step.is_finite() {
            return bad("mean step must be finite");
        }
        let (a, b) = self.class_cuts;
        if !(1 <= a && a < b && b < self.n_wells) {
            return bad("need 1 ≤ cut1 < cut2 < n_wells");
        }
        Ok(())
    }

    pub fn class_of_rank(&self, rank: usize) -> BioClass {
        if rank <= self.class_cuts.0 {
            BioClass::Low
        } else if rank <= self.class_cuts.1 {
            BioClass::Medium
        } else {
            BioClass::High
        }
    }

    /// Mean vector of the well with rank `k` before standardization.
    pub fn well_mean(&self, k: usize) -> DVector<f64> {
        let per_coord = match self.step_mode {
            StepMode::PerCoordinate => self.mean_step,
            StepMode::AlongDirection => self.mean_step / (self.dim as f64).sqrt(),
        };
        DVector::from_element(self.dim, per_coord * k as f64)
    }
}

/// `R = D^{-1/2} A Aᵀ D^{-1/2}` with standard normal `A`; draws that are not
/// numerically positive definite are replaced by the next stream.
pub fn random_correlation(d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    for attempt in 0..CORRELATION_ATTEMPTS {
        let mut rng = substream(seed, attempt);
        let a: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
        let g = &a * a.transpose();
        let s = DVector::from_fn(d, |i, _| g[(i, i)].sqrt());
        let r = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                1.0
            } else {
                g[(i, j)] / (s[i] * s[j])
            }
        });
        if r.clone().cholesky().is_some() {
            return Ok(r);
        }
    }
    Err(Error::SingularGram(CORRELATION_ATTEMPTS as usize))
}

/// Generator-side truth, in the coordinates of the returned cell table.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Population mean of each well (rows in well order).
    pub well_means: DMatrix<f64>,
    /// Population sd of each feature in each well.
    pub well_sds: DMatrix<f64>,
    pub direction: TrueDirection,
    pub assessment: BioAssessment,
    pub correlation: DMatrix<f64>,
    pub standardization: Option<Standardization>,
}

fn well_id(w: usize, n: usize) -> String {
    let width = n.to_string().len().max(3);
    format!("W{:0width$}", w + 1)
}

pub fn generate_dataset(config: &SimConfig, seed: u64) -> Result<(CellTable, GroundTruth)> {
    config.validate()?;
    let d = config.dim;
    let corr = random_correlation(d, seed)?;
    let chol = corr
        .clone()
        .cholesky()
        .ok_or(Error::SingularGram(CORRELATION_ATTEMPTS as usize))?
        .unpack();
    let n = config.n_wells;
    let mut means = DMatrix::zeros(n, d);
    let mut sds = DMatrix::zeros(n, d);
    let mut blocks = Vec::with_capacity(n);
    let mut ids = Vec::new();
    for w in 0..n {
        let mut rng = substream(seed, WELL_STREAM_BASE + w as u64);
        let m = rng.random_range(config.cells_min..=config.cells_max);
        let sd = DVector::from_fn(d, |_, _| {
            rng.random_range(config.var_lo..config.var_hi).sqrt()
        });
        let mu = config.well_mean(w + 1);
        let mut block = DMatrix::zeros(m, d);
        let mut z = DVector::zeros(d);
        for c in 0..m {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let x = &chol * &z;
            for j in 0..d {
                block[(c, j)] = mu[j] + sd[j] * x[j];
            }
        }
        means.set_row(w, &mu.transpose());
        sds.set_row(w, &sd.transpose());
        ids.extend(std::iter::repeat_n(well_id(w, n), m));
        blocks.push(block);
    }
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut x = DMatrix::zeros(total, d);
    let mut row = 0;
    for b in &blocks {
        x.view_mut((row, 0), (b.nrows(), d)).copy_from(b);
        row += b.nrows();
    }
    let mut direction = DVector::from_element(d, 1.0);
    let standardization = if config.global_standardize {
        let (scaled, st) = standardize_global(&x)?;
        x = scaled;
        for j in 0..d {
            for w in 0..n {
                means[(w, j)] = (means[(w, j)] - st.means[j]) / st.sds[j];
                sds[(w, j)] /= st.sds[j];
            }
            direction[j] /= st.sds[j];
        }
        Some(st)
    } else {
        None
    };
    let names: Vec<String> = (1..=d).map(|j| format!("f{j}")).collect();
    let cells = CellTable::new(ids, names, x)?;
    let well_ids: Vec<String> = (0..n).map(|w| well_id(w, n)).collect();
    let ranks: Vec<usize> = (1..=n).collect();
    let classes = ranks.iter().map(|&k| config.class_of_rank(k)).collect();
    let truth = GroundTruth {
        well_means: means,
        well_sds: sds,
        direction: TrueDirection::normalized(direction)?,
        assessment: BioAssessment::new(well_ids, ranks, classes)?,
        correlation: corr,
        standardization,
    };
    Ok((cells, truth))
}

/// Generated cells joined with their assessment.
pub fn generate(config: &SimConfig, seed: u64) -> Result<(Dataset, GroundTruth)> {
    let (cells, truth) = generate_dataset(config, seed)?;
    let dataset = Dataset::join(cells, None, truth.assessment.clone())?;
    Ok((dataset, truth))
}

/// Direction used for η in simulation reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaSource {
    #[default]
    GroundTruth,
    /// First PLS direction of the pooled cells against well rank.
    EstimatedPls,
}

impl std::str::FromStr for AlphaSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truth" => Ok(AlphaSource::GroundTruth),
            "pls" => Ok(AlphaSource::EstimatedPls),
            other => Err(Error::InvalidConfig(format!(
                "unknown direction source `{other}` (truth, pls)"
            ))),
        }
    }
}

impl std::fmt::Display for AlphaSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AlphaSource::GroundTruth => "truth",
            AlphaSource::EstimatedPls => "pls",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineResult {
    pub error_rate: f64,
    /// Closed-form η summed over the quantile statistics; `None` when the
    /// summary has non-quantile statistics or there are no summaries.
    pub eta_closed: Option<f64>,
    pub eta_empirical: Option<f64>,
}

pub fn direction_for(dataset: &Dataset, truth: &GroundTruth, source: AlphaSource) -> Result<TrueDirection> {
    match source {
        AlphaSource::GroundTruth => Ok(truth.direction.clone()),
        AlphaSource::EstimatedPls => {
            let ranks: Vec<f64> = dataset.ranks().iter().map(|&r| r as f64).collect();
            let b = pls_basis(dataset.cells.values(), dataset.cells.grouping(), &ranks)?;
            TrueDirection::normalized(b.columns().column(0).into_owned())
        }
    }
}

/// ψ and η of a fitted well-level pipeline: the direction is rotated into the
/// pipeline's basis and spread evenly over the statistics; within-well sds
/// and summaries are taken on the basis scores before any within-well scaling.
pub fn pipeline_uncertainty(
    dataset: &Dataset,
    truth: &GroundTruth,
    fitted: &FittedPipeline,
    alpha: AlphaSource,
) -> Result<UncertaintyReport> {
    let inputs = UncertaintyInputs::new(dataset, truth, fitted, alpha)?;
    UncertaintyReport::build(
        dataset.well_ids().to_vec(),
        &fitted.config.summary,
        &inputs.blocks,
        inputs.sd_matrix,
        Some(PsiInputs {
            summaries: &inputs.summaries,
            means: &inputs.means,
        }),
    )
}

struct UncertaintyInputs {
    blocks: DirectionBlocks,
    sd_matrix: DMatrix<f64>,
    summaries: DMatrix<f64>,
    means: DMatrix<f64>,
}

impl UncertaintyInputs {
    fn new(
        dataset: &Dataset,
        truth: &GroundTruth,
        fitted: &FittedPipeline,
        alpha: AlphaSource,
    ) -> Result<Self> {
        let grouping = dataset.cells.grouping();
        let summary = &fitted.config.summary;
        let alpha_y = rotate_direction(&fitted.basis, &direction_for(dataset, truth, alpha)?)?;
        Ok(UncertaintyInputs {
            blocks: DirectionBlocks::uniform(&alpha_y, summary.len())?,
            sd_matrix: within_well_sds(&fitted.scores, grouping)?,
            summaries: summarize_wells(&fitted.scores, grouping, summary, fitted.basis.labels())?
                .values,
            means: &truth.well_means * fitted.basis.columns(),
        })
    }
}

/// Runs one workflow on a simulated dataset and scores it against the truth.
/// η is reported for well-level pipelines whose statistics are all quantiles.
pub fn run_pipeline(
    dataset: &Dataset,
    truth: &GroundTruth,
    pipeline: &PipelineConfig,
    alpha: AlphaSource,
    seed: u64,
) -> Result<PipelineResult> {
    if pipeline.objects == ObjectKind::CellsAlone {
        let predicted = cells_alone(dataset, pipeline, seed)?;
        return Ok(PipelineResult {
            error_rate: error_rate(&predicted, dataset.classes()),
            eta_closed: None,
            eta_empirical: None,
        });
    }
    let fitted = FittedPipeline::fit(dataset, pipeline)?;
    let error = error_rate(&fitted.fitted, dataset.classes());
    if pipeline.summary.quantile_levels().is_err() {
        let inputs = UncertaintyInputs::new(dataset, truth, &fitted, alpha)?;
        let psi = psi_per_well(
            PsiInputs {
                summaries: &inputs.summaries,
                means: &inputs.means,
            },
            &inputs.blocks,
            dataset.n_wells(),
        )?;
        return Ok(PipelineResult {
            error_rate: error,
            eta_closed: None,
            eta_empirical: Some(eta_empirical(&psi)?),
        });
    }
    let report = pipeline_uncertainty(dataset, truth, &fitted, alpha)?;
    Ok(PipelineResult {
        error_rate: error,
        eta_closed: Some(report.eta_closed),
        eta_empirical: report.eta_empirical,
    })
}

/// Mean with a 95% half-width 1.96·sd/√n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci_half: f64,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidConfig("need at least two replications".into()));
        }
        Ok(Estimate {
            mean: mean(values),
            ci_half: 1.96 * sample_sd(values)? / (values.len() as f64).sqrt(),
        })
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci_half
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci_half
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub name: String,
    pub error_rate: Estimate,
    pub eta_closed: Option<Estimate>,
    pub eta_empirical: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub sim: SimConfig,
    pub pipelines: Vec<PipelineConfig>,
    pub n_reps: usize,
    pub seed: u64,
    pub alpha: AlphaSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<PipelineSummary>,
    /// `per_rep[r][p]`: replication `r`, pipeline `p`.
    pub per_rep: Vec<Vec<PipelineResult>>,
    pub n_reps: usize,
    pub seed: u64,
    pub alpha: AlphaSource,
}

/// Replication `r` uses seed `seed ^ r`; results are merged in replication
/// order whatever the thread count.
pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    spec.sim.validate()?;
    if spec.n_reps < 2 {
        return Err(Error::InvalidConfig("need at least two replications".into()));
    }
    if spec.pipelines.is_empty() {
        return Err(Error::InvalidConfig("no pipelines to run".into()));
    }
    for p in &spec.pipelines {
        p.validate()?;
    }
    let per_rep: Vec<Vec<PipelineResult>> = (0..spec.n_reps as u64)
        .into_par_iter()
        .map(|r| {
            let seed = spec.seed ^ r;
            replicate(spec, seed).map_err(|e| Error::Replication {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let rows = spec
        .pipelines
        .iter()
        .enumerate()
        .map(|(p, cfg)| {
            let column = |f: fn(&PipelineResult) -> Option<f64>| -> Result<Option<Estimate>> {
                let values: Option<Vec<f64>> = per_rep.iter().map(|rep| f(&rep[p])).collect();
                values.map(|v| Estimate::from_values(&v)).transpose()
            };
            Ok(PipelineSummary {
                name: cfg.name(),
                error_rate: column(|r| Some(r.error_rate))?.expect("always present"),
                eta_closed: column(|r| r.eta_closed)?,
                eta_empirical: column(|r| r.eta_empirical)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StudyReport {
        rows,
        per_rep,
        n_reps: spec.n_reps,
        seed: spec.seed,
        alpha: spec.alpha,
    })
}

fn replicate(spec: &StudySpec, seed: u64) -> Result<Vec<PipelineResult>> {
    let (dataset, truth) = generate(&spec.sim, seed)?;
    spec.pipelines
        .iter()
        .map(|p| run_pipeline(&dataset, &truth, p, spec.alpha, seed))
        .collect()
}

impl StudyReport {
    /// Aligned table: pipelines as columns, uncertainty and error as rows.
    pub fn to_table(&self) -> String {
        let fmt = |e: Option<Estimate>| match e {
            Some(e) => format!("{:.3} ± {:.3}", e.mean, e.ci_half),
            None => "n/a".to_string(),
        };
        let mut grid = vec![vec![String::new()]];
        grid[0].extend(self.rows.iter().map(|r| r.name.clone()));
        let lines: [(&str, Box<dyn Fn(&PipelineSummary) -> String>); 3] = [
            ("Uncertainty", Box::new(|r| fmt(r.eta_closed))),
            ("Uncertainty (empirical)", Box::new(|r| fmt(r.eta_empirical))),
            ("DWD Error Rate", Box::new(|r| fmt(Some(r.error_rate)))),
        ];
        for (label, f) in &lines {
            let mut row = vec![label.to_string()];
            row.extend(self.rows.iter().map(|r| f(r)));
            grid.push(row);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        writeln!(
            out,
            "# replications: {}  seed: {}  direction: {}",
            self.n_reps, self.seed, self.alpha
        )
        .expect("string write");
        writeln!(out, "# generator: {GENERATOR}").expect("string write");
        writeln!(
            out,
            "# uncertainty: closed form summed over quantile statistics, direction split evenly across statistics"
        )
        .expect("string write");
        writeln!(out, "# intervals: mean ± 1.96·sd/√replications").expect("string write");
        for row in &grid {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (s, &w))| {
                    let pad = w - s.chars().count();
                    if i == 0 {
                        format!("{s}{}", " ".repeat(pad))
                    } else {
                        format!("{}{s}", " ".repeat(pad))
                    }
                })
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).expect("string write");
        }
        out
    }

    /// `pipeline,metric,mean,ci_half,n_reps,seed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pipeline,metric,mean,ci_half,n_reps,seed\n");
        for r in &self.rows {
            let metrics = [
                ("error_rate", Some(r.error_rate)),
                ("eta_closed", r.eta_closed),
                ("eta_empirical", r.eta_empirical),
            ];
            for (metric, est) in metrics {
                if let Some(e) = est {
                    writeln!(
                        out,
                        "{},{metric},{},{},{},{}",
                        r.name,
                        format_number(e.mean),
                        format_number(e.ci_half),
                        self.n_reps,
                        self.seed
                    )
                    .expect("string write");
                }
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, text) in [("report.txt", self.to_table()), ("report.csv", self.to_csv())] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn row(&self, name: &str) -> Option<&PipelineSummary> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Covariance shapes for the toy example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyCovariance {
    /// Each well gets its own random ellipse.
    Heterogeneous,
    /// All wells share the first well's ellipse.
    Shared,
    /// Near-point wells.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub n_wells: usize,
    pub cells_per_well: usize,
    /// Distance between rank-adjacent well means along the direction.
    pub spacing: f64,
    /// Sd along the (jittered) direction.
    pub sd_along: f64,
    /// Range of the sd across the direction.
    pub sd_across: (f64, f64),
    /// Maximal rotation of an ellipse away from the direction, in radians.
    pub max_tilt: f64,
    pub covariance: ToyCovariance,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            n_wells: 5,
            cells_per_well: 1000,
            spacing: 6.0,
            sd_along: 1.0,
            sd_across: (0.5, 6.0),
            max_tilt: std::f64::consts::PI / 12.0,
            covariance: ToyCovariance::Heterogeneous,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyResult {
    /// Well indices in increasing order along the direction.
    pub true_order: Vec<usize>,
    pub axis_max_order: Vec<usize>,
    pub pc_max_order: Vec<usize>,
    /// Kendall τ_a of each summary ordering against the true one.
    pub axis_concordance: f64,
    pub pc_concordance: f64,
    pub means: Vec<[f64; 2]>,
    pub axis_points: Vec<[f64; 2]>,
    /// PC-axis maxima mapped back to the original coordinates.
    pub pc_points: Vec<[f64; 2]>,
}

/// Two-dimensional wells with means along (1,1)/√2 and per-well ellipses.
/// Maxima are taken along the original axes and along the pooled PCs, and
/// each set of summary points is ordered by its projection on the direction.
pub fn toy_example(config: &ToyConfig, seed: u64) -> Result<ToyResult> {
    let n = config.n_wells;
    if n < 3 {
        return Err(Error::InvalidConfig("the toy example needs at least 3 wells".into()));
    }
    if config.cells_per_well < 2 {
        return Err(Error::InvalidConfig("need at least two cells per well".into()));
    }
    let (lo, hi) = config.sd_across;
    if !(lo > 0.0 && lo <= hi && config.sd_along > 0.0) {
        return Err(Error::InvalidConfig("toy sds must be positive".into()));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let u = [h, h];
    let mut shapes = Vec::with_capacity(n);
    for w in 0..n {
        let mut rng = substream(seed, WELL_STREAM_BASE + w as u64);
        let tilt = if config.max_tilt > 0.0 {
            rng.random_range(-config.max_tilt..config.max_tilt)
        } else {
            0.0
        };
        let across = if lo < hi { rng.random_range(lo..hi) } else { lo };
        shapes.push(match config.covariance {
            ToyCovariance::Heterogeneous => (tilt, config.sd_along, across),
            ToyCovariance::Shared => shapes.first().copied().unwrap_or((tilt, config.sd_along, across)),
            ToyCovariance::Degenerate => (0.0, 1e-9, 1e-9),
        });
    }
    // Common standard normal draws across wells: with a shared ellipse the
    // wells are exact translates of each other.
    let mut z_rng = substream(seed, 0);
    let z: Vec<[f64; 2]> = (0..config.cells_per_well)
        .map(|_| [StandardNormal.sample(&mut z_rng), StandardNormal.sample(&mut z_rng)])
        .collect();
    let m = config.cells_per_well;
    let mut x = DMatrix::zeros(n * m, 2);
    let mut means = Vec::with_capacity(n);
    for (w, &(tilt, along, across)) in shapes.iter().enumerate() {
        let c = config.spacing * (w + 1) as f64;
        let mu = [c * u[0], c * u[1]];
        let angle = std::f64::consts::FRAC_PI_4 + tilt;
        let (e1, e2) = ([angle.cos(), angle.sin()], [-angle.sin(), angle.cos()]);
        for (i, zi) in z.iter().enumerate() {
            let a = along * zi[0];
            let b = across * zi[1];
            x[(w * m + i, 0)] = mu[0] + a * e1[0] + b * e2[0];
            x[(w * m + i, 1)] = mu[1] + a * e1[1] + b * e2[1];
        }
        means.push(mu);
    }
    let basis = pca_basis(&x)?;
    let scores = project(&x, &basis)?;
    let bm = basis.columns();
    let mut axis_points = Vec::with_capacity(n);
    let mut pc_points = Vec::with_capacity(n);
    for w in 0..n {
        let rows = w * m..(w + 1) * m;
        let col_max = |mat: &DMatrix<f64>, j: usize| {
            rows.clone().map(|r| mat[(r, j)]).fold(f64::NEG_INFINITY, f64::max)
        };
        axis_points.push([col_max(&x, 0), col_max(&x, 1)]);
        let y = [col_max(&scores, 0), col_max(&scores, 1)];
        pc_points.push([
            bm[(0, 0)] * y[0] + bm[(0, 1)] * y[1],
            bm[(1, 0)] * y[0] + bm[(1, 1)] * y[1],
        ]);
    }
    let order = |pts: &[[f64; 2]]| {
        let proj: Vec<f64> = pts.iter().map(|p| p[0] * u[0] + p[1] * u[1]).collect();
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        idx.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
        idx
    };
    let true_order = order(&means);
    let axis_max_order = order(&axis_points);
    let pc_max_order = order(&pc_points);
    Ok(ToyResult {
        axis_concordance: kendall_tau(&true_order, &axis_max_order),
        pc_concordance: kendall_tau(&true_order, &pc_max_order),
        true_order,
        axis_max_order,
        pc_max_order,
        means,
        axis_points,
        pc_points,
    })
}

/// Kendall τ_a between two orderings of the same items.
pub fn kendall_tau(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let pos = |order: &[usize]| {
        let mut p = vec![0usize; n];
        for (i, &item) in order.iter().enumerate() {
            p[item] = i;
        }
        p
    };
    let (pa, pb) = (pos(a), pos(b));
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let s = (pa[i] as i64 - pa[j] as i64).signum() * (pb[i] as i64 - pb[j] as i64).signum();
            score += s;
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}

/// Mean concordances over replications `seed ^ r`.
pub fn toy_study(config: &ToyConfig, seed: u64, reps: usize) -> Result<(Vec<ToyResult>, f64, f64)> {
    if reps == 0 {
        return Err(Error::InvalidConfig("need at least one replication".into()));
    }
    let results: Vec<ToyResult> = (0..reps as u64)
        .into_par_iter()
        .map(|r| toy_example(config, seed ^ r))
        .collect::<Result<_>>()?;
    let axis = results.iter().map(|r| r.axis_concordance).sum::<f64>() / reps as f64;
    let pc = results.iter().map(|r| r.pc_concordance).sum::<f64>() / reps as f64;
    Ok((results, axis, pc))
}

impl ToyResult {
    /// One row per well: id, rank, mean, axis-max point, PC-max point.
    pub fn points_csv(&self) -> String {
        let mut rank = vec![0; self.true_order.len()];
        for (i, &w) in self.true_order.iter().enumerate() {
            rank[w] = i + 1;
        }
        let mut out = String::from("well,rank,mean_x1,mean_x2,axis_max_x1,axis_max_x2,pc_max_x1,pc_max_x2\n");
        for w in 0..self.means.len() {
            let vals = [
                self.means[w][0],
                self.means[w][1],
                self.axis_points[w][0],
                self.axis_points[w][1],
                self.pc_points[w][0],
                self.pc_points[w][1],
            ];
            let vals: Vec<String> = vals.iter().map(|v| format_number(*v)).collect();
            writeln!(out, "{},{},{}", well_id(w, self.means.len()), rank[w], vals.join(","))
                .expect("string write");
        }
        out
    }
}
