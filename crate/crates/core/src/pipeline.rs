//! The three analysis workflows, distinguished by their choice of data object:
//! cells alone, wells alone, and cell-well unions (PCA or PLS bases).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;

use crate::classify::{
    cell_class_scores, class_from_score, ovo_predict, ovo_train, MulticlassModel, Penalty,
};
use crate::datamodel::{BioClass, CellTable, Dataset, WellTable};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::summarize::{
    combine, pca_basis, pls_basis, project, standardize_within_well, summarize_wells,
    FeatureMatrix, OrthonormalBasis, SummaryConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    CellsAlone,
    WellsAlone,
    CellWellPca,
    CellWellPls,
}

impl ObjectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::CellsAlone => "cells",
            ObjectKind::WellsAlone => "wells",
            ObjectKind::CellWellPca => "cwu-pca",
            ObjectKind::CellWellPls => "cwu-pls",
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cells" => Ok(ObjectKind::CellsAlone),
            "wells" => Ok(ObjectKind::WellsAlone),
            "cwu-pca" => Ok(ObjectKind::CellWellPca),
            "cwu-pls" => Ok(ObjectKind::CellWellPls),
            other => Err(Error::InvalidConfig(format!(
                "unknown data object `{other}` (cells, wells, cwu-pca, cwu-pls)"
            ))),
        }
    }
}

/// Cells-alone subsampling: `wells` wells (all when `None`), up to `cells`
/// cells per well, repeated `reps` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subsample {
    pub wells: Option<usize>,
    pub cells: usize,
    pub reps: usize,
}

impl Default for Subsample {
    fn default() -> Self {
        Subsample {
            wells: None,
            cells: 50,
            reps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub objects: ObjectKind,
    pub within_well_std: bool,
    pub summary: SummaryConfig,
    pub penalty: Penalty,
    pub subsample: Option<Subsample>,
}

impl PipelineConfig {
    pub fn new(objects: ObjectKind, within_well_std: bool, summary: SummaryConfig) -> Self {
        PipelineConfig {
            objects,
            within_well_std,
            summary,
            penalty: Penalty::Auto,
            subsample: None,
        }
    }

    /// Parses `<objects>[+std]`, e.g. `wells`, `cwu-pca+std`.
    pub fn parse(name: &str, summary: SummaryConfig) -> Result<Self> {
        let (obj, std) = match name.strip_suffix("+std") {
            Some(base) => (base, true),
            None => (name, false),
        };
        Ok(PipelineConfig::new(obj.parse()?, std, summary))
    }

    pub fn validate(&self) -> Result<()> {
        if self.subsample.is_some() && self.objects != ObjectKind::CellsAlone {
            return Err(Error::InvalidConfig(
                "subsampling applies to the cells-alone pipeline only".into(),
            ));
        }
        if let Some(s) = self.subsample {
            if s.cells < 1 || s.reps < 1 || s.wells == Some(0) {
                return Err(Error::InvalidConfig("subsample sizes must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        if self.within_well_std {
            format!("{}+std", self.objects)
        } else {
            self.objects.to_string()
        }
    }

    /// The four pipelines compared in the simulation table.
    pub fn table_pipelines(summary: &SummaryConfig) -> Vec<PipelineConfig> {
        vec![
            PipelineConfig::new(ObjectKind::WellsAlone, false, summary.clone()),
            PipelineConfig::new(ObjectKind::WellsAlone, true, summary.clone()),
            PipelineConfig::new(ObjectKind::CellWellPca, true, summary.clone()),
            PipelineConfig::new(ObjectKind::CellWellPls, true, summary.clone()),
        ]
    }
}

/// Summarization basis fitted on the pooled cells.
pub fn fit_basis(dataset: &Dataset, objects: ObjectKind) -> Result<OrthonormalBasis> {
    let x = dataset.cells.values();
    match objects {
        ObjectKind::WellsAlone | ObjectKind::CellsAlone => {
            Ok(OrthonormalBasis::identity(dataset.cells.feature_names()))
        }
        ObjectKind::CellWellPca => pca_basis(x),
        ObjectKind::CellWellPls => {
            let ranks: Vec<f64> = dataset.ranks().iter().map(|&r| r as f64).collect();
            pls_basis(x, dataset.cells.grouping(), &ranks)
        }
    }
}

/// Basis scores of the cells (before any within-well scaling) and the
/// resulting well-level feature matrix.
pub fn well_features(
    cells: &CellTable,
    wells: Option<&WellTable>,
    basis: &OrthonormalBasis,
    config: &PipelineConfig,
) -> Result<(DMatrix<f64>, FeatureMatrix)> {
    let scores = project(cells.values(), basis)?;
    let grouping = cells.grouping();
    let summarized = if config.within_well_std {
        let scaled = standardize_within_well(&scores, grouping)?;
        summarize_wells(&scaled, grouping, &config.summary, basis.labels())?
    } else {
        summarize_wells(&scores, grouping, &config.summary, basis.labels())?
    };
    let features = combine(&summarized, wells)?;
    Ok((scores, features))
}

/// A trained well-level pipeline.
#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub config: PipelineConfig,
    pub basis: OrthonormalBasis,
    pub model: MulticlassModel,
    /// Basis scores of the training cells, before within-well scaling.
    pub scores: DMatrix<f64>,
    pub features: FeatureMatrix,
    /// Predicted classes of the training wells.
    pub fitted: Vec<BioClass>,
}

impl FittedPipeline {
    pub fn fit(dataset: &Dataset, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        if config.objects == ObjectKind::CellsAlone {
            return Err(Error::UnsupportedPipeline(
                "the cells-alone pipeline has no well-level model".into(),
            ));
        }
        let basis = fit_basis(dataset, config.objects)?;
        let (scores, features) =
            well_features(&dataset.cells, dataset.wells.as_ref(), &basis, config)?;
        let model = ovo_train(&features.values, dataset.classes(), config.penalty)?;
        let fitted = ovo_predict(&model, &features.values)?;
        Ok(FittedPipeline {
            config: config.clone(),
            basis,
            model,
            scores,
            features,
            fitted,
        })
    }

    pub fn predict(&self, cells: &CellTable, wells: Option<&WellTable>) -> Result<Vec<BioClass>> {
        let (_, features) = well_features(cells, wells, &self.basis, &self.config)?;
        ovo_predict(&self.model, &features.values)
    }
}

/// Cells-alone analysis: per-cell three-class DWD trained on subsamples,
/// well scores averaged over repetitions and rounded.
pub fn cells_alone(dataset: &Dataset, config: &PipelineConfig, seed: u64) -> Result<Vec<BioClass>> {
    config.validate()?;
    let sub = config.subsample.unwrap_or_default();
    let grouping = dataset.cells.grouping();
    let x = if config.within_well_std {
        standardize_within_well(dataset.cells.values(), grouping)?
    } else {
        dataset.cells.values().clone()
    };
    let n_wells = grouping.n_wells();
    let classes = dataset.classes();
    let mut totals = vec![0.0; n_wells];
    for rep in 0..sub.reps {
        let mut rng = substream(seed, rep as u64);
        let chosen = choose_wells(&mut rng, classes, sub.wells.unwrap_or(n_wells))?;
        let mut rows = Vec::new();
        for &w in &chosen {
            let members = grouping.rows(w);
            let k = sub.cells.min(members.len());
            let mut picked: Vec<usize> = sample(&mut rng, members.len(), k)
                .into_iter()
                .map(|i| members[i])
                .collect();
            picked.sort_unstable();
            rows.extend(picked);
        }
        let train_x = x.select_rows(rows.iter());
        let train_y: Vec<BioClass> = rows
            .iter()
            .map(|&r| classes[grouping.membership()[r]])
            .collect();
        let model = ovo_train(&train_x, &train_y, config.penalty)?;
        let predicted = ovo_predict(&model, &x)?;
        for (t, s) in totals.iter_mut().zip(cell_class_scores(&predicted, grouping)?) {
            *t += s;
        }
    }
    Ok(totals
        .into_iter()
        .map(|t| class_from_score(t / sub.reps as f64))
        .collect())
}

fn choose_wells<R: Rng>(rng: &mut R, classes: &[BioClass], count: usize) -> Result<Vec<usize>> {
    let n = classes.len();
    if count >= n {
        return Ok((0..n).collect());
    }
    for _ in 0..100 {
        let mut chosen = sample(rng, n, count).into_vec();
        if BioClass::ALL
            .iter()
            .all(|c| chosen.iter().any(|&w| classes[w] == *c))
        {
            chosen.sort_unstable();
            return Ok(chosen);
        }
    }
    Err(Error::InvalidConfig(format!(
        "could not draw {count} wells covering all three classes"
    )))
}

/// Predicted classes of a dataset's wells under the pipeline, trained on the
/// same wells.
pub fn predict_wells(dataset: &Dataset, config: &PipelineConfig, seed: u64) -> Result<Vec<BioClass>> {
    match config.objects {
        ObjectKind::CellsAlone => cells_alone(dataset, config, seed),
        _ => Ok(FittedPipeline::fit(dataset, config)?.fitted),
    }
}

pub fn error_rate(predicted: &[BioClass], truth: &[BioClass]) -> f64 {
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    wrong as f64 / truth.len() as f64
}
