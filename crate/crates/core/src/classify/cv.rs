use crate::datamodel::{BioClass, Dataset};
use crate::error::{Error, Result};
use crate::pipeline::{FittedPipeline, ObjectKind, PipelineConfig};

/// Leave-one-well-out error rate: every fold refits bases, standardizations
/// and classifiers on the remaining wells and predicts the held-out well.
pub fn loocv_error(dataset: &Dataset, pipeline: &PipelineConfig) -> Result<f64> {
    if pipeline.objects == ObjectKind::CellsAlone {
        return Err(Error::UnsupportedPipeline(
            "leave-one-well-out validation is defined for well-level pipelines".into(),
        ));
    }
    let n = dataset.n_wells();
    if n < 3 {
        return Err(Error::TooFewWells);
    }
    let mut errors = 0usize;
    for held in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&w| w != held).collect();
        for class in BioClass::ALL {
            if !keep.iter().any(|&w| dataset.classes()[w] == class) {
                return Err(Error::FoldMissingClass {
                    well: dataset.well_ids()[held].clone(),
                    class: class.to_string(),
                });
            }
        }
        let train = dataset.select_wells(&keep)?;
        let fitted = FittedPipeline::fit(&train, pipeline)?;
        let test = dataset.select_wells(&[held])?;
        let predicted = fitted.predict(&test.cells, test.wells.as_ref())?;
        if predicted[0] != dataset.classes()[held] {
            errors += 1;
        }
    }
    Ok(errors as f64 / n as f64)
}
