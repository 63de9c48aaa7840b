//! DWD classification: binary training, one-versus-one three-class voting,
//! cells-alone aggregation, and leave-one-well-out cross-validation.

mod cv;
mod dwd;

use nalgebra::DMatrix;

use crate::datamodel::{BioClass, WellGrouping};
use crate::error::{Error, Result};

pub use cv::loocv_error;
pub use dwd::{
    auto_penalty, dwd_predict, dwd_train, median_opposite_distance, LinearModel, Penalty,
    SolverReport, KKT_TOLERANCE, MAX_ITERATIONS,
};

/// A binary model separating `lower` (label −1) from `upper` (label +1).
#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    pub lower: BioClass,
    pub upper: BioClass,
    pub model: LinearModel,
}

/// Three pairwise DWD models voting over Low / Medium / High.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    pub pairwise: Vec<PairModel>,
}

impl MulticlassModel {
    pub const CLASS_ORDER: [BioClass; 3] = BioClass::ALL;

    /// Model for the pair, in either order.
    pub fn pair(&self, a: BioClass, b: BioClass) -> Option<&PairModel> {
        self.pairwise
            .iter()
            .find(|p| (p.lower, p.upper) == (a, b) || (p.lower, p.upper) == (b, a))
    }
}

const PAIRS: [(BioClass, BioClass); 3] = [
    (BioClass::Low, BioClass::Medium),
    (BioClass::Low, BioClass::High),
    (BioClass::Medium, BioClass::High),
];

pub fn ovo_train(x: &DMatrix<f64>, classes: &[BioClass], penalty: Penalty) -> Result<MulticlassModel> {
    if classes.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: classes.len(),
        });
    }
    for c in BioClass::ALL {
        if !classes.contains(&c) {
            return Err(Error::MissingClass(c.to_string()));
        }
    }
    let pairwise = PAIRS
        .iter()
        .map(|&(lower, upper)| {
            let rows: Vec<usize> = (0..classes.len())
                .filter(|&i| classes[i] == lower || classes[i] == upper)
                .collect();
            let sub = x.select_rows(rows.iter());
            let labels: Vec<i8> = rows
                .iter()
                .map(|&i| if classes[i] == upper { 1 } else { -1 })
                .collect();
            let model = dwd_train(&sub, &labels, penalty)?;
            Ok(PairModel {
                lower,
                upper,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassModel { pairwise })
}

/// Majority vote of the pairwise models; a three-way tie gives Medium.
pub fn ovo_predict(model: &MulticlassModel, x: &DMatrix<f64>) -> Result<Vec<BioClass>> {
    let mut votes = vec![[0u8; 3]; x.nrows()];
    for pair in &model.pairwise {
        for (i, s) in dwd_predict(&pair.model, x)?.into_iter().enumerate() {
            let winner = if s > 0 { pair.upper } else { pair.lower };
            votes[i][winner.index()] += 1;
        }
    }
    Ok(votes.into_iter().map(decide_votes).collect())
}

fn decide_votes(v: [u8; 3]) -> BioClass {
    let best = *v.iter().max().expect("three classes");
    let leaders: Vec<BioClass> = BioClass::ALL
        .into_iter()
        .filter(|c| v[c.index()] == best)
        .collect();
    if leaders.len() == 1 {
        leaders[0]
    } else {
        BioClass::Medium
    }
}

/// Mean class code (Low=1, Medium=2, High=3) of each well's cells.
pub fn cell_class_scores(cell_classes: &[BioClass], grouping: &WellGrouping) -> Result<Vec<f64>> {
    if cell_classes.len() != grouping.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: grouping.n_rows(),
            got: cell_classes.len(),
        });
    }
    (0..grouping.n_wells())
        .map(|w| {
            let rows = grouping.rows(w);
            if rows.is_empty() {
                return Err(Error::EmptyWell(grouping.ids()[w].clone()));
            }
            let sum: f64 = rows.iter().map(|&r| f64::from(cell_classes[r].code())).sum();
            Ok(sum / rows.len() as f64)
        })
        .collect()
}

/// Nearest class code, halves rounding up.
pub fn class_from_score(score: f64) -> BioClass {
    let code = (score + 0.5).floor().clamp(1.0, 3.0) as u8;
    BioClass::from_code(code).expect("clamped")
}

/// Well class from the average predicted class of its cells.
pub fn cells_alone_decide(cell_classes: &[BioClass], grouping: &WellGrouping) -> Result<Vec<BioClass>> {
    Ok(cell_class_scores(cell_classes, grouping)?
        .into_iter()
        .map(class_from_score)
        .collect())
}
