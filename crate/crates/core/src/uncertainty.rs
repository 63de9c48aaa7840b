//! Bio-pattern uncertainty: the bio-directional coefficient ψ, its
//! across-well variance η, and the Gaussian closed forms in terms of the
//! across-well variance of within-well standard deviations.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal, Uniform};
use rand::Rng;

use crate::datamodel::format_number;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::summarize::{
    quantile, sample_variance, OrthonormalBasis, Statistic, SummaryConfig,
};

/// Standard normal quantile Φ⁻¹(q) (Wichura's AS241, PPND16; relative
/// accuracy about 1e-16).
pub fn c_q(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::QOutOfRange(q));
    }
    let h = q - 0.5;
    if h.abs() <= 0.425 {
        let r = 0.180625 - h * h;
        let num = ((((((2509.0809287301226727 * r + 33430.575583588128105) * r
            + 67265.770927008700853)
            * r
            + 45921.953931549871457)
            * r
            + 13731.693765509461125)
            * r
            + 1971.5909503065514427)
            * r
            + 133.14166789178437745)
            * r
            + 3.387132872796366608;
        let den = ((((((5226.495278852545925 * r + 28729.085735721942674) * r
            + 39307.89580009271061)
            * r
            + 21213.794301586595867)
            * r
            + 5394.1960214247511077)
            * r
            + 687.1870074920579083)
            * r
            + 42.313330701600911252)
            * r
            + 1.0;
        return Ok(h * num / den);
    }
    let tail = if h < 0.0 { q } else { 1.0 - q };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734;
        let den = ((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
            + 0.0151986665636164571966)
            * r
            + 0.14810397642748007459)
            * r
            + 0.68976733498510000455)
            * r
            + 1.6763848301838038494)
            * r
            + 2.05319162663775882187)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772;
        let den = ((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
            + 1.8463183175100546818e-5)
            * r
            + 7.868691311456132591e-4)
            * r
            + 0.0148753612908506148525)
            * r
            + 0.13692988092273580531)
            * r
            + 0.59983220655588793769)
            * r
            + 1.0;
        num / den
    };
    Ok(if h < 0.0 { -x } else { x })
}

/// A unit direction in some coordinate system.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueDirection {
    alpha: DVector<f64>,
}

impl TrueDirection {
    pub fn new(alpha: DVector<f64>) -> Result<Self> {
        let norm = alpha.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitVector(norm));
        }
        Ok(TrueDirection { alpha })
    }

    /// Rescales a nonzero vector to unit length.
    pub fn normalized(v: DVector<f64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotUnitVector(norm));
        }
        Ok(TrueDirection { alpha: v / norm })
    }

    /// The equal-entry direction 𝟙/√d.
    pub fn equal_entries(d: usize) -> Self {
        TrueDirection {
            alpha: DVector::from_element(d, 1.0 / (d as f64).sqrt()),
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }
}

/// ψ = Σᵢ (ỹᵢ − μᵢ) αᵢ.
pub fn bio_coefficient(y_summary: &[f64], mu: &[f64], alpha: &TrueDirection) -> Result<f64> {
    let d = alpha.dim();
    for len in [y_summary.len(), mu.len()] {
        if len != d {
            return Err(Error::DimensionMismatch { expected: d, got: len });
        }
    }
    Ok(y_summary
        .iter()
        .zip(mu)
        .zip(alpha.alpha.iter())
        .map(|((y, m), a)| (y - m) * a)
        .sum())
}

/// η = Var_w ψ.
pub fn eta_empirical(psi_per_well: &[f64]) -> Result<f64> {
    if psi_per_well.len() < 2 {
        return Err(Error::TooFewWells);
    }
    sample_variance(psi_per_well)
}

/// Across-well variance of each column of an n_wells × d sd matrix.
pub fn varw_sd(sd_matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    if sd_matrix.nrows() < 2 {
        return Err(Error::TooFewWells);
    }
    sd_matrix
        .column_iter()
        .map(|c| sample_variance(c.as_slice()))
        .collect()
}

/// c² ⟨α², Var_w Sd_c⟩ for an arbitrary constant c.
pub fn eta_closed_with_constant(c: f64, alpha: &TrueDirection, sd_matrix: &DMatrix<f64>) -> Result<f64> {
    if sd_matrix.ncols() != alpha.dim() {
        return Err(Error::DimensionMismatch {
            expected: alpha.dim(),
            got: sd_matrix.ncols(),
        });
    }
    let v = varw_sd(sd_matrix)?;
    Ok(c * c * weighted(&alpha.alpha, &v))
}

/// η = c_q² ⟨α², Var_w Sd_c⟩.
pub fn eta_closed_single(q: f64, alpha: &TrueDirection, sd_matrix: &DMatrix<f64>) -> Result<f64> {
    eta_closed_with_constant(c_q(q)?, alpha, sd_matrix)
}

fn weighted(alpha: &DVector<f64>, v: &[f64]) -> f64 {
    alpha.iter().zip(v).map(|(a, v)| a * a * v).sum()
}

/// Per-statistic blocks α_(j) of a direction in the summary space, each of
/// length d, with Σᵢⱼ αᵢⱼ² = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBlocks {
    blocks: Vec<DVector<f64>>,
}

impl DirectionBlocks {
    pub fn new(blocks: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::EmptyInput);
        };
        let d = first.len();
        if let Some(b) = blocks.iter().find(|b| b.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.len(),
            });
        }
        let total: f64 = blocks.iter().map(|b| b.norm_squared()).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitVector(total.sqrt()));
        }
        Ok(DirectionBlocks { blocks })
    }

    /// α spread evenly over `n_stats` statistics: α_(j) = α/√n_stats.
    pub fn uniform(alpha: &TrueDirection, n_stats: usize) -> Result<Self> {
        if n_stats == 0 {
            return Err(Error::EmptyInput);
        }
        let s = (n_stats as f64).sqrt();
        DirectionBlocks::new(vec![alpha.alpha() / s; n_stats])
    }

    /// Everything in block `j`.
    pub fn concentrated(alpha: &TrueDirection, n_stats: usize, j: usize) -> Result<Self> {
        let blocks = (0..n_stats)
            .map(|k| {
                if k == j {
                    alpha.alpha().clone()
                } else {
                    DVector::zeros(alpha.dim())
                }
            })
            .collect();
        DirectionBlocks::new(blocks)
    }

    pub fn n_stats(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn blocks(&self) -> &[DVector<f64>] {
        &self.blocks
    }

    /// The direction in summary-vector layout (feature-major, statistics
    /// inner).
    pub fn flatten(&self) -> TrueDirection {
        let (d, s) = (self.dim(), self.n_stats());
        let alpha = DVector::from_fn(d * s, |k, _| self.blocks[k % s][k / s]);
        TrueDirection { alpha }
    }
}

/// The multi-quantile closed form with its per-statistic terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub total: f64,
    pub terms: Vec<f64>,
    pub c_values: Vec<f64>,
}

/// η = Σⱼ c_{q(j)}² ⟨α_(j)², Var_w Sd_c⟩.
pub fn eta_closed_multi(
    config: &SummaryConfig,
    alphas: &DirectionBlocks,
    sd_matrix: &DMatrix<f64>,
) -> Result<ClosedForm> {
    let levels = config.quantile_levels()?;
    if levels.len() != alphas.n_stats() {
        return Err(Error::DimensionMismatch {
            expected: levels.len(),
            got: alphas.n_stats(),
        });
    }
    if sd_matrix.ncols() != alphas.dim() {
        return Err(Error::DimensionMismatch {
            expected: alphas.dim(),
            got: sd_matrix.ncols(),
        });
    }
    let v = varw_sd(sd_matrix)?;
    let c_values = levels.iter().map(|&q| c_q(q)).collect::<Result<Vec<_>>>()?;
    let terms: Vec<f64> = c_values
        .iter()
        .zip(&alphas.blocks)
        .map(|(c, a)| c * c * weighted(a, &v))
        .collect();
    Ok(ClosedForm {
        total: terms.iter().sum(),
        terms,
        c_values,
    })
}

/// α(Y) = Bᵀ α(X).
pub fn rotate_direction(basis: &OrthonormalBasis, alpha_x: &TrueDirection) -> Result<TrueDirection> {
    if basis.columns().nrows() != alpha_x.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.columns().nrows(),
            got: alpha_x.dim(),
        });
    }
    TrueDirection::new(basis.columns().transpose() * alpha_x.alpha())
}

/// Bracket Σⱼ c_j²‖α_(j)‖²·min Var_w Sd_c ≤ η ≤ Σⱼ c_j²‖α_(j)‖²·max Var_w Sd_c;
/// with one quantile this is c_q²·min ≤ η ≤ c_q²·max.
pub fn eta_bounds(c_values: &[f64], alphas: &DirectionBlocks, varw: &[f64]) -> (f64, f64) {
    let weight: f64 = c_values
        .iter()
        .zip(&alphas.blocks)
        .map(|(c, a)| c * c * a.norm_squared())
        .sum();
    let lo = varw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = varw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (weight * lo, weight * hi)
}

/// ψ per well, empirical and closed-form η, and the pieces of the closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyReport {
    pub well_ids: Vec<String>,
    pub psi_per_well: Option<Vec<f64>>,
    pub eta_empirical: Option<f64>,
    pub eta_closed: f64,
    pub statistic_labels: Vec<String>,
    pub per_quantile_terms: Vec<f64>,
    pub c_values: Vec<f64>,
    pub sd_matrix: DMatrix<f64>,
    pub varw_sd: Vec<f64>,
    pub bounds: (f64, f64),
}

/// Summaries and population means of the wells in the basis of the sd matrix,
/// used for ψ.
#[derive(Debug, Clone, Copy)]
pub struct PsiInputs<'a> {
    /// n_wells × (d·n_stats) summaries, feature-major.
    pub summaries: &'a DMatrix<f64>,
    /// n_wells × d population means.
    pub means: &'a DMatrix<f64>,
}

impl UncertaintyReport {
    pub fn build(
        well_ids: Vec<String>,
        config: &SummaryConfig,
        alphas: &DirectionBlocks,
        sd_matrix: DMatrix<f64>,
        psi: Option<PsiInputs<'_>>,
    ) -> Result<Self> {
        if well_ids.len() != sd_matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: sd_matrix.nrows(),
                got: well_ids.len(),
            });
        }
        let closed = eta_closed_multi(config, alphas, &sd_matrix)?;
        let varw = varw_sd(&sd_matrix)?;
        let bounds = eta_bounds(&closed.c_values, alphas, &varw);
        let psi_per_well = psi
            .map(|p| psi_per_well(p, alphas, well_ids.len()))
            .transpose()?;
        let eta_empirical = psi_per_well.as_deref().map(eta_empirical).transpose()?;
        let report = UncertaintyReport {
            well_ids,
            psi_per_well,
            eta_empirical,
            eta_closed: closed.total,
            statistic_labels: config.stats().iter().map(Statistic::label).collect(),
            per_quantile_terms: closed.terms,
            c_values: closed.c_values,
            sd_matrix,
            varw_sd: varw,
            bounds,
        };
        debug_assert!(report.within_bounds(), "η outside its bracket");
        Ok(report)
    }

    /// Whether η lies in its bracket (relative slack 1e-12).
    pub fn within_bounds(&self) -> bool {
        let tol = 1e-12 * self.bounds.1.abs().max(1e-300);
        self.eta_closed >= self.bounds.0 - tol && self.eta_closed <= self.bounds.1 + tol
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "kind,key,value").expect("in-memory write");
        if let Some(psi) = &self.psi_per_well {
            for (id, v) in self.well_ids.iter().zip(psi) {
                writeln!(out, "psi,{id},{}", format_number(*v)).expect("in-memory write");
            }
        }
        if let Some(e) = self.eta_empirical {
            writeln!(out, "eta,empirical,{}", format_number(e)).expect("in-memory write");
        }
        writeln!(out, "eta,closed,{}", format_number(self.eta_closed)).expect("in-memory write");
        for ((label, t), c) in self
            .statistic_labels
            .iter()
            .zip(&self.per_quantile_terms)
            .zip(&self.c_values)
        {
            writeln!(out, "term,{label},{}", format_number(*t)).expect("in-memory write");
            writeln!(out, "c_q,{label},{}", format_number(*c)).expect("in-memory write");
        }
        for (i, v) in self.varw_sd.iter().enumerate() {
            writeln!(out, "varw_sd,{},{}", i + 1, format_number(*v)).expect("in-memory write");
        }
        writeln!(out, "bound,lower,{}", format_number(self.bounds.0)).expect("in-memory write");
        writeln!(out, "bound,upper,{}", format_number(self.bounds.1)).expect("in-memory write");
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// ψ per well from summaries and means, with the direction spread over the
/// statistic blocks.
pub fn psi_per_well(p: PsiInputs<'_>, alphas: &DirectionBlocks, n_wells: usize) -> Result<Vec<f64>> {
    let (d, s) = (alphas.dim(), alphas.n_stats());
    if p.summaries.nrows() != n_wells || p.means.nrows() != n_wells {
        return Err(Error::DimensionMismatch {
            expected: n_wells,
            got: p.summaries.nrows().min(p.means.nrows()),
        });
    }
    if p.summaries.ncols() != d * s {
        return Err(Error::DimensionMismatch {
            expected: d * s,
            got: p.summaries.ncols(),
        });
    }
    if p.means.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.means.ncols(),
        });
    }
    let alpha = alphas.flatten();
    (0..n_wells)
        .map(|w| {
            let y: Vec<f64> = p.summaries.row(w).iter().copied().collect();
            let mu: Vec<f64> = (0..d * s).map(|k| p.means[(w, k / s)]).collect();
            bio_coefficient(&y, &mu, &alpha)
        })
        .collect()
}

/// Gaussian wells for the Monte Carlo check: independent features, each with
/// a per-well sd drawn from U(sd_lo, sd_hi) (a point mass when equal), well
/// means spread by `mean_spread`·well index along every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct DistSpec {
    pub sd_lo: f64,
    pub sd_hi: f64,
    pub mean_spread: f64,
    /// Direction used for ψ; equal entries when `None`.
    pub alpha: Option<TrueDirection>,
}

impl Default for DistSpec {
    fn default() -> Self {
        DistSpec {
            sd_lo: 1.0,
            sd_hi: 3.0,
            mean_spread: 0.0,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub cells_per_well: usize,
    pub eta_empirical: f64,
    pub eta_closed: f64,
    pub relative_gap: f64,
}

/// Compares Var_w ψ from sample quantiles against c_q²⟨α², Var_w σ⟩ with the
/// population sds.
pub fn lemma1_verify(
    n_wells: usize,
    cells_per_well: usize,
    d0: usize,
    q: f64,
    dist: &DistSpec,
    seed: u64,
) -> Result<LemmaCheck> {
    Ok(lemma1_ladder(n_wells, &[cells_per_well], d0, q, dist, seed)?[0])
}

/// [`lemma1_verify`] over increasing cell counts; each rung uses the first
/// cells of the same draws.
pub fn lemma1_ladder(
    n_wells: usize,
    ladder: &[usize],
    d0: usize,
    q: f64,
    dist: &DistSpec,
    seed: u64,
) -> Result<Vec<LemmaCheck>> {
    if n_wells < 2 {
        return Err(Error::TooFewWells);
    }
    if d0 == 0 || ladder.is_empty() || ladder.iter().any(|&m| m < 2) {
        return Err(Error::InvalidConfig(
            "need d0 ≥ 1 and at least two cells per well".into(),
        ));
    }
    if !(dist.sd_lo > 0.0 && dist.sd_lo <= dist.sd_hi && dist.sd_hi.is_finite()) {
        return Err(Error::InvalidConfig("need 0 < sd_lo ≤ sd_hi".into()));
    }
    let alpha = match &dist.alpha {
        Some(a) if a.dim() != d0 => {
            return Err(Error::DimensionMismatch {
                expected: d0,
                got: a.dim(),
            })
        }
        Some(a) => a.clone(),
        None => TrueDirection::equal_entries(d0),
    };
    let c = c_q(q)?;
    let max_cells = *ladder.iter().max().expect("non-empty");
    let mut sds = DMatrix::zeros(n_wells, d0);
    // psi[rung][well]
    let mut psi = vec![vec![0.0; n_wells]; ladder.len()];
    let mut column = vec![0.0; max_cells];
    for w in 0..n_wells {
        let mut rng = substream(seed, w as u64);
        let mean = dist.mean_spread * w as f64;
        for i in 0..d0 {
            let sd = draw_sd(&mut rng, dist)?;
            sds[(w, i)] = sd;
            for x in column.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = mean + sd * z;
            }
            for (rung, &m) in ladder.iter().enumerate() {
                psi[rung][w] += (quantile(&column[..m], q)? - mean) * alpha.alpha()[i];
            }
        }
    }
    let closed = eta_closed_with_constant(c, &alpha, &sds)?;
    ladder
        .iter()
        .zip(&psi)
        .map(|(&m, p)| {
            let emp = eta_empirical(p)?;
            let gap = if closed > 0.0 {
                (emp - closed).abs() / closed
            } else {
                f64::INFINITY
            };
            Ok(LemmaCheck {
                cells_per_well: m,
                eta_empirical: emp,
                eta_closed: closed,
                relative_gap: gap,
            })
        })
        .collect()
}

fn draw_sd<R: Rng>(rng: &mut R, dist: &DistSpec) -> Result<f64> {
    if dist.sd_lo == dist.sd_hi {
        return Ok(dist.sd_lo);
    }
    let u = Uniform::new(dist.sd_lo, dist.sd_hi)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(u.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(v: &[f64]) -> TrueDirection {
        TrueDirection::new(DVector::from_column_slice(v)).unwrap()
    }

    #[test]
    fn c_q_examples() {
        assert_eq!(c_q(0.5).unwrap(), 0.0);
        assert!((c_q(0.75).unwrap() - 0.674_489_750_196_081_7).abs() < 1e-12);
        assert!((c_q(0.99).unwrap() - 2.326_347_874_040_841).abs() < 1e-12);
        assert!((c_q(0.25).unwrap() + c_q(0.75).unwrap()).abs() < 1e-15);
        assert!(matches!(c_q(0.0), Err(Error::QOutOfRange(_))));
        assert!(matches!(c_q(1.0), Err(Error::QOutOfRange(_))));
    }

    #[test]
    fn psi_examples() {
        let a = dir(&[1.0, 0.0]);
        assert_eq!(bio_coefficient(&[1.5, 7.0], &[0.0, 0.0], &a).unwrap(), 1.5);
        assert_eq!(bio_coefficient(&[3.0, 4.0], &[3.0, 4.0], &a).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let b = dir(&[h, h]);
        let v = bio_coefficient(&[1.0, 1.0], &[0.0, 0.0], &b).unwrap();
        assert!((v - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(matches!(
            bio_coefficient(&[1.0], &[0.0, 0.0], &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eta_empirical_examples() {
        assert_eq!(eta_empirical(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eta_empirical(&[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!((eta_empirical(&[-4.25, -2.25]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(eta_empirical(&[1.0]), Err(Error::TooFewWells)));
    }

    #[test]
    fn closed_single_examples() {
        let sds = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let a = dir(&[1.0]);
        assert_eq!(eta_closed_single(0.5, &a, &sds).unwrap(), 0.0);
        assert_eq!(eta_closed_with_constant(1.0, &a, &sds).unwrap(), 1.0);
        let same = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(eta_closed_single(0.9, &dir(&[0.6, 0.8]), &same).unwrap(), 0.0);
    }

    #[test]
    fn closed_multi_examples() {
        let sds = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let a = dir(&[1.0]);
        let cfg = SummaryConfig::parse("q25,q75").unwrap();
        let blocks = DirectionBlocks::uniform(&a, 2).unwrap();
        let r = eta_closed_multi(&cfg, &blocks, &sds).unwrap();
        let c = 0.674_489_750_196_081_7_f64;
        assert!((r.total - 2.0 * c * c * 0.5).abs() < 1e-12);
        assert!((r.total - r.terms.iter().sum::<f64>()).abs() < 1e-12);

        let half = SummaryConfig::parse("q50").unwrap();
        let one = DirectionBlocks::uniform(&a, 1).unwrap();
        assert_eq!(eta_closed_multi(&half, &one, &sds).unwrap().total, 0.0);

        let cfg3 = SummaryConfig::parse("q10,q50,q90").unwrap();
        let conc = DirectionBlocks::concentrated(&a, 3, 0).unwrap();
        let multi = eta_closed_multi(&cfg3, &conc, &sds).unwrap().total;
        assert!((multi - eta_closed_single(0.1, &a, &sds).unwrap()).abs() < 1e-15);

        let six = SummaryConfig::six_number();
        let b6 = DirectionBlocks::uniform(&a, 6).unwrap();
        assert!(matches!(
            eta_closed_multi(&six, &b6, &sds),
            Err(Error::NonQuantileStatistic(_))
        ));
    }

    #[test]
    fn blocks_must_have_unit_mass() {
        let v = DVector::from_element(2, 0.6);
        assert!(matches!(
            DirectionBlocks::new(vec![v.clone(), v]),
            Err(Error::NotUnitVector(_))
        ));
    }

    #[test]
    fn flatten_layout() {
        let a = dir(&[0.6, 0.8]);
        let b = DirectionBlocks::uniform(&a, 2).unwrap();
        let s = 2f64.sqrt();
        let f = b.flatten();
        let expect = [0.6 / s, 0.6 / s, 0.8 / s, 0.8 / s];
        for (x, y) in f.alpha().iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn rotation_examples() {
        let names = vec!["a".to_string(), "b".to_string()];
        let id = OrthonormalBasis::identity(&names);
        let a = dir(&[0.6, 0.8]);
        assert_eq!(rotate_direction(&id, &a).unwrap(), a);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rot = OrthonormalBasis::new(
            DMatrix::from_row_slice(2, 2, &[h, h, -h, h]),
            names,
            vec![1.0, 1.0],
        )
        .unwrap();
        let r = rotate_direction(&rot, &dir(&[1.0, 0.0])).unwrap();
        assert!((r.alpha()[0] - h).abs() < 1e-15);
        assert!((r.alpha()[1] - h).abs() < 1e-15);
        assert!((r.alpha().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn report_bounds_and_csv() {
        let sds = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.5, 2.5, 3.0, 2.0, 2.0, 2.2]);
        let a = dir(&[0.6, 0.8]);
        let cfg = SummaryConfig::parse("q75").unwrap();
        let blocks = DirectionBlocks::uniform(&a, 1).unwrap();
        let ids: Vec<String> = (1..=4).map(|i| format!("W{i}")).collect();
        let summaries = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 3.0, 0.0, 1.0, 4.0, 4.0]);
        let means = DMatrix::zeros(4, 2);
        let report = UncertaintyReport::build(
            ids,
            &cfg,
            &blocks,
            sds.clone(),
            Some(PsiInputs {
                summaries: &summaries,
                means: &means,
            }),
        )
        .unwrap();
        assert!(report.within_bounds());
        assert!(
            (report.eta_closed - eta_closed_single(0.75, &a, &sds).unwrap()).abs() < 1e-15
        );
        let psi = report.psi_per_well.as_ref().unwrap();
        assert!((psi[0] - 2.2).abs() < 1e-15);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        report.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("kind,key,value\npsi,W1,"));
        assert!(text.contains("\neta,closed,"));
        assert!(text.contains("\nbound,upper,"));
    }

    #[test]
    fn lemma_median_is_zero() {
        let r = lemma1_verify(50, 10_000, 2, 0.5, &DistSpec::default(), 3).unwrap();
        assert_eq!(r.eta_closed, 0.0);
        assert!(r.eta_empirical < 1e-3);
    }

    #[test]
    fn lemma_identical_wells() {
        let spec = DistSpec {
            sd_lo: 2.0,
            sd_hi: 2.0,
            ..DistSpec::default()
        };
        let ladder = lemma1_ladder(40, &[500, 8000], 2, 0.75, &spec, 11).unwrap();
        assert_eq!(ladder[0].eta_closed, 0.0);
        assert!(ladder[1].eta_empirical < ladder[0].eta_empirical);
    }

    #[test]
    fn lemma_is_seed_deterministic() {
        let spec = DistSpec::default();
        let a = lemma1_verify(10, 200, 3, 0.75, &spec, 5).unwrap();
        let b = lemma1_verify(10, 200, 3, 0.75, &spec, 5).unwrap();
        assert_eq!(a, b);
    }
}
