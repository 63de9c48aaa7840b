use clap::{ArgAction, Args};

use cellwell::simulate::{SimConfig, StepMode};

use crate::{usage, Failure};

/// Overrides for every simulation setting.
#[derive(Args, Debug, Clone)]
pub struct SimFlags {
    /// Wells per dataset.
    #[arg(long = "wells", default_value_t = 50)]
    pub n_wells: usize,
    #[arg(long, default_value_t = 50)]
    pub cells_min: usize,
    #[arg(long, default_value_t = 300)]
    pub cells_max: usize,
    /// Cell features.
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 20.0)]
    pub var_lo: f64,
    #[arg(long, default_value_t = 500.0)]
    pub var_hi: f64,
    /// Mean step between rank-adjacent wells.
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    /// `coordinate`: every feature moves by the step; `direction`: the mean
    /// moves by the step along the direction.
    #[arg(long, default_value = "coordinate", value_parser = ["coordinate", "direction"])]
    pub step_mode: String,
    /// Class thresholds on rank: `a,b` gives Low ≤ a < Medium ≤ b < High.
    #[arg(long, default_value = "17,33")]
    pub cuts: String,
    /// Z-score the pooled cells after generation.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = true, action = ArgAction::Set)]
    pub global_std: bool,
}

impl SimFlags {
    pub fn config(&self) -> Result<SimConfig, Failure> {
        let Some((a, b)) = self.cuts.split_once(',') else {
            return usage(format!("--cuts expects `a,b`, got `{}`", self.cuts));
        };
        let (Ok(a), Ok(b)) = (a.trim().parse(), b.trim().parse()) else {
            return usage(format!("--cuts expects two integers, got `{}`", self.cuts));
        };
        let cfg = SimConfig {
            n_wells: self.n_wells,
            cells_min: self.cells_min,
            cells_max: self.cells_max,
            dim: self.dim,
            var_lo: self.var_lo,
            var_hi: self.var_hi,
            mean_step: self.step,
            step_mode: if self.step_mode == "direction" {
                StepMode::AlongDirection
            } else {
                StepMode::PerCoordinate
            },
            class_cuts: (a, b),
            global_standardize: self.global_std,
        };
        if let Err(e) = cfg.validate() {
            return usage(e.to_string());
        }
        Ok(cfg)
    }

    pub fn settings(&self) -> Vec<(&'static str, String)> {
        vec![
            ("wells", self.n_wells.to_string()),
            ("cells-min", self.cells_min.to_string()),
            ("cells-max", self.cells_max.to_string()),
            ("dim", self.dim.to_string()),
            ("var-lo", self.var_lo.to_string()),
            ("var-hi", self.var_hi.to_string()),
            ("step", self.step.to_string()),
            ("step-mode", self.step_mode.clone()),
            ("cuts", self.cuts.clone()),
            ("global-std", self.global_std.to_string()),
        ]
    }
}
