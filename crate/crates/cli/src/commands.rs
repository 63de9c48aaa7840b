use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use nalgebra::DVector;

use cellwell::classify::{loocv_error, Penalty};
use cellwell::datamodel::{
    format_number, load_assessment, load_cell_table, load_well_table, BioClass, Dataset,
};
use cellwell::pipeline::{
    cells_alone, error_rate, well_features, FittedPipeline, ObjectKind, PipelineConfig, Subsample,
};
use cellwell::simulate::{
    generate, pipeline_uncertainty, run_study, toy_study, AlphaSource, StudySpec, ToyConfig,
    ToyCovariance,
};
use cellwell::summarize::{pca_basis, OrthonormalBasis, SummaryConfig};
use cellwell::uncertainty::{DirectionBlocks, TrueDirection, UncertaintyReport};

use crate::config::write_manifest;
use crate::{usage, AnalyzeArgs, Failure, SimulateArgs, SubsampleFlags, ToyArgs, UncertaintyArgs};

fn parse_summary(spec: &str) -> Result<SummaryConfig, Failure> {
    SummaryConfig::parse(spec).or_else(|e| usage(format!("--summary: {e}")))
}

fn parse_penalty(spec: &str) -> Result<Penalty, Failure> {
    spec.parse().or_else(|e| usage(format!("--penalty: {e}")))
}

fn parse_direction(spec: &str) -> Result<AlphaSource, Failure> {
    spec.parse().or_else(|e| usage(format!("--direction: {e}")))
}

fn parse_objects(spec: &str) -> Result<ObjectKind, Failure> {
    spec.parse().or_else(|e| usage(format!("--objects: {e}")))
}

fn subsample(flags: &SubsampleFlags) -> Subsample {
    Subsample {
        wells: flags.subsample_wells.map(|w| w as usize),
        cells: flags.subsample_cells as usize,
        reps: flags.subsample_reps as usize,
    }
}

fn subsample_settings(flags: &SubsampleFlags) -> Vec<(&'static str, String)> {
    let mut v = Vec::new();
    if let Some(w) = flags.subsample_wells {
        v.push(("subsample-wells", w.to_string()));
    }
    v.push(("subsample-cells", flags.subsample_cells.to_string()));
    v.push(("subsample-reps", flags.subsample_reps.to_string()));
    v
}

fn make_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(())
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn pipeline_config(
    objects: ObjectKind,
    std_within: bool,
    summary: &SummaryConfig,
    penalty: Penalty,
    flags: &SubsampleFlags,
) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(objects, std_within, summary.clone());
    cfg.penalty = penalty;
    if objects == ObjectKind::CellsAlone {
        cfg.subsample = Some(subsample(flags));
    }
    cfg
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let sim = args.sim.config()?;
    let summary = parse_summary(&args.summary)?;
    let penalty = parse_penalty(&args.penalty)?;
    let alpha = parse_direction(&args.direction)?;
    let mut pipelines = Vec::new();
    for name in args.pipelines.split(',').map(str::trim) {
        let mut p = PipelineConfig::parse(name, summary.clone())
            .or_else(|e| usage(format!("--pipelines: {e}")))?;
        p.penalty = penalty;
        if p.objects == ObjectKind::CellsAlone {
            p.subsample = Some(subsample(&args.subsample));
        }
        pipelines.push(p);
    }
    let spec = StudySpec {
        sim,
        pipelines,
        n_reps: args.reps as usize,
        seed: args.seed,
        alpha,
    };
    make_out(&args.out)?;
    let mut settings = vec![
        ("reps", args.reps.to_string()),
        ("seed", args.seed.to_string()),
        ("pipelines", args.pipelines.clone()),
        ("summary", summary.to_string()),
    ];
    settings.extend(args.sim.settings());
    settings.push(("penalty", penalty.to_string()));
    settings.push(("direction", alpha.to_string()));
    settings.extend(subsample_settings(&args.subsample));
    settings.push(("out", args.out.display().to_string()));
    write_manifest(&args.out, "simulate", &settings)?;

    let report = run_study(&spec)?;
    report.write(&args.out)?;
    let mut reps = String::from("replication,seed,pipeline,error_rate,eta_closed,eta_empirical\n");
    for (r, results) in report.per_rep.iter().enumerate() {
        for (p, res) in spec.pipelines.iter().zip(results) {
            let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
            writeln!(
                reps,
                "{r},{},{},{},{},{}",
                args.seed ^ r as u64,
                p.name(),
                format_number(res.error_rate),
                opt(res.eta_closed),
                opt(res.eta_empirical)
            )
            .ok();
        }
    }
    write(&args.out, "replicates.csv", &reps)?;
    print!("{}", report.to_table());
    Ok(())
}

fn class_name(c: BioClass) -> String {
    c.to_string()
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let objects = parse_objects(&args.objects)?;
    let summary = parse_summary(&args.summary)?;
    let penalty = parse_penalty(&args.penalty)?;
    if args.loocv && objects == ObjectKind::CellsAlone {
        return usage("--loocv is defined for well-level pipelines, not --objects cells");
    }
    if args.assess.is_none() {
        if args.loocv {
            return usage("--loocv needs --assess");
        }
        if matches!(objects, ObjectKind::CellsAlone | ObjectKind::CellWellPls) {
            return usage(format!("--objects {objects} needs --assess"));
        }
    }
    let cfg = pipeline_config(objects, args.std_within, &summary, penalty, &args.subsample);
    make_out(&args.out)?;
    let mut settings = vec![("cells", args.cells.display().to_string())];
    if let Some(w) = &args.wells {
        settings.push(("wells", w.display().to_string()));
    }
    if let Some(a) = &args.assess {
        settings.push(("assess", a.display().to_string()));
    }
    settings.extend([
        ("objects", objects.to_string()),
        ("summary", summary.to_string()),
        ("std-within", args.std_within.to_string()),
        ("loocv", args.loocv.to_string()),
        ("penalty", penalty.to_string()),
        ("seed", args.seed.to_string()),
    ]);
    settings.extend(subsample_settings(&args.subsample));
    settings.push(("out", args.out.display().to_string()));
    write_manifest(&args.out, "analyze", &settings)?;

    let cells = load_cell_table(&args.cells)?;
    let wells = args.wells.as_deref().map(load_well_table).transpose()?;
    let Some(assess_path) = &args.assess else {
        // Summaries only: no labels to train on.
        let basis = match objects {
            ObjectKind::CellWellPca => pca_basis(cells.values())?,
            _ => OrthonormalBasis::identity(cells.feature_names()),
        };
        let (_, features) = well_features(&cells, wells.as_ref(), &basis, &cfg)?;
        features.write_csv(&args.out.join("summaries.csv"))?;
        if objects != ObjectKind::WellsAlone {
            basis.write_csv(&args.out.join("basis.csv"), cells.feature_names())?;
        }
        let text = format!("pipeline = {}\nn_wells = {}\n", cfg.name(), features.well_ids.len());
        write(&args.out, "metrics.txt", &text)?;
        print!("{text}");
        return Ok(());
    };
    let dataset = Dataset::join(cells, wells, load_assessment(assess_path)?)?;
    let predicted = if objects == ObjectKind::CellsAlone {
        cells_alone(&dataset, &cfg, args.seed)?
    } else {
        let fitted = FittedPipeline::fit(&dataset, &cfg)?;
        fitted.features.write_csv(&args.out.join("summaries.csv"))?;
        if objects != ObjectKind::WellsAlone {
            fitted
                .basis
                .write_csv(&args.out.join("basis.csv"), dataset.cells.feature_names())?;
        }
        let models = args.out.join("models");
        fs::create_dir_all(&models)
            .with_context(|| format!("cannot create {}", models.display()))?;
        for pair in &fitted.model.pairwise {
            let name = format!("{}_vs_{}.txt", pair.lower, pair.upper);
            write(&models, &name, &pair.model.to_text())?;
        }
        fitted.fitted
    };
    let mut preds = String::from("well_id,predicted,observed\n");
    for ((id, p), o) in dataset.well_ids().iter().zip(&predicted).zip(dataset.classes()) {
        writeln!(preds, "{id},{},{}", class_name(*p), class_name(*o)).ok();
    }
    write(&args.out, "predictions.csv", &preds)?;
    let mut metrics = format!(
        "pipeline = {}\nn_wells = {}\nerror_rate = {}\n",
        cfg.name(),
        dataset.n_wells(),
        format_number(error_rate(&predicted, dataset.classes()))
    );
    if args.loocv {
        let e = loocv_error(&dataset, &cfg)?;
        writeln!(metrics, "loocv_error = {}", format_number(e)).ok();
    }
    write(&args.out, "metrics.txt", &metrics)?;
    print!("{metrics}");
    Ok(())
}

fn read_alpha(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read direction file {}", path.display()))?;
    let mut out = Vec::new();
    for tok in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let v: f64 = tok
            .parse()
            .with_context(|| format!("{}: `{tok}` is not a number", path.display()))?;
        out.push(v);
    }
    Ok(out)
}

fn report_text(report: &UncertaintyReport, header: &str) -> String {
    let mut t = String::new();
    writeln!(t, "{header}").ok();
    writeln!(
        t,
        "# closed form summed over quantile statistics, direction split evenly across statistics"
    )
    .ok();
    if let Some(e) = report.eta_empirical {
        writeln!(t, "eta_empirical = {}", format_number(e)).ok();
    }
    writeln!(t, "eta_closed = {}", format_number(report.eta_closed)).ok();
    for ((label, term), c) in report
        .statistic_labels
        .iter()
        .zip(&report.per_quantile_terms)
        .zip(&report.c_values)
    {
        writeln!(t, "term.{label} = {} (c_q = {})", format_number(*term), format_number(*c)).ok();
    }
    writeln!(t, "bound_lower = {}", format_number(report.bounds.0)).ok();
    writeln!(t, "bound_upper = {}", format_number(report.bounds.1)).ok();
    writeln!(t, "within_bounds = {}", report.within_bounds()).ok();
    t
}

pub fn uncertainty(args: &UncertaintyArgs) -> Result<(), Failure> {
    let matrix_mode = args.sd_matrix.is_some() || args.alpha.is_some();
    if args.from_sim == matrix_mode {
        return usage("give either --from-sim or both --sd-matrix and --alpha (with --q)");
    }
    let mut settings = vec![("from-sim", args.from_sim.to_string())];
    let report = if args.from_sim {
        let Some(seed) = args.seed else {
            return usage("--from-sim needs --seed");
        };
        let sim = args.sim.config()?;
        let summary = parse_summary(args.q.as_deref().unwrap_or("q01,q25,q50,q75,q99"))?;
        let objects = parse_objects(&args.objects)?;
        if objects == ObjectKind::CellsAlone {
            return usage("uncertainty is defined for well-level pipelines, not --objects cells");
        }
        let penalty = parse_penalty(&args.penalty)?;
        let alpha = parse_direction(&args.direction)?;
        settings.push(("seed", seed.to_string()));
        settings.extend(args.sim.settings());
        settings.extend([
            ("objects", objects.to_string()),
            ("std-within", args.std_within.to_string()),
            ("q", summary.to_string()),
            ("penalty", penalty.to_string()),
            ("direction", alpha.to_string()),
        ]);
        settings.push(("out", args.out.display().to_string()));
        make_out(&args.out)?;
        write_manifest(&args.out, "uncertainty", &settings)?;
        summary.quantile_levels()?;
        let mut cfg = PipelineConfig::new(objects, args.std_within, summary);
        cfg.penalty = penalty;
        let (dataset, truth) = generate(&sim, seed)?;
        let fitted = FittedPipeline::fit(&dataset, &cfg)?;
        let report = pipeline_uncertainty(&dataset, &truth, &fitted, alpha)?;
        (report, format!("# pipeline: {}  seed: {seed}", cfg.name()))
    } else {
        let (Some(sd_path), Some(alpha_path), Some(q)) = (&args.sd_matrix, &args.alpha, &args.q)
        else {
            return usage("--sd-matrix, --alpha and --q are all required without --from-sim");
        };
        let summary = parse_summary(q)?;
        settings.extend([
            ("sd-matrix", sd_path.display().to_string()),
            ("alpha", alpha_path.display().to_string()),
            ("q", summary.to_string()),
            ("out", args.out.display().to_string()),
        ]);
        make_out(&args.out)?;
        write_manifest(&args.out, "uncertainty", &settings)?;
        summary.quantile_levels()?;
        let sds = load_well_table(sd_path)?;
        let alpha = TrueDirection::new(DVector::from_vec(read_alpha(alpha_path)?))?;
        let blocks = DirectionBlocks::uniform(&alpha, summary.len())?;
        let report = UncertaintyReport::build(
            sds.well_ids().to_vec(),
            &summary,
            &blocks,
            sds.values().clone(),
            None,
        )?;
        (report, format!("# sd matrix: {}", sd_path.display()))
    };
    let (report, header) = report;
    report.write_csv(&args.out.join("uncertainty.csv"))?;
    let text = report_text(&report, &header);
    write(&args.out, "uncertainty.txt", &text)?;
    print!("{text}");
    Ok(())
}

pub fn toy(args: &ToyArgs) -> Result<(), Failure> {
    let covariance = match args.covariance.as_str() {
        "shared" => ToyCovariance::Shared,
        "degenerate" => ToyCovariance::Degenerate,
        _ => ToyCovariance::Heterogeneous,
    };
    if !(args.spacing.is_finite() && args.spacing > 0.0) {
        return usage("--spacing must be positive");
    }
    let cfg = ToyConfig {
        n_wells: args.wells as usize,
        cells_per_well: args.cells as usize,
        spacing: args.spacing,
        covariance,
        ..ToyConfig::default()
    };
    make_out(&args.out)?;
    let settings = vec![
        ("seed", args.seed.to_string()),
        ("wells", args.wells.to_string()),
        ("reps", args.reps.to_string()),
        ("cells", args.cells.to_string()),
        ("covariance", args.covariance.clone()),
        ("spacing", args.spacing.to_string()),
        ("out", args.out.display().to_string()),
    ];
    write_manifest(&args.out, "toy", &settings)?;
    let (results, axis, pc) = toy_study(&cfg, args.seed, args.reps as usize)?;
    let first = &results[0];
    let order = |o: &[usize]| {
        o.iter()
            .map(|w| format!("W{:03}", w + 1))
            .collect::<Vec<_>>()
            .join(" < ")
    };
    let mut text = String::new();
    writeln!(text, "# seed: {}  replications: {}  covariance: {}", args.seed, args.reps, args.covariance).ok();
    writeln!(text, "true order:     {}", order(&first.true_order)).ok();
    writeln!(text, "axis-max order: {}", order(&first.axis_max_order)).ok();
    writeln!(text, "PC-max order:   {}", order(&first.pc_max_order)).ok();
    writeln!(text, "mean axis-max concordance (Kendall tau) = {}", format_number(axis)).ok();
    writeln!(text, "mean PC-max concordance (Kendall tau)   = {}", format_number(pc)).ok();
    let mut conc = String::from("replication,seed,axis_concordance,pc_concordance\n");
    for (r, res) in results.iter().enumerate() {
        writeln!(
            conc,
            "{r},{},{},{}",
            args.seed ^ r as u64,
            format_number(res.axis_concordance),
            format_number(res.pc_concordance)
        )
        .ok();
    }
    write(&args.out, "toy.txt", &text)?;
    write(&args.out, "points.csv", &first.points_csv())?;
    write(&args.out, "concordance.csv", &conc)?;
    print!("{text}");
    Ok(())
}
