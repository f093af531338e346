use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value as Json};

use dpi_audit::attacks::AttackKind;
use dpi_audit::report::Provenance;
use dpi_audit::simlab::{
    aggregate, run_ablation, run_audit, run_simulation, AblationSource, AuditConfig, AuditInputs, ExperimentPlan,
    GeneratorKind, OracleDistribution, ReplicationResult, Scenario,
};
use dpi_audit::tabular::{load_csv_group, three_way_split, ENCODER_POLICY};
use dpi_audit::DpiConfig;

use crate::args::{AblateArgs, AttackOptions, AuditArgs, GeneratorArg, GeneratorOptions, SimulateArgs};
use crate::error::{CliError, CliResult};
use crate::output;

const NOTICES: [&str; 2] = [
    "utility probe uses an L2-regularised logistic regression instead of gradient-boosted trees",
    "training-row projection is a 2-D PCA export (projection.csv) instead of a t-SNE plot",
];

fn audit_config(opts: &AttackOptions, projection: bool) -> CliResult<AuditConfig> {
    if opts.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    if !(opts.percentile > 0.0 && opts.percentile <= 100.0) {
        return Err(CliError::usage(format!(
            "--percentile must lie in (0, 100], got {}",
            opts.percentile
        )));
    }
    let attacks = match &opts.attacks {
        Some(list) if list.is_empty() => return Err(CliError::usage("--attacks must not be empty")),
        Some(list) => list.clone(),
        None => AttackKind::ALL.to_vec(),
    };
    Ok(AuditConfig {
        dpi: DpiConfig {
            k: opts.k,
            metric: opts.metric,
            ..DpiConfig::default()
        },
        attacks,
        percentile: opts.percentile,
        label_column: opts.label_column.clone(),
        projection,
        ..AuditConfig::default()
    })
}

fn provenance(base_seed: Option<u64>, seeds: Vec<u64>, inputs: Map<String, Json>, config: Json) -> Provenance {
    Provenance {
        tool: "dpi-audit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        base_seed,
        replication_seeds: seeds,
        inputs,
        config,
        encoder_policy: ENCODER_POLICY.into(),
        notices: NOTICES.iter().map(|s| s.to_string()).collect(),
    }
}

fn config_json<T: serde::Serialize>(value: &T) -> CliResult<Json> {
    serde_json::to_value(value).map_err(|e| CliError::Internal(format!("config serialisation: {e}")))
}

fn path_json(p: &Path) -> Json {
    Json::String(p.display().to_string())
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::usage(format!("missing --{flag}")))
}

fn load_four(
    train: &Option<PathBuf>,
    holdout: &Option<PathBuf>,
    reference: &Option<PathBuf>,
    synthetic: &Option<PathBuf>,
) -> CliResult<(AuditInputs, Map<String, Json>)> {
    let paths = [
        require(train, "train")?,
        require(holdout, "holdout")?,
        require(reference, "reference")?,
        require(synthetic, "synthetic")?,
    ];
    let mut sets = load_csv_group(&paths)?.into_iter();
    let mut next = || sets.next().expect("four datasets");
    let inputs = AuditInputs::new(next(), next(), next(), next())?;
    let mut desc = Map::new();
    for (name, p) in ["train", "holdout", "reference", "synthetic"].iter().zip(paths) {
        desc.insert(name.to_string(), path_json(p));
    }
    Ok((inputs, desc))
}

fn load_audit_inputs(args: &AuditArgs) -> CliResult<(AuditInputs, Map<String, Json>)> {
    let Some(data) = &args.data else {
        if args.seed.is_some() {
            return Err(CliError::usage("--seed only applies together with --data"));
        }
        return load_four(&args.train, &args.holdout, &args.reference, &args.synthetic);
    };
    if args.train.is_some() || args.holdout.is_some() || args.reference.is_some() {
        return Err(CliError::usage(
            "--data cannot be combined with --train, --holdout or --reference",
        ));
    }
    let seed = args.seed.ok_or_else(|| CliError::usage("--data requires --seed"))?;
    let synthetic = require(&args.synthetic, "synthetic")?;
    let mut sets = load_csv_group(&[data, synthetic])?.into_iter();
    let (pool, syn) = (sets.next().expect("data"), sets.next().expect("synthetic"));
    let (train, holdout, reference) = three_way_split(&pool, seed)?;
    let inputs = AuditInputs::new(train, holdout, reference, syn)?;
    let mut desc = Map::new();
    desc.insert("data".into(), path_json(data));
    desc.insert("split_seed".into(), json!(seed));
    desc.insert("synthetic".into(), path_json(synthetic));
    Ok((inputs, desc))
}

pub fn audit(args: &AuditArgs) -> CliResult<()> {
    let config = audit_config(&args.attack, true)?;
    let (inputs, desc) = load_audit_inputs(args)?;
    let result = run_audit(&inputs, &config)?;
    let seeds = args.seed.into_iter().collect();
    let report = aggregate(
        std::slice::from_ref(&result),
        &config,
        provenance(args.seed, seeds, desc, config_json(&config)?),
    )?;

    let out = &args.out;
    let projection = result
        .projection
        .as_ref()
        .ok_or_else(|| CliError::Internal("projection was not computed".into()))?;
    let files = [
        ("scores.csv", output::scores_csv(&result)?),
        (
            "top_copied.csv",
            output::top_copied_csv(&result.column_names, &result.top_copied)?,
        ),
        (
            "projection.csv",
            output::projection_csv(projection, &result.top_copied)?,
        ),
        ("report.json", output::report_json(&report)?.into_bytes()),
    ];
    for (name, bytes) in files {
        output::write_file(&out.join(name), &bytes)?;
    }
    Ok(())
}

fn scenario(opts: &GeneratorOptions) -> CliResult<(Scenario, Map<String, Json>)> {
    let path = require(&opts.oracle, "oracle")?;
    let generator = opts.generator.ok_or_else(|| CliError::usage("missing --generator"))?;
    let text = std::fs::read_to_string(path).map_err(|source| dpi_audit::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let oracle = OracleDistribution::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))?;
    let generator = match generator {
        GeneratorArg::Perfect => GeneratorKind::Perfect,
        GeneratorArg::Copier => GeneratorKind::Copier {
            noise_scale: opts.noise,
            copy_fraction: opts.copy_fraction,
        },
    };
    generator.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let mut desc = Map::new();
    desc.insert("oracle".into(), path_json(path));
    desc.insert("generator".into(), config_json(&generator)?);
    Ok((Scenario { oracle, generator }, desc))
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    if args.n == 0 || args.reps == 0 {
        return Err(CliError::usage("--n and --reps must be at least 1"));
    }
    let config = audit_config(&args.attack, false)?;
    let (scenario, mut desc) = scenario(&args.source)?;
    desc.insert("n".into(), json!(args.n));
    desc.insert("replications".into(), json!(args.reps));

    let runs = run_simulation(&scenario, args.n, &config, args.reps, args.seed)?;
    let seeds: Vec<u64> = runs.iter().map(|(s, _)| *s).collect();
    let results: Vec<ReplicationResult> = runs.into_iter().map(|(_, r)| r).collect();
    let config_value = config_json(&config)?;

    let report = aggregate(
        &results,
        &config,
        provenance(Some(args.seed), seeds.clone(), desc.clone(), config_value.clone()),
    )?;
    output::write_file(&args.out.join("report.json"), output::report_json(&report)?.as_bytes())?;

    for (i, (seed, result)) in seeds.iter().zip(&results).enumerate() {
        let mut rep_desc = desc.clone();
        rep_desc.insert("replication".into(), json!(i));
        let single = aggregate(
            std::slice::from_ref(result),
            &config,
            provenance(Some(args.seed), vec![*seed], rep_desc, config_value.clone()),
        )?;
        let path = args.out.join("replications").join(format!("rep_{i:03}.json"));
        output::write_file(&path, output::report_json(&single)?.as_bytes())?;
    }
    Ok(())
}

pub fn ablate(args: &AblateArgs) -> CliResult<()> {
    let plan = ExperimentPlan {
        sizes: args.sizes.clone(),
        replications: args.reps,
        k_grid: args.k_grid.clone(),
        metrics: args.metrics.clone(),
        attacks: args.attacks.clone(),
        seed: args.seed,
    };
    plan.validate().map_err(|e| CliError::usage(e.to_string()))?;

    let has_files =
        args.train.is_some() || args.holdout.is_some() || args.reference.is_some() || args.synthetic.is_some();
    let source = match (args.source.oracle.is_some(), has_files) {
        (true, true) => {
            return Err(CliError::usage(
                "choose either --oracle or the four data files, not both",
            ));
        }
        (false, false) => {
            return Err(CliError::usage(
                "ablate needs a source: --oracle with --generator, or --train/--holdout/--reference/--synthetic",
            ));
        }
        (true, false) => AblationSource::Oracle(scenario(&args.source)?.0),
        (false, true) => {
            AblationSource::Files(load_four(&args.train, &args.holdout, &args.reference, &args.synthetic)?.0)
        }
    };
    let config = AuditConfig {
        attacks: args.attacks.clone(),
        ..AuditConfig::default()
    };
    let cells = run_ablation(&source, &plan, &config)?;
    output::write_file(&args.out.join("ablation.csv"), &output::ablation_csv(&cells)?)
}
