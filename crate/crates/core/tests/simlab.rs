use dpi_audit::attacks::AttackKind;
use dpi_audit::report::Provenance;
use dpi_audit::simlab::{
    aggregate, run_ablation, run_audit, run_simulation, simulate_inputs, AblationSource, AuditConfig, AuditInputs,
    ExperimentPlan, GeneratorKind, OracleDistribution, Scenario,
};
use dpi_audit::Metric;

fn mixture() -> OracleDistribution {
    OracleDistribution::from_toml_str(
        "seed = 0\n\
         [[component]]\nweight = 0.5\nmean = [-1.5, 0.0]\nvariance = [1.0, 1.0]\n\
         [[component]]\nweight = 0.5\nmean = [1.5, 0.5]\nvariance = [0.5, 1.5]\n",
    )
    .unwrap()
}

fn scenario(generator: GeneratorKind) -> Scenario {
    Scenario {
        oracle: mixture(),
        generator,
    }
}

fn provenance() -> Provenance {
    Provenance {
        tool: "test".into(),
        version: "0".into(),
        base_seed: None,
        replication_seeds: Vec::new(),
        inputs: Default::default(),
        config: serde_json::Value::Null,
        encoder_policy: String::new(),
        notices: Vec::new(),
    }
}

#[test]
fn swapping_train_and_holdout_under_perfect_mirrors_auc() {
    let mut aucs = Vec::new();
    for seed in 0..5u64 {
        let inputs = simulate_inputs(&scenario(GeneratorKind::Perfect), 500, seed).unwrap();
        let swapped = AuditInputs::new(
            inputs.holdout.clone(),
            inputs.train.clone(),
            inputs.reference.clone(),
            inputs.synthetic.clone(),
        )
        .unwrap();
        let config = AuditConfig {
            attacks: vec![AttackKind::Dpi],
            ..AuditConfig::default()
        };
        let a = run_audit(&inputs, &config).unwrap().attacks[0].auc.auc;
        let b = run_audit(&swapped, &config).unwrap().attacks[0].auc.auc;
        assert!((a + b - 1.0).abs() < 1e-12, "{a} {b}");
        aucs.push(a);
    }
    let mean = aucs.iter().sum::<f64>() / 5.0;
    assert!((0.45..=0.55).contains(&mean), "{mean}");
}

#[test]
fn audit_is_deterministic() {
    let inputs = simulate_inputs(
        &scenario(GeneratorKind::Copier {
            noise_scale: 0.1,
            copy_fraction: 0.5,
        }),
        300,
        7,
    )
    .unwrap();
    let config = AuditConfig {
        projection: true,
        ..AuditConfig::default()
    };
    let a = run_audit(&inputs, &config).unwrap();
    let b = run_audit(&inputs, &config).unwrap();
    let ja = aggregate(&[a], &config, provenance())
        .unwrap()
        .to_canonical_json()
        .unwrap();
    let jb = aggregate(&[b], &config, provenance())
        .unwrap()
        .to_canonical_json()
        .unwrap();
    assert_eq!(ja, jb);
}

#[test]
fn same_table_four_times_is_well_defined() {
    let d = mixture().sample(200, 3).unwrap();
    let inputs = AuditInputs::new(d.clone(), d.clone(), d.clone(), d).unwrap();
    let result = run_audit(&inputs, &AuditConfig::default()).unwrap();
    // members and nonmembers are the same points, so every attack ties
    for a in &result.attacks {
        assert_eq!(a.auc.auc, 0.5, "{}", a.kind);
    }
    // each target's own reference copy precedes its synthetic copy
    assert!(result.dpi_scores.iter().all(|s| s.count_reference >= 1));
    assert_eq!(result.identical_match_share, 1.0);
    assert_eq!(result.quality.mmd, 0.0);
    assert_eq!(result.quality.wasserstein_mean, 0.0);
    let again = run_audit(&inputs, &AuditConfig::default()).unwrap();
    assert_eq!(result.dpi_scores, again.dpi_scores);
}

#[test]
fn copier_members_see_more_synthetic_neighbours() {
    let config = AuditConfig::default();
    let runs = run_simulation(
        &scenario(GeneratorKind::Copier {
            noise_scale: 0.01,
            copy_fraction: 1.0,
        }),
        1000,
        &config,
        3,
        12,
    )
    .unwrap();
    let results: Vec<_> = runs.into_iter().map(|(_, r)| r).collect();
    let report = aggregate(&results, &config, provenance()).unwrap();
    assert!(report.dpi.member_pooled_ratio.unwrap().mean > 1.0);
    assert!(report.dpi.member_mean_count.mean > report.dpi.nonmember_mean_count.mean);
    assert!(report.attack("dpi").unwrap().auc.mean > 0.5);
    assert_eq!(report.replications, 3);
    assert_eq!(report.dpi.histogram_members.len(), 21);
    assert_eq!(report.dpi.histogram_members.iter().sum::<u64>(), 3000);
}

#[test]
fn ablation_grid_arithmetic() {
    let plan = ExperimentPlan {
        sizes: vec![150],
        replications: 2,
        k_grid: vec![5, 20],
        metrics: vec![Metric::L2],
        attacks: vec![AttackKind::Dpi],
        seed: 1,
    };
    let source = AblationSource::Oracle(scenario(GeneratorKind::Perfect));
    let cells = run_ablation(&source, &plan, &AuditConfig::default()).unwrap();
    assert_eq!(cells.len(), 2);
    assert_eq!((cells[0].k, cells[1].k), (5, 20));
    assert!(cells.iter().all(|c| c.auc.sd >= 0.0 && c.size == 150));
    assert_eq!(cells, run_ablation(&source, &plan, &AuditConfig::default()).unwrap());
}

#[test]
fn perfect_ablation_cells_are_at_chance() {
    let plan = ExperimentPlan {
        sizes: vec![2000],
        ..ExperimentPlan::default()
    };
    let cells = run_ablation(
        &AblationSource::Oracle(scenario(GeneratorKind::Perfect)),
        &plan,
        &AuditConfig::default(),
    )
    .unwrap();
    assert_eq!(cells.len(), 8);
    for c in &cells {
        assert!((0.45..=0.55).contains(&c.auc.mean), "{c:?}");
    }
}

#[test]
fn plan_validation() {
    let ok = ExperimentPlan::default();
    ok.validate().unwrap();
    let empty = ExperimentPlan {
        k_grid: Vec::new(),
        ..ExperimentPlan::default()
    };
    assert!(empty.validate().is_err());
    let small = ExperimentPlan {
        sizes: vec![60],
        ..ExperimentPlan::default()
    };
    assert!(small.validate().is_err());
    let no_reps = ExperimentPlan {
        replications: 0,
        ..ExperimentPlan::default()
    };
    assert!(no_reps.validate().is_err());
}
