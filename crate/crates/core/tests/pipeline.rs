use tmc_core::boosting::{AdaBoostConfig, TwoStageConfig};
use tmc_core::datagen::generate_network;
use tmc_core::io::{ingest_csv, write_dataset_csv};
use tmc_core::lasso::LassoConfig;
use tmc_core::transfer::{run_pipeline, PipelineConfig};
use tmc_core::Dataset;

fn config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        lasso: LassoConfig {
            grid_size: 10,
            folds: 3,
            ..Default::default()
        },
        boosting: TwoStageConfig {
            steps: 3,
            folds: 2,
            boost: AdaBoostConfig {
                iterations: 5,
                ..Default::default()
            },
            seed,
        },
        substitution_fraction: 0.10,
        seed,
    }
}

fn split(data: &Dataset, held: &str) -> (Dataset, Dataset) {
    let (mut target, source): (Vec<_>, Vec<_>) = data
        .instances()
        .iter()
        .cloned()
        .partition(|i| i.intersection_id() == held);
    target.iter_mut().for_each(|i| i.labels = None);
    (Dataset::new(source).unwrap(), Dataset::new(target).unwrap())
}

#[test]
fn pipeline_predicts_every_target_row() {
    let net = generate_network(5, 1, 21).unwrap();
    let (source, target) = split(&net.dataset, "I005");
    let (selection, outputs) = run_pipeline(&source, &target, &config(4)).unwrap();
    assert!(!selection.selected.is_empty());
    assert_eq!(outputs.len(), 1);
    let out = &outputs[0];
    assert_eq!(out.predictions.len(), target.len());
    assert_ne!(out.plan.match_result.chosen, "I005");
    for p in &out.predictions {
        assert_eq!(p.intersection_id, "I005");
        for v in [p.v_lm_hat, p.v_tm_hat, p.v_rm_hat] {
            assert!(v.is_finite() && v >= 0.0);
        }
    }

    let (_, again) = run_pipeline(&source, &target, &config(4)).unwrap();
    assert_eq!(again[0].predictions, out.predictions);
}

#[test]
fn csv_round_trip_preserves_the_dataset() {
    let net = generate_network(3, 1, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    write_dataset_csv(&net.dataset, &path).unwrap();
    let back = ingest_csv(&path, true).unwrap();
    assert_eq!(back.len(), net.dataset.len());
    for (a, b) in back.instances().iter().zip(net.dataset.instances()) {
        assert_eq!(a.key, b.key);
        assert_eq!(a.labels, b.labels);
        for (u, v) in a.features.values().iter().zip(b.features.values()) {
            assert!((u - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
    }
}
