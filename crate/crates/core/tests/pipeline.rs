use hamflow::flows::{Flow, FlowKind, FlowSpec};
use hamflow::graph::{generate_sbm, NodeDataset, NormMode, SbmParams};
use hamflow::nets::{GraphContext, ParamStore};
use hamflow::rng;
use hamflow::robustness::{evaluate, predict, train, FlowModel, ModelConfig, TrainConfig};
use hamflow::stability::{assess, StabilityConfig};

fn small() -> NodeDataset {
    generate_sbm(&SbmParams {
        n_per_class: 12,
        feat_dim: 4,
        seed: 21,
        ..SbmParams::default()
    })
    .unwrap()
}

#[test]
fn checkpoint_reload_reproduces_predictions() {
    let data = small();
    let ctx = GraphContext::new(&data.graph);
    let cfg = ModelConfig {
        flow: FlowSpec::new(FlowKind::Hang),
        hidden: 6,
        ..ModelConfig::default()
    };
    let mut model = FlowModel::new(&cfg, 4, 2, &ctx, &mut rng::stream(0, "init")).unwrap();
    train(
        &mut model,
        &data,
        &TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        },
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let back = FlowModel::load(dir.path(), &ctx).unwrap();
    assert_eq!(
        predict(&back, &ctx, &data.features).unwrap(),
        predict(&model, &ctx, &data.features).unwrap()
    );
    assert_eq!(
        evaluate(&back, &data, &data.split.test).unwrap(),
        evaluate(&model, &data, &data.split.test).unwrap()
    );
}

#[test]
fn training_beats_chance_on_separable_blocks() {
    let data = small();
    let ctx = GraphContext::new(&data.graph);
    for kind in [FlowKind::GrandL, FlowKind::GraphCon, FlowKind::Hang] {
        let cfg = ModelConfig {
            flow: FlowSpec::new(kind),
            ..ModelConfig::default()
        };
        let mut model = FlowModel::new(&cfg, 4, 2, &ctx, &mut rng::stream(1, "init")).unwrap();
        train(
            &mut model,
            &data,
            &TrainConfig {
                epochs: 80,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let acc = evaluate(&model, &data, &data.split.test).unwrap();
        assert!(acc > 0.5, "{kind:?}: {acc}");
    }
}

#[test]
fn stability_report_matches_the_flow_family() {
    let data = small();
    let ctx = GraphContext::new(&data.graph);
    let cfg = StabilityConfig::default();
    let check = |spec: FlowSpec, name: &str| {
        let mut store = ParamStore::new();
        let flow = Flow::build(&spec, &mut store, &ctx, 4, &mut rng::stream(2, "init")).unwrap();
        let (report, traj) = assess(&flow, &store, &data.graph, &data.features, &cfg).unwrap();
        assert!(!traj.states.is_empty());
        report
            .checks
            .into_iter()
            .find(|c| c.name == name)
            .unwrap_or_else(|| panic!("{name} missing"))
    };
    let column = FlowSpec {
        alpha: 1.0,
        adjacency: NormMode::Column,
        ..FlowSpec::new(FlowKind::GrandL)
    };
    assert!(check(column, "column_sum_conservation").pass);
    assert!(check(FlowSpec::new(FlowKind::Hang), "energy_drift").pass);
}
