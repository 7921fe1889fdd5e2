use tempclust::coarsen::{coarsen, CoarsenMode, CoarseningSpec};
use tempclust::codec::{FeatureCodec, Schema};
use tempclust::eval::{evaluate_predictions, roc_auc};
use tempclust::model::{train, Model, MreConfig, TrainConfig};
use tempclust::records::{format_records, parse_records, SequenceRecord};
use tempclust::synth::{generate, SynthConfig, SynthDataset};

fn data() -> SynthDataset {
    generate(&SynthConfig { n_sequences: 300, seed: 21, ..SynthConfig::default() }).unwrap()
}

#[test]
fn records_survive_a_coarsening_round_trip() {
    let d = data();
    let spec = CoarseningSpec::grid(0.75, Some((0.0, 24.0)));
    let coarse: Vec<SequenceRecord> = d
        .test
        .items
        .iter()
        .map(|l| SequenceRecord::from(l.clone()))
        .map(|r| r.with_sequence(coarsen(&r.sequence, &spec).unwrap()))
        .collect();
    let text = format_records(&coarse);
    let back = parse_records(&text).unwrap();
    assert_eq!(back, coarse);
    for (c, orig) in back.iter().zip(&d.test.items) {
        assert_eq!(c.sequence.total_count(), orig.sequence.total_count());
    }
}

#[test]
fn trained_models_beat_chance_and_reload_exactly() {
    let d = data();
    let codec = FeatureCodec::fit(&Schema::all_real(4), d.train.items.iter().map(|s| &s.sequence)).unwrap();
    let codec = FeatureCodec::from_text(&codec.to_text()).unwrap();
    let labels: Vec<f64> = d.test.items.iter().map(|s| s.label.as_targets()[0]).collect();
    let mre = MreConfig { mode: CoarsenMode::Cluster, resolutions: vec![1.0, 0.5], interval: None };
    for cfg in [
        TrainConfig { epochs: 30, hidden: 16, seed: 1, ..TrainConfig::default() },
        TrainConfig { epochs: 30, hidden: 16, seed: 1, mre: Some(mre), ..TrainConfig::default() },
    ] {
        let model = train(&d.train.items, &d.val.items, &codec, &cfg).unwrap().model;
        let reloaded = Model::from_text(&model.to_text()).unwrap();
        let preds: Vec<Vec<f64>> = d.test.items.iter().map(|s| reloaded.predict(&s.sequence, &codec).unwrap()).collect();
        let direct: Vec<Vec<f64>> = d.test.items.iter().map(|s| model.predict(&s.sequence, &codec).unwrap()).collect();
        assert_eq!(preds, direct);
        let scores: Vec<f64> = preds.iter().map(|p| p[0]).collect();
        assert!(roc_auc(&scores, &labels).unwrap() > 0.6);
        let truth: Vec<_> = d.test.items.iter().map(|s| s.label.clone()).collect();
        let report = evaluate_predictions(model.task(), &preds, &truth, Some((50, 4))).unwrap();
        assert!(report.get("roc_auc").is_some() && report.get("map").is_some());
    }
}
