//! Stage-by-stage tensor shapes of the hybrid classifier.

use std::collections::HashMap;

use candle_core::DType;
use sabia_core::seeded_rng;
use sabia_nn::encoder::EncoderConfig;
use sabia_nn::sabia::{HeadKind, SabiaConfig, SabiaModel, ShapeTrace};
use sabia_nn::tokenizer::WordPiece;

fn texts(n: usize) -> Vec<String> {
    let pool = [
        "selling oxy and percs tonight, hit me up",
        "",
        "two years clean from heroin today",
        "my doctor prescribed tramadol after surgery",
    ];
    (0..n).map(|i| pool[i % pool.len()].repeat(1 + i % 3)).collect()
}

fn assert_chain(trace: &ShapeTrace, b: usize, hidden: usize) {
    let expect: Vec<(&str, Vec<usize>)> = vec![
        ("input_ids", vec![b, 128]),
        ("encoder", vec![b, 128, hidden]),
        ("bilstm", vec![b, 128, 256]),
        ("permute", vec![b, 256, 128]),
        ("conv_k2", vec![b, 128, 127]),
        ("pool_k2", vec![b, 128]),
        ("conv_k3", vec![b, 128, 126]),
        ("pool_k3", vec![b, 128]),
        ("conv_k4", vec![b, 128, 125]),
        ("pool_k4", vec![b, 128]),
        ("concat", vec![b, 384]),
        ("logits", vec![b, 5]),
    ];
    let got: Vec<(&str, Vec<usize>)> = trace.0.iter().map(|(s, d)| (s.as_str(), d.clone())).collect();
    assert_eq!(got, expect);
}

fn run_batches(model: &SabiaModel, hidden: usize) {
    for b in [1, 2, 16] {
        let enc = model.encode(&texts(b));
        assert_eq!((enc.batch_size(), enc.max_len()), (b, 128));
        let (ids, mask) = model.tensors(&enc).unwrap();
        let (logits, trace) = model.forward_traced(&ids, &mask).unwrap();
        assert_chain(&trace, b, hidden);
        let values = logits.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!(values.iter().all(|v| v.is_finite()));
        // inference is deterministic
        let again = model.forward(&ids, &mask, &mut None).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(values, again);
    }
}

#[test]
fn tiny_encoder_shape_chain() {
    let start = std::time::Instant::now();
    let model = SabiaModel::new(&SabiaConfig::tiny(), HeadKind::Hybrid).unwrap();
    run_batches(&model, 64);
    assert!(start.elapsed().as_secs() < 60, "took {:?}", start.elapsed());
}

#[test]
fn base_width_encoder_shape_chain() {
    // one random layer at the full 768 width keeps the run short
    let tok = WordPiece::tiny();
    let enc = EncoderConfig {
        num_hidden_layers: 1,
        vocab_size: tok.vocab_size(),
        ..EncoderConfig::base_uncased()
    };
    let model = SabiaModel::build(
        &SabiaConfig::default(),
        HeadKind::Hybrid,
        enc,
        tok,
        HashMap::new(),
        DType::F32,
        &mut seeded_rng(80),
    )
    .unwrap();
    run_batches(&model, 768);
}

#[test]
fn encoder_baseline_head_is_five_way() {
    let model = SabiaModel::new(&SabiaConfig::tiny(), HeadKind::Cls).unwrap();
    let (ids, mask) = model.tensors(&model.encode(&texts(3))).unwrap();
    let (logits, trace) = model.forward_traced(&ids, &mask).unwrap();
    assert_eq!(logits.dims(), &[3, 5]);
    assert_eq!(trace.get("cls"), Some(&[3usize, 64][..]));
}

#[test]
fn probability_rows_sum_to_one() {
    let model = SabiaModel::new(&SabiaConfig { max_len: 32, ..SabiaConfig::tiny() }, HeadKind::Hybrid).unwrap();
    let (labels, probs) = model.predict(&texts(7)).unwrap();
    assert_eq!(labels.len(), 7);
    for row in probs {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
