//! Tensor shapes through the hybrid classifier: encoder, BiLSTM, three
//! convolution banks with max pooling, concatenation and the output layer.
//!
//! cargo run -p sabia --release --example sabia_shape_trace

use sabia::nn::sabia::{HeadKind, SabiaConfig, SabiaModel};

fn main() {
    let model = SabiaModel::new(&SabiaConfig::tiny(), HeadKind::Hybrid).unwrap();
    println!("{} trainable parameters", model.n_parameters());
    let texts = ["selling oxy and percs tonight", "two years clean today"];
    let enc = model.encode(&texts);
    let (ids, mask) = model.tensors(&enc).unwrap();
    let (_, trace) = model.forward_traced(&ids, &mask).unwrap();
    for (stage, dims) in &trace.0 {
        println!("{stage:<10} {dims:?}");
    }
}
