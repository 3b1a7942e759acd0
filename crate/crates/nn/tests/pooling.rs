//! Global max pooling forgets where in the sequence a feature fired.

use candle_core::{DType, Device, Tensor};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use sabia_core::seeded_rng;
use sabia_nn::layers::global_max_pool;
use sabia_nn::neural::{Arch, BaselineHead, NeuralConfig};
use sabia_nn::params::ParamStore;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pooled_cnn_features_ignore_time_order(seed in 0u64..1000, t in 5usize..20) {
        let cfg = NeuralConfig { max_len: t, filters: 6, kernel_size: 3, ..NeuralConfig::new(Arch::Cnn) };
        let mut store = ParamStore::new(DType::F64);
        let head = BaselineHead::new(&mut store, &cfg, 4, &mut seeded_rng(seed)).unwrap();
        let x = Tensor::randn(0.0f64, 1.0, (2, t, 4), &Device::Cpu).unwrap();
        let fmap = head.feature_map(&x).unwrap().unwrap();
        let positions = fmap.dim(2).unwrap();
        let mut perm: Vec<u32> = (0..positions as u32).collect();
        perm.shuffle(&mut seeded_rng(seed + 1));
        let idx = Tensor::new(perm.as_slice(), &Device::Cpu).unwrap();
        let shuffled = fmap.index_select(&idx, 2).unwrap();
        let a = global_max_pool(&fmap).unwrap().to_vec2::<f64>().unwrap();
        let b = global_max_pool(&shuffled).unwrap().to_vec2::<f64>().unwrap();
        prop_assert_eq!(a, b);
    }
}
