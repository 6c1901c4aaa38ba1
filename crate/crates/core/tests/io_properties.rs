mod common;

use common::{random_model, random_ranks, rng};
use proptest::prelude::*;
use rand::Rng;
use svdinstn::io::{read_model, read_tensor, write_model, write_tensor};
use svdinstn::DenseTensor;

fn finite_tensor() -> impl Strategy<Value = DenseTensor> {
    prop::collection::vec(1usize..=4, 1..=4).prop_flat_map(|shape| {
        let n: usize = shape.iter().product();
        let value = prop_oneof![
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
            Just(0.0),
            Just(-0.0),
            Just(f64::MIN_POSITIVE / 2.0),
        ];
        prop::collection::vec(value, n).prop_map(move |data| DenseTensor::new(shape.clone(), data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tensor_round_trip_is_bit_exact(t in finite_tensor()) {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        prop_assert_eq!(buf.len(), 9 + 8 * t.order() + 8 * t.len());
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        let bits = |x: &DenseTensor| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&t));
    }

    #[test]
    fn model_round_trip_is_bit_exact(seed in any::<u64>(), order in 2usize..=4) {
        let mut r = rng(seed);
        let dims: Vec<usize> = (0..order).map(|_| r.random_range(1..=3)).collect();
        let model = random_model(&dims, &random_ranks(order, 3, &mut r), &mut r);
        let mut buf = Vec::new();
        write_model(&mut buf, &model).unwrap();
        let back = read_model(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back, model);
    }

    #[test]
    fn truncation_is_always_detected(t in finite_tensor(), cut in any::<prop::sample::Index>()) {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let n = cut.index(buf.len());
        prop_assert!(read_tensor(&mut &buf[..n]).is_err());
    }
}
