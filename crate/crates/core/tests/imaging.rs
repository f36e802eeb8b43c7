use proptest::prelude::*;
use qigl_core::imaging::{histogram_equalize, GrayImage};

fn image() -> impl Strategy<Value = GrayImage> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h).prop_map(move |px| GrayImage::new(w, h, px).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn equalization_is_idempotent_within_one(img in image()) {
        let once = histogram_equalize(&img);
        let twice = histogram_equalize(&once);
        for (a, b) in once.pixels().iter().zip(twice.pixels()) {
            prop_assert!((i16::from(*a) - i16::from(*b)).abs() <= 1);
        }
    }

    #[test]
    fn equalization_preserves_rank(img in image()) {
        let out = histogram_equalize(&img);
        let (p, q) = (img.pixels(), out.pixels());
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] < p[j] {
                    prop_assert!(q[i] <= q[j]);
                }
                if p[i] == p[j] {
                    prop_assert_eq!(q[i], q[j]);
                }
            }
        }
    }
}
