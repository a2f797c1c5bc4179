use proptest::prelude::*;

use mcam_core::encoding::{
    cell_mismatch, decode, encode, mtmc_word, quantize, CodeWord, QuantConfig, QuantizedVector,
    Scheme,
};
use mcam_core::mcam::{sense, CurrentModelParams, DeviceModel, McamGeometry, SenseConfig, StringReading};
use mcam_core::oracle::{distance, l1_distance, max_mismatch, Metric};

fn scheme_and_cl() -> impl Strategy<Value = (Scheme, usize)> {
    prop_oneof![
        (1usize..=12).prop_map(|cl| (Scheme::Mtmc, cl)),
        (1usize..=6).prop_map(|cl| (Scheme::B4e, cl)),
        (1usize..=6).prop_map(|cl| (Scheme::Sre, cl)),
        prop_oneof![Just(1usize), Just(5)].prop_map(|cl| (Scheme::B4we, cl)),
    ]
}

fn vector_for(scheme: Scheme, cl: usize) -> impl Strategy<Value = QuantizedVector> {
    let levels = scheme.default_levels(cl).unwrap();
    prop::collection::vec(0..levels, 1..40)
        .prop_map(move |v| QuantizedVector::with_levels(v, levels).unwrap())
}

proptest! {
    #[test]
    fn decode_inverts_encode(
        (scheme, cl, v) in scheme_and_cl()
            .prop_flat_map(|(s, cl)| vector_for(s, cl).prop_map(move |v| (s, cl, v)))
    ) {
        let e = encode(&v, scheme, cl).unwrap();
        prop_assert_eq!(e.words().len(), v.dim() * cl);
        prop_assert_eq!(decode(&e).unwrap(), v);
    }

    #[test]
    fn mtmc_close_values_never_exceed_mismatch_one(cl in 1usize..=16, a in 0u32..49, delta in 0u32..16) {
        let levels = 3 * cl as u32 + 1;
        let a = a % levels;
        let b = (a + delta % cl as u32).min(levels - 1);
        let wa: Vec<CodeWord> = (0..cl).map(|j| CodeWord::new(mtmc_word(a, cl, j)).unwrap()).collect();
        let wb: Vec<CodeWord> = (0..cl).map(|j| CodeWord::new(mtmc_word(b, cl, j)).unwrap()).collect();
        prop_assert!(max_mismatch(&wa, &wb) <= 1);
    }

    #[test]
    fn mtmc_mismatch_sum_is_exact(cl in 1usize..=16, q in 0u8..4, m in 0u32..49) {
        let m = m % (3 * cl as u32 + 1);
        let total: u32 = (0..cl)
            .map(|j| u32::from(cell_mismatch(CodeWord::new(q).unwrap(), CodeWord::new(mtmc_word(m, cl, j)).unwrap())))
            .sum();
        prop_assert_eq!(total, (cl as u32 * u32::from(q)).abs_diff(m));
    }

    #[test]
    fn mtmc_words_are_monotone(cl in 1usize..=16, m in 0u32..48) {
        let m = m % (3 * cl as u32);
        for j in 0..cl {
            prop_assert!(mtmc_word(m, cl, j) <= mtmc_word(m + 1, cl, j));
        }
        let changed = (0..cl).filter(|&j| mtmc_word(m, cl, j) != mtmc_word(m + 1, cl, j)).count();
        prop_assert_eq!(changed, 1);
    }

    #[test]
    fn l1_is_a_metric(
        a in prop::collection::vec(0u32..13, 8),
        b in prop::collection::vec(0u32..13, 8),
        c in prop::collection::vec(0u32..13, 8),
    ) {
        let [a, b, c] = [a, b, c].map(|v| QuantizedVector::with_levels(v, 13).unwrap());
        let d = |x: &QuantizedVector, y: &QuantizedVector| l1_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert_eq!(distance(Metric::CrossLevel, &a, &b).unwrap(), d(&a, &b));
    }

    #[test]
    fn quantize_is_monotone_and_in_range(
        mut xs in prop::collection::vec(-5.0f64..15.0, 2..30),
        levels in 2u32..200,
        signed in any::<bool>(),
    ) {
        xs.sort_by(f64::total_cmp);
        let cfg = QuantConfig { levels, clip_sigma: 2.5, signed };
        let q = quantize(&xs, &cfg, 1.0, 2.0).unwrap();
        prop_assert!(q.values().iter().all(|&v| v < levels));
        prop_assert!(q.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn current_falls_with_total_mismatch(total in 0u32..71, max in 1u8..4) {
        let dev = DeviceModel::new(McamGeometry::default(), CurrentModelParams::noiseless()).unwrap();
        let lo = dev.noiseless_current(StringReading { total, max });
        let hi = dev.noiseless_current(StringReading { total: total + 1, max });
        prop_assert!(hi < lo);
    }

    #[test]
    fn percentile_sense_votes_fixed_count(
        currents in prop::collection::vec(0.0f64..1.0, 1..200),
        fraction in 0.01f64..0.99,
    ) {
        let votes = sense(&currents, &SenseConfig::Percentile { fraction }).unwrap();
        let expect = ((fraction * currents.len() as f64).round() as usize).clamp(1, currents.len());
        prop_assert_eq!(votes.iter().filter(|&&v| v).count(), expect);
        let min_voted = currents.iter().zip(&votes).filter(|(_, &v)| v).map(|(c, _)| *c).fold(f64::INFINITY, f64::min);
        prop_assert!(currents.iter().zip(&votes).all(|(&c, &v)| v || c <= min_voted));
    }
}
