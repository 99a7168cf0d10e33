//! Property tests over the language kernel and generator output.

use cadsig::lang::{
    dequantize_scalar, program_to_stream, quantize_scalar, reorder_and_orient, stream_to_program,
    MAX_TOKENS,
};
use cadsig::synth::{generate_sample, GeneratorConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Quantization round trip stays within half a level and is monotone.
    #[test]
    fn quantization_round_trip(p in 0.0f64..=1.0) {
        let q = quantize_scalar(p).unwrap();
        prop_assert!((11..=266).contains(&q));
        prop_assert!((dequantize_scalar(q) - p).abs() <= 1.0 / 510.0 + 1e-12);
        let p2 = (p + 0.01).min(1.0);
        prop_assert!(quantize_scalar(p2).unwrap() >= q);
    }

    /// Generator output round-trips through the token stream, fits the
    /// length budget, and opens/closes correctly.
    #[test]
    fn generated_programs_round_trip(seed in 0u64..1000, index in 0usize..8) {
        let cfg = GeneratorConfig {
            seed,
            splits: (8, 0, 0),
            n_points: 32,
            ..Default::default()
        };
        let sample = generate_sample(&cfg, index).unwrap();
        let stream = program_to_stream(&sample.program).unwrap();
        prop_assert!(stream.true_len() <= MAX_TOKENS);
        prop_assert!(stream.is_complete());
        let back = stream_to_program(&stream).unwrap();
        prop_assert_eq!(back, sample.program.clone());
        // Canonicalization is idempotent on generator output.
        for step in &sample.program.steps {
            let once = reorder_and_orient(&step.sketch).unwrap();
            prop_assert_eq!(&once, &step.sketch);
            let twice = reorder_and_orient(&once).unwrap();
            prop_assert_eq!(twice, once);
        }
    }

    /// Cloud bounds: generated clouds stay inside the unit box.
    #[test]
    fn generated_clouds_fit_unit_box(seed in 0u64..500) {
        let cfg = GeneratorConfig {
            seed,
            splits: (1, 0, 0),
            n_points: 64,
            ..Default::default()
        };
        let sample = generate_sample(&cfg, 0).unwrap();
        for p in &sample.points {
            for k in 0..3 {
                prop_assert!(p[k] >= -1e-6 && p[k] <= 1.0 + 1e-6);
            }
        }
    }
}
