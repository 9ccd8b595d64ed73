use proptest::prelude::*;

use hypocodec::bitstream::{
    arithmetic_decode, arithmetic_encode, decode_stream, dequantize, encode_stream, laplace_histogram, quantize,
    read_container, write_container, CodedContainer, ContainerHeader, FrequencyTable, GridParams, ResidualMode,
};
use hypocodec::hyponet::{modulate_all, BaseParams, HypoNetConfig, UniqueParams};
use hypocodec::io::{decode_ppm, encode_ppm, video_from_bytes, video_to_bytes};
use hypocodec::tubelet::{plan_grid, FusionMode};

fn mode() -> impl Strategy<Value = ResidualMode> {
    prop_oneof![
        Just(ResidualMode::None),
        Just(ResidualMode::First),
        Just(ResidualMode::Previous)
    ]
}

fn micro_sequence(flat: Vec<Vec<f32>>) -> Vec<UniqueParams<f32>> {
    let config = HypoNetConfig::micro();
    flat.iter()
        .map(|v| UniqueParams::from_flat(&config, v).unwrap())
        .collect()
}

fn token_seq() -> impl Strategy<Value = Vec<Vec<f32>>> {
    let n = HypoNetConfig::micro().unique_param_count();
    prop::collection::vec(prop::collection::vec(-4.0f32..4.0, n), 1..6)
}

fn grid_shape() -> impl Strategy<Value = (usize, usize, usize, usize, usize, usize)> {
    (1usize..64, 1usize..64).prop_flat_map(|(ph, pw)| (Just(ph), Just(pw), ph..200, pw..200, 0..ph, 0..pw))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn arithmetic_coding_is_lossless(alphabet in 1usize..64, raw in prop::collection::vec(any::<u32>(), 0..300)) {
        let symbols: Vec<u32> = raw.iter().map(|s| s % alphabet as u32).collect();
        let table = FrequencyTable::from_counts(&laplace_histogram(&symbols, alphabet).unwrap()).unwrap();
        let bytes = arithmetic_encode(&symbols, &table).unwrap();
        prop_assert_eq!(arithmetic_decode(&bytes, &table, symbols.len()).unwrap(), symbols);
    }

    #[test]
    fn quantization_error_is_at_most_half_a_step(bits in 4u8..=8, values in prop::collection::vec(-100.0f32..100.0, 1..200)) {
        let q = quantize(&values, bits).unwrap();
        prop_assert!(q.levels.iter().all(|&l| l <= q.max_level()));
        for (v, r) in values.iter().zip(dequantize(&q)) {
            let slack = f64::from(v.abs().max(r.abs())) * f64::from(f32::EPSILON);
            prop_assert!((f64::from(*v) - f64::from(r)).abs() <= f64::from(q.scale) / 2.0 + slack);
        }
    }

    #[test]
    fn bypassed_residuals_decode_exactly(seq in token_seq(), mode in mode(), key in prop::option::of(1u32..4)) {
        let seq = micro_sequence(seq);
        let (stream, recon) = encode_stream(&seq, mode, None, key, 0).unwrap();
        let decoded = decode_stream(&stream, &HypoNetConfig::micro()).unwrap();
        prop_assert_eq!(&decoded, &seq);
        prop_assert_eq!(&recon, &seq);
    }

    #[test]
    fn containers_round_trip(seq in token_seq(), mode in mode(), bits in 4u8..=8, key in prop::option::of(1u32..4)) {
        let config = HypoNetConfig::micro();
        let seq = micro_sequence(seq);
        let frames = seq.len() as u32 * config.clip_len as u32;
        let grid = plan_grid(8, 8, 8, 8, 0, 0).unwrap();
        let (stream, recon) = encode_stream(&seq, mode, Some(bits), key, 0).unwrap();
        let container = CodedContainer {
            header: ContainerHeader {
                height: 8,
                width: 8,
                frames,
                hyponet: config.clone(),
                grid: GridParams::of(&grid),
                residual_mode: mode,
                keyframe_interval: key,
                bits,
                base_fingerprint: 42,
            },
            streams: vec![stream],
        };
        let bytes = write_container(&container).unwrap();
        let back = read_container(&bytes).unwrap();
        prop_assert_eq!(&back, &container);
        prop_assert_eq!(decode_stream(&back.streams[0], &config).unwrap(), recon);
    }

    #[test]
    fn constant_tokens_leave_base_weights_unchanged(c in 0.05f64..20.0, seed in any::<u64>()) {
        let config = HypoNetConfig::micro();
        let base = BaseParams::<f64>::init(&config, seed).unwrap();
        let mut u = UniqueParams::identity(&config);
        u.layers.iter_mut().for_each(|t| t.data.iter_mut().for_each(|v| *v = c));
        // Every weight is scaled by one common factor, which differs from 1 only
        // by the rounding of the two RMS sums.
        for (m, b) in modulate_all(&config, &base, &u).unwrap().iter().zip(&base.layers) {
            let n = b.weight.len() as f64;
            let (x0, y0) = m.weight.iter().zip(&b.weight).find(|(_, y)| **y != 0.0).unwrap();
            let common = x0 / y0;
            prop_assert!((common - 1.0).abs() <= n * f64::EPSILON, "factor {common}");
            for (x, y) in m.weight.iter().zip(&b.weight) {
                prop_assert!((x - common * y).abs() <= 4.0 * f64::EPSILON * y.abs());
            }
            prop_assert_eq!(&m.bias, &b.bias);
        }
    }

    #[test]
    fn grids_cover_every_pixel((ph, pw, h, w, oh, ow) in grid_shape()) {
        let grid = plan_grid(h, w, ph, pw, oh, ow).unwrap().with_fusion(FusionMode::Blend).unwrap();
        prop_assert_eq!(grid.ys[0], 0);
        prop_assert_eq!(*grid.ys.last().unwrap() + ph, h);
        prop_assert_eq!(*grid.xs.last().unwrap() + pw, w);
        prop_assert!(grid.ys.windows(2).all(|p| p[0] < p[1] && p[1] <= p[0] + ph - oh));
        prop_assert!(grid.xs.windows(2).all(|p| p[0] < p[1] && p[1] <= p[0] + pw - ow));
    }

    #[test]
    fn rgb_bytes_and_ppm_round_trip(t in 1usize..3, h in 1usize..9, w in 1usize..9, seed in any::<u64>()) {
        let bytes: Vec<u8> = (0..t * h * w * 3).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
        let video = video_from_bytes(t, h, w, &bytes).unwrap();
        prop_assert_eq!(&video_to_bytes(&video), &bytes);
        let (ph, pw, pixels) = decode_ppm(&encode_ppm(&video, 0)).unwrap();
        prop_assert_eq!((ph, pw), (h, w));
        prop_assert_eq!(&pixels[..], &bytes[..h * w * 3]);
    }
}
