use hypocodec::bitstream::{compute_bpp, ResidualMode};
use hypocodec::encoder::{fit_unique, pretrain_base, AdamConfig, EncoderConfig, PretrainConfig};
use hypocodec::hyponet::{BaseParams, HypoNetConfig, UniqueParams};
use hypocodec::metrics::{psnr, psnr_from_mse, ssim, PSNR_CAP_DB};
use hypocodec::pipeline::{decode_bytes, encode_fit, fit_video, render_video, CodingParams};
use hypocodec::rd::{rd_sweep, to_csv, SweepGrid, CSV_HEADER};
use hypocodec::synthetic::{generate_synthetic, Pattern, SyntheticSpec};
use hypocodec::tubelet::{extract_tubelet, plan_grid, ClipView, Tubelet, VideoBuffer};

fn micro_video(frames: usize, seed: u64) -> VideoBuffer {
    generate_synthetic(&SyntheticSpec {
        pattern: Pattern::MovingSinusoid,
        speed: 1.0,
        frames,
        height: 16,
        width: 16,
        seed,
    })
    .unwrap()
}

fn quick_encoder() -> EncoderConfig {
    EncoderConfig {
        iterations: 150,
        finetune_iterations: 20,
        ..EncoderConfig::default()
    }
}

fn coding(bits: u8, mode: ResidualMode) -> CodingParams {
    CodingParams {
        bits,
        mode,
        keyframe_interval: None,
        base_fingerprint: 7,
    }
}

#[test]
fn eight_bit_decode_tracks_the_unquantized_fit() {
    let config = HypoNetConfig::micro();
    let base = BaseParams::init(&config, 1).unwrap();
    let video = micro_video(6, 2);
    let grid = plan_grid(16, 16, 8, 8, 0, 0).unwrap();
    let fit = fit_video(&video, &config, &base, &grid, &quick_encoder()).unwrap();
    let unquantized = render_video(&fit.unique(), &config, &base, &grid, video.frames()).unwrap();
    let encoded = encode_fit(&fit, &config, &coding(8, ResidualMode::Previous)).unwrap();
    let (decoded, _, _) = decode_bytes(&encoded.bytes, &base, 7).unwrap();
    let (p_fit, p_dec) = (psnr(&video, &unquantized).unwrap(), psnr(&video, &decoded).unwrap());
    assert!((p_fit - p_dec).abs() <= 0.1, "fit {p_fit:.3} dB vs 8-bit {p_dec:.3} dB");
}

#[test]
fn rate_grows_with_bit_depth() {
    let config = HypoNetConfig::micro();
    let base = BaseParams::init(&config, 3).unwrap();
    let video = micro_video(8, 4);
    let grid = plan_grid(16, 16, 8, 8, 0, 0).unwrap();
    let fit = fit_video(&video, &config, &base, &grid, &quick_encoder()).unwrap();
    for mode in ResidualMode::ALL {
        let bpp: Vec<f64> = (4..=8)
            .map(|b| {
                let e = encode_fit(&fit, &config, &coding(b, mode)).unwrap();
                assert_eq!(e.layout.total(), e.bytes.len());
                compute_bpp(&e.layout, 16, 16, 8)
            })
            .collect();
        assert!(bpp.windows(2).all(|w| w[0] < w[1]), "{mode}: {bpp:?}");
    }
}

#[test]
fn odd_frame_counts_round_trip_through_padding() {
    let config = HypoNetConfig::micro();
    let base = BaseParams::init(&config, 5).unwrap();
    let video = micro_video(5, 6);
    let grid = plan_grid(16, 16, 8, 8, 2, 2).unwrap();
    let fit = fit_video(&video, &config, &base, &grid, &quick_encoder()).unwrap();
    let e = encode_fit(&fit, &config, &coding(6, ResidualMode::First)).unwrap();
    let (decoded, container, _) = decode_bytes(&e.bytes, &base, 7).unwrap();
    assert_eq!((decoded.frames(), decoded.height(), decoded.width()), (5, 16, 16));
    assert_eq!(container.header.clip_count(), 3);
}

#[test]
fn identical_videos_score_perfectly() {
    let v = micro_video(3, 8);
    assert_eq!(psnr(&v, &v).unwrap(), PSNR_CAP_DB);
    assert!((ssim(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    let w = micro_video(3, 9);
    assert!(psnr(&v, &w).unwrap() < PSNR_CAP_DB);
    assert!(ssim(&v, &w).unwrap() < 1.0);
}

#[test]
fn sweep_emits_one_row_per_setting() {
    let config = HypoNetConfig::micro();
    let base = BaseParams::init(&config, 10).unwrap();
    let video = micro_video(4, 11);
    let grid = plan_grid(16, 16, 8, 8, 0, 0).unwrap();
    let sweep = SweepGrid {
        bits: vec![4, 8],
        lambdas: vec![0.0, 0.5],
        modes: vec![ResidualMode::None, ResidualMode::Previous],
    };
    let enc = EncoderConfig {
        iterations: 40,
        finetune_iterations: 10,
        ..EncoderConfig::default()
    };
    let points = rd_sweep(&video, &config, &base, &grid, &enc, &sweep, 0).unwrap();
    assert_eq!(points.len(), 8);
    let csv = to_csv(&points);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 9);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 8));
    assert!(points.iter().all(|p| p.bpp > 0.0 && p.psnr_db.is_finite()));
}

#[test]
fn smooth_tubelet_fit_beats_the_mean_colour_by_six_db() {
    let config = HypoNetConfig::tiny();
    let patch = plan_grid(32, 32, 32, 32, 0, 0).unwrap();
    let tubelet = |pattern, seed| -> Tubelet {
        let v = generate_synthetic(&SyntheticSpec {
            pattern,
            speed: 1.0,
            frames: 8,
            height: 32,
            width: 32,
            seed,
        })
        .unwrap();
        extract_tubelet(&ClipView::new(&v, 0, 8).unwrap(), &patch, (0, 0)).unwrap()
    };
    let corpus: Vec<Tubelet> = (0..8).map(|i| tubelet(Pattern::ALL[i % 4], 200 + i as u64)).collect();
    let pre = PretrainConfig {
        epochs: 200,
        adam: AdamConfig::with_learning_rate(3e-3),
        seed: 0,
    };
    let base = pretrain_base(&corpus, &config, &pre).unwrap().base;
    let target = tubelet(Pattern::MovingSinusoid, 900);
    let enc = EncoderConfig::default();
    let fit = fit_unique(&config, &base, &UniqueParams::identity(&config), &target, &enc).unwrap();
    let n = target.len() * target[0].data.len();
    let mut sq = 0.0;
    for c in 0..3 {
        let vals: Vec<f64> = target
            .iter()
            .flat_map(|f| f.data[c * 1024..(c + 1) * 1024].iter().map(|&v| f64::from(v)))
            .collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        sq += vals.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let baseline = psnr_from_mse(sq / n as f64);
    let fitted = psnr_from_mse(fit.final_mse);
    assert!(fitted >= baseline + 6.0, "fit {fitted:.2} dB, mean colour {baseline:.2} dB");
}
