mod cache {
    use evsv_core::dsp::cache::*;
    use evsv_core::tensor::Tensor;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_f32_exact(rows in 1usize..6, cols in 1usize..6, seed in any::<u32>()) {
            let data: Vec<f64> = (0..rows * cols)
                .map(|i| f64::from((i as f32 + seed as f32 * 1e-3).sin()))
                .collect();
            let t = Tensor::from_vec(&[rows, cols], data).unwrap();
            let back = decode(&encode(&t)).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            for (a, b) in back.data().iter().zip(t.data()) {
                prop_assert_eq!(*a, f64::from(*b as f32));
            }
        }
    }

    #[test]
    fn header_layout() {
        let t = Tensor::from_vec(&[2, 3], vec![1.0; 6]).unwrap();
        let b = encode(&t);
        assert_eq!(&b[..4], b"EVSF");
        assert_eq!(b[4], 1);
        assert_eq!(&b[5..9], &2u32.to_le_bytes());
        assert_eq!(&b[9..13], &3u32.to_le_bytes());
        assert_eq!(b.len(), 13 + 24);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode(b"nope").is_err());
        let mut b = encode(&Tensor::zeros(&[1, 1]));
        b.pop();
        assert!(decode(&b).is_err());
    }
}

mod cwt {
    use evsv_core::dsp::cwt::*;
    use evsv_core::dsp::pitch::F0Contour;

    fn contour(f: Vec<f64>) -> F0Contour {
        F0Contour::from_f0(f, 10.0).unwrap()
    }

    #[test]
    fn ten_rows() {
        let c = contour((0..120).map(|i| 120.0 + 10.0 * (i as f64 * 0.1).sin()).collect());
        let x = cwt_decompose(&c).unwrap();
        assert_eq!(x.coeffs.shape(), &[10, 120]);
    }

    #[test]
    fn constant_contour_has_zero_coefficients() {
        let x = cwt_decompose(&contour(vec![150.0; 80])).unwrap();
        assert!(x.coeffs.data().iter().all(|&v| v == 0.0));
        assert!(x.norm_std > 0.0);
    }

    #[test]
    fn unvoiced_contour_is_rejected() {
        let err = cwt_decompose(&contour(vec![0.0; 50])).unwrap_err();
        assert_eq!(err.to_string(), "no voiced frames");
    }

    #[test]
    fn zero_coefficients_reconstruct_to_mean() {
        let mut x = cwt_decompose(&contour(
            (0..60).map(|i| 100.0 + i as f64).collect(),
        ))
        .unwrap();
        x.coeffs.fill(0.0);
        assert!(cwt_reconstruct(&x).iter().all(|&v| v == x.norm_mean));
    }

    #[test]
    fn reconstruction_is_linear() {
        let x = cwt_decompose(&contour(
            (0..90).map(|i| 130.0 + 20.0 * (i as f64 * 0.07).cos()).collect(),
        ))
        .unwrap();
        let base = cwt_reconstruct(&x);
        let mut scaled = x.clone();
        scaled.coeffs.scale(-1.7);
        let s = cwt_reconstruct(&scaled);
        for (a, b) in s.iter().zip(&base) {
            assert!(((a - x.norm_mean) - (-1.7) * (b - x.norm_mean)).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_bridges_gaps_and_holds_edges() {
        let c = contour(vec![0.0, 100.0, 0.0, 0.0, 200.0, 0.0]);
        let l = interpolate_log_f0(&c).unwrap();
        assert_eq!(l[0], 100f64.ln());
        assert_eq!(l[5], 200f64.ln());
        let mid = 100f64.ln() + (200f64.ln() - 100f64.ln()) / 3.0;
        assert!((l[2] - mid).abs() < 1e-12);
    }

    #[test]
    fn normalized_frames_round_trip() {
        let x = cwt_decompose(&contour(
            (0..70).map(|i| 180.0 + 15.0 * (i as f64 * 0.2).sin()).collect(),
        ))
        .unwrap();
        let back = x.with_normalized_frames(&x.normalized_frames()).unwrap();
        for (a, b) in back.coeffs.data().iter().zip(x.coeffs.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

mod frames {
    use evsv_core::dsp::frames::*;
    use evsv_core::dsp::Waveform;

    #[test]
    fn one_second_gives_98_frames() {
        let w = Waveform::new(vec![0.1; 16_000], 16_000).unwrap();
        assert_eq!(frame_signal(&w, 25.0, 10.0).unwrap().len(), 98);
    }

    #[test]
    fn exactly_one_frame() {
        let w = Waveform::new(vec![0.1; 400], 16_000).unwrap();
        let f = frame_signal(&w, 25.0, 10.0).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].len(), 400);
    }

    #[test]
    fn too_short_is_an_error() {
        let w = Waveform::new(vec![0.1; 100], 16_000).unwrap();
        let err = frame_signal(&w, 25.0, 10.0).unwrap_err();
        assert!(err.to_string().starts_with("utterance too short"));
    }

    #[test]
    fn frames_are_windowed() {
        let w = Waveform::new(vec![1.0; 400], 16_000).unwrap();
        let f = &frame_signal(&w, 25.0, 10.0).unwrap()[0];
        assert_eq!(f[0], 0.0);
        assert!((f[200] - 1.0).abs() < 1e-12);
    }
}

mod mcep {
    use evsv_core::dsp::mcep::*;
    use evsv_core::dsp::mel::N_MELS;
    use evsv_core::dsp::Waveform;
    use evsv_core::tensor::Tensor;
    use evsv_core::dsp::mel::LOG_FLOOR;

    #[test]
    fn silence_has_only_energy_term() {
        let m = mcep_analyze(&Waveform::new(vec![0.0; 8000], 16_000).unwrap()).unwrap();
        assert_eq!(m.coeffs.cols(), 24);
        let dct = dct_matrix(N_MCEP, N_MELS);
        let c0: f64 = dct.row(0).iter().map(|b| b * LOG_FLOOR.ln()).sum();
        for t in 0..m.num_frames() {
            let row = m.coeffs.row(t);
            assert!((row[0] - c0).abs() < 1e-9);
            assert!(row[1..].iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn dct_is_orthonormal() {
        let d = dct_matrix(N_MELS, N_MELS);
        for i in 0..N_MELS {
            for j in 0..N_MELS {
                let dot: f64 = d.row(i).iter().zip(d.row(j)).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smooth_log_mel_survives_truncation() {
        let row: Vec<f64> = (0..N_MELS).map(|i| (i as f64 * 0.15).sin() * 3.0 - 2.0).collect();
        let lm = Tensor::from_vec(&[1, N_MELS], row.clone()).unwrap();
        let back = mcep_to_log_mel(&log_mel_to_mcep(&lm));
        for (a, b) in back.row(0).iter().zip(&row) {
            assert!((a - b).abs() < 0.05);
        }
    }
}

mod mel {
    use evsv_core::dsp::mel::*;
    use evsv_core::dsp::Waveform;

    fn sine(hz: f64, secs: f64, amp: f64) -> Waveform {
        let n = (16_000.0 * secs) as usize;
        Waveform::new(
            (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * hz * i as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    #[test]
    fn forty_bands() {
        let m = mel_spectrogram(&sine(300.0, 1.0, 0.5)).unwrap();
        assert_eq!(m.frames.cols(), 40);
        assert_eq!(m.num_frames(), 98);
    }

    #[test]
    fn silence_is_log_floor() {
        let w = Waveform::new(vec![0.0; 16_000], 16_000).unwrap();
        let m = mel_spectrogram(&w).unwrap();
        assert!(m.frames.data().iter().all(|&v| v == LOG_FLOOR.ln()));
    }

    #[test]
    fn higher_pitch_higher_peak_band() {
        let argmax = |w: &Waveform| {
            let m = mel_spectrogram(w).unwrap();
            let mean = m.frames.col_means();
            mean.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        assert!(argmax(&sine(440.0, 1.0, 0.5)) > argmax(&sine(220.0, 1.0, 0.5)));
    }

    #[test]
    fn filterbank_spans_to_8k() {
        let fb = MelFilterbank::new(40, 512, 16_000);
        assert!(fb.centers_hz()[39] < 8000.0);
        assert!(fb.areas().iter().all(|&a| a > 0.0));
    }
}

mod pitch {
    use evsv_core::dsp::pitch::*;
    use evsv_core::dsp::Waveform;
    use evsv_core::rng::SeededRng;

    fn sine(hz: f64, n: usize, amp: f64) -> Waveform {
        Waveform::new(
            (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * hz * i as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    fn noise(seed: u64, n: usize) -> Waveform {
        let mut r = SeededRng::new(seed);
        Waveform::from_unchecked((0..n).map(|_| 0.3 * r.normal()).collect(), 16_000).unwrap()
    }

    #[test]
    fn sine_220() {
        let c = estimate_f0(&sine(220.0, 16_000, 0.5)).unwrap();
        let voiced = c.voiced_count() as f64 / c.len() as f64;
        assert!(voiced >= 0.9, "voiced fraction {voiced}");
        let med = c.median_voiced().unwrap();
        assert!((med - 220.0).abs() <= 5.0, "median {med}");
    }

    #[test]
    fn white_noise_mostly_unvoiced() {
        // seeded noise gives 100% unvoiced frames; threshold leaves margin
        for seed in 0..3 {
            let c = estimate_f0(&noise(seed, 16_000)).unwrap();
            let unvoiced = 1.0 - c.voiced_count() as f64 / c.len() as f64;
            assert!(unvoiced >= 0.8, "seed {seed}: unvoiced {unvoiced}");
        }
    }

    #[test]
    fn silence_all_unvoiced() {
        let c = estimate_f0(&Waveform::new(vec![0.0; 16_000], 16_000).unwrap()).unwrap();
        assert_eq!(c.voiced_count(), 0);
        assert!(c.f0_hz.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn resample_keeps_mask_shape() {
        let c = F0Contour::from_f0(vec![100.0, 100.0, 0.0, 0.0, 200.0, 200.0], 10.0).unwrap();
        let r = c.resampled(7);
        assert_eq!(r.len(), 7);
        assert!(r.voiced[0] && !r.voiced[3] && r.voiced[6]);
    }

    #[test]
    fn from_f0_rejects_out_of_range() {
        assert!(F0Contour::from_f0(vec![30.0], 5.0).is_err());
    }
}

mod synth {
    use evsv_core::dsp::synth::*;
    use evsv_core::dsp::mcep::McepSequence;
    use evsv_core::dsp::mel::N_MELS;
    use evsv_core::dsp::pitch::F0Contour;
    use evsv_core::dsp::mcep::{log_mel_to_mcep, N_MCEP};
    use evsv_core::dsp::pitch::estimate_f0;
    use evsv_core::tensor::Tensor;

    fn flat_mcep(frames: usize) -> McepSequence {
        let row: Vec<f64> = (0..N_MELS).map(|b| 4.0 - 0.1 * b as f64).collect();
        let lm = Tensor::from_vec(&[1, N_MELS], row).unwrap();
        let c = log_mel_to_mcep(&lm);
        let mut data = Vec::new();
        for _ in 0..frames {
            data.extend_from_slice(c.row(0));
        }
        McepSequence {
            coeffs: Tensor::from_vec(&[frames, N_MCEP], data).unwrap(),
            frame_ms: 25.0,
            hop_ms: 10.0,
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let c = F0Contour::from_f0(vec![120.0; 105], 10.0).unwrap();
        let err = synthesize(&flat_mcep(100), &c).unwrap_err();
        assert!(err.to_string().starts_with("feature length mismatch"));
    }

    #[test]
    fn small_mismatch_absorbed() {
        let c = F0Contour::from_f0(vec![120.0; 102], 10.0).unwrap();
        let w = synthesize(&flat_mcep(100), &c).unwrap();
        assert!((w.peak() - OUTPUT_PEAK).abs() < 1e-12);
    }

    #[test]
    fn voiced_synthesis_carries_pitch() {
        let c = F0Contour::from_f0(vec![140.0; 120], 10.0).unwrap();
        let w = synthesize(&flat_mcep(120), &c).unwrap();
        let med = estimate_f0(&w).unwrap().median_voiced().unwrap();
        assert!((med - 140.0).abs() / 140.0 < 0.1, "median {med}");
    }

    #[test]
    fn unvoiced_synthesis_is_noise() {
        let c = F0Contour::from_f0(vec![0.0; 120], 10.0).unwrap();
        let w = synthesize(&flat_mcep(120), &c).unwrap();
        let e = estimate_f0(&w).unwrap();
        let unvoiced = 1.0 - e.voiced_count() as f64 / e.len() as f64;
        assert!(unvoiced >= 0.8, "unvoiced {unvoiced}");
    }

    #[test]
    fn deterministic() {
        let c = F0Contour::from_f0(vec![110.0; 60], 10.0).unwrap();
        assert_eq!(synthesize(&flat_mcep(60), &c).unwrap(), synthesize(&flat_mcep(60), &c).unwrap());
    }
}

mod waveform {
    use evsv_core::dsp::waveform::*;
    use std::path::Path;

    #[test]
    fn rejects_out_of_range() {
        assert!(Waveform::new(vec![0.0, 1.5], 16_000).is_err());
        assert!(Waveform::new(vec![f64::NAN], 16_000).is_err());
        assert!(Waveform::new(vec![], 16_000).is_err());
    }

    #[test]
    fn wav_round_trip_matches_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let w = Waveform::new((0..1600).map(|i| (i as f64 * 0.01).sin() * 0.5).collect(), 16_000)
            .unwrap();
        w.write_wav(&p).unwrap();
        let r = Waveform::read_wav(&p).unwrap();
        assert_eq!(r, w.quantized());
    }

    #[test]
    fn resample_doubles_length() {
        let w = Waveform::new(vec![0.0, 0.5, 1.0, 0.5], 8_000).unwrap();
        let r = w.resample(16_000);
        assert_eq!(r.len(), 8);
        assert_eq!(r.samples()[1], 0.25);
    }

    #[test]
    fn missing_file_reports_missing_audio() {
        let err = Waveform::read_wav(Path::new("/nonexistent/x.wav")).unwrap_err();
        assert!(err.to_string().starts_with("missing audio"));
    }
}

mod cwt_round_trip {
    use evsv_core::dsp::cwt::{cwt_decompose, cwt_reconstruct, interpolate_log_f0};
    use evsv_core::dsp::{F0Contour, N_SCALES};
    use evsv_core::SeededRng;

    /// Sum of three slow sinusoids around a speaker-like base pitch.
    fn smooth_contour(seed: u64) -> F0Contour {
        let mut r = SeededRng::new(seed);
        let len = 100 + r.below(200);
        let base = r.uniform_range(100.0, 250.0);
        let parts: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (r.uniform_range(0.03, 0.12), r.uniform_range(20.0, 200.0), r.uniform_range(0.0, 6.28)))
            .collect();
        let f0 = (0..len)
            .map(|i| {
                let m: f64 = parts
                    .iter()
                    .map(|(a, p, ph)| a * (2.0 * std::f64::consts::PI * i as f64 / p + ph).sin())
                    .sum();
                base * m.exp()
            })
            .collect();
        F0Contour::from_f0(f0, 5.0).unwrap()
    }

    pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn twenty_smooth_contours_reconstruct() {
        let mut worst = f64::INFINITY;
        for seed in 0..20 {
            let c = smooth_contour(seed);
            let x = cwt_decompose(&c).unwrap();
            assert_eq!(x.coeffs.shape(), &[N_SCALES, c.len()]);
            let r = correlation(&cwt_reconstruct(&x), &interpolate_log_f0(&c).unwrap());
            worst = worst.min(r);
        }
        assert!(worst >= 0.95, "worst correlation {worst}");
    }
}
