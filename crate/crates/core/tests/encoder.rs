mod ge2e {
    use evsv_core::encoder::ge2e::*;
    use evsv_core::tensor::Tensor;

    fn orthogonal_batch() -> Tensor {
        Tensor::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn orthogonal_example() {
        let p = Ge2eParams::new(1.0, 0.0);
        let s = ge2e_similarity(&orthogonal_batch(), 2, 2, &p).unwrap();
        for i in 0..2 {
            assert_eq!(s.data()[i * 2], 1.0);
            assert_eq!(s.data()[i * 2 + 1], 0.0);
        }
        let expect = 4.0 * (1.0 + (-1f64).exp()).ln();
        assert!((ge2e_loss(&s) - expect).abs() < 1e-12);
    }

    #[test]
    fn identical_embeddings_give_unit_similarity() {
        let e = Tensor::from_rows(&vec![vec![0.6, 0.8]; 6]).unwrap();
        let s = ge2e_similarity(&e, 3, 2, &Ge2eParams::new(1.0, 0.0)).unwrap();
        assert!(s.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((ge2e_loss(&s) - 6.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn one_speaker_rejected() {
        let e = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let err = ge2e_similarity(&e, 1, 2, &Ge2eParams::default()).unwrap_err();
        assert!(err.to_string().starts_with("need ≥ 2 speakers"));
    }

    #[test]
    fn analytic_loss_matches_similarity_path() {
        let e = Tensor::from_rows(&[
            vec![0.6, 0.8, 0.0],
            vec![0.0, 0.6, 0.8],
            vec![0.8, 0.0, 0.6],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let p = Ge2eParams::new(3.0, -1.0);
        let direct = ge2e_loss(&ge2e_similarity(&e, 2, 3, &p).unwrap());
        let (l, _, _) = ge2e_loss_and_grad(&e, 2, 3, &p).unwrap();
        assert!((l - direct).abs() < 1e-12);
    }
}

mod train {
    use evsv_core::encoder::train::*;
    use evsv_core::dsp::N_MELS;
    use evsv_core::tensor::Tensor;

    #[test]
    fn wrap_crop_repeats_short_utterances() {
        let src = Tensor::from_vec(&[3, N_MELS], (0..3 * N_MELS).map(|v| v as f64).collect()).unwrap();
        let mut dst = vec![0.0; 5 * N_MELS];
        crop_into(&src, 2, 5, &mut dst, 0, 1);
        let firsts: Vec<f64> = (0..5).map(|t| dst[t * N_MELS]).collect();
        let l = N_MELS as f64;
        assert_eq!(firsts, vec![2.0 * l, 0.0, l, 2.0 * l, 0.0]);
    }

    #[test]
    fn too_few_speakers_is_reported() {
        let set = SpeakerSet {
            speakers: (0..4)
                .map(|s| (format!("s{s}"), vec![Tensor::zeros(&[20, N_MELS]); 6]))
                .collect(),
        };
        let err = train_sv(&set, None, &SvTrainConfig::default(), 0).unwrap_err();
        assert!(err.to_string().starts_with("corpus too small for N×M batch"));
    }
}
