use criterion::{black_box, criterion_group, criterion_main, Criterion};

use evsv_bench::{random_tensor, trial_set, voiced_tone};
use evsv_core::converter::{generator_grads, CycleGanConfig, CycleGanModel, FeatureKind};
use evsv_core::dsp::{cwt_decompose, estimate_f0, mcep_analyze, mel_spectrogram, synthesize};
use evsv_core::encoder::{ge2e_loss_and_grad, EncoderShape, Ge2eParams, SpeakerEncoder};
use evsv_core::eval::{compute_eer, per_emotion_breakdown};
use evsv_core::SeededRng;

fn dsp(c: &mut Criterion) {
    let w = voiced_tone(140.0, 1.5);
    let mut g = c.benchmark_group("dsp");
    g.sample_size(20);
    g.bench_function("mel_spectrogram_1.5s", |b| b.iter(|| mel_spectrogram(black_box(&w)).unwrap()));
    g.bench_function("mcep_analyze_1.5s", |b| b.iter(|| mcep_analyze(black_box(&w)).unwrap()));
    g.bench_function("estimate_f0_1.5s", |b| b.iter(|| estimate_f0(black_box(&w)).unwrap()));
    let f0 = estimate_f0(&w).unwrap();
    g.bench_function("cwt_decompose", |b| b.iter(|| cwt_decompose(black_box(&f0)).unwrap()));
    let m = mcep_analyze(&w).unwrap();
    let aligned = evsv_core::dsp::synth::align_contour(&f0, m.num_frames()).unwrap();
    g.bench_function("synthesize_1.5s", |b| b.iter(|| synthesize(black_box(&m), black_box(&aligned)).unwrap()));
    g.finish();
}

fn encoder(c: &mut Criterion) {
    let shape = EncoderShape {
        lstm_layers: 2,
        hidden_size: 32,
        dvector_dim: 32,
    };
    let model = SpeakerEncoder::new(shape, &mut SeededRng::new(1));
    let mut g = c.benchmark_group("encoder");
    g.sample_size(20);
    let utt = random_tensor(&[150, 40], 2);
    g.bench_function("embed_150_frames", |b| b.iter(|| model.embed(black_box(&utt)).unwrap()));
    let batch = random_tensor(&[60, 32, 40], 3);
    g.bench_function("forward_backward_60x32", |b| {
        b.iter(|| {
            let (emb, cache) = model.forward(black_box(&batch)).unwrap();
            let (_, d, _) = ge2e_loss_and_grad(&emb, 8, 4, &Ge2eParams::new(10.0, -5.0)).unwrap();
            model.backward(&cache, &d).unwrap()
        })
    });
    g.finish();
}

fn cyclegan(c: &mut Criterion) {
    let config = CycleGanConfig::default();
    let model = CycleGanModel::new(FeatureKind::Mcep24, &config, &mut SeededRng::new(4));
    let x = random_tensor(&[8, 32, 24], 5);
    let y = random_tensor(&[8, 32, 24], 6);
    let mut g = c.benchmark_group("cyclegan");
    g.sample_size(20);
    g.bench_function("generator_grads_8x32", |b| {
        b.iter(|| generator_grads(black_box(&model), &x, &y, 0, &config, true).unwrap())
    });
    g.finish();
}

fn eval(c: &mut Criterion) {
    let set = trial_set(20_000, 7);
    let mut g = c.benchmark_group("eval");
    g.bench_function("compute_eer_20k", |b| b.iter(|| compute_eer(black_box(&set)).unwrap()));
    g.bench_function("per_emotion_breakdown_20k", |b| b.iter(|| per_emotion_breakdown(black_box(&set)).unwrap()));
    g.finish();
}

criterion_group!(benches, dsp, encoder, cyclegan, eval);
criterion_main!(benches);
