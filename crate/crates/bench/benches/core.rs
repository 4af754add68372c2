use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use qa_label::bounds::{bound_sweep, BoundInputs};
use qa_label::generative::{oracle_pmf, qa_pmf};
use qa_label::labeling::{rng_from_seed, simulate_dataset};
use qa_label::model::{AdamConfig, AdamState};
use qa_label::{
    AnnotatorModel, BaseLoss, ClassSpace, MlpParams, PosteriorVector, QuestionSpec, QuestionType,
    Supervision,
};
use qa_label_bench::labeled_batch;

fn pmfs(c: &mut Criterion) {
    let space = ClassSpace::new(10).unwrap();
    let post = PosteriorVector::random(space, &mut rng_from_seed(1));
    let mut g = c.benchmark_group("pmf_k10_i5");
    for qtype in QuestionType::ALL {
        g.bench_function(format!("closed_form_{qtype}"), |b| {
            b.iter(|| qa_pmf(qtype, black_box(&post), 5).unwrap())
        });
        g.bench_function(format!("oracle_{qtype}"), |b| {
            b.iter(|| oracle_pmf(qtype, black_box(&post), 5).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let space = ClassSpace::new(10).unwrap();
    let n = 10_000;
    let truth: Vec<usize> = (0..n).map(|i| i % 10 + 1).collect();
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let annotator = AnnotatorModel::from_labels(&truth);
    let mut g = c.benchmark_group("simulate_10k_events");
    for qtype in QuestionType::ALL {
        let spec = QuestionSpec::new(qtype, 3, space).unwrap();
        g.bench_function(qtype.to_string(), |b| {
            b.iter(|| simulate_dataset(7, &spec, &annotator, black_box(&ids)).unwrap())
        });
    }
    g.finish();
}

fn training_step(c: &mut Criterion) {
    // one mini-batch of the reference setup: 28x28 inputs, 500 hidden units
    let (d, h, k, n) = (784, 500, 10, 500);
    let (x, labels) = labeled_batch(n, d, k, QuestionType::WhichOne, 5, 3);
    let params = MlpParams::init(d, h, k, &mut rng_from_seed(4)).unwrap();
    let supervision = Supervision::Qa {
        qtype: QuestionType::WhichOne,
        items: 5,
    };
    let mut g = c.benchmark_group("mlp_batch500_d784_h500");
    g.sample_size(10);
    g.bench_function("forward", |b| {
        b.iter(|| params.forward_batch(black_box(x.view())).unwrap())
    });
    g.bench_function("loss_and_grad", |b| {
        b.iter(|| {
            params
                .loss_and_grad(black_box(x.view()), &labels, supervision, BaseLoss::Mae)
                .unwrap()
        })
    });
    let (_, grad) = params
        .loss_and_grad(x.view(), &labels, supervision, BaseLoss::Mae)
        .unwrap();
    let cfg = AdamConfig::default();
    g.bench_function("adam_step", |b| {
        b.iter_batched(
            || (params.clone(), AdamState::new(&params)),
            |(mut p, mut s)| s.step(&mut p, &grad, &cfg).unwrap(),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn bounds(c: &mut Criterion) {
    let base = BoundInputs {
        k: 10,
        items: 1,
        rho: 1.0,
        c_l: 2.0,
        delta: 0.05,
        n: 10_000,
        rad_sum: 0.1,
    };
    c.bench_function("bound_sweep_k10", |b| {
        b.iter(|| bound_sweep(black_box(&base)).unwrap())
    });
}

criterion_group!(benches, pmfs, simulation, training_step, bounds);
criterion_main!(benches);
