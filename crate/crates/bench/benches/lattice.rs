use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fieldkde_bench::{innovations, power_coefficients};
use fieldkde_core::field::{generate_coupled_fields, lattice_convolve, ConvMethod, TruncationPlan};
use fieldkde_core::innovations::{InnovationModel, SeedSpec};
use fieldkde_core::kde::{kernel_sum, KernelModel};
use fieldkde_core::CoefficientModel;
use std::hint::black_box;

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolve_2d");
    group.sample_size(10);
    for &radius in &[4usize, 12, 32] {
        let n = 128;
        let side = n + radius - 1;
        let input = innovations(2, side);
        let coeffs = power_coefficients(2, 4.0, radius);
        for method in [ConvMethod::Direct, ConvMethod::Fourier] {
            group.bench_with_input(BenchmarkId::new(format!("{method:?}"), radius), &radius, |b, &r| {
                b.iter(|| lattice_convolve(2, black_box(&input), side, &coeffs, r, method).unwrap())
            });
        }
    }
    group.finish();
}

fn coupled_generation(c: &mut Criterion) {
    let model = CoefficientModel::power_decay(2, 4.0, 1.0).unwrap();
    let plan = TruncationPlan::fixed(&model, 12).unwrap();
    c.bench_function("coupled_fields_d2_n64_M12", |b| {
        b.iter(|| {
            generate_coupled_fields(
                &model,
                &InnovationModel::Gaussian,
                64,
                5,
                &plan,
                SeedSpec::new(1, 64, 0),
                ConvMethod::Auto,
                1 << 30,
            )
            .unwrap()
        })
    });
}

fn estimator(c: &mut Criterion) {
    let values = innovations(1, 1 << 16);
    c.bench_function("kernel_sum_65536", |b| {
        b.iter(|| kernel_sum(black_box(&values), 0.0, 0.1, KernelModel::Epanechnikov))
    });
}

criterion_group!(benches, convolution, coupled_generation, estimator);
criterion_main!(benches);
