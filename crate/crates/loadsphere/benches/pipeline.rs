//! Benchmarks for the data-parallel hot paths against explicit sequential
//! equivalents built from the public per-item API.
//!
//! With default features the library paths run on rayon, so each group shows
//! the parallel speed-up directly; with `--no-default-features` both sides are
//! sequential and should coincide.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;

use loadsphere::curve::{fit_principal_curve, order_dataset, project_to_curve, CurveConfig};
use loadsphere::embedding::{fit_pca, project};
use loadsphere::oracle::{generate_process, SyntheticProcessConfig};
use loadsphere::profiles::{normalize, standardize, standardize_row, ProfileMatrix};

fn corpus(samples: usize) -> ProfileMatrix {
    // Tile the synthetic process to reach the requested row count.
    let base = SyntheticProcessConfig::default();
    let reps = samples.div_ceil(base.samples);
    let mut values = DMatrix::zeros(samples, base.steps);
    let mut ids = Vec::with_capacity(samples);
    for r in 0..reps {
        let config = SyntheticProcessConfig { seed: r as u64, ..Default::default() };
        let (p, _) = generate_process(&config, true).unwrap();
        for i in 0..p.nrows() {
            let row = r * base.samples + i;
            if row >= samples {
                break;
            }
            values.row_mut(row).copy_from(&p.values().row(i));
            ids.push(format!("m{row:05}"));
        }
    }
    ProfileMatrix::from_values(values, ids).unwrap()
}

fn bench_standardize(c: &mut Criterion) {
    let mut group = c.benchmark_group("standardize");
    for &m in &[100usize, 1000, 5000] {
        let profiles = corpus(m);
        group.bench_with_input(BenchmarkId::new("library", m), &profiles, |b, p| {
            b.iter(|| standardize(p).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", m), &profiles, |b, p| {
            b.iter(|| {
                let v = p.values();
                let rows: Vec<Vec<f64>> = (0..v.nrows())
                    .map(|i| {
                        let row: Vec<f64> = v.row(i).iter().copied().collect();
                        standardize_row(&row).unwrap()
                    })
                    .collect();
                rows
            })
        });
    }
    group.finish();
}

fn bench_curve_projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("curve_projection");
    group.sample_size(20);
    for &m in &[100usize, 1000, 5000] {
        let profiles = corpus(m);
        let x = normalize(&standardize(&profiles).unwrap());
        let model = fit_pca(&x).unwrap();
        let z = project(&model, &x, 3).unwrap().coords;
        let curve = fit_principal_curve(&z, &CurveConfig::default()).unwrap();
        group.bench_with_input(BenchmarkId::new("library", m), &z, |b, z| {
            b.iter(|| order_dataset(&curve, z))
        });
        group.bench_with_input(BenchmarkId::new("sequential", m), &z, |b, z| {
            b.iter(|| {
                let s: Vec<f64> = (0..z.nrows())
                    .map(|i| {
                        let p = [z[(i, 0)], z[(i, 1)], z[(i, 2)]];
                        project_to_curve(&curve, &p).0
                    })
                    .collect();
                s
            })
        });
    }
    group.finish();
}

fn bench_curve_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("curve_fit");
    group.sample_size(10);
    for &m in &[100usize, 1000] {
        let profiles = corpus(m);
        let x = normalize(&standardize(&profiles).unwrap());
        let model = fit_pca(&x).unwrap();
        let z = project(&model, &x, 3).unwrap().coords;
        group.bench_with_input(BenchmarkId::from_parameter(m), &z, |b, z| {
            b.iter(|| fit_principal_curve(z, &CurveConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_standardize, bench_curve_projection, bench_curve_fit);
criterion_main!(benches);
