use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vdwlab_core::hamiltonian::build_full_hamiltonian_with;
use vdwlab_core::spectral::{ground_state, MethodChoice};
use vdwlab_core::{Exec, GridSpec, LinearOperator, SolverSettings, SystemConfig};

const POLICIES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn hamiltonian_apply(c: &mut Criterion) {
    let cfg = SystemConfig::drude_pair(1.0, 1.0, 0.2).unwrap();
    let mut group = c.benchmark_group("apply");
    for points in [128usize, 512] {
        let g = GridSpec::cartesian(1, points, 6.0).unwrap();
        for (name, exec) in POLICIES {
            let h = build_full_hamiltonian_with(&cfg, &g, exec).unwrap();
            let x: Vec<f64> = (0..h.dim()).map(|k| ((k % 97) as f64).sin()).collect();
            let mut y = vec![0.0; h.dim()];
            group.bench_with_input(BenchmarkId::new(name, points * points), &x, |b, x| {
                b.iter(|| h.apply_into(x, &mut y))
            });
        }
    }
    group.finish();
}

fn lanczos_ground_state(c: &mut Criterion) {
    let cfg = SystemConfig::drude_pair(1.0, 1.0, 0.2).unwrap();
    let g = GridSpec::cartesian(1, 96, 6.0).unwrap();
    let mut group = c.benchmark_group("lanczos");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let h = build_full_hamiltonian_with(&cfg, &g, exec).unwrap();
        let s = SolverSettings { exec, ..SolverSettings::default() }.with_method(MethodChoice::Iterative);
        group.bench_function(name, |b| b.iter(|| ground_state(&h, &s).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, hamiltonian_apply, lanczos_ground_state);
criterion_main!(benches);
