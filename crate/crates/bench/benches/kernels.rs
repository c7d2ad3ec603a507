use criterion::{black_box, criterion_group, criterion_main, Criterion};
use geompress_core::orbit::{fixed_point_roots, preimage_tree};
use geompress_core::pressure::tree_pressure_from_tree;
use geompress_core::registry;

fn tree_kernels(c: &mut Criterion) {
    let sys = registry::cheb3();
    c.bench_function("preimage-tree-depth-8", |b| {
        b.iter(|| preimage_tree(&sys.map, &sys.repeller, black_box(0.3), 8).unwrap())
    });

    let tree = preimage_tree(&sys.map, &sys.repeller, 0.3, 10).unwrap();
    c.bench_function("tree-pressure-grid-point", |b| {
        b.iter(|| tree_pressure_from_tree(&tree, black_box(1.0)))
    });
}

fn periodic_kernels(c: &mut Criterion) {
    let sys = registry::cheb3();
    let mut group = c.benchmark_group("periodic");
    group.sample_size(10);
    group.bench_function("fixed-points-n8", |b| {
        b.iter(|| fixed_point_roots(&sys.map, black_box(8), 1 << 40).unwrap())
    });
    group.finish();
}

fn conformal_kernels(c: &mut Criterion) {
    let sys = registry::cheb3();
    let mut group = c.benchmark_group("conformal");
    group.sample_size(10);
    group.bench_function("patterson-sullivan-depth-10", |b| {
        b.iter(|| {
            geompress_core::conformal::patterson_sullivan(
                &sys.map,
                &sys.repeller,
                black_box(0.3),
                1.0,
                1.001,
                10,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, tree_kernels, periodic_kernels, conformal_kernels);
criterion_main!(benches);
