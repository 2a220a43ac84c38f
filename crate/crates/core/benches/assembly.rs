use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hmsem::assembly::{assemble_pencil, Coefficient};
use hmsem::basis1d::build_basis;
use hmsem::dofmap::{build_dofmap, clamp_boundary};
use hmsem::mesh::{build_mesh, BoxDomain};
use hmsem::Execution;

fn pencil_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_pencil");
    group.sample_size(10);
    let cases = [
        ("lshape2d_l1_N10_f1", BoxDomain::l_shape_2d(), 1, 10, "affine 8 1 -1"),
        ("lshape3d_l0_N6_n16", BoxDomain::l_shape_3d(), 0, 6, "constant 16"),
    ];
    for (name, dom, level, n, coeff) in cases {
        let coeff = Coefficient::parse(coeff).unwrap();
        let coeff = match coeff {
            Coefficient::Affine { c0, c } if dom.dim() == 3 => Coefficient::Affine { c0, c: vec![c[0], c[1], 0.0] },
            other => other,
        };
        let mesh = build_mesh(&dom, level).unwrap();
        let dm = clamp_boundary(&build_dofmap(&mesh, 2, n).unwrap(), &mesh);
        let basis = build_basis(2, n).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(name, format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| assemble_pencil(&mesh, &dm, &basis, &coeff, None, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, pencil_assembly);
criterion_main!(benches);
