//! Benchmarks for the enumeration-heavy paths: double-coset transversals,
//! Cartan cells of tracked-precision matrices, and both transforms.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use hecke_core::cosets::transversal;
use hecke_core::{
    convolve0, derived_satake1_all, precision_for, satake0, Cocharacter, ComputeOpts, Family,
    HeckeElem0, HeckeElem1, PMatrix, Ring, RootDatum, TorusDHAElem,
};

fn bench_transversal(c: &mut Criterion) {
    let datum = RootDatum::new(Family::GL, 3).unwrap();
    let opts = ComputeOpts::default();
    let cell = Cocharacter(vec![-1, 0, 1]);
    c.bench_function("transversal/GL3/(-1,0,1)/p=5", |b| {
        b.iter(|| transversal(black_box(&datum), 5, black_box(&cell), &opts).unwrap())
    });
}

fn bench_cartan_cell(c: &mut Criterion) {
    let datum = RootDatum::new(Family::GL, 3).unwrap();
    let ctx = precision_for(5, 2, 8).unwrap();
    let m = PMatrix::from_int_rows(
        ctx,
        &[vec![25, 7, 3], vec![10, 5, 1], vec![125, 40, 5]],
    )
    .unwrap();
    c.bench_function("cartan_cell/GL3/3x3", |b| {
        b.iter(|| black_box(&m).cartan_cell(&datum).unwrap())
    });
}

fn bench_satake0(c: &mut Criterion) {
    let datum = RootDatum::new(Family::PGL, 2).unwrap();
    let opts = ComputeOpts::default();
    let mut t = HeckeElem0::new(datum, 5, Ring::ZmodPa { a: 1 }).unwrap();
    t.add_term(Cocharacter(vec![-3, 0]), 1).unwrap();
    c.bench_function("satake0/PGL2/T3/p=5", |b| {
        b.iter(|| satake0(black_box(&t), None, &opts).unwrap())
    });
}

fn bench_convolve0(c: &mut Criterion) {
    let datum = RootDatum::new(Family::PGL, 2).unwrap();
    let opts = ComputeOpts::default();
    let mut t1 = HeckeElem0::new(datum, 5, Ring::ZmodPa { a: 1 }).unwrap();
    t1.add_term(Cocharacter(vec![-2, 0]), 1).unwrap();
    let mut t2 = HeckeElem0::new(datum, 5, Ring::ZmodPa { a: 1 }).unwrap();
    t2.add_term(Cocharacter(vec![-1, 0]), 1).unwrap();
    c.bench_function("convolve0/PGL2/T2*T1/p=5", |b| {
        b.iter(|| convolve0(black_box(&t1), black_box(&t2), &opts).unwrap())
    });
}

fn bench_satake1(c: &mut Criterion) {
    let datum = RootDatum::new(Family::PGL, 2).unwrap();
    let ctx = precision_for(5, 1, 8).unwrap();
    let opts = ComputeOpts::default();
    let f = HeckeElem1::basis(datum, ctx, Cocharacter(vec![-3, 0])).unwrap();
    c.bench_function("satake1/PGL2/f3/p=5", |b| {
        b.iter(|| derived_satake1_all(black_box(&f), &opts).unwrap())
    });
}

fn bench_dha_mul(c: &mut Criterion) {
    let (p, a, rank) = (5u64, 2u32, 3usize);
    let mut x = TorusDHAElem::new(rank, rank, p, a).unwrap();
    let mut y = TorusDHAElem::new(rank, rank, p, a).unwrap();
    for i in 0..rank {
        for s in [-1i64, 1] {
            let mut key = vec![0i64; rank];
            key[i] = s;
            x.add_term(Cocharacter(key.clone()), 1 << i, (i as u64 + 2) % 25).unwrap();
            y.add_term(Cocharacter(key), (1 << i) >> 1, (2 * i as u64 + 3) % 25).unwrap();
        }
    }
    c.bench_function("dha_mul/rank3/6x6-terms", |b| {
        b.iter(|| black_box(&x).mul(black_box(&y)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_transversal,
    bench_cartan_cell,
    bench_satake0,
    bench_convolve0,
    bench_satake1,
    bench_dha_mul
);
criterion_main!(benches);
