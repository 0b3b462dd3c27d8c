use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use voidcell::association::associate;
use voidcell::channel::{ChannelParams, WeightLaw};
use voidcell::par::{map_replications, map_replications_seq, Streams};
use voidcell::point_process::sample_ppp;
use voidcell::SimulationWindow;

const LAMBDA_U: f64 = 370.0;

fn void_count(rep: u64, streams: &Streams, lambda_b: f64, w: &SimulationWindow, law: &WeightLaw) -> usize {
    let cp = ChannelParams::new(1.0, 0.0, 1.0, 4.0).unwrap();
    let mut rng = streams.rng(0, rep);
    let bs = sample_ppp(lambda_b, w, &mut rng).unwrap();
    let users = sample_ppp(LAMBDA_U, w, &mut rng).unwrap();
    if bs.is_empty() {
        return 0;
    }
    let out = associate(&bs, &users, &cp, law, &mut rng).unwrap();
    out.cell_counts.iter().filter(|&&c| c == 0).count()
}

fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("void_replications");
    group.sample_size(10);
    let w = SimulationWindow::toroidal(2.0).unwrap();
    let streams = Streams::new(7);
    let reps = 64;
    for (name, law) in [("nearest", WeightLaw::Nearest), ("unit", WeightLaw::Unit)] {
        let lambda_b = LAMBDA_U / 2.0;
        group.bench_with_input(BenchmarkId::new("parallel", name), &law, |b, law| {
            b.iter(|| map_replications(reps, |r| void_count(r, &streams, lambda_b, &w, law)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", name), &law, |b, law| {
            b.iter(|| map_replications_seq(reps, |r| void_count(r, &streams, lambda_b, &w, law)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
