use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use so3gait::manifold::build_goal_manifold;
use so3gait::par;
use so3gait::planner::so3_plan_with_index;
use so3gait::scenario::{run_scenario, Scenario};
use so3gait::{Rot3, DEG};

fn batch_planning(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let goal = Rot3::random(&mut rng);
    let index = build_goal_manifold(goal, 2.0 * DEG).unwrap();
    let starts: Vec<Rot3> = (0..256).map(|_| Rot3::random(&mut rng)).collect();
    let plan = |s: &Rot3| so3_plan_with_index(*s, &index, 0.2, 2.0 * DEG).map(|p| p.actions.len()).ok();

    let mut g = c.benchmark_group("batch_planning");
    g.sample_size(10);
    g.bench_with_input(BenchmarkId::new("sequential", starts.len()), &starts, |b, s| {
        b.iter(|| par::map_sequential(s, plan))
    });
    g.bench_with_input(BenchmarkId::new("parallel", starts.len()), &starts, |b, s| b.iter(|| par::map(s, plan)));
    g.finish();
}

fn repetitions(c: &mut Criterion) {
    let s = Scenario::from_toml(
        r#"
        seed = 1
        repetitions = 8
        [object]
        preset = "sphere"
        [[goals]]
        face = "B"
        "#,
    )
    .unwrap();
    let reps: Vec<usize> = (0..s.repetitions).collect();
    let one = |&rep: &usize| so3gait::scenario::run_episode(&s, rep).map(|(m, _)| m.success).ok();

    let mut g = c.benchmark_group("repetitions");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| par::map_sequential(&reps, one)));
    g.bench_function("parallel", |b| b.iter(|| par::map(&reps, one)));
    g.bench_function("run_scenario", |b| b.iter(|| run_scenario(&s).unwrap().metrics.len()));
    g.finish();
}

criterion_group!(benches, batch_planning, repetitions);
criterion_main!(benches);
