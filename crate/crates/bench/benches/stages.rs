use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{Point3, Vector3};
use tspdraw::kinematics::{ik, IkParams, KinematicChain, Plane, ToolPose};
use tspdraw::pathopt::{optimize_path, PathOptParams};
use tspdraw::stippling::{stipple, StippleMethod, StippleParams};
use tspdraw::tsp::{solve, tour_to_polyline, TspParams};
use tspdraw_bench::{ramp, uniform_points};

fn tsp(c: &mut Criterion) {
    let mut g = c.benchmark_group("tsp");
    g.sample_size(10);
    for n in [1_000, 5_000, 20_000] {
        let pts = uniform_points(n, 512.0, 7);
        let params = TspParams {
            time_budget: f64::INFINITY,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, pts| {
            b.iter(|| solve(pts, &params).unwrap())
        });
    }
    g.finish();
}

fn stippling(c: &mut Criterion) {
    let mut g = c.benchmark_group("stipple");
    g.sample_size(10);
    let field = ramp(256);
    for method in [StippleMethod::Lbg, StippleMethod::Voronoi] {
        let params = StippleParams {
            target_count: 4_000,
            method,
            ..Default::default()
        };
        g.bench_function(format!("{method:?}"), |b| b.iter(|| stipple(&field, &params).unwrap()));
    }
    g.finish();
}

fn path_optimization(c: &mut Criterion) {
    let pts = uniform_points(5_000, 512.0, 3);
    let tour = solve(&pts, &TspParams::default()).unwrap();
    let line = tour_to_polyline(&tour, &pts);
    let params = PathOptParams::default();
    c.bench_function("optimize_path/5000", |b| b.iter(|| optimize_path(&line, &params).unwrap()));
}

fn inverse_kinematics(c: &mut Criterion) {
    let arm = KinematicChain::preset("ur5e-like").unwrap();
    let plane = Plane::new(Point3::origin(), Vector3::z()).unwrap();
    let target = ToolPose::new(Point3::new(-450.0, -150.0, 0.0), plane.pen_orientation());
    let seed = arm.aimed_seed(&target.position);
    let params = IkParams::default();
    c.bench_function("ik/ur5e-like", |b| b.iter(|| ik(&arm, &target, &seed, &params).unwrap()));
}

criterion_group!(benches, tsp, stippling, path_optimization, inverse_kinematics);
criterion_main!(benches);
