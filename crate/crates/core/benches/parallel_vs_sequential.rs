use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use moment_ensemble::ensemble::{lift, rollout_ensemble, Control, ControlSequence, EnsembleGrid, ParameterInterval, RolloutOptions, UnicycleState};
use moment_ensemble::geometry::{moment_polyhedron_bands, Polyhedron};
use moment_ensemble::legendre::signed_part_integrals;
use moment_ensemble::moments::MomentVector;
use moment_ensemble::ocp::{arc_initialization, fd_gradient, point_target, ControlBounds, OcpSpec, Weights};
use moment_ensemble::par::ExecMode;
use moment_ensemble::stl::RobustnessConfig;

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn rollouts(c: &mut Criterion) {
    let interval = ParameterInterval::new(0.9, 1.1).unwrap();
    let seq = ControlSequence::constant(0.01, 400, Control::new(1.0, 0.7)).unwrap();
    let z0 = lift(&UnicycleState::new(0.0, 0.0, 0.0));
    let mut group = c.benchmark_group("rollout_ensemble");
    for members in [50usize, 400] {
        let grid = EnsembleGrid::uniform(interval, members).unwrap();
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, members), &grid, |b, grid| {
                b.iter(|| rollout_ensemble(grid, black_box(&z0), &seq, RolloutOptions::default(), mode).unwrap())
            });
        }
    }
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let order = 8;
    let interval = ParameterInterval::new(0.9, 1.1).unwrap();
    let table = signed_part_integrals(order);
    let keep = Polyhedron::from_box([-0.2, -0.05], [3.3, 2.6]).unwrap();
    let spec = OcpSpec {
        initial: MomentVector::point_mass(order, interval, &lift(&UnicycleState::new(0.0, 0.0, 2.0))),
        target: point_target([3.0, 2.0], order),
        dt: 0.01,
        steps: 200,
        knots: 40,
        bounds: ControlBounds::default(),
        bands: moment_polyhedron_bands(&keep, &table, &[0, 1, 2]).unwrap(),
        nodes: Vec::new(),
        obstacles: Vec::new(),
        formula: None,
        robustness: RobustnessConfig::default(),
        weights: Weights::default(),
        sample_stride: 5,
    };
    let d = arc_initialization(&spec);
    let mut group = c.benchmark_group("fd_gradient");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| b.iter(|| fd_gradient(&spec, black_box(&d), None, 1e-6, mode).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, rollouts, gradients);
criterion_main!(benches);
