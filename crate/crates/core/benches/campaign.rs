use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use statarb_core::frictions::CostSpec;
use statarb_core::oumodel::sample_paths;
use statarb_core::par::Execution;
use statarb_core::simharness::{generate_paper_params, run_campaign, CellSpec, Family, SimCampaign};

fn campaign(exec: Execution) -> SimCampaign {
    let (ou, p) = generate_paper_params(30, 1).unwrap();
    let mut c = SimCampaign::new(Arc::new(ou), p, 20.0, 40, 400, 7);
    c.cells.push(CellSpec::new(Family::Exp, 1.0, 0.02));
    c.cells.push(CellSpec::new(Family::Mv, 1.0, 0.02));
    let mut t = CellSpec::new(Family::MvTcost, 1.0, 0.02);
    t.cost = Some(CostSpec::lambda(0.5));
    c.cells.push(t);
    c.exec = exec;
    c
}

fn bench(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("campaign_n30_m400");
    g.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let c = campaign(exec);
        g.bench_function(name, |b| b.iter(|| run_campaign(&c).unwrap()));
    }
    g.finish();

    let mut g = cr.benchmark_group("sample_paths_n30_m2000");
    g.sample_size(10);
    let c = campaign(Execution::Parallel);
    let grid = c.grid();
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        g.bench_function(name, |b| b.iter(|| sample_paths(&c.ou, &c.x0, &grid, 2000, 3, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
