use floorspace::eval::{evaluate, EvalConfig};
use floorspace::floor::GapModel;
use floorspace::model::Partition;
use floorspace::sim::{generate_trace, GaussianParams, SimConfig};

#[test]
fn lat_distribution() {
    for (len, sd) in [(4.0, 0.5), (3.5, 0.5)] {
        let mut lats = Vec::new();
        for seed in 1..=20u64 {
            let mut config = SimConfig::new(4, 120.0, seed);
            config.turn_length = GaussianParams { mean: len, sd };
            config.schedule = vec![(60.0, Partition::from_blocks(vec![vec!["A","B"], vec!["C","D"]]).unwrap())];
            let trace = generate_trace(&config).unwrap();
            let report = evaluate(&trace, &GapModel::default(), &EvalConfig::default()).unwrap();
            lats.push((seed, report.pairwise_accuracy, report.schism_latencies[0].latency));
        }
        println!("len {len} sd {sd}:");
        for (s, a, l) in lats { println!("  seed {s:2} acc {a:.3} lat {l:?}"); }
    }
}
