//! Logs produced by the simulator must replay perfectly over the net that
//! produced them, with and without its guards.

use dsync::config::RunConfig;
use dsync::extract::discover;
use dsync::replay::{replay, replay_checked};
use dsync::report::Report;
use dsync::sim::{simulate, SimConfig};
use dsync::Net;

const MODELS: [&str; 5] = ["priority", "blocking", "holdbatch", "choice", "supplychain"];

fn model(name: &str) -> Net {
    Net::load(format!("{}/../../models/{name}.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn cfg(seed: u64, cases: usize) -> SimConfig {
    SimConfig {
        seed,
        max_cases: cases,
        ..SimConfig::default()
    }
}

#[test]
fn simulated_logs_fit_their_net() {
    for name in MODELS {
        let net = model(name);
        for seed in 1..=3 {
            let log = simulate(&net, &cfg(seed, 200)).unwrap();
            let checked = replay_checked(&log, &net).unwrap().report;
            assert!(checked.unmatched.is_empty(), "{name} seed {seed}: {:?}", &checked.unmatched[..1]);
            let free = replay(&log, &net.strip_guards()).unwrap().report;
            assert_eq!(free.matched, log.len(), "{name} seed {seed}");
        }
    }
}

#[test]
fn case_budget_is_respected() {
    for name in MODELS {
        let log = simulate(&model(name), &cfg(5, 50)).unwrap();
        assert_eq!(log.traces().len(), 50, "{name}");
    }
}

#[test]
fn same_seed_same_bytes() {
    for name in MODELS {
        let net = model(name);
        let a = simulate(&net, &cfg(11, 150)).unwrap().to_csv();
        let b = simulate(&net, &cfg(11, 150)).unwrap().to_csv();
        assert_eq!(a, b, "{name}");
        let c = simulate(&net, &cfg(12, 150)).unwrap().to_csv();
        assert_ne!(a, c, "{name}");
    }
}

#[test]
fn same_input_same_report() {
    let net = model("supplychain");
    let log = simulate(&net, &cfg(3, 400)).unwrap();
    let rc = RunConfig::default();
    let run = || {
        let d = discover(&log, &net, &rc.tree, &rc.extraction).unwrap();
        Report::build(&net, &log, &d, &rc).unwrap().to_json()
    };
    assert_eq!(run(), run());
}
