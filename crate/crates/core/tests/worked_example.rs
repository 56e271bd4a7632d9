//! The worked example: replaying the nine-event log over the unguarded
//! priority net and building the priority pattern-transition log.

use dsync::constraint::Scalar;
use dsync::patterns::{build_pt_log, detect_constructs, PatternKind};
use dsync::replay::replay;
use dsync::{Feature, Log, Net};

fn net() -> Net {
    Net::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/example_net.json")).unwrap().strip_guards()
}

fn log() -> Log {
    Log::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/example_jobs.csv")).unwrap()
}

fn num(s: Scalar) -> f64 {
    match s {
        Scalar::Num(x) => x,
        Scalar::Bool(b) => panic!("expected number, got {b}"),
    }
}

#[test]
fn replay_fits_every_event() {
    let r = replay(&log(), &net()).unwrap();
    assert_eq!(r.report.matched, 9);
    assert!(r.report.unmatched.is_empty());
}

#[test]
fn priority_rows() {
    let net = net();
    let r = replay(&log(), &net).unwrap();
    let c = detect_constructs(&net)
        .into_iter()
        .find(|c| c.kind == PatternKind::Priority)
        .unwrap();
    let pt = build_pt_log(&net, &c, &r.samples).unwrap();
    let rows: Vec<(f64, bool)> = pt.rows.iter().map(|r| (r.time, r.label)).collect();
    // 10 and 30 are further moments with a free worker and a waiting job
    assert_eq!(rows, [(5.0, false), (10.0, false), (15.0, true), (22.0, true), (30.0, false)]);

    let col = |text: &str| {
        let f: Feature = text.parse().unwrap();
        pt.features.iter().position(|g| *g == f).unwrap()
    };
    let at5 = &pt.rows[0].values;
    assert_eq!(num(at5[col("attrval(arrival,value,max)")]), 855.0);
    assert_eq!(num(at5[col("attrval(q1,value,max)")]), 118.0);
    let ratio = num(at5[col("ratio(attrval(arrival,value,max), attrval(q1,value,max))")]);
    assert!((ratio - 855.0 / 118.0).abs() < 1e-12);
    assert_eq!(format!("{ratio:.2}"), "7.25");
    assert_eq!(at5[col("attrenabled(q1,value,max)")], Scalar::Bool(false));

    // at t=15 job 3 is the oldest ready job and job 5 (146) is announced
    let at15 = &pt.rows[2].values;
    assert_eq!(num(at15[col("attrval(q1,value,max)")]), 855.0);
    let r15 = num(at15[col("ratio(attrval(arrival,value,max), attrval(q1,value,max))")]);
    assert_eq!(format!("{r15:.2}"), "0.17");
    assert_eq!(at15[col("attrenabled(q1,value,max)")], Scalar::Bool(true));

    let at22 = &pt.rows[3].values;
    let r22 = num(at22[col("ratio(attrval(arrival,value,max), attrval(q1,value,max))")]);
    assert_eq!(format!("{r22:.2}"), "0.28");
    assert_eq!(at22[col("attrenabled(q1,value,max)")], Scalar::Bool(true));
}
