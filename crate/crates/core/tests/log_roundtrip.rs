use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;

use dsync::{Event, Log, Value};

fn bundled() -> Vec<PathBuf> {
    let root = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"));
    let mut files = vec![root.join("example_jobs.csv")];
    let mut logs: Vec<PathBuf> = fs::read_dir(root.join("logs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    logs.sort();
    files.extend(logs);
    files
}

#[test]
fn bundled_logs_write_back_identically() {
    let files = bundled();
    assert!(files.len() >= 6);
    for path in files {
        let text = fs::read_to_string(&path).unwrap();
        let log = Log::parse(&text).unwrap();
        assert!(!log.is_empty());
        assert_eq!(log.to_csv(), text, "{}", path.display());
        assert_eq!(Log::parse(&log.to_csv()).unwrap(), log);
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = Log::load("/nonexistent/dir/log.csv").unwrap_err();
    assert!(!err.is_validation());
    assert!(err.to_string().contains("/nonexistent/dir/log.csv"));
}

#[test]
fn bad_rows_name_their_line() {
    let err = Log::parse("case,activity,start,complete\n1,a,0,1\n2,b,5,x\n").unwrap_err();
    assert!(err.to_string().contains("row 3"), "{err}");
    let err = Log::parse("case,activity,start,complete\n1,a,4,1\n").unwrap_err();
    assert!(err.to_string().contains("row 2"), "{err}");
    assert!(Log::parse("case,activity,start\n1,a,0\n").is_err());
}

fn event() -> impl Strategy<Value = Event> {
    (
        "[a-z0-9_]{1,6}",
        "[a-z][a-z ]{0,8}[a-z]",
        0.0f64..1e6,
        0.0f64..100.0,
        prop::option::of("[a-z0-9]{1,4}"),
        prop::option::of(-1e9f64..1e9),
        prop::option::of("[a-z]{1,5}"),
        prop::option::of(any::<bool>()),
    )
        .prop_map(|(case, label, start, d, res, n, s, b)| {
            let mut e = Event::new(case, label, start, start + d);
            e.resource = res;
            if let Some(n) = n {
                e.attrs.insert("n".into(), Value::Number(n));
            }
            if let Some(s) = s {
                e.attrs.insert("s".into(), Value::Text(s));
            }
            if let Some(b) = b {
                e.attrs.insert("b".into(), Value::Bool(b));
            }
            e
        })
}

proptest! {
    #[test]
    fn written_logs_parse_back(events in prop::collection::vec(event(), 0..30)) {
        let log = Log::from_events(events);
        let text = log.to_csv();
        let back = Log::parse(&text).unwrap();
        prop_assert_eq!(back.events(), log.events());
        prop_assert_eq!(back.to_csv(), text);
    }
}
