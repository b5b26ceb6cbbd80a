//! Replays the checked-in fuzz corpus through the same round-trip checks the
//! fuzz targets make, so the seeds stay valid inputs.

use std::path::PathBuf;

use poolcv::dataset::{parse_csv, parse_planted};
use poolcv::report::{parse_report, to_json};

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {target}");
    files
        .into_iter()
        .map(|p| {
            let b = std::fs::read(&p).unwrap();
            (p, b)
        })
        .collect()
}

#[test]
fn csv_seeds_round_trip() {
    for (path, bytes) in corpus("fuzz_csv") {
        let ds = parse_csv(bytes.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(parse_csv(buf.as_slice()).unwrap(), ds, "{}", path.display());
    }
}

#[test]
fn report_seeds_round_trip() {
    for (path, bytes) in corpus("fuzz_report_json") {
        let report = parse_report(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let text = to_json(&report).unwrap();
        assert_eq!(text.as_bytes(), bytes.as_slice(), "{}", path.display());
    }
}

#[test]
fn planted_seeds_round_trip() {
    for (path, bytes) in corpus("fuzz_planted") {
        let text = std::str::from_utf8(&bytes).unwrap();
        let planted = parse_planted(text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let rendered = planted
            .iter()
            .map(|(j, d)| format!("{j}:{d:?}"))
            .collect::<Vec<_>>()
            .join(",");
        assert_eq!(parse_planted(&rendered).unwrap(), planted);
    }
}
