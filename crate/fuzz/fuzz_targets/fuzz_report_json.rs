#![no_main]

use libfuzzer_sys::fuzz_target;
use poolcv::report::{parse_report, to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(report) = parse_report(data) else {
        return;
    };
    let text = to_json(&report).expect("serialize accepted report");
    let again = parse_report(text.as_bytes()).expect("reparse serialized report");
    assert_eq!(report, again);
});
