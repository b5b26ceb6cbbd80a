#![no_main]

use libfuzzer_sys::fuzz_target;
use poolcv::dataset::parse_planted;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(planted) = parse_planted(text) else {
        return;
    };
    let rendered = planted
        .iter()
        .map(|(j, d)| format!("{j}:{d:?}"))
        .collect::<Vec<_>>()
        .join(",");
    assert_eq!(
        parse_planted(&rendered).expect("reparse rendered list"),
        planted
    );
});
