#![no_main]

use libfuzzer_sys::fuzz_target;
use poolcv::dataset::parse_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(ds) = parse_csv(data) else { return };
    // anything accepted must survive a write/parse round trip unchanged
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).expect("write accepted dataset");
    let again = parse_csv(buf.as_slice()).expect("reparse written dataset");
    assert_eq!(ds, again);
});
