#![no_main]
#[macro_use]
extern crate libfuzzer_sys;

use slelab_cli::ResultsFile;
use slelab_core::field::FieldSidecar;
use slelab_core::stats::TestReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = FieldSidecar::from_json(text) {
        let _ = s.grid();
        let _ = FieldSidecar::from_json(&s.to_json());
    }
    if let Ok(r) = TestReport::from_json(text) {
        let _ = r.is_consistent();
    }
    let _ = ResultsFile::from_json(text);
});
