#![no_main]
#[macro_use]
extern crate libfuzzer_sys;

use slelab_core::field::FieldRecord;

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = FieldRecord::decode(data) {
        let again = FieldRecord::decode(&rec.encode()).expect("re-encoded record decodes");
        assert_eq!(again.nodes.len(), rec.nodes.len());
        assert_eq!(again.seed, rec.seed);
    }
});
