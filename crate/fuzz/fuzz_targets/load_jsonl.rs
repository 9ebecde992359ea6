#![no_main]

use agreeloss::data::{from_jsonl_reader, ColumnSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(examples) = from_jsonl_reader(data, &ColumnSpec::default()) {
        for example in &examples {
            assert!(example.validate().is_ok());
        }
    }
});
