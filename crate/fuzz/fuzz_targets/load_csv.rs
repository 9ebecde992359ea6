#![no_main]

use agreeloss::data::{from_csv_reader, ColumnSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Parsing untrusted CSV must never panic; every loaded example must
    // satisfy the documented invariants.
    if let Ok(examples) = from_csv_reader(data, &ColumnSpec::default()) {
        for example in &examples {
            assert!(example.validate().is_ok());
            assert!(2 * example.agreeing_votes() > example.num_votes);
        }
    }
});
