#![no_main]

use agreeloss::model::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Decoding an untrusted checkpoint must never panic, and anything it
    // accepts must be internally consistent and re-encode to the input.
    if let Ok(checkpoint) = Checkpoint::read_from(data) {
        assert!(checkpoint.featurizer.validate().is_ok());
        assert_eq!(checkpoint.model.dim(), checkpoint.featurizer.dim);
        assert!(checkpoint.model.bias().is_finite());
        let mut round_trip = Vec::new();
        checkpoint.write_to(&mut round_trip).unwrap();
        assert_eq!(round_trip, data);
    }
});
