#![no_main]

use agreeloss::features::{featurize, tokenize, FeaturizerConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let configs = [
        FeaturizerConfig::default(),
        FeaturizerConfig {
            dim: 1 << 10,
            ngram_min: 1,
            ngram_max: 3,
            lowercase: false,
            normalize: false,
        },
    ];
    for cfg in configs {
        let tokens = tokenize(text, &cfg);
        assert!(tokens.iter().all(|t| !t.is_empty()));
        let v = featurize(text, &cfg);
        assert_eq!(v.dim(), cfg.dim);
        assert!(v.indices().windows(2).all(|w| w[0] < w[1]));
        assert!(v.indices().iter().all(|&i| (i as usize) < cfg.dim));
        assert!(v.values().iter().all(|&x| x > 0.0 && x.is_finite()));
        if cfg.normalize && !v.is_empty() {
            assert!((v.l2_norm() - 1.0).abs() <= 1e-9);
        }
    }
});
