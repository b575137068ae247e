#![no_main]
#[macro_use]
extern crate libfuzzer_sys;

use slelab_cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        let _ = cfg.validate();
        // whatever parses must survive a round trip through its own keys
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.experiment, cfg.experiment);
        assert_eq!(back.seed, cfg.seed);
    }
});
