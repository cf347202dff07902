#![no_main]

use hybrid_rl_cli::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = parse_config(text) {
        // A resolved config must survive a round trip unchanged.
        let again = serde_json::to_string(&config).unwrap();
        assert_eq!(parse_config(&again).unwrap(), config);
        assert!(config.trials() >= 1);
        assert!(!config.n_offline.is_empty());
    }
});
