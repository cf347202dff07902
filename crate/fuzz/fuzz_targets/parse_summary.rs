#![no_main]

use hybrid_rl_cli::output::parse_summary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(summary) = parse_summary(text) {
        let _ = hybrid_rl_cli::compare::compare(&[summary.clone(), summary]);
    }
});
