#![no_main]

use hybrid_rl::mdp::{optimal_policy, TabularMdp};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(mdp) = serde_json::from_slice::<TabularMdp>(data) else {
        return;
    };
    let text = serde_json::to_string(&mdp).unwrap();
    let back: TabularMdp = serde_json::from_str(&text).unwrap();
    assert_eq!(back, mdp);
    if mdp.shape().cells() <= 4096 {
        let star = optimal_policy(&mdp);
        assert!(star.value >= -1e-9 && star.value <= mdp.horizon() as f64 + 1e-9);
    }
});
