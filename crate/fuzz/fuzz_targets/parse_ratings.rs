#![no_main]

use hybrid_rl::envs::movielens::{parse_ratings, ratings_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ratings) = parse_ratings(text) {
        if !ratings.is_empty() && ratings.len() < 256 {
            let (values, mask, users, items) = ratings_matrix(&ratings);
            assert_eq!(values.nrows(), users.len());
            assert_eq!(mask.ncols(), items.len());
        }
    }
});
