#![no_main]

use libfuzzer_sys::fuzz_target;
use selftune::experiments::KRule;

fuzz_target!(|text: &str| {
    if let Ok(rule) = KRule::parse(text) {
        for n in [1, 10, 1000, 1_000_000] {
            assert!(rule.k_for(n) >= 1);
        }
    }
});
