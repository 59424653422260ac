#![no_main]

use libfuzzer_sys::fuzz_target;
use selftune::experiments::config::{format_test_function, parse_test_function};

fuzz_target!(|text: &str| {
    if let Ok(f) = parse_test_function(text) {
        // Formatting must round-trip.
        let again = parse_test_function(&format_test_function(&f)).expect("formatted function parses");
        assert_eq!(again.terms.len(), f.terms.len());
    }
});
