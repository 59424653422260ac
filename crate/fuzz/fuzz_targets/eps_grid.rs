#![no_main]

use libfuzzer_sys::fuzz_target;
use selftune::experiments::Grid;

fuzz_target!(|text: &str| {
    if let Ok(grid) = Grid::parse(text) {
        assert!(!grid.values.is_empty());
        assert!(grid.values.iter().all(|v| v.is_finite() && *v > 0.0));
    }
});
