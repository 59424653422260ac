#![no_main]

use libfuzzer_sys::fuzz_target;
use selftune::experiments::read_csv_dataset;

fuzz_target!(|data: &[u8]| {
    if let Ok(cloud) = read_csv_dataset(data) {
        assert!(cloud.coords().iter().all(|v| v.is_finite()));
    }
});
