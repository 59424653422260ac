#![no_main]

use libfuzzer_sys::fuzz_target;
use selftune::experiments::ExperimentConfig;

fuzz_target!(|text: &str| {
    let _ = ExperimentConfig::parse(text);
});
