#![no_main]

use libfuzzer_sys::fuzz_target;
use selftune::experiments::Table;

fuzz_target!(|data: &[u8]| {
    let _ = Table::read(data);
});
