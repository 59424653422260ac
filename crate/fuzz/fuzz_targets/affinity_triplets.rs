#![no_main]

use libfuzzer_sys::fuzz_target;
use selftune::kernel::AffinityMatrix;

fuzz_target!(|data: &[u8]| {
    if let Ok(w) = AffinityMatrix::read_triplets(data) {
        assert!(w.matrix.is_symmetric());
        let mut buf = Vec::new();
        w.write_triplets(&mut buf).unwrap();
        let again = AffinityMatrix::read_triplets(buf.as_slice()).unwrap();
        assert_eq!(again.matrix.upper_triplets(), w.matrix.upper_triplets());
    }
});
