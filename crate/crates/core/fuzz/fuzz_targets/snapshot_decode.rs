#![no_main]

use cnls_vortex::geometry::Domain;
use cnls_vortex::io::{decode_snapshot, encode_snapshot};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let domain = Domain::centered_square(1.0).unwrap();
    if let Ok(state) = decode_snapshot(data, &domain) {
        assert_eq!(encode_snapshot(&state), data);
    }
});
