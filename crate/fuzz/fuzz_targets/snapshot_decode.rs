#![no_main]

use libfuzzer_sys::fuzz_target;
use vortiline::snapshot::Snapshot;

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = Snapshot::decode(data) {
        let again = Snapshot::decode(&snap.encode()).expect("re-encoded snapshot decodes");
        assert_eq!(again.grid, snap.grid);
        assert_eq!(again.time.to_bits(), snap.time.to_bits());
    }
});
