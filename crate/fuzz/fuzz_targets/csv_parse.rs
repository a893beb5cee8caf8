#![no_main]

use libfuzzer_sys::fuzz_target;
use vortiline::csvio::Table;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = Table::parse(text) {
            for name in ["time", "omega", "relative_residual", "double_dominates"] {
                let _ = table.column(name);
                let _ = table.optional_flags(name);
            }
        }
    }
});
