#![no_main]

use libfuzzer_sys::fuzz_target;
use orbiquant::experiments::ErrorTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = ErrorTable::from_csv(text) {
        let back = ErrorTable::from_csv(&table.to_csv()).expect("written table parses");
        assert_eq!(back.summary(), table.summary());
    }
});
