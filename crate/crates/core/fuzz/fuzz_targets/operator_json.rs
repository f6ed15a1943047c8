#![no_main]

use libfuzzer_sys::fuzz_target;
use orbiquant::modes::OperatorMatrix;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(op) = OperatorMatrix::from_json(text) {
        let back = OperatorMatrix::from_json(&op.to_json()).expect("written matrix parses");
        assert_eq!(back.to_json(), op.to_json());
    }
});
