#![no_main]

use libfuzzer_sys::fuzz_target;
use orbiquant::group_actions::AffineIsometryAction;

fuzz_target!(|data: &[u8]| {
    let Ok(name) = std::str::from_utf8(data) else { return };
    if let Ok(action) = AffineIsometryAction::by_name(name) {
        assert!(action.order() >= 1);
    }
});
