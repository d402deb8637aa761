#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = rapport_core::user::decode_record(data) {
        let bytes = rapport_core::user::encode_record(&model);
        assert_eq!(rapport_core::user::decode_record(&bytes).ok(), Some(model));
    }
});
