#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for line in text.lines() {
            if let Ok(record) = rapport_core::log::parse_log_line(line) {
                let _ = record.agent_annotations();
                let _ = record.user_detections();
                let _ = record.rating();
            }
        }
    }
});
