#![no_main]

use dnn_accel::model::container::{decode, encode};
use libfuzzer_sys::fuzz_target;

// Every field is fixed-width and trailing bytes are rejected, so anything
// that decodes must re-encode to the same bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(model) = decode(data) {
        assert_eq!(encode(&model).unwrap(), data);
    }
});
