#![no_main]

use dnn_accel::model::dataset::parse_idx_labels;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = parse_idx_labels(data) {
        assert!(labels.len() <= data.len());
        assert!(labels.iter().all(|&l| l < 256));
    }
});
