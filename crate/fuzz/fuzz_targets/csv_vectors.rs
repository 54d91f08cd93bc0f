#![no_main]

use dnn_accel::model::dataset::parse_csv_vectors;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&w, text)) = data.split_first() else {
        return;
    };
    let width = (w % 16) as usize + 1;
    if let Ok(ds) = parse_csv_vectors(text, width) {
        assert!(ds.samples.iter().all(|s| s.len() == width));
        if let Some(labels) = &ds.labels {
            assert_eq!(labels.len(), ds.samples.len());
        }
    }
});
