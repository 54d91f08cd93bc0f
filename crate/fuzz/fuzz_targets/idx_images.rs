#![no_main]

use dnn_accel::model::dataset::parse_idx_images;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = parse_idx_images(data, 1.0 / 255.0) {
        let width = images.first().map_or(0, Vec::len);
        assert!(images.iter().all(|i| i.len() == width));
        assert!(images.len() * width <= data.len());
    }
});
