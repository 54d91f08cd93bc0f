#![no_main]

use dnn_accel::prune::stream_file::{decode, encode};
use dnn_accel::ActivationKind;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(layer) = decode(data, ActivationKind::Relu) else {
        return;
    };
    // Unused slots of a row's last word are ignored, so compare layers, not bytes.
    let bytes = encode(&layer).unwrap();
    assert_eq!(decode(&bytes, ActivationKind::Relu).unwrap(), layer);
    for row in layer.rows() {
        assert!(row.span() <= layer.input_width());
    }
});
