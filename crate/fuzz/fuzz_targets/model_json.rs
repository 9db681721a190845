#![no_main]

use libfuzzer_sys::fuzz_target;
use priorart::fusion::MergeModels;
use priorart::regress::RegressionModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = RegressionModel::from_json(text) {
        if let Some(dim) = model.dim() {
            let _ = model.predict(&vec![0.5; dim]);
        }
    }
    let _ = MergeModels::from_json(text);
});
