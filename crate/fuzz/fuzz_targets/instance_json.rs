#![no_main]

use fairdiv_core::Instance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(inst) = serde_json::from_slice::<Instance>(data) else { return };
    assert_eq!(inst.utilities().len(), inst.n() * inst.m());
    let text = serde_json::to_string(&inst).expect("instances serialize");
    assert_eq!(serde_json::from_str::<Instance>(&text).expect("roundtrip"), inst);
});
