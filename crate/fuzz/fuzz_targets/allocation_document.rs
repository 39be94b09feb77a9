#![no_main]

use fairdiv_core::model::{fairness_report, AllocationDocument};
use fairdiv_core::Allocation;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(doc) = AllocationDocument::from_json(text) else { return };
    let inst = doc.instance().expect("validated on decode");
    if let Some(bundles) = doc.bundles {
        let alloc = Allocation::from_bundles(doc.m, bundles).expect("validated on decode");
        let report = fairness_report(&inst, &alloc);
        assert!(!report.flags.envy_free || report.flags.efx);
        assert!(!report.flags.efx || report.flags.ef1);
    }
});
