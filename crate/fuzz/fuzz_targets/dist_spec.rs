#![no_main]

use fairdiv_core::DistributionSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = text.parse::<DistributionSpec>() else { return };
    let again: DistributionSpec = spec.to_string().parse().expect("display output parses");
    assert_eq!(spec.kind(), again.kind());
    assert!(spec.alpha() > 0.0 && spec.alpha() <= 1.0 && spec.beta() >= 1.0);
    for k in 0..=16 {
        let x = k as f64 / 16.0;
        let c = spec.cdf(x).unwrap();
        assert!((0.0..=1.0).contains(&c));
        let q = spec.quantile(x).unwrap();
        assert!((0.0..=1.0).contains(&q));
    }
});
