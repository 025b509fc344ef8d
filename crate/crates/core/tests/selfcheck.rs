use trustgnn::ndiff::Tensor;
use trustgnn::selfcheck::{run_selfcheck, SelfCheckOptions, CHECK_NAMES};
use trustgnn::Result;

#[test]
fn fresh_build_passes_every_check() {
    let report = run_selfcheck(&SelfCheckOptions::default());
    println!("{report}");
    assert!(report.all_passed(), "{report}");
    assert!(report.outcomes.len() >= 10);
    assert_eq!(report.outcomes.len(), CHECK_NAMES.len());
}

/// Complex product with the imaginary part's sign flipped.
fn flipped_hadamard(x: &Tensor, y: &Tensor) -> Result<Tensor> {
    let mut out = trustgnn::ndiff::complex_hadamard(x, y)?;
    let half = out.cols() / 2;
    for r in 0..out.rows() {
        for v in &mut out.row_mut(r)[half..] {
            *v = -*v;
        }
    }
    Ok(out)
}

#[test]
fn sign_flip_in_the_complex_product_is_caught() {
    let options = SelfCheckOptions {
        complex_mul: flipped_hadamard,
        oracle_graphs: 20,
        ..SelfCheckOptions::default()
    };
    let report = run_selfcheck(&options);
    let inversion = report.get("inversion_identity").unwrap();
    assert!(!inversion.passed, "{report}");
    assert!(!report.all_passed());
    assert!(report.failures().any(|f| f.name == "inversion_identity"));
}
