//! Holds the `acceptance` test target, which prints one PASS/FAIL line per
//! acceptance criterion. Run with `cargo test -p qigl-validation`.
