//! Criterion benchmarks for the transform and estimators; see `benches/`.
