//! Criterion benchmarks for the landscape pipeline; see `benches/`.
