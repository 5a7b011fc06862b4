//! Criterion benchmarks for the coupled map live in `benches/`.
