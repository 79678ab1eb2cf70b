//! Criterion benchmarks for the fairgen core live in `benches/`.
