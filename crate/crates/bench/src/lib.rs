//! Criterion benchmarks for the search kernels live in `benches/`.
