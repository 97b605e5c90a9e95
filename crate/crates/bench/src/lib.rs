//! Criterion benchmarks for the kslimit kernels live under `benches/`.
