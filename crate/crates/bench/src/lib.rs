//! Criterion benchmarks for the simulator kernels live in `benches/`.
