//! Criterion benchmarks for the qreservoir kernels live under `benches/`.
