//! Criterion benchmarks for `gapspec-core` live under `benches/`.
