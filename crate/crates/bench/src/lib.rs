//! Criterion benchmarks for `pencil-core`; see `benches/`.
