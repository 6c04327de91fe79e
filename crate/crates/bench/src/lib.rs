//! Criterion benchmarks for the weight pipeline and network passes; see `benches/`.
