//! Criterion benchmarks for field arithmetic and place counting; see `benches/`.
