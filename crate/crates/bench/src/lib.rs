//! Criterion benchmarks for the lungreg hot paths; see `benches/`.
