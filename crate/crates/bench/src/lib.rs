//! Criterion benchmarks of the hot paths live under `benches/`.
