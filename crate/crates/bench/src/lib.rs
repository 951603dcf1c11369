//! Criterion benchmarks for the landing predictors live under `benches/`.
