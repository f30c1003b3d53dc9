//! Criterion benchmarks for the condsub samplers and exact evaluators; see
//! `benches/`.
