//! Benchmarks for the gw-nary solvers live in `benches/`.
