//! Criterion benchmarks for the simulation engine, optimizers and statistics.
