# Benchmark and oracle-equivalence tests package
