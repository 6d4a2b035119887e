# Permutation tests
