# Tests package for the random digraph cutoff lab
