"""Round-exact CONGEST simulation of a randomized O(log n)-round Hamiltonian cycle algorithm on G(n, p)."""

__version__ = "0.1.0"
