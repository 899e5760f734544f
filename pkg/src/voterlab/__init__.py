"""voterlab: voter-model opinion dynamics on static and adversarial dynamic graphs.

Simulation of the lazy standard voter model and the biased voter model in
synchronous rounds, graph generators with controllable conductance,
coalescing random walks, exact small-instance Markov-chain oracles, and a
reproducible Monte Carlo harness.
"""

__version__ = "0.1.0"

from .backend import BACKEND, USE_NUMBA

__all__ = ["BACKEND", "USE_NUMBA", "__version__"]
