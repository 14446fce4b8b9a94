"""Reachability-bounded model-based exploration.

Modules:
    mdp           finite MDPs, value iteration, policy evaluation
    explorers     PAC-RMDP(h), MBIE, VBE, BEB, BOLT and epsilon-greedy agents
    reachability  h-reachable models and evaluation metrics
    linalg        symmetric eigendecomposition and the Gram eigen-split
    linear        linear dynamics models and h-reachable intervals
    planning      fitted value iteration on Gaussian RBF grids
    continuous    the linear PAC-RMDP agent for the mountain car
    envs          chain, modified chain and mountain car simulators
    harness, cli  experiment runner and command line
"""

__version__ = "0.1.0"
