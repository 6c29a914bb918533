"""chasekit: a disjunctive restricted-chase engine and a compiler from
Turing-machine deciders to terminating existential rule sets."""

__version__ = "0.1.0"
