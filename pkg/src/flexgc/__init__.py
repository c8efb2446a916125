"""Supply-area aware flexible arrays, a precise mark-sweep heap, a
flow-insensitive type-flow analyzer and an allocation-trace miner."""

__version__ = "0.1.0"
