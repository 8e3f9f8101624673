"""Flow-level congestion control and packet scheduling emulation for
tree-topology datacenter networks, with exact product-form oracles."""

__version__ = "0.1.0"
