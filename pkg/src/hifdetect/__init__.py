"""Physics-informed autoencoder detection of high impedance faults."""

__version__ = "0.1.0"
