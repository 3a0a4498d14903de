"""devosnn: spiking network training with adaptive structure development."""

__version__ = "0.1.0"
