"""Multi-vehicle data-collection mission planning under stochastic ocean currents."""

__version__ = "0.1.0"
