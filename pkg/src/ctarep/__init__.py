"""CTA replication toolkit: lookback-straddle trend factors, Bayesian exposure
decoding, cost-aware sleeve backtests and blend/utility analytics."""

__version__ = "0.1.0"
