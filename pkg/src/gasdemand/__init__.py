"""Day-ahead gas demand forecasting toolkit."""

__version__ = "0.1.0"
REPORT_FORMAT_VERSION = "1"
