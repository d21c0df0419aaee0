"""MPS sampler for the order-finding circuit behind integer factoring."""

__version__ = "0.1.0"
