"""Backbone-free table structure parsing toolkit."""
__version__ = "0.1.0"
