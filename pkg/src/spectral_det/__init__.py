"""Spectral objects computed from continuous-time linear systems."""
