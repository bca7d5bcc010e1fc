"""Measure hypernetworks and transport-based distances between them."""
