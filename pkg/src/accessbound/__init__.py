"""Accessibility bounds for transformer outputs."""
