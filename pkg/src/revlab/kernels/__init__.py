"""Compiled and vectorized numeric kernels."""
