"""Numerical pseudo-Finsler geometry built on the Chern connection."""

from ._kernels import BACKEND

__version__ = "0.1.0"
