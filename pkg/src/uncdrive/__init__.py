"""Longitudinal driving simulator and RL harness for studying how knowledge
about perceptual uncertainty changes an agent's driving behavior."""

__version__ = "0.1.0"
