"""Typed inputs and outputs of the simulation."""
