"""
Physics of photon-number resolution with cascaded three-level emitters:
pulse states, scattering elements, the linear and exact single-emitter
models, SLH networks, quantum trajectories and the beamsplitter baseline.
"""
