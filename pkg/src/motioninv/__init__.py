"""Motion invariants of rigid tool trajectories and gesture recognition on top of them."""

__version__ = "0.1.0"
