"""Grid quantum dynamics with three views of the same field: the density, Bohmian
pilot-wave trajectories, and geodesics of an extended Finsler space."""

__version__ = "0.1.0"
