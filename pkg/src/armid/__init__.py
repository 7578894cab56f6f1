"""armid: excitation trajectory design and physically consistent inertial
parameter identification for serial manipulators."""

__version__ = "0.1.0"
