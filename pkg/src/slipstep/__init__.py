"""Real-time biped stepping control on a spring-leg point-mass model."""

__version__ = "0.1.0"
