"""LTL task compiler and progress-shaped multi-agent gridworld Q-learning."""

__version__ = "0.1.0"
