"""Edge-server-assisted federated learning: participant selection and spectrum allocation simulator."""

__version__ = "0.1.0"
