"""Fastest achievable swing time benchmark for robot legs."""
from .kernels import BACKEND
from .model import ModelError, ReducedRobotModel, load_model, parse_model, validate_model

__version__ = "0.1.0"

__all__ = ["BACKEND", "ModelError", "ReducedRobotModel", "load_model", "parse_model", "validate_model"]
