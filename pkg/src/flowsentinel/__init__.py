"""Flow-based DDoS detection: data pipeline, native classifiers, offline
evaluation, and a real-time HTTP classification service."""

from . import (errors, evaluation, features, flowdata, learn, preprocess,
               service, traffic)

__version__ = "0.1.0"

__all__ = ["errors", "evaluation", "features", "flowdata", "learn",
           "preprocess", "service", "traffic", "__version__"]
