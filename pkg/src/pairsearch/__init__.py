"""Comparison-based target search without explicit queries.

Find an object in a catalog by repeatedly asking "which of these two is
closer to what you are looking for?". A Gaussian belief over the target
is updated after every (noisy) answer; queries are chosen to split the
belief as informatively as possible. When object features are hidden, a
Gaussian triplet embedding learned from past searches takes their place.
"""

from .belief import AdfIntermediates, GaussianBelief, adf_update, optimal_hyperplane, top_direction
from .catalog import ObjectSet, SpatialIndex, build_index
from .embed import (
    GaussianEmbedding,
    TrainConfig,
    TripletObservation,
    TripletStore,
    effective_noise,
    train,
    triplet_accuracy,
)
from .geometry import Hyperplane, bisect, reflect, signed_distance
from .oracle import Oracle, OracleConfig, answer_prob, calibrate_sigma
from .search import SearchConfig, SearchSession, convergence_sim, run_episode, sample_mirror

__version__ = "0.1.0"

__all__ = [
    "AdfIntermediates", "GaussianBelief", "adf_update", "optimal_hyperplane",
    "top_direction", "ObjectSet", "SpatialIndex", "build_index",
    "GaussianEmbedding", "TrainConfig", "TripletObservation", "TripletStore",
    "effective_noise", "train", "triplet_accuracy", "Hyperplane", "bisect",
    "reflect", "signed_distance", "Oracle", "OracleConfig", "answer_prob",
    "calibrate_sigma", "SearchConfig", "SearchSession", "convergence_sim",
    "run_episode", "sample_mirror", "__version__",
]
