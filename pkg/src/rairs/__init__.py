"""IVF-PQ approximate nearest-neighbor search with redundant list assignment.

Vectors go to one or two inverted lists (AIR, SOAR, naive second-nearest or
single assignment). Vectors shared by the same pair of lists are stored once
in shared blocks so queries that probe both lists scan them only once.
"""

from . import kernels
from .assignment import (AIR, NAIVE, SINGLE, SOAR, STRATEGY_PRESETS, Assignment,
                         SingularResidual, StrategyConfig, air_true_rank, assign,
                         assign_multi, assign_pairs, loss_air, loss_naive, loss_soar,
                         multi_assign, rair_assign)
from .bench import (AirVerifyResult, BenchReport, SweepPoint, air_lambda, assignment_overlap,
                    per_query_recall, rebuild_sweep, recall_at, sin_power_integral, sweep,
                    verify_air)
from .coarse import CoarseQuantizer, KMeansResult, kmeans
from .dataset import (IP, L2, DimensionMismatchError, FormatError, GroundTruth, VectorSet,
                      exact_knn, generate_synthetic, load_ground_truth, load_vectors,
                      read_vecs, save_vectors, synthetic_split, write_vecs)
from .index import RairsIndex, SearchOutput, SearchParams, default_k_factor, default_nlist
from .kernels import INVALID_ID
from .pq import DcoCounter, PackedBlock, PQCodebook, adc_distance, scan_block
from .seil import (CellStats, FlatLists, Location, RefEntry, SeilLists, cell_stats,
                   decode_stored_id, encode_stored_id)

__version__ = "0.1.0"

__all__ = [
    "kernels", "AIR", "NAIVE", "SINGLE", "SOAR", "STRATEGY_PRESETS", "Assignment",
    "SingularResidual", "StrategyConfig", "air_true_rank", "assign", "assign_multi",
    "assign_pairs", "loss_air", "loss_naive", "loss_soar", "multi_assign", "rair_assign",
    "AirVerifyResult", "BenchReport", "SweepPoint", "air_lambda", "assignment_overlap",
    "per_query_recall", "rebuild_sweep", "recall_at", "sin_power_integral", "sweep",
    "verify_air", "CoarseQuantizer", "KMeansResult", "kmeans", "IP", "L2",
    "DimensionMismatchError", "FormatError", "GroundTruth", "VectorSet", "exact_knn",
    "generate_synthetic", "load_ground_truth", "load_vectors", "read_vecs", "save_vectors",
    "synthetic_split", "write_vecs", "RairsIndex", "SearchOutput", "SearchParams",
    "default_k_factor", "default_nlist", "INVALID_ID", "DcoCounter", "PackedBlock",
    "PQCodebook", "adc_distance", "scan_block", "CellStats", "FlatLists", "Location",
    "RefEntry", "SeilLists", "cell_stats", "decode_stored_id", "encode_stored_id",
]
