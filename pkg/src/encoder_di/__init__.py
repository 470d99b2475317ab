"""Dataset inference and similarity forensics for self-supervised encoders."""

__version__ = "0.1.0"

from .entropy import kl_entropy, kl_joint_entropy, mi_score, mutual_information
from .gmm import GmmFitConfig, GmmModel, fit_gmm, log_density, mean_log_likelihood, per_point_log_likelihoods
from .inference import OwnershipVerdict, make_split, run_dataset_inference, run_suite
from .obfuscate import ObfuscationSpec, apply_obfuscation, invert_obfuscation
from .repio import RepresentationSet, read_representations, write_representations
from .similarity import cosine_score, l2_score, lp_distances, pair_histogram, similarity_report
from .stats import student_t_sf, welch_one_sided
from .synth import SyntheticWorldConfig, emulate_stealing, generate_world

__all__ = [
    "GmmFitConfig", "GmmModel", "ObfuscationSpec", "OwnershipVerdict", "RepresentationSet",
    "SyntheticWorldConfig", "apply_obfuscation", "cosine_score", "emulate_stealing", "fit_gmm",
    "generate_world", "invert_obfuscation", "kl_entropy", "kl_joint_entropy", "l2_score", "log_density",
    "lp_distances", "make_split", "mean_log_likelihood", "mi_score", "mutual_information", "pair_histogram",
    "per_point_log_likelihoods", "read_representations", "run_dataset_inference", "run_suite",
    "similarity_report", "student_t_sf", "welch_one_sided", "write_representations",
]
