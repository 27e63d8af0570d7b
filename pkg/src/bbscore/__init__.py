"""Brownian-bridge coherence scoring.

Latent document trajectories are modeled as pinned diffusions; the package
estimates the diffusion coefficient by maximum likelihood, scores documents
by normalized bridge log-likelihood (BBScore, plus windowed variants),
trains the contrastive bridge encoder that produces the latents, and runs
the shuffle-test / discrimination / source-detection protocols on top.
"""

from ._kernels import USING_NUMBA
from .bridge import (SIGMA_FLOOR, BridgeSimConfig, DiffusionEstimate,
                     LatentSequence, bbscore, bbscore_windowed, beta_terms,
                     bridge_mean, estimate_sigma_sq_corpus,
                     estimate_sigma_sq_doc, log_likelihood, score_corpus,
                     simulate_bridge, simulate_corpus)
from .classify import (FEATURE_WINDOWS, DetectionReport, FeatureVector, Mlp3,
                       Mlp3Config, SigmaProfile, detect_to_csv,
                       extract_features, llm_detect, pairwise_discriminate,
                       pairwise_training_set, predict, softmax_xent_gradients,
                       train_mlp3)
from .encoder import (HiddenStateSequence, MlpEncoder, TrainConfig, Triplet,
                      bridge_distance, contrastive_loss, encode,
                      loss_gradients, sample_triplets, train_encoder)
from .errors import BbscoreError, DataError, NumericError, StorageError
from .metrics import (ScoreReport, SigmaSweepResult, TrajectoryProfile, auc,
                      normalize_1_2, pairwise_accuracy, profile_to_csv,
                      sigma_sweep, sweep_to_csv, trajectory_profile,
                      wasserstein1)
from .shuffles import (ShuffleDataset, ShufflePair, apply_permutation,
                       block_shuffle, check_permutation, local_shuffle,
                       make_shuffle_dataset, read_manifest, write_manifest)
from .storage import (load_encoder, load_mlp3, read_bbx, read_corpus,
                      read_jsonl, save_encoder, save_mlp3, sha256_file,
                      write_bbx, write_corpus, write_jsonl, write_report)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
