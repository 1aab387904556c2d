"""Rumour stance classification over tree-shaped discussion threads.

Pipeline pieces: thread ingestion (:mod:`.threads`), text preparation
(:mod:`.textprep`), handcrafted features (:mod:`.features`), a numpy autograd
core (:mod:`.nn`), the stance networks and their scikit-learn wrappers
(:mod:`.models`, :mod:`.estimators`), training and evaluation
(:mod:`.training`), ensemble fusion (:mod:`.fusion`, :mod:`.powell`) and
attention introspection (:mod:`.introspect`).
"""
__version__ = "0.1.0"

from .estimators import BiLSTMSelfAttClassifier, FeaturesNNClassifier, MicroBertClassifier
from .features import FeatureExtractor, WordVectors, extract_features
from .fusion import FusionEnsemble, FusionResult, PredictionSet, apply_fusion, fit_fusion
from .metrics import Metrics
from .textprep import EncoderConfig, PairEncoder, Vocab, normalize, train_vocab, wordpiece_tokenize
from .threads import StanceLabel, Thread, linearize, parse_thread, split_stats

__all__ = [
    "BiLSTMSelfAttClassifier", "EncoderConfig", "FeatureExtractor", "FeaturesNNClassifier",
    "FusionEnsemble", "FusionResult", "Metrics", "MicroBertClassifier", "PairEncoder", "PredictionSet",
    "StanceLabel", "Thread", "Vocab", "WordVectors", "apply_fusion", "extract_features", "fit_fusion",
    "linearize", "normalize", "parse_thread", "split_stats", "train_vocab", "wordpiece_tokenize",
]
