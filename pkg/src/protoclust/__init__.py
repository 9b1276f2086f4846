"""Unsupervised clustering of unknown-protocol packets by message format."""
from .capture import (Dataset, HeaderSlice, Layer, LinkType, RawPacket, detect_text_protocol,
                      extract_header, load_pcap, strip_dataset, strip_lower_layers, write_pcap)
from .cluster import ClusterAssignment, Dendrogram, cosine_dissimilarity, kmeans, upgma
from .config import RunConfig, derive_seed
from .features import AlignmentScoring, FeatureMatrix, LDAModel, build_tf_matrix, fit_lda, nwsa_matrix, nwsa_score
from .hybrid import AnalysisReport, PipelineError, Strategy, get_strategy, run_benchmark, run_pipeline
from .metrics import (EvaluationScores, adjusted_mutual_information, adjusted_rand_index, evaluate,
                      fowlkes_mallows, voting_accuracy)
from .optimize import (NoKneeError, frex, kneedle_elbow, select_header_length, select_topic_size,
                       semantic_coherence)
from .tokenize import TokenCorpus, nemesys_boundaries, tokenize_corpus

__version__ = "0.1.0"
