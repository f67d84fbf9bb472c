"""LLM-guided topic refinement for short-text topic models."""

__version__ = "0.1.0"

from topicrefine.corpus import Corpus, Document, PreprocessConfig, Vocabulary, preprocess_corpus
from topicrefine.embeddings import EmbeddingStore, cosine_similarity, load_embeddings
from topicrefine.llm import LlmClient, LlmConfig, MockOracle
from topicrefine.metrics import (
    between_topic_distance,
    build_cooccurrence,
    compute_quality,
    npmi_pair,
    topic_npmi,
    topic_uci,
    within_topic_similarity,
)
from topicrefine.prompt import build_prompt, parse_response
from topicrefine.refine import RefineOptions, refine_topic, refine_topic_set
from topicrefine.topics import TopicSet, load_topic_set, save_topic_set

__all__ = [
    "Corpus", "Document", "PreprocessConfig", "Vocabulary", "preprocess_corpus",
    "EmbeddingStore", "cosine_similarity", "load_embeddings",
    "LlmClient", "LlmConfig", "MockOracle",
    "between_topic_distance", "build_cooccurrence", "compute_quality", "npmi_pair",
    "topic_npmi", "topic_uci", "within_topic_similarity",
    "build_prompt", "parse_response",
    "RefineOptions", "refine_topic", "refine_topic_set",
    "TopicSet", "load_topic_set", "save_topic_set",
]
