"""Caption object extraction and semantic word matching."""

from .lexicon import Lemmatizer, LexiconTagger, data_path, is_noun, tokenize
from .matcher import DEFAULT_COSINE_THRESHOLD, SemanticMatcher, load_hypernyms, load_vectors, same_category
from .objects import Caption, NounPhrase, Token, contains_object, extract_objects, find_match

__all__ = [
    "Caption",
    "DEFAULT_COSINE_THRESHOLD",
    "Lemmatizer",
    "LexiconTagger",
    "NounPhrase",
    "SemanticMatcher",
    "Token",
    "contains_object",
    "data_path",
    "extract_objects",
    "find_match",
    "is_noun",
    "load_hypernyms",
    "load_vectors",
    "same_category",
    "tokenize",
]
