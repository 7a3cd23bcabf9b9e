"""Reference analyses and corpus generation for differential testing."""

from taintflow.oracle.forward import ForwardTabulation, OFact, oracle_analyze
from taintflow.oracle.generator import CORPUS_SPEC, Limits, generate_program
from taintflow.oracle.paths import TooComplex, enumerate_paths

__all__ = [
    "CORPUS_SPEC",
    "ForwardTabulation",
    "Limits",
    "OFact",
    "TooComplex",
    "enumerate_paths",
    "generate_program",
    "oracle_analyze",
]
