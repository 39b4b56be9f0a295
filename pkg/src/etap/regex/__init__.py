from .automata import Dfa
from .circuits import (
    CompiledPattern,
    begin_markers,
    build_begin_markers,
    build_end_markers,
    build_extract_circuit,
    build_match_mask,
    build_replace_circuit,
    compile_node,
    compile_pattern,
    compile_regex,
    dfa_to_match_circuit,
    end_markers,
    extract_bits,
    match,
    match_mask,
    pattern_markers,
    replace_bits,
    run_dfa,
)
from .parser import RegexError, parse

__all__ = [
    "Dfa", "RegexError", "parse", "CompiledPattern", "compile_regex", "compile_node",
    "compile_pattern", "run_dfa", "match", "end_markers", "begin_markers", "match_mask",
    "pattern_markers", "extract_bits", "replace_bits", "dfa_to_match_circuit",
    "build_end_markers", "build_begin_markers", "build_match_mask",
    "build_extract_circuit", "build_replace_circuit",
]
