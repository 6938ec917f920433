__all__ = [
    "lexer",
    "snippet_analyzer",
    "transforms",
    "dedup",
    "corpus",
    "pipeline",
]
