"""Multimodal question-under-discussion tooling.

Builds figure-triggered question corpora from LaTeX paper sources, runs
expert and LLM annotation over seven dimensions, and audits vision-language
models for figure grounding via relative information gain and figure-swap
diagnostics.
"""

__version__ = "0.1.0"
