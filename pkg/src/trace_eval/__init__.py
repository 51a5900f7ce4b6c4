"""Speech-to-speech pairwise evaluation suite.

Blueprint extraction, LLM-judge orchestration over textual audio cues,
deterministic typed-tie fusion, agreement statistics, and the annotation
backend used to collect dimension-first human labels.
"""

__version__ = "0.1.0"
