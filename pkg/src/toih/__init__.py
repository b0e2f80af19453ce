"""Text-overlay hallucination metrics and a conflict-aware mixture-of-experts router."""

__version__ = "0.1.0"
