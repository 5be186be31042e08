"""Active-learning pipeline for scarce-class social post detection."""

__version__ = "0.1.0"
