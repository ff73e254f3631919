"""Single-trial ERP classification for RSVP EEG: spatial filters, per-series PCA, linear classifiers and evaluation."""

__version__ = "0.1.0"
