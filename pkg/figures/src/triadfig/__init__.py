"""Static-figure rendering for the triad mode-reduction toolkit's CSV
bundles."""

__version__ = "0.1.0"
