"""motionmidi: skeleton-conditioned multi-track MIDI generation.

Subpackages:
  midi      MIDI file i/o, quantization, quad-token codec, vocabularies
  nn        dense float64 tensors with reverse-mode autodiff, Adam, schedules
  encoder   skeleton graph encoder, beat detection head, style branch
  drum      conditional autoregressive drum-track generator
  bert      bidirectional masked model and track completion
  metrics   beat coherence and music quality metrics
  pipeline  corpora, synthetic data, configuration, figures, CLI
"""

__version__ = "0.1.0"
