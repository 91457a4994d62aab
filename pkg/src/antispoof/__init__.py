"""Desk-scale face anti-spoofing lab.

A pure-numpy stack: reverse-mode autodiff tensors, a Vision Transformer
encoder, DINO self-distillation pretraining, seeded augmentation pipelines,
focal-loss fine-tuning, and ISO-style presentation-attack metrics
(APCER/BPCER/ACER), plus a synthetic live/spoof corpus generator so the
whole pipeline runs end to end on a laptop.
"""

__version__ = "0.1.0"
