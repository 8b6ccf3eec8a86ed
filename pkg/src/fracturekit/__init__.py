"""fracturekit: bone-fracture detection pipeline with preprocessing,
a from-scratch CNN, Grad-CAM explanations, and an inference service."""

__version__ = "0.1.0"
