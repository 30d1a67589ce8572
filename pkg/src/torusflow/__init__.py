"""Volume-preserving mean curvature flow and surface diffusion flow of normal
graphs over strictly stable periodic sets, with the diagnostics used to study
their long-time behaviour."""

__version__ = "0.1.0"
