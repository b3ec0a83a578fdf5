"""Semantic Gaussian maps with per-primitive uncertainty, plus a desk-scale navigation harness.

Stages: RGB-D frames -> point cloud (`geometry`) -> Gaussian primitives
(`gaussians`) optimized through a differentiable rasterizer (`renderer`,
`losses`, `sgm_builder`) -> per-primitive geometric, semantic and appearance
uncertainty (`uncertainty`) -> spatial value queries (`value_map`) -> an
uncertainty-scaled waypoint policy (`nav`).
"""

__version__ = "0.1.0"
