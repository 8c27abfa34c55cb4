"""Graph-conditioned house layout generation with a graph-transformer GAN, at desk scale.

Subpackages and modules:

- :mod:`floorgen.autodiff` -- NumPy reverse-mode autodiff, layers, Adam, checkpoints
- :mod:`floorgen.graph` / :mod:`floorgen.ged` -- bubble diagrams, layouts, edit distance
- :mod:`floorgen.generator` / :mod:`floorgen.discriminator` -- the two networks
- :mod:`floorgen.training` -- WGAN-GP training with classification and cycle-consistency losses
- :mod:`floorgen.data` / :mod:`floorgen.evaluation` -- synthetic data, metrics, rasters
- :mod:`floorgen.cli` -- the ``floorgen`` command
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DimensionError,
    FloorgenError,
    GEDBoundError,
    InputError,
    NumericalError,
)
from .graph import BubbleDiagram, Rect, RoomType, extract_bubble_diagram, shortest_distance_matrix  # noqa: E402
from .ged import graph_edit_distance  # noqa: E402

__all__ = [
    "BubbleDiagram",
    "ConfigurationError",
    "DimensionError",
    "FloorgenError",
    "GEDBoundError",
    "InputError",
    "NumericalError",
    "Rect",
    "RoomType",
    "extract_bubble_diagram",
    "graph_edit_distance",
    "shortest_distance_matrix",
    "__version__",
]
