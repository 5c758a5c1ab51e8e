"""toolgym: a desk-scale multi-turn visual tool-calling gym.

Procedurally generated grid-navigation, jigsaw, and GUI-reading tasks are
served behind a turn-based protocol (think, then one tool call or one final
response). Any policy that emits text can be rolled out, scored with
hierarchical tool/format/accuracy rewards, and measured; group-relative
advantage math is included for RL consumers.
"""

from . import (
    curation,
    episodes,
    errors,
    grpo,
    guiqa,
    harness,
    jigsaw,
    protocol,
    randomization,
    raster,
    rewards,
    toolkit,
    vsp,
)

__version__ = "0.1.0"

__all__ = [
    "curation",
    "episodes",
    "errors",
    "grpo",
    "guiqa",
    "harness",
    "jigsaw",
    "protocol",
    "randomization",
    "raster",
    "rewards",
    "toolkit",
    "vsp",
    "__version__",
]
