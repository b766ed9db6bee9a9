"""Causal decomposition of quantum cellular automata on a ring.

The package works with dense matrices at desk scale: finite-dimensional
C*-algebras (:mod:`qcadec.cstar`), partitions of a ring
(:mod:`qcadec.partition`), maps with a causality radius (:mod:`qcadec.qca`),
routed circuits (:mod:`qcadec.routed`) and the layer decomposition itself
(:mod:`qcadec.decompose`).
"""

from .config import get_settings, override, set_settings
from .errors import QcaDecError

__version__ = "0.1.0"

__all__ = ["QcaDecError", "get_settings", "override", "set_settings", "__version__"]
