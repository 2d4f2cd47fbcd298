"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``RUELLE_PURE_PYTHON=1`` to force the numpy path.
"""
import os

from . import _shooting_py

try:
    from . import _shooting as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and os.environ.get("RUELLE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    BACKEND = "compiled"
    shoot_orbits = _compiled.shoot_orbits
else:
    BACKEND = "python"
    shoot_orbits = _shooting_py.shoot_orbits

python_shoot_orbits = _shooting_py.shoot_orbits
compiled_shoot_orbits = _compiled.shoot_orbits if _compiled is not None else None
