"""Bundled example maps."""
from __future__ import annotations

from importlib import resources

from .torus_maps import TorusMap, TrigPolynomial, load_map

NAMES = ("cat", "eps002", "eps005", "eps005_real_g", "eps005_complex_g")


def corpus_path(name: str) -> str:
    """Filesystem path of a bundled map (``cat``, ``eps002``, ...) or the sweep plan (``sweep``)."""
    fname = "sweep_plan.json" if name == "sweep" else f"{name}.json"
    path = resources.files(__package__) / "data" / fname
    if not path.is_file():
        raise KeyError(f"no bundled file {name!r}")
    return str(path)


def corpus() -> dict[str, tuple[TorusMap, TrigPolynomial]]:
    """Every bundled map as ``name -> (map, g)``."""
    return {name: load_map(corpus_path(name)) for name in NAMES}
