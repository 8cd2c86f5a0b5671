"""Selection trial kernels: compiled extension with a pure numpy fallback.

Both backends implement one function with one contract:

``run_trials(gen, pool, cmat, smat, afix, redraw_mu, redraw_sigma, gamma,
thresholds, group_sizes, max_trials, want_log)``

Per-trial draw consumption from ``gen`` (the selection stream) is part of the
contract: ``gsize`` uniforms for the partial Fisher-Yates group draw, then, in
redraw mode only, ``gsize * num_bs`` uniforms for per-path phases followed by
``gsize * num_bs`` standard normals for per-path gains, node-major.  Equal
seeds therefore give identical node selections and verdict sequences on both
backends; interference values agree to ~1e-12 relative (the fallback uses
numpy reductions, the extension sums sequentially).

Backend choice: the compiled extension when importable, else the fallback.
Override with the ``BEAMSELECT_BACKEND`` environment variable (``auto``,
``fast``, ``ref``); ``fast`` raises if the extension is missing.
"""

from __future__ import annotations

import os

_choice = os.environ.get("BEAMSELECT_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "fast", "ref"):
    raise RuntimeError(
        f"BEAMSELECT_BACKEND must be auto, fast, or ref, not {_choice!r}")

if _choice == "ref":
    from . import _ref as _impl
elif _choice == "fast":
    from . import _fast as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _ref as _impl  # type: ignore[no-redef]

run_trials = _impl.run_trials
BACKEND: str = _impl.BACKEND

__all__ = ["run_trials", "BACKEND"]
