"""Select the Pauli-frame kernel: compiled extension if importable, numpy otherwise.

Set ``CARRIER_SIM_BACKEND=python`` to force the numpy path.
"""
import os

from carrier_sim import _frame_py

python_kernel = _frame_py

if os.environ.get("CARRIER_SIM_BACKEND", "").lower() == "python":
    kernel = _frame_py
    compiled_kernel = None
else:
    try:
        from carrier_sim import _frame_core as compiled_kernel
    except ImportError:  # extension not built
        compiled_kernel = None
    kernel = compiled_kernel if compiled_kernel is not None else _frame_py

BACKEND = "compiled" if kernel is not _frame_py else "python"
