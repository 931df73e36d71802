"""A B^epsilon-tree dictionary with worst-case I/O bounds per update.

The structure runs on a simulated two-level memory (:class:`Pager`) that
counts block transfers.  :class:`DeamortizedTree` is the ordered set;
:class:`AmortizedTree` is the classic amortized structure kept for
comparison and :class:`Oracle` a plain sorted set used as ground truth.
"""
from .baseline import AmortizedTree
from .core import DELETE, INSERT, ContractError, IntegrityError
from .dictionary import DeamortizedTree, OpBudgetMeter
from .oracle import Oracle
from .pager import Pager
from .params import Params, ParamError, derive_params
from .query import largest_not_in
from .rebuild import should_rebuild

__all__ = [
    "AmortizedTree", "ContractError", "DELETE", "DeamortizedTree", "INSERT",
    "IntegrityError", "OpBudgetMeter", "Oracle", "Pager", "ParamError", "Params",
    "derive_params", "largest_not_in", "should_rebuild",
]
__version__ = "0.1.0"
