from __future__ import annotations

import importlib
import logging
import pkgutil
from typing import Any, List

from models import KeyframeSet, KeyframeStrategy
from services.errors import ContractError
from services.featurestore import FrameDatabase

__all__ = ["list_strategies", "get_strategy", "select_keyframes"]

logger = logging.getLogger(__name__)


def _iter_strategy_modules() -> List[str]:
    modules = []
    package = __name__  # 'strategies'
    for _, name, ispkg in pkgutil.iter_modules(__path__):  # type: ignore[name-defined]
        if name in {"__init__"}:
            continue
        modules.append(f"{package}.{name}")
    return modules


def list_strategies() -> List[KeyframeStrategy]:
    """Import every strategy module and collect the KeyframeStrategy entries of its MODULE_STRATEGIES list."""
    strategies: List[KeyframeStrategy] = []
    for mod_name in _iter_strategy_modules():
        try:
            mod = importlib.import_module(mod_name)
        except Exception as e:
            logger.warning(f"Failed to import strategy module {mod_name}: {e}")
            continue
        module_strategies = getattr(mod, "MODULE_STRATEGIES", None)
        if isinstance(module_strategies, list):
            strategies.extend(s for s in module_strategies if isinstance(s, KeyframeStrategy))
    return sorted(strategies, key=lambda s: s.id)


def get_strategy(strategy_id: str) -> KeyframeStrategy:
    for strategy in list_strategies():
        if strategy.id == strategy_id:
            return strategy
    known = ", ".join(s.id for s in list_strategies())
    raise ContractError(f"unknown keyframe strategy '{strategy_id}' (known: {known})")


def select_keyframes(db: FrameDatabase, strategy_id: str, ratio: float, **options: Any) -> KeyframeSet:
    """Select roughly ratio * N keyframes with the named strategy."""
    return get_strategy(strategy_id).select_for_ratio(db, ratio, **options)
