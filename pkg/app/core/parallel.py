# app/core/parallel.py
from typing import Callable, Iterable, TypeVar

from joblib import Parallel, delayed

from app.config.settings import settings

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Aplica `fn` a cada item preservando a ordem de entrada.

    Com um worker roda no processo atual; acima disso usa o pool do joblib.
    A montagem do resultado é sempre feita aqui, na ordem original.
    """
    items = list(items)
    n_jobs = workers or settings.workers
    if n_jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return list(Parallel(n_jobs=n_jobs)(delayed(fn)(item) for item in items))
