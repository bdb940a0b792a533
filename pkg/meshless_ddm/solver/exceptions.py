from collections.abc import Mapping
from typing import Any


class MeshlessDDMError(Exception):
    """Base class for every error raised by the solver package."""


class InvalidConfigError(MeshlessDDMError, ValueError):
    pass


class InvalidGeometryError(MeshlessDDMError, ValueError):
    pass


class DegenerateRegionError(InvalidGeometryError):
    pass


class ProtocolError(MeshlessDDMError, RuntimeError):
    """Interface exchange or dual bookkeeping broke one of its invariants."""


class DivergenceError(MeshlessDDMError, ArithmeticError):
    """
    A loss, gradient or Lagrangian became non-finite.

    The location fields are filled in progressively: the net sees only the group,
    the trainer adds the epoch and the orchestrator the subdomain and outer iteration.
    """

    def __init__(
        self,
        message: str,
        *,
        group: str | None = None,
        epoch: int | None = None,
        subdomain: int | None = None,
        outer_iteration: int | None = None,
        diagnostics: Mapping[str, Any] | None = None,
    ):
        super().__init__(message)
        self.message = message
        self.group = group
        self.epoch = epoch
        self.subdomain = subdomain
        self.outer_iteration = outer_iteration
        self.diagnostics = dict(diagnostics or {})
        # outer iterations completed before the failure, attached by the orchestrator
        self.history: list[Any] = []

    def located(self, **where: Any) -> "DivergenceError":
        for key, value in where.items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        return self

    def __str__(self) -> str:
        where = ", ".join(
            f"{key}={getattr(self, key)}"
            for key in ("subdomain", "outer_iteration", "epoch", "group")
            if getattr(self, key) is not None
        )
        return f"{self.message} ({where})" if where else self.message
