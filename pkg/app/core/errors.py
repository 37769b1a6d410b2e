# app/core/errors.py
"""
Hierarquia de erros do simulador.

Toda exceção carrega um `code` estável (usado no resumo JSON do CLI e na coluna
`errors` dos CSVs) e um dicionário `details` com o contexto numérico.
"""
from typing import Any, Optional


class HarvestError(Exception):
    code = "harvest_error"

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def summary(self) -> dict[str, Any]:
        """Resumo legível por máquina (stderr do CLI)."""
        return {"error": self.code, "message": self.message, "details": self.details}

    def short(self) -> str:
        """Versão curta para a coluna `errors` de um CSV."""
        return f"{self.code}: {self.message}"


class InvalidQuantityError(HarvestError, ValueError):
    code = "invalid_quantity"


# ── Redes lineares ───────────────────────────────────────────────────────────

class SingularNetworkError(HarvestError):
    code = "singular_network"

    def __init__(self, message: str, frequency_hz: float):
        super().__init__(message, {"frequency_hz": frequency_hz})
        self.frequency_hz = frequency_hz


class MatchingError(HarvestError):
    code = "matching_error"


class InfeasibleDesignError(MatchingError):
    code = "infeasible_design"


class AlreadyMatchedError(MatchingError):
    code = "already_matched"


# ── Solver não linear ────────────────────────────────────────────────────────

class SolverError(HarvestError):
    code = "solver_error"


class NewtonConvergenceError(SolverError):
    code = "newton_not_converged"


class StepTooCoarseError(SolverError):
    code = "step_too_coarse"


class NotConvergedError(SolverError):
    code = "steady_state_not_converged"


class DegenerateSolutionError(HarvestError):
    code = "degenerate_solution"


class UnreachableTargetError(HarvestError):
    code = "unreachable_target"


class PmicError(HarvestError):
    code = "pmic_error"


class SimulationAbortedError(PmicError):
    """Falha do coletor no meio da partida a frio; `trace` guarda o que já foi simulado."""

    code = "simulation_aborted"

    def __init__(self, message: str, trace: Any, details: Optional[dict[str, Any]] = None):
        super().__init__(message, details)
        self.trace = trace


class CalibrationError(HarvestError):
    code = "calibration_failed"


# ── Cenários e saídas ────────────────────────────────────────────────────────

class ScenarioError(HarvestError):
    code = "scenario_error"


class ScenarioParseError(ScenarioError):
    code = "scenario_parse_error"

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        super().__init__(message, {"line": line, "column": column})
        self.line = line
        self.column = column


class ScenarioSchemaError(ScenarioError):
    code = "scenario_schema_error"

    def __init__(self, message: str, keys: list[str]):
        super().__init__(message, {"keys": keys})
        self.keys = keys


class MissingColumnError(ScenarioError):
    code = "missing_column"


class EmptyTableError(ScenarioError):
    code = "empty_table"
