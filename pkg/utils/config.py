"""
Environment-aware settings for locopt using pydantic-settings.

Every solver default lives here so a `.env` file (or LOCOPT_* variables) can
retune budgets and grids for library use. The CLI loads defaults only.
"""

from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="LOCOPT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # PMPDC exact search
    EXACT_ENUMERATION_BUDGET: int = 10_000_000
    EXACT_PLAIN_ENUM_LIMIT: int = 10_000
    FEASIBILITY_EXACT_MAX_SITES: int = 20

    # Committees
    COMMITTEE_MAX_CANDIDATES: int = 22
    COMMITTEE_HEURISTIC_STARTS: int = 32

    # GRASP
    GRASP_ITERATIONS: int = 32
    GRASP_RCL_ALPHA: float = 0.15

    # Lagrangian relaxation
    LAGRANGIAN_MAX_ITERS: int = 500
    LAGRANGIAN_STEP_SCALE: float = 2.0
    LAGRANGIAN_HALVING_PATIENCE: int = 20
    LAGRANGIAN_GAP_TOL: float = 1e-6

    # Sensor grids
    GRID_CELLS_PER_SIDE: int = 200
    GRID_REFINEMENT_LEVELS: int = 2
    GRID_ZOOM: int = 5
    GRID_BOUNDARY_SAMPLES: int = 96
    AREA_TOL: float = 1e-9

    # OR-Library coverage synthesis
    ORLIB_BETA: float = 1.1

    # Logging
    LOG_LEVEL: str = "WARNING"
    LOG_JSON: bool = False

    @property
    def positive_fields(self) -> List[str]:
        return [
            "EXACT_ENUMERATION_BUDGET", "EXACT_PLAIN_ENUM_LIMIT", "COMMITTEE_MAX_CANDIDATES",
            "COMMITTEE_HEURISTIC_STARTS", "GRASP_ITERATIONS", "LAGRANGIAN_MAX_ITERS",
            "LAGRANGIAN_STEP_SCALE", "GRID_CELLS_PER_SIDE", "GRID_ZOOM",
            "GRID_BOUNDARY_SAMPLES", "ORLIB_BETA",
        ]

    def validate(self):
        """Check numeric ranges; raise listing every offending field."""
        bad = [f for f in self.positive_fields if not getattr(self, f) > 0]
        if not 0.0 <= self.GRASP_RCL_ALPHA <= 1.0:
            bad.append("GRASP_RCL_ALPHA")
        if self.GRID_REFINEMENT_LEVELS < 0:
            bad.append("GRID_REFINEMENT_LEVELS")
        if self.LAGRANGIAN_HALVING_PATIENCE < 1:
            bad.append("LAGRANGIAN_HALVING_PATIENCE")
        if bad:
            raise ValueError(f"Invalid settings: {', '.join(bad)}")


def load_settings(use_env: bool = True) -> Settings:
    """Settings from the environment, or the built-in defaults when use_env is False."""
    if use_env:
        settings = Settings()
    else:
        settings = Settings.model_construct()
    settings.validate()
    return settings
