# app/config/settings.py
from pathlib import Path
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings

_PACKAGE_DIR = Path(__file__).resolve().parent


class Settings(BaseSettings):
    # Ambiente e logs
    app_env: str = "prod"  # dev → logs em texto, demais → JSON
    log_level: str = "INFO"

    # Pool de workers dos sweeps (joblib); 1 = sequencial
    workers: int = Field(default=1, ge=1)

    # Resolução padrão do solver do retificador
    steps_per_period: int = Field(default=256, ge=64)
    max_periods: int = Field(default=400, ge=10)

    # Arquivo versionado com os defaults calibrados
    defaults_file: Path = _PACKAGE_DIR / "defaults.toml"
    output_dir: Path = Path("out")

    class Config:
        # Lê automaticamente do arquivo .env local, variáveis com prefixo RFH_
        env_file = ".env"
        env_prefix = "RFH_"
        extra = "ignore"


# Instância única cacheada
@lru_cache()
def get_settings():
    return Settings()


settings = get_settings()
